#pragma once

#include "lrsense/random.hpp"
#include "lrsense/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lrsense {

enum class Ensemble : std::uint32_t { gaussian = 0, lognormal = 1, rank1 = 2, identity = 3, custom = 4 };

std::string_view to_string(Ensemble e);
/// Parses "gaussian", "lognormal", "rank1" or "identity".
std::optional<Ensemble> parse_ensemble(std::string_view name);

/// Linear map fixed by one measurement operator with one block frozen.
/// Maps an (in_rows x in_cols) matrix to R^m through an explicit m x (in_rows*in_cols)
/// matrix acting on the column-major vectorization.
class RestrictedMap {
public:
    RestrictedMap(Matrix stacked, Eigen::Index in_rows, Eigen::Index in_cols);

    [[nodiscard]] Vector apply(const Matrix& x) const;
    [[nodiscard]] Matrix adjoint(const Vector& w) const;

    /// Power-iteration estimate of the operator norm, inflated by 1.01.
    /// Zero when the map is identically zero.
    [[nodiscard]] double operator_norm() const;

    [[nodiscard]] const Matrix& matrix() const { return stacked_; }
    [[nodiscard]] Eigen::Index in_rows() const { return in_rows_; }
    [[nodiscard]] Eigen::Index in_cols() const { return in_cols_; }
    [[nodiscard]] bool is_zero() const;

private:
    Matrix stacked_;
    Eigen::Index in_rows_;
    Eigen::Index in_cols_;
};

/// y_i = (1/sqrt(m)) <A_i, Z>_F for m dense n1 x n2 matrices A_i.
class MeasurementOperator {
public:
    /// `components` holds vec(A_i)^T (column-major vectorization) in row i.
    MeasurementOperator(int n1, int n2, RowMajorMatrix components, Ensemble ensemble = Ensemble::custom,
                        std::uint64_t seed = 0);
    static MeasurementOperator from_matrices(const std::vector<Matrix>& matrices,
                                             Ensemble ensemble = Ensemble::custom);

    [[nodiscard]] int n1() const { return n1_; }
    [[nodiscard]] int n2() const { return n2_; }
    [[nodiscard]] int m() const { return static_cast<int>(components_.rows()); }
    [[nodiscard]] Ensemble ensemble() const { return ensemble_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    /// Unscaled A_i.
    [[nodiscard]] Matrix component(int i) const;

    [[nodiscard]] Vector forward(const Matrix& z) const;
    [[nodiscard]] Matrix adjoint(const Vector& w) const;

    /// U -> forward(U V^T) for fixed V (n2 x R).
    [[nodiscard]] RestrictedMap restrict_right(const Matrix& v) const;
    /// V -> forward(U V^T) for fixed U (n1 x R).
    [[nodiscard]] RestrictedMap restrict_left(const Matrix& u) const;

    /// Same operator with measurements reordered: new row k is old row perm[k].
    [[nodiscard]] MeasurementOperator permuted(const std::vector<int>& perm) const;

    /// Binary dump: magic, n1, n2, m (u64), ensemble tag (u32), seed (u64),
    /// then every A_i in row-major order as little-endian doubles.
    void save(std::ostream& out) const;
    static MeasurementOperator load(std::istream& in);

private:
    int n1_;
    int n2_;
    RowMajorMatrix components_;  // m x (n1*n2), unscaled
    Ensemble ensemble_;
    std::uint64_t seed_;
    double scale_;
};

MeasurementOperator make_gaussian(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag = 0);
/// exp(g) standardized to zero mean and unit variance.
MeasurementOperator make_lognormal(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag = 0);
/// A_i = a_i a_i^T with standard Gaussian a_i; requires n1 == n2.
MeasurementOperator make_rank1_gaussian(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag = 0);
/// m = n1*n2 and A_i = sqrt(m) E_i over the canonical basis, so ||A(Z)||_2 = ||Z||_F.
MeasurementOperator make_identity_like(int n1, int n2);
MeasurementOperator make_operator(Ensemble e, int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag = 0);

struct NoisySample {
    Vector y;
    double eta_norm = 0.0;
    Vector clean;
};

/// y = clean + eta with eta Gaussian, rescaled to ||eta||_2 = rel_level * reference_norm.
NoisySample add_noise(const Vector& clean, double rel_level, double reference_norm, Rng& rng);

}  // namespace lrsense
