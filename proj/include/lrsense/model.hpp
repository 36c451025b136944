#pragma once

#include "lrsense/random.hpp"
#include "lrsense/types.hpp"

namespace lrsense {

/// A pair of component matrices representing X = U * V^T.
struct Factorization {
    Matrix U;  // n1 x R
    Matrix V;  // n2 x R

    Factorization() = default;
    Factorization(Matrix u, Matrix v);

    [[nodiscard]] Eigen::Index rank() const { return U.cols(); }
    [[nodiscard]] Matrix product() const { return U * V.transpose(); }
    /// True when U or V is identically zero, so the product vanishes.
    [[nodiscard]] bool is_zero() const;
    /// Number of rank-one terms U_c V_c^T with both columns non-zero. A dead term stays
    /// zero under alternating updates, since each of its columns then sees a zero gradient.
    [[nodiscard]] Eigen::Index live_components() const;
    [[nodiscard]] bool has_dead_component() const { return live_components() < rank(); }
};

/// Parameters of the signal class of rank-R matrices whose components are
/// effectively s1- and s2-sparse at scale Gamma.
struct SignalClassSpec {
    int n1 = 1;
    int n2 = 1;
    int rank = 1;
    double s1 = 1.0;
    double s2 = 1.0;
    double gamma = 1.0;

    /// Throws std::invalid_argument when the spec violates its invariants.
    void validate() const;
};

/// Draws a ground truth: round(R*s) Gaussian entries at random positions,
/// rescaled to Frobenius norm sqrt(R), plus a dense Gaussian part of
/// Frobenius norm dense_fraction*sqrt(R). Done independently for U and V.
Factorization sample_ground_truth(const SignalClassSpec& spec, double dense_fraction, Rng& rng);

/// Adds t*(dir_u, dir_v) to the truth with t found by bisection so that the
/// relative product error lands in [0.95, 1.05] * target_rel_error.
Factorization perturb_along(const Factorization& truth, double target_rel_error,
                            const Matrix& dir_u, const Matrix& dir_v);

/// perturb_along with Gaussian directions drawn from rng.
Factorization perturb_initialization(const Factorization& truth, double target_rel_error, Rng& rng);

struct MembershipCertificate {
    double s1_required = 0.0;
    double s2_required = 0.0;
    bool frobenius_ok = true;
};

/// Smallest (s1, s2) for which the Gamma-scaled l1 budgets ||U||_1 <= R*sqrt(Gamma*s)
/// hold, together with the Frobenius budget max(||U||_F^2, ||V||_F^2) <= Gamma*R.
MembershipCertificate certify_membership(const Factorization& f, double gamma);

/// Tightest (Gamma, s) with f in Gamma*K_s^R: Gamma from the Frobenius budget,
/// s from the larger of the two l1 budgets at that Gamma.
struct ClassFit {
    double gamma = 1.0;
    double s = 1.0;
};
ClassFit fit_class(const Factorization& f);

/// max(||U||_F^2, ||V||_F^2) <= Gamma*R' and max(||U||_1, ||V||_1) <= R'*sqrt(Gamma*s), R' = budget_rank.
bool in_scaled_class(const Factorization& f, double gamma, double s, double budget_rank, double rel_tol = 1e-12);

/// (||M||_1 / ||M||_F)^2 / R; zero for the zero matrix.
double effective_sparsity(const Matrix& m, Eigen::Index rank);

/// Fraction of entries with magnitude above machine epsilon, relative to R*rows.
double hard_sparsity(const Matrix& m, Eigen::Index rank);

double relative_error(const Matrix& truth, const Matrix& estimate);

}  // namespace lrsense
