#include "lrsense/measure.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace lrsense {

std::string_view to_string(Ensemble e) {
    switch (e) {
        case Ensemble::gaussian: return "gaussian";
        case Ensemble::lognormal: return "lognormal";
        case Ensemble::rank1: return "rank1";
        case Ensemble::identity: return "identity";
        case Ensemble::custom: return "custom";
    }
    return "custom";
}

std::optional<Ensemble> parse_ensemble(std::string_view name) {
    if (name == "gaussian") return Ensemble::gaussian;
    if (name == "lognormal") return Ensemble::lognormal;
    if (name == "rank1") return Ensemble::rank1;
    if (name == "identity") return Ensemble::identity;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// RestrictedMap

RestrictedMap::RestrictedMap(Matrix stacked, Eigen::Index in_rows, Eigen::Index in_cols)
    : stacked_(std::move(stacked)), in_rows_(in_rows), in_cols_(in_cols) {
    if (stacked_.cols() != in_rows_ * in_cols_)
        throw std::invalid_argument("RestrictedMap: column count does not match input shape");
}

Vector RestrictedMap::apply(const Matrix& x) const {
    if (x.rows() != in_rows_ || x.cols() != in_cols_)
        throw std::invalid_argument("RestrictedMap::apply: shape mismatch");
    return stacked_ * x.reshaped();
}

Matrix RestrictedMap::adjoint(const Vector& w) const {
    if (w.size() != stacked_.rows()) throw std::invalid_argument("RestrictedMap::adjoint: length mismatch");
    Vector v = stacked_.transpose() * w;
    return v.reshaped(in_rows_, in_cols_);
}

bool RestrictedMap::is_zero() const { return stacked_.size() == 0 || stacked_.cwiseAbs().maxCoeff() == 0.0; }

double RestrictedMap::operator_norm() const {
    if (is_zero()) return 0.0;
    constexpr int max_iters = 50;
    constexpr double rel_tol = 1e-6;
    constexpr double inflation = 1.01;

    Rng rng(0x5eedULL);
    Vector x(stacked_.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = standard_normal(rng);
    x.normalize();

    double estimate = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        const Vector w = stacked_.transpose() * (stacked_ * x);
        const double next = w.norm();
        if (next == 0.0) break;
        x = w / next;
        const bool done = estimate > 0.0 && std::abs(next - estimate) <= rel_tol * next;
        estimate = next;
        if (done) break;
    }
    // Rayleigh quotient of the final direction never exceeds sigma_max^2.
    const double rayleigh = (stacked_ * x).squaredNorm();
    return std::sqrt(std::max(estimate, rayleigh)) * inflation;
}

// ---------------------------------------------------------------------------
// MeasurementOperator

MeasurementOperator::MeasurementOperator(int n1, int n2, RowMajorMatrix components, Ensemble ensemble,
                                         std::uint64_t seed)
    : n1_(n1), n2_(n2), components_(std::move(components)), ensemble_(ensemble), seed_(seed) {
    if (n1_ < 1 || n2_ < 1) throw std::invalid_argument("MeasurementOperator: dimensions must be positive");
    if (components_.rows() < 1) throw std::invalid_argument("MeasurementOperator: need m >= 1");
    if (components_.cols() != static_cast<Eigen::Index>(n1_) * n2_)
        throw std::invalid_argument("MeasurementOperator: component size does not match n1*n2");
    scale_ = 1.0 / std::sqrt(static_cast<double>(components_.rows()));
}

MeasurementOperator MeasurementOperator::from_matrices(const std::vector<Matrix>& matrices, Ensemble ensemble) {
    if (matrices.empty()) throw std::invalid_argument("MeasurementOperator: need m >= 1");
    const auto n1 = matrices.front().rows();
    const auto n2 = matrices.front().cols();
    RowMajorMatrix rows(static_cast<Eigen::Index>(matrices.size()), n1 * n2);
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        if (matrices[i].rows() != n1 || matrices[i].cols() != n2)
            throw std::invalid_argument("MeasurementOperator: all A_i must share dimensions");
        rows.row(static_cast<Eigen::Index>(i)) = matrices[i].reshaped().transpose();
    }
    return {static_cast<int>(n1), static_cast<int>(n2), std::move(rows), ensemble};
}

Matrix MeasurementOperator::component(int i) const {
    return Eigen::Map<const Matrix>(components_.row(i).data(), n1_, n2_);
}

Vector MeasurementOperator::forward(const Matrix& z) const {
    if (z.rows() != n1_ || z.cols() != n2_) throw std::invalid_argument("forward: shape mismatch");
    return scale_ * (components_ * z.reshaped());
}

Matrix MeasurementOperator::adjoint(const Vector& w) const {
    if (w.size() != m()) throw std::invalid_argument("adjoint: length mismatch");
    Vector flat = scale_ * (components_.transpose() * w);
    return flat.reshaped(n1_, n2_);
}

RestrictedMap MeasurementOperator::restrict_right(const Matrix& v) const {
    if (v.rows() != n2_) throw std::invalid_argument("restrict_right: V must have n2 rows");
    const Eigen::Index r = v.cols();
    Matrix stacked(m(), n1_ * r);
    Matrix block(n1_, r);
    for (int i = 0; i < m(); ++i) {
        Eigen::Map<const Matrix> a(components_.row(i).data(), n1_, n2_);
        block.noalias() = a * v;
        stacked.row(i) = scale_ * block.reshaped().transpose();
    }
    return {std::move(stacked), n1_, r};
}

RestrictedMap MeasurementOperator::restrict_left(const Matrix& u) const {
    if (u.rows() != n1_) throw std::invalid_argument("restrict_left: U must have n1 rows");
    const Eigen::Index r = u.cols();
    Matrix stacked(m(), n2_ * r);
    Matrix block(n2_, r);
    for (int i = 0; i < m(); ++i) {
        Eigen::Map<const Matrix> a(components_.row(i).data(), n1_, n2_);
        block.noalias() = a.transpose() * u;
        stacked.row(i) = scale_ * block.reshaped().transpose();
    }
    return {std::move(stacked), n2_, r};
}

MeasurementOperator MeasurementOperator::permuted(const std::vector<int>& perm) const {
    if (static_cast<int>(perm.size()) != m()) throw std::invalid_argument("permuted: wrong length");
    RowMajorMatrix rows(components_.rows(), components_.cols());
    for (int k = 0; k < m(); ++k) rows.row(k) = components_.row(perm[static_cast<std::size_t>(k)]);
    return {n1_, n2_, std::move(rows), ensemble_, seed_};
}

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'R', 'S', 'O', 'P', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("MeasurementOperator::load: truncated stream");
    return value;
}

}  // namespace

void MeasurementOperator::save(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(n1_));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(n2_));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ensemble_));
    write_pod<std::uint64_t>(out, seed_);
    for (int i = 0; i < m(); ++i) {
        Eigen::Map<const Matrix> a(components_.row(i).data(), n1_, n2_);
        for (int r = 0; r < n1_; ++r)
            for (int c = 0; c < n2_; ++c) write_pod<double>(out, a(r, c));
    }
}

MeasurementOperator MeasurementOperator::load(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw std::runtime_error("MeasurementOperator::load: bad magic");
    const auto n1 = read_pod<std::uint64_t>(in);
    const auto n2 = read_pod<std::uint64_t>(in);
    const auto m = read_pod<std::uint64_t>(in);
    const auto tag = read_pod<std::uint32_t>(in);
    const auto seed = read_pod<std::uint64_t>(in);
    if (tag > static_cast<std::uint32_t>(Ensemble::custom))
        throw std::runtime_error("MeasurementOperator::load: unknown ensemble tag");
    RowMajorMatrix rows(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n1 * n2));
    for (std::uint64_t i = 0; i < m; ++i) {
        Eigen::Map<Matrix> a(rows.row(static_cast<Eigen::Index>(i)).data(), static_cast<Eigen::Index>(n1),
                             static_cast<Eigen::Index>(n2));
        for (std::uint64_t r = 0; r < n1; ++r)
            for (std::uint64_t c = 0; c < n2; ++c)
                a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = read_pod<double>(in);
    }
    return {static_cast<int>(n1), static_cast<int>(n2), std::move(rows), static_cast<Ensemble>(tag), seed};
}

// ---------------------------------------------------------------------------
// Ensembles

namespace {

void check_m(int m) {
    if (m < 1) throw std::invalid_argument("measurement operator needs m >= 1");
}

}  // namespace

MeasurementOperator make_gaussian(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag) {
    check_m(m);
    RowMajorMatrix rows(m, static_cast<Eigen::Index>(n1) * n2);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = standard_normal(rng);
    return {n1, n2, std::move(rows), Ensemble::gaussian, seed_tag};
}

MeasurementOperator make_lognormal(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag) {
    check_m(m);
    const double e = std::exp(1.0);
    const double mean = std::sqrt(e);
    const double inv_sd = 1.0 / std::sqrt(e * e - e);
    RowMajorMatrix rows(m, static_cast<Eigen::Index>(n1) * n2);
    for (Eigen::Index i = 0; i < rows.size(); ++i)
        rows.data()[i] = (std::exp(standard_normal(rng)) - mean) * inv_sd;
    return {n1, n2, std::move(rows), Ensemble::lognormal, seed_tag};
}

MeasurementOperator make_rank1_gaussian(int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag) {
    check_m(m);
    if (n1 != n2) throw std::invalid_argument("rank-1 Gaussian measurements require n1 == n2");
    const int n = n1;
    RowMajorMatrix rows(m, static_cast<Eigen::Index>(n) * n);
    Vector a(n);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < n; ++k) a[k] = standard_normal(rng);
        Eigen::Map<Matrix> block(rows.row(i).data(), n, n);
        block.noalias() = a * a.transpose();
    }
    return {n, n, std::move(rows), Ensemble::rank1, seed_tag};
}

MeasurementOperator make_identity_like(int n1, int n2) {
    const int m = n1 * n2;
    RowMajorMatrix rows = RowMajorMatrix::Zero(m, m);
    rows.diagonal().setConstant(std::sqrt(static_cast<double>(m)));
    return {n1, n2, std::move(rows), Ensemble::identity, 0};
}

MeasurementOperator make_operator(Ensemble e, int n1, int n2, int m, Rng& rng, std::uint64_t seed_tag) {
    switch (e) {
        case Ensemble::gaussian: return make_gaussian(n1, n2, m, rng, seed_tag);
        case Ensemble::lognormal: return make_lognormal(n1, n2, m, rng, seed_tag);
        case Ensemble::rank1: return make_rank1_gaussian(n1, n2, m, rng, seed_tag);
        case Ensemble::identity: return make_identity_like(n1, n2);
        case Ensemble::custom: break;
    }
    throw std::invalid_argument("make_operator: custom ensembles cannot be sampled");
}

NoisySample add_noise(const Vector& clean, double rel_level, double reference_norm, Rng& rng) {
    if (!(rel_level >= 0.0)) throw std::invalid_argument("add_noise: rel_level must be >= 0");
    NoisySample sample;
    sample.clean = clean;
    sample.y = clean;
    const double target = rel_level * reference_norm;
    if (target == 0.0 || clean.size() == 0) return sample;
    Vector eta(clean.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = standard_normal(rng);
    eta *= target / eta.norm();
    sample.y += eta;
    sample.eta_norm = target;
    return sample;
}

}  // namespace lrsense
