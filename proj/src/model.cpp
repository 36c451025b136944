#include "lrsense/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace lrsense {

Factorization::Factorization(Matrix u, Matrix v) : U(std::move(u)), V(std::move(v)) {
    if (U.cols() != V.cols() || U.cols() < 1)
        throw std::invalid_argument("Factorization: U and V need the same column count >= 1");
}

bool Factorization::is_zero() const {
    return U.cwiseAbs().maxCoeff() == 0.0 || V.cwiseAbs().maxCoeff() == 0.0;
}

Eigen::Index Factorization::live_components() const {
    Eigen::Index live = 0;
    for (Eigen::Index c = 0; c < U.cols(); ++c)
        live += U.col(c).cwiseAbs().maxCoeff() > 0.0 && V.col(c).cwiseAbs().maxCoeff() > 0.0;
    return live;
}

void SignalClassSpec::validate() const {
    if (n1 < 1 || n2 < 1 || rank < 1)
        throw std::invalid_argument("SignalClassSpec: dimensions and rank must be positive");
    if (!(s1 >= 1.0 && s1 <= n1) || !(s2 >= 1.0 && s2 <= n2))
        throw std::invalid_argument("SignalClassSpec: need 1 <= s1 <= n1 and 1 <= s2 <= n2");
    if (!(gamma > 0.0))
        throw std::invalid_argument("SignalClassSpec: Gamma must be positive");
}

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = standard_normal(rng);
    return m;
}

Matrix sparse_component(int rows, int rank, double s, double dense_fraction, Rng& rng) {
    const long total = static_cast<long>(rows) * rank;
    const long count = std::lround(rank * s);
    if (count <= 0 || count > total)
        throw std::invalid_argument("sample_ground_truth: round(R*s) must lie in [1, n*R], got " +
                                    std::to_string(count));

    // Partial Fisher-Yates draws `count` distinct positions uniformly.
    std::vector<long> positions(static_cast<std::size_t>(total));
    std::iota(positions.begin(), positions.end(), 0L);
    for (long k = 0; k < count; ++k) {
        std::uniform_int_distribution<long> pick(k, total - 1);
        std::swap(positions[static_cast<std::size_t>(k)],
                  positions[static_cast<std::size_t>(pick(rng))]);
    }

    Matrix m = Matrix::Zero(rows, rank);
    for (long k = 0; k < count; ++k) {
        const long p = positions[static_cast<std::size_t>(k)];
        m(p % rows, p / rows) = standard_normal(rng);
    }
    const double target = std::sqrt(static_cast<double>(rank));
    const double norm = m.norm();
    if (norm > 0.0) m *= target / norm;

    if (dense_fraction > 0.0) {
        Matrix dense = gaussian_matrix(rows, rank, rng);
        m += dense * (dense_fraction * target / dense.norm());
    }
    return m;
}

}  // namespace

Factorization sample_ground_truth(const SignalClassSpec& spec, double dense_fraction, Rng& rng) {
    spec.validate();
    if (!(dense_fraction >= 0.0))
        throw std::invalid_argument("sample_ground_truth: dense_fraction must be >= 0");
    Matrix u = sparse_component(spec.n1, spec.rank, spec.s1, dense_fraction, rng);
    Matrix v = sparse_component(spec.n2, spec.rank, spec.s2, dense_fraction, rng);
    return {std::move(u), std::move(v)};
}

Factorization perturb_along(const Factorization& truth, double target_rel_error,
                            const Matrix& dir_u, const Matrix& dir_v) {
    if (!(target_rel_error > 0.0))
        throw std::invalid_argument("perturb_initialization: target_rel_error must be positive");
    const Matrix x = truth.product();
    const double x_norm = x.norm();
    if (!(x_norm > 0.0))
        throw std::invalid_argument("perturb_initialization: truth has zero product");

    // Nothing to scale: the truth is the only reachable point.
    if (dir_u.isZero(0.0) && dir_v.isZero(0.0)) return truth;

    auto rel_error_at = [&](double t) {
        return (x - (truth.U + t * dir_u) * (truth.V + t * dir_v).transpose()).norm() / x_norm;
    };
    const double lo_band = 0.95 * target_rel_error;
    const double hi_band = 1.05 * target_rel_error;

    double lo = 0.0;
    double hi = 1.0;
    const double dir_scale = std::max(dir_u.norm(), dir_v.norm());
    if (dir_scale > 0.0) hi = target_rel_error * std::max(truth.U.norm(), truth.V.norm()) / dir_scale;

    constexpr int max_expansions = 200;
    int expansions = 0;
    while (rel_error_at(hi) < lo_band) {
        if (++expansions > max_expansions || !std::isfinite(hi))
            throw NumericalError("perturb_initialization: could not bracket the target error");
        lo = hi;
        hi *= 2.0;
    }

    constexpr int max_bisections = 200;
    double t = hi;
    double err = rel_error_at(t);
    for (int k = 0; k < max_bisections && (err < lo_band || err > hi_band ||
                                           std::abs(err - target_rel_error) > 1e-3 * target_rel_error);
         ++k) {
        t = 0.5 * (lo + hi);
        err = rel_error_at(t);
        if (err < target_rel_error)
            lo = t;
        else
            hi = t;
    }
    if (err < lo_band || err > hi_band)
        throw NumericalError("perturb_initialization: bisection did not reach the target band");
    return {truth.U + t * dir_u, truth.V + t * dir_v};
}

Factorization perturb_initialization(const Factorization& truth, double target_rel_error, Rng& rng) {
    const Matrix dir_u = gaussian_matrix(truth.U.rows(), truth.U.cols(), rng);
    const Matrix dir_v = gaussian_matrix(truth.V.rows(), truth.V.cols(), rng);
    return perturb_along(truth, target_rel_error, dir_u, dir_v);
}

MembershipCertificate certify_membership(const Factorization& f, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("certify_membership: Gamma must be positive");
    const double r = static_cast<double>(f.rank());
    const double budget = r * std::sqrt(gamma);
    MembershipCertificate cert;
    cert.s1_required = std::pow(l1_norm(f.U) / budget, 2);
    cert.s2_required = std::pow(l1_norm(f.V) / budget, 2);
    const double frob = std::max(f.U.squaredNorm(), f.V.squaredNorm());
    cert.frobenius_ok = frob <= gamma * r * (1.0 + 1e-12);
    return cert;
}

ClassFit fit_class(const Factorization& f) {
    if (f.is_zero()) throw std::invalid_argument("fit_class: zero factorization");
    const double r = static_cast<double>(f.rank());
    ClassFit fit;
    fit.gamma = std::max(f.U.squaredNorm(), f.V.squaredNorm()) / r;
    const auto cert = certify_membership(f, fit.gamma);
    fit.s = std::max(cert.s1_required, cert.s2_required);
    return fit;
}

bool in_scaled_class(const Factorization& f, double gamma, double s, double budget_rank, double rel_tol) {
    if (!(gamma > 0.0 && s > 0.0 && budget_rank > 0.0))
        throw std::invalid_argument("in_scaled_class: Gamma, s and budget rank must be positive");
    const double slack = 1.0 + rel_tol;
    const bool frob = std::max(f.U.squaredNorm(), f.V.squaredNorm()) <= gamma * budget_rank * slack;
    const bool l1 = std::max(l1_norm(f.U), l1_norm(f.V)) <= budget_rank * std::sqrt(gamma * s) * slack;
    return frob && l1;
}

double effective_sparsity(const Matrix& m, Eigen::Index rank) {
    const double fro = m.norm();
    if (fro == 0.0) return 0.0;
    return std::pow(l1_norm(m) / fro, 2) / static_cast<double>(rank);
}

double hard_sparsity(const Matrix& m, Eigen::Index rank) {
    const auto nnz = (m.array().abs() > std::numeric_limits<double>::epsilon()).count();
    return static_cast<double>(nnz) / static_cast<double>(rank * m.rows());
}

double relative_error(const Matrix& truth, const Matrix& estimate) {
    const double denom = truth.norm();
    if (denom == 0.0) throw std::invalid_argument("relative_error: zero reference");
    return (truth - estimate).norm() / denom;
}

}  // namespace lrsense
