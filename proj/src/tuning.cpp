#include "lrsense/tuning.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace lrsense {

std::string_view to_string(SolverKind k) {
    switch (k) {
        case SolverKind::am: return "am";
        case SolverKind::palm: return "palm";
        case SolverKind::baseline: return "baseline";
    }
    return "am";
}

std::optional<SolverKind> parse_solver(std::string_view name) {
    if (name == "am") return SolverKind::am;
    if (name == "palm") return SolverKind::palm;
    if (name == "baseline") return SolverKind::baseline;
    return std::nullopt;
}

std::string_view to_string(ParamMode m) { return m == ParamMode::equal ? "equal" : "locked"; }

std::string_view to_string(MetricKind k) { return k == MetricKind::oracle_error ? "oracle" : "discrepancy"; }

std::optional<MetricKind> parse_metric(std::string_view name) {
    if (name == "oracle") return MetricKind::oracle_error;
    if (name == "discrepancy") return MetricKind::discrepancy;
    return std::nullopt;
}

RegularizationParams lock_ratio(double mu, double gamma, double s) {
    if (!(mu > 0.0 && gamma > 0.0 && s > 0.0))
        throw std::invalid_argument("lock_ratio: mu, Gamma and s must be positive");
    RegularizationParams p;
    p.alpha2 = p.beta2 = mu;
    p.alpha1 = p.beta1 = std::sqrt(s / gamma) * mu;
    p.mode = RatioMode::theorem_locked;
    p.gamma = gamma;
    p.s = s;
    return p;
}

double misfit_safe_mu(const Matrix& truth_product, Eigen::Index rank, double eta_norm, double gamma, double s) {
    if (!(eta_norm > 0.0)) throw std::invalid_argument("misfit_safe_mu: eta_norm must be positive");
    if (rank < 1 || rank > std::min(truth_product.rows(), truth_product.cols()))
        throw std::invalid_argument("misfit_safe_mu: rank out of range");
    Eigen::JacobiSVD<Matrix> svd(truth_product, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix us = svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal();
    const Matrix vs = svd.matrixV().leftCols(rank);
    const double half = 0.5 * eta_norm * eta_norm;
    const double ratio = std::sqrt(s / gamma);
    return std::min({half / us.squaredNorm() / ratio, half / l1_norm(us), half / vs.squaredNorm() / ratio,
                     half / l1_norm(vs)});
}

RegularizationParams ParamPolicy::at(double mu) const {
    return mode == ParamMode::equal ? RegularizationParams::equal(mu) : lock_ratio(mu, gamma, s);
}

TuningMetric TuningMetric::oracle(Matrix truth) {
    TuningMetric m;
    m.kind = MetricKind::oracle_error;
    m.truth = std::move(truth);
    return m;
}

TuningMetric TuningMetric::discrepancy(double eta_norm) {
    TuningMetric m;
    m.kind = MetricKind::discrepancy;
    m.eta_norm = eta_norm;
    return m;
}

double TuningMetric::evaluate(const Vector& y, const MeasurementOperator& op, const Factorization& f) const {
    if (kind == MetricKind::oracle_error) return relative_error(truth, f.product());
    return std::abs(misfit(y, op, f) - eta_norm);
}

SolveResult run_solver(SolverKind kind, const Vector& y, const MeasurementOperator& op,
                       const RegularizationParams& p, const Factorization& init, const SolveConfig& cfg) {
    switch (kind) {
        case SolverKind::am: return alternating_minimization(y, op, p, init, cfg);
        case SolverKind::palm: return palm(y, op, p, init, cfg);
        case SolverKind::baseline: return altmin_sense_baseline(y, op, init, cfg);
    }
    throw std::invalid_argument("run_solver: unknown solver");
}

double default_mu0(const Vector& y, const MeasurementOperator& op, const Factorization& init) {
    // U = 0 is optimal for the first block solve once alpha2 >= ||2 A_V0^* y||_inf.
    const RestrictedMap map = op.restrict_right(init.V);
    const double bound = (2.0 * map.adjoint(y)).cwiseAbs().maxCoeff();
    return bound > 0.0 ? 2.0 * bound : 1.0;
}

namespace {

SweepPoint make_point(double mu, const SolveResult& r, const TuningMetric& metric, const Vector& y,
                      const MeasurementOperator& op, bool warm) {
    SweepPoint pt;
    pt.mu = mu;
    pt.metric = metric.evaluate(y, op, r.final);
    pt.misfit = r.misfit;
    pt.effective_sparsity = effective_sparsity(r.final.V, r.final.rank());
    pt.objective = r.objective_trace.empty() ? 0.0 : r.objective_trace.back();
    pt.outer_iters = r.outer_iters;
    pt.live_components = static_cast<int>(r.final.live_components());
    pt.warm_started = warm;
    return pt;
}

}  // namespace

TuningResult tune_shrink(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                         const TuningMetric& metric, double mu0, SolverKind solver, const SolveConfig& cfg,
                         const TuningOptions& options) {
    return std::move(tune_shrink(y, op, init, std::vector<TuningMetric>{metric}, mu0, solver, cfg, options).front());
}

std::vector<TuningResult> tune_shrink(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                                      const std::vector<TuningMetric>& metrics, double mu0, SolverKind solver,
                                      const SolveConfig& cfg, const TuningOptions& options) {
    if (!(mu0 > 0.0)) throw std::invalid_argument("tune_shrink: mu0 must be positive");
    if (solver == SolverKind::baseline) throw std::invalid_argument("tune_shrink: the baseline has no parameter");
    if (metrics.empty()) throw std::invalid_argument("tune_shrink: no metric");

    double mu = mu0;
    int doublings = 0;
    SolveResult current = run_solver(solver, y, op, options.policy.at(mu), init, cfg);
    while (!current.final.is_zero()) {
        if (++doublings > options.max_doublings)
            throw NumericalError("tune_shrink: mu0 could not be raised to force a zero solution");
        mu *= 2.0;
        current = run_solver(solver, y, op, options.policy.at(mu), init, cfg);
    }

    // The mu path does not depend on the metric, so every metric rides the same solves
    // and only their stopping points differ.
    std::vector<TuningResult> out(metrics.size());
    std::vector<double> best_metric(metrics.size());
    std::vector<int> increases(metrics.size(), 0);
    std::vector<bool> active(metrics.size(), true);
    for (std::size_t q = 0; q < metrics.size(); ++q) {
        out[q].start_mu = mu;
        out[q].doublings = doublings;
        out[q].sweep.push_back(make_point(mu, current, metrics[q], y, op, false));
        out[q].best_mu = mu;
        out[q].best_result = current;
        best_metric[q] = out[q].sweep.back().metric;
    }

    while (std::find(active.begin(), active.end(), true) != active.end()) {
        mu *= 0.5;
        if (mu < options.mu_floor) break;
        // A dead rank-one term would pin every later solve to a lower rank; restart from init instead.
        const bool warm = !current.final.has_dead_component();
        const Factorization& start = warm ? current.final : init;
        try {
            current = run_solver(solver, y, op, options.policy.at(mu), start, cfg);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (mu = " + std::to_string(mu) + ")");
        }
        for (std::size_t q = 0; q < metrics.size(); ++q) {
            if (!active[q]) continue;
            SweepPoint pt = make_point(mu, current, metrics[q], y, op, warm);
            const double previous = out[q].sweep.back().metric;
            out[q].sweep.push_back(pt);
            if (pt.metric < best_metric[q]) {
                best_metric[q] = pt.metric;
                out[q].best_mu = mu;
                out[q].best_result = current;
            }
            increases[q] = pt.metric > previous ? increases[q] + 1 : 0;
            if (increases[q] >= options.consecutive_increases) active[q] = false;
        }
    }
    return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep) {
    out << "mu,metric,misfit,effective_sparsity\n";
    char buf[160];
    for (const SweepPoint& pt : sweep) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", pt.mu, pt.metric, pt.misfit,
                      pt.effective_sparsity);
        out << buf;
    }
}

}  // namespace lrsense
