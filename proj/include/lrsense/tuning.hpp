#pragma once

#include "lrsense/solvers.hpp"

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

namespace lrsense {

enum class SolverKind { am, palm, baseline };
enum class ParamMode { equal, theorem_locked };
enum class MetricKind { oracle_error, discrepancy };

std::string_view to_string(SolverKind k);
std::optional<SolverKind> parse_solver(std::string_view name);
std::string_view to_string(ParamMode m);
std::string_view to_string(MetricKind k);
std::optional<MetricKind> parse_metric(std::string_view name);

/// alpha2 = beta2 = mu, alpha1 = beta1 = sqrt(s/Gamma) * mu.
RegularizationParams lock_ratio(double mu, double gamma, double s);

/// Largest theorem-locked mu for which the balanced SVD split (U*Sigma, V) of the truth
/// keeps every penalty term at most ||eta||^2 / 2, so a global minimizer fits y to 2*||eta||.
double misfit_safe_mu(const Matrix& truth_product, Eigen::Index rank, double eta_norm, double gamma, double s);

struct ParamPolicy {
    ParamMode mode = ParamMode::equal;
    double gamma = 1.0;
    double s = 1.0;

    [[nodiscard]] RegularizationParams at(double mu) const;
};

/// Quantity minimized along the mu sweep.
struct TuningMetric {
    MetricKind kind = MetricKind::oracle_error;
    Matrix truth;           // oracle_error: ||X_true - X||_F / ||X_true||_F
    double eta_norm = 0.0;  // discrepancy: | ||y - A(X)||_2 - eta_norm |

    static TuningMetric oracle(Matrix truth);
    static TuningMetric discrepancy(double eta_norm);
    [[nodiscard]] double evaluate(const Vector& y, const MeasurementOperator& op, const Factorization& f) const;
};

struct SweepPoint {
    double mu = 0.0;
    double metric = 0.0;
    double misfit = 0.0;
    double effective_sparsity = 0.0;
    double objective = 0.0;
    int outer_iters = 0;
    int live_components = 0;
    bool warm_started = false;  // false: solved from init (first point, or after a rank-one term died)
};

struct TuningOptions {
    ParamPolicy policy;
    int max_doublings = 60;
    double mu_floor = 1e-12;
    int consecutive_increases = 2;
};

struct TuningResult {
    double best_mu = 0.0;
    double start_mu = 0.0;  // mu0 after any doublings
    int doublings = 0;
    SolveResult best_result;
    std::vector<SweepPoint> sweep;
};

SolveResult run_solver(SolverKind kind, const Vector& y, const MeasurementOperator& op,
                       const RegularizationParams& p, const Factorization& init, const SolveConfig& cfg);

/// A mu for which the first block solve from `init` is forced to zero, with a factor-2 margin.
double default_mu0(const Vector& y, const MeasurementOperator& op, const Factorization& init);

/// Shrink-by-half tuning: starts at a mu whose solution is zero (doubling mu0 if needed),
/// halves mu with warm starts until the metric rises on consecutive steps or mu falls
/// below the floor, and returns the best solve seen.
TuningResult tune_shrink(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                         const TuningMetric& metric, double mu0, SolverKind solver, const SolveConfig& cfg,
                         const TuningOptions& options = {});

/// Same sweep tuned for several metrics at once. Results match separate single-metric
/// calls; the shared solves run until every metric's stop rule has fired.
std::vector<TuningResult> tune_shrink(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                                      const std::vector<TuningMetric>& metrics, double mu0, SolverKind solver,
                                      const SolveConfig& cfg, const TuningOptions& options = {});

/// CSV "mu,metric,misfit,effective_sparsity" with a header.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& sweep);

}  // namespace lrsense
