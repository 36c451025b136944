#pragma once

#include "lrsense/measure.hpp"
#include "lrsense/model.hpp"
#include "lrsense/objective.hpp"

#include <functional>
#include <iosfwd>
#include <vector>

namespace lrsense {

enum class StepRule { lipschitz_inverse, fixed };

struct SolveConfig {
    int max_outer_iters = 500;
    double outer_tol = 1e-6;  // relative decrease of J over one outer iteration
    int inner_max_iters = 5000;
    double inner_tol = 1e-7;  // relative iterate change of the inner prox-gradient loop
    StepRule step_rule = StepRule::lipschitz_inverse;
    double fixed_step = 0.0;
    double step_min = 1e-12;  // r_- for PALM step sizes
    double step_max = 1e12;   // r_+
    bool record_trace = false;

    void validate() const;
};

struct TraceRow {
    int iteration = 0;
    double objective = 0.0;
    double misfit = 0.0;
    double effective_sparsity = 0.0;  // of V
};

struct SolveResult {
    Factorization final;
    std::vector<double> objective_trace;  // J at the start and after every outer iteration
    std::vector<double> u_change_sq;      // ||U_k - U_{k+1}||_F^2 per outer iteration
    std::vector<double> v_change_sq;
    std::vector<TraceRow> trace;          // filled when record_trace is set
    int outer_iters = 0;
    long inner_iters = 0;
    bool converged = false;
    bool degenerate = false;   // a restricted map vanished and the block was set to zero
    bool regularized = false;  // baseline only: a normal-equation system was singular
    int step_clamps = 0;       // PALM steps pulled into [step_min, step_max]
    double misfit = 0.0;       // ||y - A(U V^T)||_2
};

struct InnerResult {
    Matrix x;
    int iterations = 0;
    bool converged = false;
};

using GradientFn = std::function<Matrix(const Matrix&)>;
/// prox(z, step) = argmin_x 0.5 ||x - z||^2 + step * g(x)
using ProxFn = std::function<Matrix(const Matrix&, double)>;

/// x_{k+1} = prox(x_k - step * grad(x_k), step) until the relative iterate change
/// drops below cfg.inner_tol or cfg.inner_max_iters is reached.
/// step = 1/lipschitz under StepRule::lipschitz_inverse, cfg.fixed_step otherwise.
InnerResult prox_gradient_descent(const GradientFn& grad, double lipschitz, const ProxFn& prox,
                                  const Matrix& x0, const SolveConfig& cfg);

/// Minimizes ||y - map(x)||^2 + Enet_w(x) by proximal gradient descent from x0.
InnerResult solve_block(const RestrictedMap& map, const Vector& y, ElasticNetWeights w, const Matrix& x0,
                        const SolveConfig& cfg);

/// Alternating exact block minimization of J, each block solved by proximal gradient descent.
SolveResult alternating_minimization(const Vector& y, const MeasurementOperator& op,
                                     const RegularizationParams& p, const Factorization& init,
                                     const SolveConfig& cfg);

/// Proximal alternating linearized minimization: one prox-gradient step per block.
SolveResult palm(const Vector& y, const MeasurementOperator& op, const RegularizationParams& p,
                 const Factorization& init, const SolveConfig& cfg);

/// Unregularized alternating least squares on the rank-R factorization.
SolveResult altmin_sense_baseline(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                                  const SolveConfig& cfg);

/// CSV rows "iteration,objective,misfit,effective_sparsity" with a header.
void write_trace_csv(std::ostream& out, const SolveResult& result);

}  // namespace lrsense
