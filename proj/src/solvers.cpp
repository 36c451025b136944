#include "lrsense/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

namespace lrsense {

void SolveConfig::validate() const {
    if (max_outer_iters < 1 || inner_max_iters < 1)
        throw std::invalid_argument("SolveConfig: iteration caps must be >= 1");
    if (!(outer_tol > 0.0) || !(inner_tol > 0.0))
        throw std::invalid_argument("SolveConfig: tolerances must be positive");
    if (step_rule == StepRule::fixed && !(fixed_step > 0.0))
        throw std::invalid_argument("SolveConfig: fixed step must be positive");
    if (!(step_min > 0.0) || !(step_max >= step_min))
        throw std::invalid_argument("SolveConfig: need 0 < step_min <= step_max");
}

InnerResult prox_gradient_descent(const GradientFn& grad, double lipschitz, const ProxFn& prox,
                                  const Matrix& x0, const SolveConfig& cfg) {
    double step = cfg.fixed_step;
    if (cfg.step_rule == StepRule::lipschitz_inverse) {
        if (!(lipschitz > 0.0) || !std::isfinite(lipschitz))
            throw std::invalid_argument("prox_gradient_descent: lipschitz constant must be positive");
        step = 1.0 / lipschitz;
    }

    InnerResult result{x0, 0, false};
    Matrix& x = result.x;
    for (int k = 1; k <= cfg.inner_max_iters; ++k) {
        Matrix next = prox(x - step * grad(x), step);
        if (!next.allFinite())
            throw NumericalError("prox_gradient_descent: non-finite iterate at inner iteration " +
                                 std::to_string(k));
        const double change = (next - x).norm();
        const double scale = std::max(x.norm(), next.norm());
        x = std::move(next);
        result.iterations = k;
        if (change <= cfg.inner_tol * scale) {
            result.converged = true;
            break;
        }
    }
    return result;
}

InnerResult solve_block(const RestrictedMap& map, const Vector& y, ElasticNetWeights w, const Matrix& x0,
                        const SolveConfig& cfg) {
    if (map.is_zero()) return {Matrix::Zero(map.in_rows(), map.in_cols()), 0, true};

    const Matrix& a = map.matrix();
    const Eigen::Index rows = map.in_rows();
    const Eigen::Index cols = map.in_cols();
    const double norm = map.operator_norm();
    const double lipschitz = 2.0 * norm * norm;
    const ProxFn prox = [w](const Matrix& z, double step) { return prox_enet(z, w, step); };

    // Gradient 2 A^T (A x - y). The Gram form pays off when the block has no more unknowns than measurements.
    if (a.cols() <= a.rows()) {
        const Matrix gram = 2.0 * (a.transpose() * a);
        const Vector rhs = 2.0 * (a.transpose() * y);
        const GradientFn grad = [&gram, &rhs, rows, cols](const Matrix& x) -> Matrix {
            Vector g = gram * x.reshaped() - rhs;
            return g.reshaped(rows, cols);
        };
        return prox_gradient_descent(grad, lipschitz, prox, x0, cfg);
    }
    const GradientFn grad = [&map, &y](const Matrix& x) -> Matrix {
        return 2.0 * map.adjoint(map.apply(x) - y);
    };
    return prox_gradient_descent(grad, lipschitz, prox, x0, cfg);
}

namespace {

void check_problem(const Vector& y, const MeasurementOperator& op, const Factorization& init) {
    if (y.size() != op.m()) throw std::invalid_argument("solver: y length does not match the operator");
    if (init.U.rows() != op.n1() || init.V.rows() != op.n2() || init.U.cols() != init.V.cols())
        throw std::invalid_argument("solver: initialization shape does not match the operator");
}

// Tracks objective values and iterate changes shared by all three schemes.
class Recorder {
public:
    Recorder(SolveResult& result, const Vector& y, const SolveConfig& cfg) : result_(result), y_(y), cfg_(cfg) {}

    void push(int iteration, double objective, const RestrictedMap& left_map, const Matrix& v) {
        result_.objective_trace.push_back(objective);
        if (cfg_.record_trace) {
            const double fit = (y_ - left_map.apply(v)).norm();
            result_.trace.push_back({iteration, objective, fit, effective_sparsity(v, v.cols())});
        }
    }

private:
    SolveResult& result_;
    const Vector& y_;
    const SolveConfig& cfg_;
};

double relative_decrease(double previous, double current) {
    const double denom = std::max(std::abs(previous), std::numeric_limits<double>::min());
    return (previous - current) / denom;
}

double penalized_value(const Vector& y, const RestrictedMap& left_map, const Factorization& f,
                       const RegularizationParams& p) {
    return (y - left_map.apply(f.V)).squaredNorm() + elastic_net(f.U, left_weights(p)) +
           elastic_net(f.V, right_weights(p));
}

void finish(SolveResult& result, const Vector& y, const MeasurementOperator& op) {
    result.misfit = misfit(y, op, result.final);
}

}  // namespace

SolveResult alternating_minimization(const Vector& y, const MeasurementOperator& op,
                                     const RegularizationParams& p, const Factorization& init,
                                     const SolveConfig& cfg) {
    cfg.validate();
    p.validate();
    check_problem(y, op, init);

    SolveResult result;
    Recorder recorder(result, y, cfg);
    Matrix u = init.U;
    Matrix v = init.V;
    double objective = penalized_value(y, op.restrict_left(u), {u, v}, p);
    if (!std::isfinite(objective)) throw NumericalError("alternating_minimization: non-finite initial objective");
    recorder.push(0, objective, op.restrict_left(u), v);

    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        const RestrictedMap right_map = op.restrict_right(v);
        if (right_map.is_zero()) result.degenerate = true;
        InnerResult u_step = solve_block(right_map, y, left_weights(p), u, cfg);

        const RestrictedMap left_map = op.restrict_left(u_step.x);
        if (left_map.is_zero()) result.degenerate = true;
        InnerResult v_step = solve_block(left_map, y, right_weights(p), v, cfg);

        result.inner_iters += u_step.iterations + v_step.iterations;
        result.u_change_sq.push_back((u - u_step.x).squaredNorm());
        result.v_change_sq.push_back((v - v_step.x).squaredNorm());
        u = std::move(u_step.x);
        v = std::move(v_step.x);

        const double next = penalized_value(y, left_map, {u, v}, p);
        if (!std::isfinite(next))
            throw NumericalError("alternating_minimization: non-finite objective at outer iteration " +
                                 std::to_string(k));
        recorder.push(k, next, left_map, v);
        result.outer_iters = k;
        const double decrease = relative_decrease(objective, next);
        objective = next;
        if (decrease < cfg.outer_tol || result.degenerate) {
            result.converged = true;
            break;
        }
    }
    result.final = Factorization(std::move(u), std::move(v));
    finish(result, y, op);
    return result;
}

SolveResult palm(const Vector& y, const MeasurementOperator& op, const RegularizationParams& p,
                 const Factorization& init, const SolveConfig& cfg) {
    cfg.validate();
    p.validate();
    check_problem(y, op, init);

    SolveResult result;
    Recorder recorder(result, y, cfg);
    Matrix u = init.U;
    Matrix v = init.V;
    double objective = penalized_value(y, op.restrict_left(u), {u, v}, p);
    if (!std::isfinite(objective)) throw NumericalError("palm: non-finite initial objective");
    recorder.push(0, objective, op.restrict_left(u), v);

    auto step_for = [&](const RestrictedMap& map) {
        double step = cfg.fixed_step;
        if (cfg.step_rule == StepRule::lipschitz_inverse) {
            const double norm = map.operator_norm();
            step = 1.0 / (2.0 * norm * norm);
        }
        const double clamped = std::clamp(step, cfg.step_min, cfg.step_max);
        if (clamped != step) ++result.step_clamps;
        return clamped;
    };
    auto block_step = [&](const RestrictedMap& map, const Matrix& x, ElasticNetWeights w) -> Matrix {
        if (map.is_zero()) {
            result.degenerate = true;
            return Matrix::Zero(x.rows(), x.cols());
        }
        const double step = step_for(map);
        const Matrix grad = 2.0 * map.adjoint(map.apply(x) - y);
        return prox_enet(x - step * grad, w, step);
    };

    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        Matrix u_next = block_step(op.restrict_right(v), u, left_weights(p));
        const RestrictedMap left_map = op.restrict_left(u_next);
        Matrix v_next = block_step(left_map, v, right_weights(p));
        if (!u_next.allFinite() || !v_next.allFinite())
            throw NumericalError("palm: non-finite iterate at outer iteration " + std::to_string(k));

        result.u_change_sq.push_back((u - u_next).squaredNorm());
        result.v_change_sq.push_back((v - v_next).squaredNorm());
        u = std::move(u_next);
        v = std::move(v_next);

        const double next = penalized_value(y, left_map, {u, v}, p);
        recorder.push(k, next, left_map, v);
        result.outer_iters = k;
        const double decrease = relative_decrease(objective, next);
        objective = next;
        if (decrease < cfg.outer_tol || result.degenerate) {
            result.converged = true;
            break;
        }
    }
    result.final = Factorization(std::move(u), std::move(v));
    finish(result, y, op);
    return result;
}

namespace {

constexpr double kTikhonovFloor = 1e-10;

Matrix least_squares_block(const RestrictedMap& map, const Vector& y, bool& regularized) {
    const Matrix& a = map.matrix();
    Matrix gram = a.transpose() * a;
    gram.diagonal().array() += kTikhonovFloor;
    const Eigen::LDLT<Matrix> ldlt(gram);
    if (a.rows() < a.cols() || ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) regularized = true;
    Vector x = ldlt.solve(a.transpose() * y);
    return x.reshaped(map.in_rows(), map.in_cols());
}

}  // namespace

SolveResult altmin_sense_baseline(const Vector& y, const MeasurementOperator& op, const Factorization& init,
                                  const SolveConfig& cfg) {
    cfg.validate();
    check_problem(y, op, init);

    const RegularizationParams none;
    SolveResult result;
    Recorder recorder(result, y, cfg);
    Matrix u = init.U;
    Matrix v = init.V;
    double objective = penalized_value(y, op.restrict_left(u), {u, v}, none);
    recorder.push(0, objective, op.restrict_left(u), v);

    for (int k = 1; k <= cfg.max_outer_iters; ++k) {
        const RestrictedMap right_map = op.restrict_right(v);
        if (right_map.is_zero()) {
            result.degenerate = true;
            u.setZero();
            v.setZero();
            objective = y.squaredNorm();
            result.objective_trace.push_back(objective);
            result.outer_iters = k;
            result.converged = true;
            break;
        }
        Matrix u_next = least_squares_block(right_map, y, result.regularized);
        // Orthonormalize the left factor; the right solve absorbs the triangular part.
        const Eigen::HouseholderQR<Matrix> qr(u_next);
        u_next = qr.householderQ() * Matrix::Identity(u_next.rows(), u_next.cols());

        const RestrictedMap left_map = op.restrict_left(u_next);
        Matrix v_next = least_squares_block(left_map, y, result.regularized);
        if (!u_next.allFinite() || !v_next.allFinite())
            throw NumericalError("altmin_sense_baseline: non-finite iterate at outer iteration " +
                                 std::to_string(k));

        result.u_change_sq.push_back((u - u_next).squaredNorm());
        result.v_change_sq.push_back((v - v_next).squaredNorm());
        u = std::move(u_next);
        v = std::move(v_next);

        const double next = penalized_value(y, left_map, {u, v}, none);
        recorder.push(k, next, left_map, v);
        result.outer_iters = k;
        const double decrease = relative_decrease(objective, next);
        objective = next;
        if (decrease < cfg.outer_tol || next == 0.0) {
            result.converged = true;
            break;
        }
    }
    result.final = Factorization(std::move(u), std::move(v));
    finish(result, y, op);
    return result;
}

void write_trace_csv(std::ostream& out, const SolveResult& result) {
    out << "iteration,objective,misfit,effective_sparsity\n";
    char buf[128];
    for (const TraceRow& row : result.trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", row.iteration, row.objective, row.misfit,
                      row.effective_sparsity);
        out << buf;
    }
}

}  // namespace lrsense
