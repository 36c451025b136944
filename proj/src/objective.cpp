#include "lrsense/objective.hpp"

#include <cmath>

namespace lrsense {

RegularizationParams RegularizationParams::equal(double mu) {
    RegularizationParams p;
    p.alpha1 = p.alpha2 = p.beta1 = p.beta2 = mu;
    return p;
}

void RegularizationParams::validate() const {
    if (!(alpha1 >= 0.0 && alpha2 >= 0.0 && beta1 >= 0.0 && beta2 >= 0.0))
        throw std::invalid_argument("RegularizationParams: weights must be nonnegative");
    if (mode == RatioMode::theorem_locked) {
        if (!(gamma > 0.0 && s > 0.0))
            throw std::invalid_argument("RegularizationParams: locked mode needs Gamma, s > 0");
        const double ratio = std::sqrt(s / gamma);
        const double tol = 1e-12 * std::max(1.0, alpha1);
        if (std::abs(alpha1 - ratio * alpha2) > tol || std::abs(alpha1 - beta1) > tol ||
            std::abs(beta1 - ratio * beta2) > tol)
            throw std::invalid_argument("RegularizationParams: locked ratio violated");
    }
}

double elastic_net(const Matrix& z, ElasticNetWeights w) {
    return w.quadratic * z.squaredNorm() + w.l1 * l1_norm(z);
}

ObjectiveTerms eval_terms(const Vector& y, const MeasurementOperator& op, const Factorization& f,
                          const RegularizationParams& p) {
    if (y.size() != op.m()) throw std::invalid_argument("eval_J: y has wrong length");
    ObjectiveTerms t;
    t.fidelity = (y - op.forward(f.product())).squaredNorm();
    t.left_penalty = elastic_net(f.U, left_weights(p));
    t.right_penalty = elastic_net(f.V, right_weights(p));
    return t;
}

double eval_J(const Vector& y, const MeasurementOperator& op, const Factorization& f,
              const RegularizationParams& p) {
    return eval_terms(y, op, f, p).total();
}

double misfit(const Vector& y, const MeasurementOperator& op, const Factorization& f) {
    return (y - op.forward(f.product())).norm();
}

double prox_enet_scalar(double z, ElasticNetWeights w, double mu) {
    const double threshold = mu * w.l1;
    const double shrink = 1.0 + 2.0 * mu * w.quadratic;
    if (z > threshold) return (z - threshold) / shrink;
    if (z < -threshold) return (z + threshold) / shrink;
    return 0.0;
}

Matrix prox_enet(const Matrix& z, ElasticNetWeights w, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("prox_enet: mu must be positive");
    return z.unaryExpr([w, mu](double v) { return prox_enet_scalar(v, w, mu); });
}

Matrix grad_fidelity_U(const Vector& y, const MeasurementOperator& op, const Factorization& f) {
    const RestrictedMap map = op.restrict_right(f.V);
    return 2.0 * map.adjoint(map.apply(f.U) - y);
}

Matrix grad_fidelity_V(const Vector& y, const MeasurementOperator& op, const Factorization& f) {
    const RestrictedMap map = op.restrict_left(f.U);
    return 2.0 * map.adjoint(map.apply(f.V) - y);
}

}  // namespace lrsense
