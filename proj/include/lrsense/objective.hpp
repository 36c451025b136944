#pragma once

#include "lrsense/measure.hpp"
#include "lrsense/model.hpp"
#include "lrsense/types.hpp"

namespace lrsense {

enum class RatioMode { free, theorem_locked };

/// Penalty weights of
///   J(U, V) = ||y - A(U V^T)||^2 + alpha1 ||U||_F^2 + alpha2 ||U||_1
///                                + beta1 ||V||_F^2 + beta2 ||V||_1.
/// In theorem_locked mode alpha1 = sqrt(s/Gamma) alpha2 = beta1 = sqrt(s/Gamma) beta2.
struct RegularizationParams {
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    RatioMode mode = RatioMode::free;
    double gamma = 1.0;
    double s = 1.0;

    /// All four weights set to mu.
    static RegularizationParams equal(double mu);
    void validate() const;
};

/// Enet(Z) = quadratic * ||Z||_F^2 + l1 * ||Z||_1.
struct ElasticNetWeights {
    double quadratic = 0.0;
    double l1 = 0.0;
};

inline ElasticNetWeights left_weights(const RegularizationParams& p) { return {p.alpha1, p.alpha2}; }
inline ElasticNetWeights right_weights(const RegularizationParams& p) { return {p.beta1, p.beta2}; }

double elastic_net(const Matrix& z, ElasticNetWeights w);

struct ObjectiveTerms {
    double fidelity = 0.0;  // ||y - A(U V^T)||_2^2
    double left_penalty = 0.0;
    double right_penalty = 0.0;
    [[nodiscard]] double total() const { return fidelity + left_penalty + right_penalty; }
};

ObjectiveTerms eval_terms(const Vector& y, const MeasurementOperator& op, const Factorization& f,
                          const RegularizationParams& p);
double eval_J(const Vector& y, const MeasurementOperator& op, const Factorization& f,
              const RegularizationParams& p);

double misfit(const Vector& y, const MeasurementOperator& op, const Factorization& f);

/// Scalar shrinkage: argmin_x 0.5 (x - z)^2 + mu * Enet(x).
double prox_enet_scalar(double z, ElasticNetWeights w, double mu);
/// Componentwise prox of mu * Enet.
Matrix prox_enet(const Matrix& z, ElasticNetWeights w, double mu);

/// Gradient of U -> ||y - A(U V^T)||^2 at the current factorization.
Matrix grad_fidelity_U(const Vector& y, const MeasurementOperator& op, const Factorization& f);
/// Gradient of V -> ||y - A(U V^T)||^2 at the current factorization.
Matrix grad_fidelity_V(const Vector& y, const MeasurementOperator& op, const Factorization& f);

}  // namespace lrsense
