#include "lrsense/objective.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lrsense;

namespace {

struct Instance {
    MeasurementOperator op;
    Vector y;
    Factorization f;
};

Instance random_instance(std::uint64_t seed, int n1 = 5, int n2 = 6, int r = 4, int m = 30) {
    Rng rng(seed);
    auto op = make_gaussian(n1, n2, m, rng);
    Vector y(m);
    for (int i = 0; i < m; ++i) y(i) = standard_normal(rng);
    Matrix u(n1, r), v(n2, r);
    for (int i = 0; i < u.size(); ++i) u.data()[i] = standard_normal(rng);
    for (int i = 0; i < v.size(); ++i) v.data()[i] = standard_normal(rng);
    return {std::move(op), std::move(y), Factorization(u, v)};
}

double grid_prox(double z, ElasticNetWeights w, double mu) {
    double best = 0.0, best_val = 0.5 * z * z;
    const double span = 3.0 * std::abs(z);
    for (double x = -span; x <= span; x += 1e-4) {
        const double val = 0.5 * (x - z) * (x - z) + mu * (w.quadratic * x * x + w.l1 * std::abs(x));
        if (val < best_val) {
            best_val = val;
            best = x;
        }
    }
    return best;
}

double prox_objective(const Matrix& x, const Matrix& z, ElasticNetWeights w, double mu) {
    return 0.5 * (x - z).squaredNorm() + mu * elastic_net(x, w);
}

}  // namespace

TEST(RegularizationParams, Validation) {
    EXPECT_NO_THROW(RegularizationParams::equal(0.3).validate());
    RegularizationParams bad = RegularizationParams::equal(0.3);
    bad.beta2 = -1.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    RegularizationParams locked = RegularizationParams::equal(0.3);
    locked.mode = RatioMode::theorem_locked;
    locked.gamma = 1.0;
    locked.s = 4.0;
    EXPECT_THROW(locked.validate(), std::invalid_argument);
    locked.alpha1 = locked.beta1 = 0.6;
    EXPECT_NO_THROW(locked.validate());
}

TEST(EvalJ, ZeroFactorization) {
    auto inst = random_instance(1);
    Factorization zero(Matrix::Zero(5, 4), Matrix::Zero(6, 4));
    EXPECT_DOUBLE_EQ(eval_J(inst.y, inst.op, zero, RegularizationParams::equal(0.7)), inst.y.squaredNorm());
}

TEST(EvalJ, ExactDataNoPenalty) {
    auto inst = random_instance(2);
    Vector y = inst.op.forward(inst.f.product());
    EXPECT_NEAR(eval_J(y, inst.op, inst.f, RegularizationParams{}), 0.0, 1e-24);
}

TEST(EvalJ, TermwiseOracle) {
    auto inst = random_instance(3);
    RegularizationParams p{0.1, 0.2, 0.3, 0.4};
    const Matrix x = inst.f.product();
    double fid = 0.0;
    for (int i = 0; i < inst.op.m(); ++i) {
        const double r = inst.y(i) - (inst.op.component(i).array() * x.array()).sum() / std::sqrt(30.0);
        fid += r * r;
    }
    const double expected = fid + 0.1 * inst.f.U.squaredNorm() + 0.2 * inst.f.U.cwiseAbs().sum() +
                            0.3 * inst.f.V.squaredNorm() + 0.4 * inst.f.V.cwiseAbs().sum();
    EXPECT_NEAR(eval_J(inst.y, inst.op, inst.f, p), expected, 1e-12 * expected);
    auto terms = eval_terms(inst.y, inst.op, inst.f, p);
    EXPECT_NEAR(terms.fidelity, fid, 1e-12 * fid);
    EXPECT_NEAR(std::sqrt(terms.fidelity), misfit(inst.y, inst.op, inst.f), 1e-12);
}

TEST(EvalJ, ShapeMismatch) {
    auto inst = random_instance(4);
    Factorization wrong(Matrix::Zero(6, 4), Matrix::Zero(5, 4));
    EXPECT_THROW(eval_J(inst.y, inst.op, wrong, RegularizationParams{}), std::invalid_argument);
}

TEST(EvalJ, SeparatelyConvex) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.01, 0.99);
    for (int k = 0; k < 50; ++k) {
        auto inst = random_instance(100 + k);
        auto other = random_instance(200 + k);
        const RegularizationParams p{0.3, 0.1, 0.2, 0.05};
        const double lam = unif(rng);
        Factorization mix(lam * inst.f.U + (1 - lam) * other.f.U, inst.f.V);
        Factorization alt(other.f.U, inst.f.V);
        const double lhs = eval_J(inst.y, inst.op, mix, p);
        const double rhs = lam * eval_J(inst.y, inst.op, inst.f, p) + (1 - lam) * eval_J(inst.y, inst.op, alt, p);
        EXPECT_LE(lhs, rhs + 1e-10);
        Factorization mixv(inst.f.U, lam * inst.f.V + (1 - lam) * other.f.V);
        Factorization altv(inst.f.U, other.f.V);
        EXPECT_LE(eval_J(inst.y, inst.op, mixv, p),
                  lam * eval_J(inst.y, inst.op, inst.f, p) + (1 - lam) * eval_J(inst.y, inst.op, altv, p) + 1e-10);
    }
}

TEST(ProxEnet, ZeroWeightsIsIdentity) {
    Matrix z = Matrix::Random(4, 3);
    EXPECT_TRUE((prox_enet(z, {0.0, 0.0}, 0.7).array() == z.array()).all());
}

TEST(ProxEnet, ClosedFormExample) {
    EXPECT_DOUBLE_EQ(prox_enet_scalar(1.0, {0.5, 0.25}, 1.0), 0.375);
    EXPECT_NEAR(grid_prox(1.0, {0.5, 0.25}, 1.0), 0.375, 1e-4);
    EXPECT_DOUBLE_EQ(prox_enet_scalar(-1.0, {0.5, 0.25}, 1.0), -0.375);
}

TEST(ProxEnet, ThresholdRegionIsZero) {
    for (double z : {-0.3, -0.1, 0.0, 0.2, 0.3}) EXPECT_EQ(prox_enet_scalar(z, {1.0, 0.6}, 0.5), 0.0);
}

TEST(ProxEnet, ShrinksTowardZeroKeepingSign) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int k = 0; k < 1000; ++k) {
        const double z = 3 * g(rng);
        const double x = prox_enet_scalar(z, {std::abs(g(rng)), std::abs(g(rng))}, std::abs(g(rng)) + 1e-3);
        EXPECT_LE(std::abs(x), std::abs(z));
        EXPECT_TRUE(x == 0.0 || (x > 0) == (z > 0));
    }
}

TEST(ProxEnet, RejectsNonPositiveStep) {
    EXPECT_THROW(prox_enet(Matrix::Ones(2, 2), {1, 1}, 0.0), std::invalid_argument);
}

TEST(ProxEnet, MatchesGridOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const double z = 4 * (unif(rng) - 0.5);
        const ElasticNetWeights w{unif(rng), unif(rng)};
        const double mu = 0.05 + 2 * unif(rng);
        EXPECT_NEAR(prox_enet_scalar(z, w, mu), grid_prox(z, w, mu), 2e-4);
    }
}

TEST(ProxEnet, FirmlyNonexpansive) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const ElasticNetWeights w{unif(rng), unif(rng)};
        const double mu = 0.05 + 2 * unif(rng);
        for (int i = 0; i < 100; ++i)
            for (int j = 0; j < 100; ++j) {
                const double a = -3.0 + 6.0 * i / 99, b = -3.0 + 6.0 * j / 99;
                const double sa = prox_enet_scalar(a, w, mu), sb = prox_enet_scalar(b, w, mu);
                ASSERT_LE(std::abs(sa - sb), std::abs(a - b) + 1e-15);
                ASSERT_LE((sa - sb) * (sa - sb), (sa - sb) * (a - b) + 1e-15);
            }
    }
}

TEST(ProxEnet, LocalOptimality) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> g;
    for (int k = 0; k < 50; ++k) {
        Matrix z(3, 4);
        for (int i = 0; i < z.size(); ++i) z.data()[i] = 2 * g(rng);
        const ElasticNetWeights w{unif(rng), unif(rng)};
        const double mu = 0.05 + 2 * unif(rng);
        const Matrix x = prox_enet(z, w, mu);
        const double fx = prox_objective(x, z, w, mu);
        for (int p = 0; p < 200; ++p) {
            Matrix d(3, 4);
            for (int i = 0; i < d.size(); ++i) d.data()[i] = 1e-2 * g(rng);
            ASSERT_LE(fx, prox_objective(x + d, z, w, mu) + 1e-14);
        }
        for (int i = 0; i < z.size(); ++i)
            EXPECT_NEAR(x.data()[i], grid_prox(z.data()[i], w, mu), 1e-4);
    }
}

TEST(GradFidelity, ZeroResidualGivesZero) {
    auto inst = random_instance(10);
    Vector y = inst.op.forward(inst.f.product());
    EXPECT_LT(grad_fidelity_U(y, inst.op, inst.f).norm(), 1e-12);
    EXPECT_LT(grad_fidelity_V(y, inst.op, inst.f).norm(), 1e-12);
}

TEST(GradFidelity, CentralDifferences) {
    for (int k = 0; k < 20; ++k) {
        auto inst = random_instance(300 + k, 5, 6, 2, 30);
        auto fid = [&](const Factorization& f) { return std::pow(misfit(inst.y, inst.op, f), 2); };
        const double h = 1e-5;
        Matrix gu = grad_fidelity_U(inst.y, inst.op, inst.f);
        Matrix fd_u(gu.rows(), gu.cols());
        for (int i = 0; i < gu.size(); ++i) {
            Factorization p = inst.f, m = inst.f;
            p.U.data()[i] += h;
            m.U.data()[i] -= h;
            fd_u.data()[i] = (fid(p) - fid(m)) / (2 * h);
        }
        EXPECT_LT((gu - fd_u).norm() / gu.norm(), 1e-5);
        Matrix gv = grad_fidelity_V(inst.y, inst.op, inst.f);
        Matrix fd_v(gv.rows(), gv.cols());
        for (int i = 0; i < gv.size(); ++i) {
            Factorization p = inst.f, m = inst.f;
            p.V.data()[i] += h;
            m.V.data()[i] -= h;
            fd_v.data()[i] = (fid(p) - fid(m)) / (2 * h);
        }
        EXPECT_LT((gv - fd_v).norm() / gv.norm(), 1e-5);
    }
}

TEST(GradFidelity, AffineInEachBlock) {
    auto inst = random_instance(11);
    Matrix u1 = Matrix::Random(5, 4), u2 = Matrix::Random(5, 4);
    auto g = [&](const Matrix& u) { return grad_fidelity_U(inst.y, inst.op, Factorization(u, inst.f.V)); };
    EXPECT_LT((g(u1 + u2) - g(u1) - g(u2) + g(Matrix::Zero(5, 4))).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GradFidelity, TransposedInstanceSwapsRoles) {
    auto inst = random_instance(12);
    std::vector<Matrix> transposed;
    for (int i = 0; i < inst.op.m(); ++i) transposed.push_back(inst.op.component(i).transpose());
    auto op_t = MeasurementOperator::from_matrices(transposed);
    Factorization swapped(inst.f.V, inst.f.U);
    EXPECT_LT((grad_fidelity_V(inst.y, inst.op, inst.f) - grad_fidelity_U(inst.y, op_t, swapped)).norm(), 1e-10);
    EXPECT_LT((grad_fidelity_U(inst.y, inst.op, inst.f) - grad_fidelity_V(inst.y, op_t, swapped)).norm(), 1e-10);
}
