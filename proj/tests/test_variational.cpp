#include "cevruin/variational.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cevruin;

TEST(SolveLeastNorm, ZeroDriftGivesConstantControl) {
    const DiscreteControlProblem problem{{0.0, 1.0, 0.5, 1.0}, 1000, 1.0};
    const auto w = solve_least_norm(problem);
    ASSERT_EQ(w.values().size(), 1001u);
    for (double v : w.values()) EXPECT_NEAR(v, -2.0, 1e-12);
    EXPECT_LE(std::abs(constraint_residual(problem, w)), 1e-12);
}

TEST(SolveLeastNorm, ConstraintResidualVanishes) {
    for (double mu : {-1.0, -0.1, 0.1, 2.5})
        for (double gamma : {0.5, 0.8}) {
            const DiscreteControlProblem problem{{mu, 1.7, gamma, 2.0}, 3000, 1.3};
            EXPECT_LE(std::abs(constraint_residual(problem, solve_least_norm(problem))), 1e-12);
        }
}

TEST(SolveLeastNorm, ProportionalToConstraintKernel) {
    const DiscreteControlProblem problem{{0.6, 1.0, 0.7, 1.0}, 5000, 0.8};
    const auto w = solve_least_norm(problem);
    const double a = 0.3;
    const double ratio0 = w.values()[0] / std::exp(-a * 0.6 * w.grid()[0]);
    for (std::size_t i = 0; i < w.values().size(); ++i) {
        const double ratio = w.values()[i] / std::exp(-a * 0.6 * w.grid()[i]);
        EXPECT_LT(std::abs(ratio / ratio0 - 1.0), 1e-10);
    }
}

TEST(SolveLeastNorm, ConvergesToClosedFormControl) {
    const ModelParams p{0.1, 1.0, 0.5, 1.0};
    const auto w = solve_least_norm({p, 10000, 1.0});
    double sup = 0.0;
    for (std::size_t i = 0; i < w.values().size(); ++i)
        sup = std::max(sup, std::abs(w.values()[i] - optimal_control(p, w.grid()[i])));
    EXPECT_LE(sup, 5e-4);
    // Grid doubling shrinks the gap (second order for the trapezoidal kernel sum).
    const auto w2 = solve_least_norm({p, 20000, 1.0});
    double sup2 = 0.0;
    for (std::size_t i = 0; i < w2.values().size(); ++i)
        sup2 = std::max(sup2, std::abs(w2.values()[i] - optimal_control(p, w2.grid()[i])));
    EXPECT_LT(sup2, sup);
}

TEST(SolveLeastNorm, RejectsDegenerateProblems) {
    EXPECT_THROW(solve_least_norm({{0.0, 1.0, 0.5, 1.0}, 1, 1.0}), std::invalid_argument);
    EXPECT_THROW(solve_least_norm({{0.0, 1.0, 0.5, 1.0}, 100, 0.0}), std::invalid_argument);
    EXPECT_THROW(solve_least_norm({{0.0, 1.0, 0.5, 1.0}, 100, 1.5}), std::invalid_argument);
}

TEST(Action, Examples) {
    EXPECT_DOUBLE_EQ(action(ControlFunction({0.0, 0.5, 1.0}, {-2.0, -2.0, -2.0})), 2.0);
    EXPECT_EQ(action(ControlFunction({0.0, 1.0}, {0.0, 0.0})), 0.0);
    EXPECT_NEAR(action(solve_least_norm({{0.1, 1.0, 0.5, 1.0}, 1000, 1.0})), 2.10166638895501, 1e-4);
}

TEST(Action, DeficitShrinksUnderGridDoubling) {
    const ModelParams p{0.5, 1.0, 0.6, 1.0};
    const double exponent = asymptotic_exponent(p);
    double prev = std::abs(exponent - action(solve_least_norm({p, 100, 1.0})));
    for (std::size_t n = 200; n <= 3200; n *= 2) {
        const double a = action(solve_least_norm({p, n, 1.0}));
        const double deficit = std::abs(exponent - a);
        EXPECT_LE(a, exponent + 1e-12);
        EXPECT_GE(a, exponent - 10.0 / static_cast<double>(n));
        EXPECT_GE(std::log2(prev / deficit), 1.0);
        prev = deficit;
    }
}

TEST(Action, ExtrapolatedAgreesWithClosedFormExponent) {
    for (double mu : {-2.0, -0.1, 0.0, 0.1, 1.0})
        for (double gamma : {0.5, 0.75, 0.9}) {
            const ModelParams p{mu, 1.2, gamma, 1.0};
            const double e = asymptotic_exponent(p);
            EXPECT_LT(std::abs(extrapolated_action(p, 1.0, 1000) - e) / e, 1e-12) << mu << " " << gamma;
        }
}

TEST(PropagateState, SolvedControlSteersStateToZero) {
    for (double mu : {-0.3, 0.0, 0.1, 1.0}) {
        const ModelParams p{mu, 1.0, 0.6, 1.0};
        for (double theta : {0.4, 1.0}) {
            const auto v = propagate_state(p, solve_least_norm({p, 4000, theta}));
            EXPECT_EQ(v.front(), 1.0);
            EXPECT_NEAR(v.back(), 0.0, 1e-8) << mu << " " << theta;
        }
    }
}

TEST(BestTheta, AbsorbsAtTheHorizon) {
    const ModelParams pos{0.1, 1.0, 0.5, 1.0};
    const auto best = best_theta(pos, 1000, 100);
    EXPECT_DOUBLE_EQ(best.theta, 1.0);
    EXPECT_NEAR(best.action_value, asymptotic_exponent(pos), 1e-3);

    const ModelParams neg{-0.1, 1.0, 0.5, 1.0};
    const auto best_neg = best_theta(neg, 1000, 100);
    EXPECT_DOUBLE_EQ(best_neg.theta, 1.0);
    EXPECT_NEAR(best_neg.action_value, 1.90166638895501, 1e-3);
    EXPECT_NEAR(best_neg.action_value, asymptotic_exponent(neg), 1e-3);

    EXPECT_DOUBLE_EQ(best_theta({0.0, 1.0, 0.75, 2.0}, 500, 40).theta, 2.0);
}

TEST(BestTheta, EarlierAbsorptionIsStrictlyMoreExpensive) {
    const ModelParams p{0.4, 1.0, 0.7, 1.0};
    const double at_T = action(solve_least_norm({p, 1000, 1.0}));
    for (int j = 1; j < 100; ++j) EXPECT_GT(action(solve_least_norm({p, 1000, j / 100.0})), at_T) << j;
}
