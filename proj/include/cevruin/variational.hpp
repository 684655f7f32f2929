/**
 * @brief Discrete solver for the minimum-energy control problem
 *
 *   minimize  int_0^theta w_t^2 dt
 *   subject to  v' = a mu v + sigma a w,  v_0 = 1,  v_theta = 0,   a = 1 - gamma,
 *
 * which is equivalent to the single linear constraint
 *   int_0^theta e^{-a mu s} w_s ds = -1 / (sigma a).
 * All integrals use the trapezoidal rule on a uniform grid, so the solution is
 * the closed-form Lagrange point w_i = lambda e^{-a mu t_i}.
 */
#pragma once

#include "model.hpp"
#include "rate_function.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cevruin {

struct DiscreteControlProblem {
    ModelParams params;
    std::size_t n_steps = 1000;
    double theta = 1.0;

    void validate() const {
        params.validate();
        if (n_steps < 2) throw std::invalid_argument("control problem: n_steps must be >= 2");
        if (!(theta > 0.0) || theta > params.horizon_T)
            throw std::invalid_argument("control problem: theta must lie in (0, T]");
    }

    [[nodiscard]] double step() const { return theta / static_cast<double>(n_steps); }
    [[nodiscard]] double time(std::size_t i) const {
        return i == n_steps ? theta : theta * static_cast<double>(i) / static_cast<double>(n_steps);
    }
    [[nodiscard]] double quadrature_weight(std::size_t i) const {
        return (i == 0 || i == n_steps) ? 0.5 * step() : step();
    }
    /// e^{-a mu t_i}, the constraint kernel.
    [[nodiscard]] double kernel(std::size_t i) const {
        return std::exp(-params.norm_exponent() * params.mu * time(i));
    }
    /// Right-hand side -1 / (sigma a) of the integral constraint.
    [[nodiscard]] double target() const { return -1.0 / (params.sigma * params.norm_exponent()); }
};

namespace detail {

/// Trapezoidal sum of the squared kernel, sum_i q_i e^{-2 a mu t_i}.
inline double kernel_energy(const DiscreteControlProblem& problem) {
    double sum = 0.0;
    for (std::size_t i = 0; i <= problem.n_steps; ++i) {
        const double g = problem.kernel(i);
        sum += problem.quadrature_weight(i) * g * g;
    }
    return sum;
}

}  // namespace detail

inline ControlFunction solve_least_norm(const DiscreteControlProblem& problem) {
    problem.validate();
    if (!(problem.step() > 0.0)) throw std::invalid_argument("control problem: degenerate grid");
    const double lambda = problem.target() / detail::kernel_energy(problem);
    std::vector<double> grid(problem.n_steps + 1), values(problem.n_steps + 1);
    for (std::size_t i = 0; i <= problem.n_steps; ++i) {
        grid[i] = problem.time(i);
        values[i] = lambda * problem.kernel(i);
    }
    return ControlFunction(std::move(grid), std::move(values));
}

/// Discrete constraint value minus its target; zero up to roundoff for the Lagrange solution.
inline double constraint_residual(const DiscreteControlProblem& problem, const ControlFunction& control) {
    const auto w = control.values();
    if (w.size() != problem.n_steps + 1)
        throw std::invalid_argument("constraint_residual: control grid does not match problem");
    double sum = 0.0;
    for (std::size_t i = 0; i <= problem.n_steps; ++i) sum += problem.quadrature_weight(i) * problem.kernel(i) * w[i];
    return sum - problem.target();
}

/// 1/2 int w^2 dt (trapezoidal).
inline double action(const ControlFunction& control) { return 0.5 * control.squared_integral(); }

/**
 * Action of the least-norm control with the kernel quadrature Romberg-extrapolated
 * over n, 2n and 4n steps. The trapezoidal error of a smooth integrand expands in
 * even powers of the step, so two elimination levels leave O(h^6).
 */
inline double extrapolated_action(const ModelParams& params, double theta, std::size_t n_steps) {
    DiscreteControlProblem problem{params, n_steps, theta};
    problem.validate();
    double s[3];
    for (int k = 0; k < 3; ++k) {
        problem.n_steps = n_steps << k;
        s[k] = detail::kernel_energy(problem);
    }
    const double r1a = (4.0 * s[1] - s[0]) / 3.0;
    const double r1b = (4.0 * s[2] - s[1]) / 3.0;
    const double r2 = (16.0 * r1b - r1a) / 15.0;
    const double c = problem.target();
    return 0.5 * c * c / r2;
}

/**
 * Integrates v' = a mu v + sigma a w with the trapezoidal (Crank-Nicolson) step
 * on the control's grid, starting from v_0 = 1.
 */
inline std::vector<double> propagate_state(const ModelParams& params, const ControlFunction& control) {
    params.validate();
    const double a = params.norm_exponent();
    const double k = a * params.mu;
    const auto t = control.grid();
    const auto w = control.values();
    std::vector<double> v(t.size());
    v[0] = 1.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double h = t[i + 1] - t[i];
        const double forcing = params.sigma * a * 0.5 * (w[i] + w[i + 1]);
        v[i + 1] = (v[i] * (1.0 + 0.5 * h * k) + h * forcing) / (1.0 - 0.5 * h * k);
    }
    return v;
}

struct ThetaChoice {
    double theta;
    double action_value;
};

/// Scans theta over {T j / n_theta : j = 1..n_theta} and keeps the cheapest absorption time.
inline ThetaChoice best_theta(const ModelParams& params, std::size_t n_steps, std::size_t n_theta = 100) {
    params.validate();
    if (n_theta < 1) throw std::invalid_argument("best_theta: n_theta must be >= 1");
    ThetaChoice best{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 1; j <= n_theta; ++j) {
        const double theta = j == n_theta ? params.horizon_T
                                          : params.horizon_T * static_cast<double>(j) / static_cast<double>(n_theta);
        const double value = action(solve_least_norm({params, n_steps, theta}));
        if (value < best.action_value) best = {theta, value};
    }
    return best;
}

}  // namespace cevruin
