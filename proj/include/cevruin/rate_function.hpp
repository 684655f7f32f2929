/**
 * @brief Absorbed paths, the large-deviations action of a path, and the
 * closed-form most likely ruin path u*_t with its control w*_t.
 *
 * For a path u with u_0 = 1 absorbed at theta(u) the action is
 *   J_T(u) = 1/(2 sigma^2) int_0^{theta(u) ^ T} ((u' - mu u) / u^gamma)^2 dt.
 */
#pragma once

#include "io.hpp"
#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cevruin {

/// Nonnegative path on a strictly increasing grid starting at 0, frozen at 0 after the first zero.
class AbsorbedPath {
public:
    AbsorbedPath(std::vector<double> grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (grid_.size() != values_.size())
            throw std::invalid_argument("AbsorbedPath: grid and values differ in length");
        if (grid_.size() < 2) throw std::invalid_argument("AbsorbedPath: need at least two points");
        if (grid_.front() != 0.0) throw std::invalid_argument("AbsorbedPath: grid must start at 0");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1]))
                throw std::invalid_argument("AbsorbedPath: grid must be strictly increasing");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
                throw std::invalid_argument("AbsorbedPath: values must be finite and nonnegative");
            if (absorption_index_) {
                if (values_[i] != 0.0)
                    throw std::invalid_argument("AbsorbedPath: value leaves zero after absorption");
            } else if (values_[i] == 0.0) {
                absorption_index_ = i;
            }
        }
    }

    /// Clamps negatives to zero and freezes everything after the first zero.
    static AbsorbedPath freeze(std::vector<double> grid, std::vector<double> values) {
        bool absorbed = false;
        for (double& v : values) {
            if (absorbed || !(v > 0.0)) {
                v = 0.0;
                absorbed = true;
            }
        }
        return AbsorbedPath(std::move(grid), std::move(values));
    }

    static AbsorbedPath uniform(double T, std::vector<double> values) {
        const std::size_t n = values.size();
        if (n < 2) throw std::invalid_argument("AbsorbedPath: need at least two points");
        std::vector<double> grid(n);
        for (std::size_t i = 0; i < n; ++i) grid[i] = T * static_cast<double>(i) / static_cast<double>(n - 1);
        grid.back() = T;
        return AbsorbedPath(std::move(grid), std::move(values));
    }

    [[nodiscard]] std::span<const double> grid() const { return grid_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return grid_.size(); }
    [[nodiscard]] std::optional<std::size_t> absorption_index() const { return absorption_index_; }

    void write_csv(std::ostream& out) const {
        out << "t,u\n";
        for (std::size_t i = 0; i < grid_.size(); ++i)
            out << io::format_double(grid_[i]) << ',' << io::format_double(values_[i]) << '\n';
    }

    static AbsorbedPath read_csv(std::istream& in) {
        std::string line;
        if (!io::read_line(in, line) || line != "t,u")
            throw std::runtime_error("path CSV: expected header 't,u'");
        std::vector<double> grid, values;
        while (io::read_line(in, line)) {
            if (line.empty()) continue;
            const auto cols = io::split(line, ',');
            if (cols.size() != 2) throw std::runtime_error("path CSV: expected 2 columns: " + line);
            grid.push_back(io::parse_double(cols[0]));
            values.push_back(io::parse_double(cols[1]));
        }
        return AbsorbedPath(std::move(grid), std::move(values));
    }

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    std::optional<std::size_t> absorption_index_;
};

/// Grid time of the first zero value, if any.
inline std::optional<double> absorption_time(const AbsorbedPath& path) {
    if (auto i = path.absorption_index()) return path.grid()[*i];
    return std::nullopt;
}

/// Control levels w_i on a grid over [0, theta].
class ControlFunction {
public:
    ControlFunction(std::vector<double> grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (grid_.size() != values_.size() || grid_.size() < 2)
            throw std::invalid_argument("ControlFunction: need matching grid and values of length >= 2");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1]))
                throw std::invalid_argument("ControlFunction: grid must be strictly increasing");
        if (!std::isfinite(squared_integral()))
            throw std::invalid_argument("ControlFunction: squared integral is not finite");
    }

    [[nodiscard]] std::span<const double> grid() const { return grid_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    /// Trapezoidal int w^2 dt.
    [[nodiscard]] double squared_integral() const {
        double sum = 0.0;
        for (std::size_t i = 1; i < grid_.size(); ++i)
            sum += 0.5 * (values_[i - 1] * values_[i - 1] + values_[i] * values_[i]) * (grid_[i] - grid_[i - 1]);
        return sum;
    }

private:
    std::vector<double> grid_;
    std::vector<double> values_;
};

/// A rate value; the infinite rate compares above every finite one.
class Rate {
public:
    constexpr explicit Rate(double value) : value_(value) {}
    static constexpr Rate infinite() { return Rate(std::numeric_limits<double>::infinity()); }

    [[nodiscard]] constexpr bool is_finite() const { return value_ < std::numeric_limits<double>::infinity(); }
    [[nodiscard]] constexpr double value() const { return value_; }

    constexpr auto operator<=>(const Rate&) const = default;

private:
    double value_;
};

struct RateOptions {
    /// Values below floor are lifted to floor before differencing (0 disables).
    double floor = 0.0;
};

/**
 * Discrete action of a path. On each interval up to the absorption point the
 * slope is the forward difference and the integrand denominator uses the
 * interval midpoint value, which is exact for piecewise-linear paths. Intervals
 * with zero midpoint and zero slope contribute nothing; a zero midpoint with a
 * nonzero slope is infinite.
 */
inline Rate rate_J(const AbsorbedPath& path, const ModelParams& params, RateOptions options = {}) {
    params.validate();
    const auto t = path.grid();
    const auto u = path.values();
    if (u[0] != 1.0) return Rate::infinite();

    const std::size_t last = path.absorption_index().value_or(path.size() - 1);
    const auto lift = [&](double x) { return std::max(x, options.floor); };
    const double gamma = params.gamma;

    double sum = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
        const double dt = t[i + 1] - t[i];
        const double lo = lift(u[i]);
        const double hi = lift(u[i + 1]);
        const double slope = (hi - lo) / dt;
        const double mid = 0.5 * (lo + hi);
        if (mid == 0.0) {
            if (slope != 0.0) return Rate::infinite();
            continue;
        }
        const double denom = gamma == 0.5 ? std::sqrt(mid) : std::pow(mid, gamma);
        const double r = (slope - params.mu * mid) / denom;
        sum += r * r * dt;
    }
    return Rate(sum / (2.0 * params.sigma * params.sigma));
}

/// u*_t = e^{mu t} [(e^{-2a mu t} - e^{-2a mu T}) / (1 - e^{-2a mu T})]^{1/a}, a = 1 - gamma.
inline double most_likely_path(const ModelParams& p, double t, MuBranch branch = MuBranch::automatic) {
    p.validate();
    detail::check_time(p, t);
    const double T = p.horizon_T;
    if (t == T) return 0.0;
    const double a = p.norm_exponent();
    const double b = 2.0 * a * p.mu;
    const bool limit = detail::limit_branch(p, branch);
    const double ratio = std::exp(-b * t) * ((T - t) / T) * detail::phi1(b * (T - t), limit) /
                         detail::phi1(b * T, limit);
    return std::exp(p.mu * t) * std::pow(ratio, 1.0 / a);
}

/// w*_t = -(1/sigma) 2 mu / (1 - e^{-2 mu a T}) e^{-mu a t}; constant -1/(sigma a T) at mu = 0.
inline double optimal_control(const ModelParams& p, double t, MuBranch branch = MuBranch::automatic) {
    p.validate();
    detail::check_time(p, t);
    const double a = p.norm_exponent();
    const double T = p.horizon_T;
    const double scale = p.sigma * a * T * detail::phi1(2.0 * a * p.mu * T, detail::limit_branch(p, branch));
    return -std::exp(-a * p.mu * t) / scale;
}

/// u* sampled on a uniform grid of n_intervals steps over [0, T].
inline AbsorbedPath most_likely_path_grid(const ModelParams& p, std::size_t n_intervals) {
    if (n_intervals < 1) throw std::invalid_argument("most_likely_path_grid: need at least one interval");
    std::vector<double> grid(n_intervals + 1), values(n_intervals + 1);
    for (std::size_t i = 0; i <= n_intervals; ++i) {
        grid[i] = p.horizon_T * static_cast<double>(i) / static_cast<double>(n_intervals);
        values[i] = most_likely_path(p, std::min(grid[i], p.horizon_T));
    }
    grid.back() = p.horizon_T;
    values.back() = 0.0;
    return AbsorbedPath::freeze(std::move(grid), std::move(values));
}

/// w* sampled on a uniform grid of n_intervals steps over [0, T].
inline ControlFunction optimal_control_grid(const ModelParams& p, std::size_t n_intervals) {
    if (n_intervals < 1) throw std::invalid_argument("optimal_control_grid: need at least one interval");
    std::vector<double> grid(n_intervals + 1), values(n_intervals + 1);
    for (std::size_t i = 0; i <= n_intervals; ++i) {
        grid[i] = p.horizon_T * static_cast<double>(i) / static_cast<double>(n_intervals);
        values[i] = optimal_control(p, std::min(grid[i], p.horizon_T));
    }
    return ControlFunction(std::move(grid), std::move(values));
}

}  // namespace cevruin
