/**
 * @brief Monte Carlo simulation of the CEV diffusion absorbed at zero.
 *
 * Three schemes are provided:
 *  - euler_full_truncation: Euler on X with max(X, 0) inside the diffusion;
 *  - lamperti: Euler on V = X^{1-gamma}, whose drift carries the singular
 *    term -gamma (1-gamma) sigma^2 / (2V) that drives absorption;
 *  - exact_cir: exact square-root transitions (gamma = 1/2 only).
 *
 * Every path draws from its own generator keyed by (seed, path index). Paths
 * are grouped into fixed-size blocks whose partial sums are merged in block
 * order, so results do not depend on the number of worker threads.
 */
#pragma once

#include "model.hpp"
#include "random.hpp"
#include "rate_function.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cevruin {

enum class Scheme { euler_full_truncation, lamperti, exact_cir };

inline std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::euler_full_truncation: return "euler_full_truncation";
        case Scheme::lamperti: return "lamperti";
        case Scheme::exact_cir: return "exact_cir";
    }
    return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
    if (name == "euler_full_truncation" || name == "euler") return Scheme::euler_full_truncation;
    if (name == "lamperti") return Scheme::lamperti;
    if (name == "exact_cir" || name == "exact") return Scheme::exact_cir;
    throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

inline constexpr std::size_t kDefaultSteps = 4000;

struct SimConfig {
    ModelParams params;
    double initial_K = 1.0;
    Scheme scheme = Scheme::lamperti;
    std::size_t n_steps = kDefaultSteps;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    bool importance_sampling = false;
    /// Worker threads; 0 means std::thread::hardware_concurrency().
    unsigned n_threads = 0;

    [[nodiscard]] ScaleParams scale() const { return ScaleParams(initial_K, params.gamma); }
    [[nodiscard]] double step() const { return params.horizon_T / static_cast<double>(n_steps); }

    void validate() const {
        params.validate();
        (void)scale();
        if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
        if (scheme == Scheme::exact_cir && params.gamma != 0.5)
            throw UnsupportedCase("exact_cir scheme requires gamma = 1/2");
    }
};

struct RuinEstimate {
    double p_hat = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_ruined = 0;
    Scheme scheme = Scheme::lamperti;
    std::uint64_t seed = 0;
    bool importance_sampled = false;
    double elapsed = 0.0;
};

struct PathOutcome {
    bool ruined = false;
    /// First grid time at which the path is observed at zero.
    std::optional<double> tau0;
    double terminal_value = 0.0;
    /// log dP/dQ accumulated up to absorption (0 without a tilt).
    double log_weight = 0.0;
    /// sum_i sigma (1-gamma) e^{-(1-gamma) mu t_i} sqrt(dt) Z_i; complete only for surviving paths.
    double martingale = 0.0;
};

namespace detail {

/// Per-run constants shared by every path.
struct StepPlan {
    std::size_t n_steps;
    double dt;
    double sqrt_dt;
    std::vector<double> kernel;  // sigma (1-gamma) e^{-(1-gamma) mu t_i} sqrt(dt)
    std::vector<double> tilt;    // c(t_i); empty when not tilting

    StepPlan(const SimConfig& cfg, std::span<const double> tilt_values)
        : n_steps(cfg.n_steps), dt(cfg.step()), sqrt_dt(std::sqrt(dt)), tilt(tilt_values.begin(), tilt_values.end()) {
        const double a = cfg.params.norm_exponent();
        kernel.resize(n_steps);
        for (std::size_t i = 0; i < n_steps; ++i)
            kernel[i] = cfg.params.sigma * a * std::exp(-a * cfg.params.mu * time(i)) * sqrt_dt;
        if (!tilt.empty() && tilt.size() != n_steps)
            throw std::invalid_argument("tilt must have one value per step");
    }

    [[nodiscard]] double time(std::size_t i) const {
        return static_cast<double>(i) * dt;
    }
};

struct NoRecorder {
    static constexpr bool active = false;
    void operator()(double, double) const {}
};

struct FunctionRecorder {
    static constexpr bool active = true;
    std::function<void(double, double)> emit;
    void operator()(double t, double x) const { emit(t, x); }
};

inline double cev_power(double x, double gamma) { return gamma == 0.5 ? std::sqrt(x) : std::pow(x, gamma); }

/// Euler or Lamperti path. Stops at absorption unless recording, in which case
/// the remaining grid points are emitted as 0.
template <class Recorder>
PathOutcome discretized_path(const SimConfig& cfg, const StepPlan& plan, Xoshiro256pp& rng, const Recorder& record) {
    const ModelParams& p = cfg.params;
    const double a = p.norm_exponent();
    const double T = p.horizon_T;
    const bool tilted = !plan.tilt.empty();
    std::normal_distribution<double> normal;
    PathOutcome out;

    const bool lamperti = cfg.scheme == Scheme::lamperti;
    double x = cfg.initial_K;
    double v = lamperti ? lamperti_forward(x, p.gamma) : 0.0;
    const double lam_drift = a * p.mu * plan.dt;
    const double lam_singular = 0.5 * p.gamma * a * p.sigma * p.sigma * plan.dt;
    const double lam_noise = p.sigma * a * plan.sqrt_dt;

    if constexpr (Recorder::active) record(0.0, x);
    for (std::size_t i = 0; i < plan.n_steps; ++i) {
        const double t_next = i + 1 == plan.n_steps ? T : plan.time(i + 1);
        if (out.ruined) {
            if constexpr (!Recorder::active) break;
            record(t_next, 0.0);
            continue;
        }
        const double z = normal(rng);
        out.martingale += plan.kernel[i] * z;
        const double c = tilted ? plan.tilt[i] : 0.0;
        if (tilted) out.log_weight -= c * plan.sqrt_dt * z + 0.5 * c * c * plan.dt;

        bool hit = false;
        if (lamperti) {
            v += lam_drift * v - lam_singular / v + lam_noise * (z + c * plan.sqrt_dt);
            hit = v <= 0.0;
            if constexpr (Recorder::active) x = hit ? 0.0 : lamperti_inverse(v, p.gamma);
        } else {
            const double diffusion = p.sigma * cev_power(std::max(x, 0.0), p.gamma);
            x += (p.mu * x + diffusion * c) * plan.dt + diffusion * plan.sqrt_dt * z;
            hit = x <= 0.0;
            if (hit) x = 0.0;
        }
        if (hit) {
            out.ruined = true;
            out.tau0 = t_next;
        }
        if constexpr (Recorder::active) record(t_next, x);
    }
    if (out.ruined) {
        out.terminal_value = 0.0;
    } else {
        out.terminal_value = lamperti ? lamperti_inverse(v, p.gamma) : x;
    }
    return out;
}

/// Exact square-root transition over `steps` equal steps: X_{t+h} = 2 c Gamma(N, 1),
/// N ~ Poisson(X_t e^{mu h} / (2 c)), c = sigma^2 (e^{mu h} - 1) / (4 mu); N = 0 is absorption.
template <class Recorder>
PathOutcome exact_cir_path(const SimConfig& cfg, std::size_t steps, Xoshiro256pp& rng, const Recorder& record) {
    const ModelParams& p = cfg.params;
    const double h = p.horizon_T / static_cast<double>(steps);
    const double y = p.mu * h;
    const double growth = std::exp(y);
    const double c = 0.25 * p.sigma * p.sigma * h * (y == 0.0 ? 1.0 : std::expm1(y) / y);
    std::poisson_distribution<std::int64_t> poisson;
    std::gamma_distribution<double> gamma_dist;
    PathOutcome out;
    double x = cfg.initial_K;
    if constexpr (Recorder::active) record(0.0, x);
    for (std::size_t i = 0; i < steps; ++i) {
        const double t_next = i + 1 == steps ? p.horizon_T : static_cast<double>(i + 1) * h;
        if (!out.ruined) {
            const std::int64_t n = poisson(rng, decltype(poisson)::param_type(x * growth / (2.0 * c)));
            if (n == 0) {
                x = 0.0;
                out.ruined = true;
                out.tau0 = t_next;
            } else {
                x = 2.0 * c * gamma_dist(rng, decltype(gamma_dist)::param_type(static_cast<double>(n), 1.0));
            }
        } else if (!Recorder::active) {
            break;
        }
        if constexpr (Recorder::active) record(t_next, x);
    }
    out.terminal_value = x;
    return out;
}

struct BlockStats {
    std::size_t count = 0;
    std::size_t ruined = 0;
    std::size_t ties = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

inline constexpr std::size_t kBlockSize = 1024;

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs per_path(index, stats) over [0, n_paths) in fixed blocks and merges the
/// block partials in block order.
template <class PerPath>
BlockStats run_blocks(std::size_t n_paths, unsigned n_threads, const PerPath& per_path) {
    const std::size_t n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
    std::vector<BlockStats> partial(n_blocks);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
            const std::size_t end = std::min(n_paths, (b + 1) * kBlockSize);
            for (std::size_t i = b * kBlockSize; i < end; ++i) per_path(i, partial[b]);
        }
    };
    const unsigned threads = std::min<std::size_t>(resolve_threads(n_threads), std::max<std::size_t>(n_blocks, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    }
    BlockStats total;
    for (const auto& b : partial) {
        total.count += b.count;
        total.ruined += b.ruined;
        total.ties += b.ties;
        total.sum += b.sum;
        total.sum_sq += b.sum_sq;
    }
    return total;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// One path under `config` (no tilt). exact_cir uses config.n_steps exact transitions.
inline PathOutcome simulate_path(const SimConfig& config, Xoshiro256pp& rng) {
    config.validate();
    if (config.scheme == Scheme::exact_cir) return detail::exact_cir_path(config, config.n_steps, rng, detail::NoRecorder{});
    const detail::StepPlan plan(config, {});
    return detail::discretized_path(config, plan, rng, detail::NoRecorder{});
}

/// One path with every grid value passed to emit(t, x); values after absorption are exactly 0.
inline PathOutcome simulate_path(const SimConfig& config, Xoshiro256pp& rng,
                                 std::function<void(double, double)> emit) {
    config.validate();
    detail::FunctionRecorder rec{std::move(emit)};
    if (config.scheme == Scheme::exact_cir) return detail::exact_cir_path(config, config.n_steps, rng, rec);
    const detail::StepPlan plan(config, {});
    return detail::discretized_path(config, plan, rng, rec);
}

/// Deterministic tilt c_i = K^{1-gamma} w*(t_i) on the step grid.
inline std::vector<double> default_tilt(const SimConfig& config) {
    const double scale = config.scale().norm_factor();
    std::vector<double> c(config.n_steps);
    for (std::size_t i = 0; i < config.n_steps; ++i)
        c[i] = scale * optimal_control(config.params, static_cast<double>(i) * config.step());
    return c;
}

/**
 * Importance-sampled ruin probability. Paths follow the drift mu X + sigma X^gamma c_t
 * and ruined paths carry the likelihood ratio exp(-sum c sqrt(dt) Z - 1/2 sum c^2 dt)
 * accumulated up to absorption. exact_cir has no tilted analogue and runs as lamperti.
 */
inline RuinEstimate estimate_ruin_is(const SimConfig& config, std::optional<std::vector<double>> tilt = std::nullopt) {
    config.validate();
    if (config.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    SimConfig run = config;
    if (run.scheme == Scheme::exact_cir) run.scheme = Scheme::lamperti;
    const std::vector<double> c = tilt ? std::move(*tilt) : default_tilt(run);
    const detail::StepPlan plan(run, c);

    const auto stats = detail::run_blocks(run.n_paths, run.n_threads, [&](std::size_t i, detail::BlockStats& acc) {
        auto rng = path_stream(run.seed, i);
        const PathOutcome o = detail::discretized_path(run, plan, rng, detail::NoRecorder{});
        ++acc.count;
        if (o.ruined) {
            const double w = std::exp(o.log_weight);
            ++acc.ruined;
            acc.sum += w;
            acc.sum_sq += w * w;
        }
    });

    RuinEstimate est;
    const double n = static_cast<double>(stats.count);
    est.p_hat = stats.sum / n;
    est.std_error = std::sqrt(std::max(0.0, stats.sum_sq / n - est.p_hat * est.p_hat) / n);
    est.n_paths = stats.count;
    est.n_ruined = stats.ruined;
    est.scheme = run.scheme;
    est.seed = run.seed;
    est.importance_sampled = true;
    est.elapsed = detail::seconds_since(start);
    return est;
}

/// Ruin probability P(tau_0 <= T). exact_cir samples the full horizon in one exact transition.
inline RuinEstimate estimate_ruin(const SimConfig& config) {
    if (config.importance_sampling) return estimate_ruin_is(config);
    config.validate();
    if (config.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    const auto start = std::chrono::steady_clock::now();

    detail::BlockStats stats;
    if (config.scheme == Scheme::exact_cir) {
        stats = detail::run_blocks(config.n_paths, config.n_threads, [&](std::size_t i, detail::BlockStats& acc) {
            auto rng = path_stream(config.seed, i);
            ++acc.count;
            if (detail::exact_cir_path(config, 1, rng, detail::NoRecorder{}).ruined) ++acc.ruined;
        });
    } else {
        const detail::StepPlan plan(config, {});
        stats = detail::run_blocks(config.n_paths, config.n_threads, [&](std::size_t i, detail::BlockStats& acc) {
            auto rng = path_stream(config.seed, i);
            ++acc.count;
            if (detail::discretized_path(config, plan, rng, detail::NoRecorder{}).ruined) ++acc.ruined;
        });
    }

    RuinEstimate est;
    const double n = static_cast<double>(stats.count);
    est.p_hat = static_cast<double>(stats.ruined) / n;
    est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / n);
    est.n_paths = stats.count;
    est.n_ruined = stats.ruined;
    est.scheme = config.scheme;
    est.seed = config.seed;
    est.elapsed = detail::seconds_since(start);
    return est;
}

struct InclusionReport {
    std::size_t n_paths = 0;
    /// Paths with M_T < -K^{1-gamma} that were not absorbed.
    std::size_t violations = 0;
    /// Paths with M_T == -K^{1-gamma} exactly; not counted as violations.
    std::size_t boundary_ties = 0;
    std::size_t ruined = 0;
};

/**
 * Checks {tau_0 <= T} contains {M_T < -K^{1-gamma}} path by path, with M_T built
 * from the same Gaussian increments that drive the discretized path.
 */
inline InclusionReport coupled_inclusion_check(const SimConfig& config) {
    config.validate();
    if (config.scheme == Scheme::exact_cir)
        throw UnsupportedCase("coupled inclusion check needs the driving increments; exact_cir has none");
    InclusionReport report;
    if (config.n_paths == 0) return report;
    const detail::StepPlan plan(config, {});
    const double barrier = -config.scale().norm_factor();
    const auto stats = detail::run_blocks(config.n_paths, config.n_threads, [&](std::size_t i, detail::BlockStats& acc) {
        auto rng = path_stream(config.seed, i);
        const PathOutcome o = detail::discretized_path(config, plan, rng, detail::NoRecorder{});
        ++acc.count;
        if (o.ruined) {
            ++acc.ruined;
        } else if (o.martingale < barrier) {
            acc.sum += 1.0;
        } else if (o.martingale == barrier) {
            ++acc.ties;
        }
    });
    report.n_paths = stats.count;
    report.violations = static_cast<std::size_t>(stats.sum);
    report.boundary_ties = stats.ties;
    report.ruined = stats.ruined;
    return report;
}

/// Writes up to `cap` paths as CSV `path_id,t,x`, path i drawn from the same stream as in estimation.
inline void export_paths_csv(const SimConfig& config, std::size_t cap, std::ostream& out) {
    config.validate();
    out << "path_id,t,x\n";
    const std::size_t n = std::min(cap, config.n_paths);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = path_stream(config.seed, i);
        simulate_path(config, rng, [&](double t, double x) {
            out << i << ',' << io::format_double(t) << ',' << io::format_double(x) << '\n';
        });
    }
}

}  // namespace cevruin
