/**
 * @brief Parameters and closed-form quantities of the CEV diffusion
 *   dX = mu X dt + sigma X^gamma dB,  X_0 = K,
 * absorbed at zero.
 *
 * Every drift-dependent formula is written through phi1(x) = (1 - e^{-x}) / x
 * so that mu = 0 is a regular point. For |mu (1 - gamma) T| below
 * kLimitBranchThreshold a second-order series replaces the expm1 form.
 */
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cevruin {

/// Raised when a closed form exists only for a special case (gamma = 1/2).
class UnsupportedCase : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline constexpr double kLimitBranchThreshold = 1e-6;

enum class MuBranch { automatic, general, limit };

struct ModelParams {
    double mu = 0.0;
    double sigma = 1.0;
    double gamma = 0.5;
    double horizon_T = 1.0;

    /// Throws std::invalid_argument unless sigma != 0, gamma in [1/2, 1), T > 0.
    void validate() const {
        if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
        if (!std::isfinite(sigma) || sigma == 0.0)
            throw std::invalid_argument("sigma must be finite and nonzero");
        if (!(gamma >= 0.5 && gamma < 1.0))
            throw std::invalid_argument("gamma must lie in [0.5, 1), got " + std::to_string(gamma));
        if (!(horizon_T > 0.0) || !std::isfinite(horizon_T))
            throw std::invalid_argument("horizon T must be positive");
    }

    /// 1 - gamma, the Lamperti power.
    [[nodiscard]] double norm_exponent() const { return 1.0 - gamma; }

    [[nodiscard]] bool uses_limit_branch() const {
        return std::abs(mu * (1.0 - gamma) * horizon_T) < kLimitBranchThreshold;
    }
};

/// Initial condition K and the powers of K derived from gamma.
class ScaleParams {
public:
    ScaleParams(double initial_K, double gamma) : K_(initial_K), gamma_(gamma) {
        if (!(initial_K > 0.0) || !std::isfinite(initial_K))
            throw std::invalid_argument("initial K must be positive");
    }

    [[nodiscard]] double initial_K() const { return K_; }
    [[nodiscard]] double gamma() const { return gamma_; }
    [[nodiscard]] double norm_exponent() const { return 1.0 - gamma_; }
    [[nodiscard]] double speed_exponent() const { return 2.0 * (1.0 - gamma_); }
    /// K^{1-gamma}
    [[nodiscard]] double norm_factor() const { return std::pow(K_, norm_exponent()); }
    /// K^{2(1-gamma)}
    [[nodiscard]] double speed_factor() const { return std::pow(K_, speed_exponent()); }

private:
    double K_;
    double gamma_;
};

namespace detail {

inline double phi1_general(double x) { return -std::expm1(-x) / x; }

inline double phi1_series(double x) { return 1.0 - x / 2.0 + x * x / 6.0; }

inline bool limit_branch(const ModelParams& p, MuBranch branch) {
    switch (branch) {
        case MuBranch::general: return false;
        case MuBranch::limit: return true;
        case MuBranch::automatic: break;
    }
    return p.uses_limit_branch();
}

inline double phi1(double x, bool limit) { return limit ? phi1_series(x) : phi1_general(x); }

inline void check_time(const ModelParams& p, double t) {
    if (!(t >= 0.0 && t <= p.horizon_T))
        throw std::domain_error("time " + std::to_string(t) + " outside [0, T]");
}

}  // namespace detail

/// Variance of the Gaussian martingale M_t = int_0^t sigma (1-gamma) e^{-(1-gamma) mu s} dB_s.
inline double bracket_variance(const ModelParams& p, double t, MuBranch branch = MuBranch::automatic) {
    p.validate();
    detail::check_time(p, t);
    const double a = p.norm_exponent();
    const double x = 2.0 * a * p.mu * t;
    if (t == 0.0) return 0.0;
    return p.sigma * p.sigma * a * a * t * detail::phi1(x, detail::limit_branch(p, branch));
}

/// The rate 1 / (2 <M>_T); the log ruin probability scaled by K^{-2(1-gamma)} tends to minus this.
inline double asymptotic_exponent(const ModelParams& p, MuBranch branch = MuBranch::automatic) {
    return 1.0 / (2.0 * bracket_variance(p, p.horizon_T, branch));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// log Phi(x), accurate far into the lower tail where Phi itself underflows.
inline double log_normal_cdf(double x) {
    if (x > -30.0) return std::log(normal_cdf(x));
    const double z = -x;
    const double r = 1.0 / (z * z);
    // Mills-ratio asymptotic series, truncated after the r^4 term.
    const double series = 1.0 - r + 3.0 * r * r - 15.0 * r * r * r + 105.0 * r * r * r * r;
    return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// Phi(-K^{1-gamma} / sqrt(<M>_T)), a lower bound on P(tau_0 <= T) valid for every K.
inline double gaussian_lower_bound(const ModelParams& p, const ScaleParams& s,
                                   MuBranch branch = MuBranch::automatic) {
    return normal_cdf(-s.norm_factor() / std::sqrt(bracket_variance(p, p.horizon_T, branch)));
}

inline double log_gaussian_lower_bound(const ModelParams& p, const ScaleParams& s,
                                       MuBranch branch = MuBranch::automatic) {
    return log_normal_cdf(-s.norm_factor() / std::sqrt(bracket_variance(p, p.horizon_T, branch)));
}

/// Feller extinction probability P(X_T = 0) for gamma = 1/2:
/// exp(-2 mu K / (sigma^2 (1 - e^{-mu T}))).
inline double exact_ruin_cir(const ModelParams& p, const ScaleParams& s,
                             MuBranch branch = MuBranch::automatic) {
    p.validate();
    if (p.gamma != 0.5) throw UnsupportedCase("exact ruin probability requires gamma = 1/2");
    const double T = p.horizon_T;
    const double rate = 2.0 / (p.sigma * p.sigma * T * detail::phi1(p.mu * T, detail::limit_branch(p, branch)));
    return std::exp(-s.initial_K() * rate);
}

inline double lamperti_forward(double x, double gamma) {
    if (!(x >= 0.0)) throw std::domain_error("lamperti_forward: negative input");
    if (gamma == 0.5) return std::sqrt(x);
    return std::pow(x, 1.0 - gamma);
}

inline double lamperti_inverse(double v, double gamma) {
    if (!(v >= 0.0)) throw std::domain_error("lamperti_inverse: negative input");
    if (gamma == 0.5) return v * v;
    return std::pow(v, 1.0 / (1.0 - gamma));
}

}  // namespace cevruin
