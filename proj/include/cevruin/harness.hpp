/**
 * @brief Experiment orchestration: K-sweeps of the normalized log ruin
 * probability, their CSV / JSON persistence, layered run settings, and the
 * cross-module `validate` suite.
 */
#pragma once

#include "io.hpp"
#include "model.hpp"
#include "montecarlo.hpp"
#include "rate_function.hpp"
#include "variational.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cevruin {

using json = nlohmann::json;

inline json to_json(const ModelParams& p) {
    return {{"mu", p.mu}, {"sigma", p.sigma}, {"gamma", p.gamma}, {"T", p.horizon_T}};
}

inline ModelParams params_from_json(const json& j) {
    ModelParams p{j.at("mu").get<double>(), j.at("sigma").get<double>(), j.at("gamma").get<double>(),
                  j.at("T").get<double>()};
    p.validate();
    return p;
}

inline json to_json(const RuinEstimate& e) {
    return {{"p_hat", e.p_hat},
            {"stderr", e.std_error},
            {"n_paths", e.n_paths},
            {"n_ruined", e.n_ruined},
            {"scheme", std::string(to_string(e.scheme))},
            {"importance_sampling", e.importance_sampled},
            {"seed", e.seed},
            {"elapsed", e.elapsed}};
}

// ---------------------------------------------------------------------------
// K-sweep
// ---------------------------------------------------------------------------

struct SweepSpec {
    ModelParams params;
    std::vector<double> K_list{1.0, 2.0, 4.0};
    Scheme scheme = Scheme::lamperti;
    std::size_t n_paths = 100000;
    std::size_t n_steps = kDefaultSteps;
    std::uint64_t seed = 1;
    bool importance_sampling = false;
    std::string output_path;
    unsigned n_threads = 0;

    void validate() const {
        params.validate();
        if (K_list.empty()) throw std::invalid_argument("sweep: K list is empty");
        for (std::size_t i = 0; i < K_list.size(); ++i) {
            if (!(K_list[i] > 0.0)) throw std::invalid_argument("sweep: K values must be positive");
            if (i > 0 && !(K_list[i] > K_list[i - 1]))
                throw std::invalid_argument("sweep: K values must be strictly increasing");
        }
    }

    [[nodiscard]] SimConfig config_for(double K) const {
        return SimConfig{params, K, scheme, n_steps, n_paths, seed, importance_sampling, n_threads};
    }
};

struct SweepRow {
    double K = 0.0;
    double p_hat = 0.0;
    double std_error = 0.0;
    /// log(p_hat) / K^{2(1-gamma)}; NaN when p_hat == 0.
    double normalized_log = 0.0;
    double limit_value = 0.0;
    double gaussian_lb = 0.0;
    Scheme scheme = Scheme::lamperti;

    [[nodiscard]] bool flagged() const { return !(p_hat > 0.0); }
};

inline constexpr const char* kSweepHeader = "K,p_hat,stderr,normalized_log,limit_value,gaussian_lb,scheme";

inline SweepRow make_row(const ModelParams& params, double K, const RuinEstimate& est) {
    const ScaleParams scale(K, params.gamma);
    SweepRow row;
    row.K = K;
    row.p_hat = est.p_hat;
    row.std_error = est.std_error;
    row.normalized_log = est.p_hat > 0.0 ? std::log(est.p_hat) / scale.speed_factor()
                                         : std::numeric_limits<double>::quiet_NaN();
    row.limit_value = -asymptotic_exponent(params);
    row.gaussian_lb = gaussian_lower_bound(params, scale);
    row.scheme = est.scheme;
    return row;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << kSweepHeader << '\n';
    for (const auto& r : rows) {
        out << io::format_double(r.K) << ',' << io::format_double(r.p_hat) << ',' << io::format_double(r.std_error)
            << ',' << io::format_double(r.normalized_log) << ',' << io::format_double(r.limit_value) << ','
            << io::format_double(r.gaussian_lb) << ',' << to_string(r.scheme) << '\n';
    }
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open sweep output '" + path + "' for writing");
    write_sweep_csv(rows, out);
    if (!out) throw std::runtime_error("failed writing sweep output '" + path + "'");
}

inline std::vector<SweepRow> read_sweep_csv(std::istream& in) {
    std::string line;
    if (!io::read_line(in, line) || line != kSweepHeader)
        throw std::runtime_error(std::string("sweep CSV: expected header '") + kSweepHeader + "'");
    std::vector<SweepRow> rows;
    while (io::read_line(in, line)) {
        if (line.empty()) continue;
        const auto c = io::split(line, ',');
        if (c.size() != 7) throw std::runtime_error("sweep CSV: expected 7 columns: " + line);
        SweepRow r;
        r.K = io::parse_double(c[0]);
        r.p_hat = io::parse_double(c[1]);
        r.std_error = io::parse_double(c[2]);
        r.normalized_log = c[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : io::parse_double(c[3]);
        r.limit_value = io::parse_double(c[4]);
        r.gaussian_lb = io::parse_double(c[5]);
        r.scheme = parse_scheme(c[6]);
        rows.push_back(r);
    }
    return rows;
}

/// max |normalized_log - limit_value| over the upper half of the rows (unflagged only).
inline std::optional<double> max_deviation_top_half(const std::vector<SweepRow>& rows) {
    std::optional<double> worst;
    for (std::size_t i = rows.size() / 2; i < rows.size(); ++i) {
        if (rows[i].flagged()) continue;
        const double d = std::abs(rows[i].normalized_log - rows[i].limit_value);
        worst = worst ? std::max(*worst, d) : d;
    }
    return worst;
}

inline json sweep_summary(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
    json jr = json::array();
    for (const auto& r : rows) {
        jr.push_back({{"K", r.K},
                      {"p_hat", r.p_hat},
                      {"stderr", r.std_error},
                      {"normalized_log", r.flagged() ? json(nullptr) : json(r.normalized_log)},
                      {"limit_value", r.limit_value},
                      {"gaussian_lb", r.gaussian_lb},
                      {"scheme", std::string(to_string(r.scheme))},
                      {"flagged", r.flagged()}});
    }
    const auto dev = max_deviation_top_half(rows);
    return {{"params", to_json(spec.params)},
            {"scheme", std::string(to_string(spec.scheme))},
            {"importance_sampling", spec.importance_sampling},
            {"n_paths", spec.n_paths},
            {"n_steps", spec.n_steps},
            {"seed", spec.seed},
            {"limit_value", -asymptotic_exponent(spec.params)},
            {"max_abs_deviation_top_half", dev ? json(*dev) : json(nullptr)},
            {"rows", jr}};
}

struct LoadedSummary {
    ModelParams params;
    /// Recomputed from params, not read from the file.
    double limit_value;
    double stored_limit_value;
    std::optional<double> max_abs_deviation_top_half;
};

inline LoadedSummary load_sweep_summary(const json& j) {
    LoadedSummary s{params_from_json(j.at("params")), 0.0, j.at("limit_value").get<double>(), std::nullopt};
    s.limit_value = -asymptotic_exponent(s.params);
    const auto& dev = j.at("max_abs_deviation_top_half");
    if (!dev.is_null()) s.max_abs_deviation_top_half = dev.get<double>();
    return s;
}

struct SweepResult {
    std::vector<SweepRow> rows;
    json summary;
};

/// One estimate per K; writes the CSV when spec.output_path is set.
inline SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    if (!spec.output_path.empty()) {
        const auto parent = std::filesystem::path(spec.output_path).parent_path();
        if (!parent.empty() && !std::filesystem::is_directory(parent))
            throw std::runtime_error("sweep output directory '" + parent.string() + "' does not exist (output '" +
                                     spec.output_path + "')");
    }
    SweepResult result;
    for (double K : spec.K_list) result.rows.push_back(make_row(spec.params, K, estimate_ruin(spec.config_for(K))));
    if (!spec.output_path.empty()) write_sweep_csv(result.rows, spec.output_path);
    result.summary = sweep_summary(spec, result.rows);
    return result;
}

// ---------------------------------------------------------------------------
// Layered settings: defaults < config file < CEVRUIN_SEED < command line
// ---------------------------------------------------------------------------

inline std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : io::split(text, ',')) out.push_back(io::parse_double(item));
    return out;
}

struct Settings {
    ModelParams params;
    std::vector<double> K_list{1.0};
    Scheme scheme = Scheme::lamperti;
    std::size_t n_paths = 100000;
    std::size_t n_steps = kDefaultSteps;
    std::uint64_t seed = 1;
    bool importance_sampling = false;
    std::string out;
    unsigned threads = 0;
    std::size_t theta_grid = 100;

    /// Sets one field from its text form; unknown keys are rejected.
    void apply(const std::string& key, const std::string& value) {
        const auto as_size = [&] {
            const double d = io::parse_double(value);
            if (!(d >= 0.0) || d != std::floor(d)) throw std::invalid_argument(key + " must be a nonnegative integer");
            return static_cast<std::size_t>(d);
        };
        if (key == "mu") params.mu = io::parse_double(value);
        else if (key == "sigma") params.sigma = io::parse_double(value);
        else if (key == "gamma") params.gamma = io::parse_double(value);
        else if (key == "T" || key == "horizon_T") params.horizon_T = io::parse_double(value);
        else if (key == "K" || key == "K_list" || key == "initial_K") K_list = parse_double_list(value);
        else if (key == "scheme") scheme = parse_scheme(value);
        else if (key == "n_paths" || key == "n-paths") n_paths = as_size();
        else if (key == "n_steps" || key == "n-steps") n_steps = as_size();
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "is" || key == "importance_sampling")
            importance_sampling = value == "1" || value == "true" || value == "yes" || value == "on";
        else if (key == "out" || key == "output_path") out = value;
        else if (key == "threads" || key == "n_threads") threads = static_cast<unsigned>(as_size());
        else if (key == "theta_grid" || key == "theta-grid") theta_grid = as_size();
        else throw std::invalid_argument("unknown setting '" + key + "'");
    }

    void apply_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read config file '" + path + "'");
        apply_stream(in);
    }

    /// Flat `key = value` lines; '#' starts a comment.
    void apply_stream(std::istream& in) {
        std::string line;
        while (io::read_line(in, line)) {
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            if (trim(line).empty()) continue;
            if (eq == std::string::npos) throw std::invalid_argument("config line without '=': " + line);
            apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void apply_environment() {
        if (const char* s = std::getenv("CEVRUIN_SEED"); s != nullptr && *s != '\0') apply("seed", s);
    }

    [[nodiscard]] SimConfig sim_config() const {
        return SimConfig{params, K_list.front(), scheme, n_steps, n_paths, seed, importance_sampling, threads};
    }

    [[nodiscard]] SweepSpec sweep_spec() const {
        return SweepSpec{params, K_list, scheme, n_paths, n_steps, seed, importance_sampling, out, threads};
    }
};

// ---------------------------------------------------------------------------
// Validation suite
// ---------------------------------------------------------------------------

/// u* rebuilt by classical RK4 on v' = a mu v + sigma a w*, v_0 = 1, mapped back by v^{1/a}.
inline std::vector<double> integrate_most_likely_path(const ModelParams& p, std::size_t n_steps) {
    const double a = p.norm_exponent();
    const double h = p.horizon_T / static_cast<double>(n_steps);
    const auto rhs = [&](double t, double v) { return a * p.mu * v + p.sigma * a * optimal_control(p, t); };
    std::vector<double> u(n_steps + 1);
    double v = 1.0;
    u[0] = 1.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = static_cast<double>(i) * h;
        const double t_half = std::min(t + 0.5 * h, p.horizon_T);
        const double t_next = i + 1 == n_steps ? p.horizon_T : t + h;
        const double k1 = rhs(t, v);
        const double k2 = rhs(t_half, v + 0.5 * h * k1);
        const double k3 = rhs(t_half, v + 0.5 * h * k2);
        const double k4 = rhs(t_next, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u[i + 1] = lamperti_inverse(std::max(v, 0.0), p.gamma);
    }
    return u;
}

struct CheckResult {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::uint64_t seed = 0;
    std::vector<CheckResult> checks;

    [[nodiscard]] bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
};

inline double relative_difference(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

struct ValidateOptions {
    std::size_t inclusion_paths = 20000;
    std::size_t inclusion_steps = kDefaultSteps;
    std::size_t oracle_paths = 1000000;
    unsigned threads = 0;
};

/**
 * Runs the cross-module checks in a fixed order: closed-form identities,
 * exponent agreement across modules, ODE reconstruction of u*, the coupled
 * inclusion, the gamma = 1/2 oracle and the Gaussian lower bound.
 */
inline ValidationReport run_validate(std::uint64_t seed, const ValidateOptions& opt = {}) {
    ValidationReport report;
    report.seed = seed;
    auto add = [&](std::string name, double measured, double tolerance, bool passed, std::string detail = {}) {
        report.checks.push_back({std::move(name), passed, measured, tolerance, std::move(detail)});
    };

    const std::vector<ModelParams> grid_params = {
        {0.0, 1.0, 0.5, 1.0}, {0.1, 1.0, 0.5, 1.0}, {-0.1, 1.0, 0.5, 1.0},
        {0.0, 2.0, 0.75, 1.0}, {0.3, 0.7, 0.75, 2.0}, {-0.4, 1.3, 0.9, 0.5},
    };

    {
        double worst = 0.0;
        for (const auto& p : grid_params) {
            if (p.mu == 0.0) continue;
            const double a = p.norm_exponent();
            const double alt = p.mu / (p.sigma * p.sigma * a * (1.0 - std::exp(-2.0 * a * p.mu * p.horizon_T)));
            worst = std::max(worst, relative_difference(asymptotic_exponent(p), alt));
        }
        add("exponent equals the Cauchy-Schwarz bound form", worst, 1e-12, worst <= 1e-12);
    }
    {
        double worst = 0.0;
        for (const auto& p : grid_params) {
            if (p.gamma != 0.5) continue;
            for (double K : {0.5, 1.0, 4.0}) {
                const double lhs = std::log(exact_ruin_cir(p, ScaleParams(K, 0.5))) / K;
                worst = std::max(worst, relative_difference(lhs, -asymptotic_exponent(p)));
            }
        }
        add("log exact CIR ruin / K equals -exponent", worst, 1e-12, worst <= 1e-12);
    }
    {
        double worst = 0.0;
        for (double mu : {1e-8, -1e-8}) {
            for (double gamma : {0.5, 0.75}) {
                const ModelParams p{mu, 1.0, gamma, 1.0};
                const ScaleParams s(2.0, gamma);
                const auto seam = [&](auto f) {
                    worst = std::max(worst, relative_difference(f(MuBranch::general), f(MuBranch::limit)));
                };
                seam([&](MuBranch b) { return bracket_variance(p, 0.7, b); });
                seam([&](MuBranch b) { return asymptotic_exponent(p, b); });
                seam([&](MuBranch b) { return gaussian_lower_bound(p, s, b); });
                seam([&](MuBranch b) { return most_likely_path(p, 0.3, b); });
                seam([&](MuBranch b) { return optimal_control(p, 0.6, b); });
                if (gamma == 0.5) seam([&](MuBranch b) { return exact_ruin_cir(p, s, b); });
            }
        }
        add("mu-limit branch agrees with general form at |mu| = 1e-8", worst, 1e-10, worst <= 1e-10);
    }
    {
        double worst = 0.0;
        for (const auto& p : grid_params) {
            const double exponent = asymptotic_exponent(p);
            const double quad = action(optimal_control_grid(p, 10000));
            const double solved = best_theta(p, 10000, 20).action_value;
            worst = std::max({worst, relative_difference(exponent, quad), relative_difference(exponent, solved)});
        }
        add("exponent = 1/2 int w*^2 = variational action (N = 1e4)", worst, 1e-3, worst <= 1e-3);
    }
    {
        double worst = 0.0;
        for (const auto& p : grid_params)
            worst = std::max(worst, relative_difference(asymptotic_exponent(p), extrapolated_action(p, p.horizon_T, 1000)));
        add("exponent = extrapolated variational action", worst, 1e-12, worst <= 1e-12);
    }
    {
        const ModelParams p{0.0, 1.0, 0.5, 1.0};
        const double coarse = rate_J(most_likely_path_grid(p, 2000), p).value();
        const double fine = rate_J(most_likely_path_grid(p, 4000), p).value();
        const double extrapolated = 2.0 * fine - coarse;
        const double err = std::abs(extrapolated - asymptotic_exponent(p));
        add("rate J(u*) Richardson limit equals exponent", err, 1e-4, err <= 1e-4);
    }
    {
        double worst = 0.0;
        for (const auto& p : grid_params) {
            const std::size_t n = 20000;
            const auto u = integrate_most_likely_path(p, n);
            for (std::size_t i = 0; i <= n; ++i) {
                const double t = i == n ? p.horizon_T : p.horizon_T * static_cast<double>(i) / static_cast<double>(n);
                worst = std::max(worst, std::abs(u[i] - most_likely_path(p, t)));
            }
        }
        add("u* closed form matches RK4 integration (sup norm)", worst, 1e-8, worst <= 1e-8);
    }
    for (double gamma : {0.5, 0.75}) {
        SimConfig cfg{{0.0, 1.0, gamma, 1.0}, 1.0, Scheme::lamperti, opt.inclusion_steps, opt.inclusion_paths, seed,
                      false, opt.threads};
        const auto r = coupled_inclusion_check(cfg);
        add("coupled inclusion, lamperti, gamma = " + io::format_double(gamma), static_cast<double>(r.violations), 0.0,
            r.violations == 0,
            std::to_string(r.n_paths) + " paths, " + std::to_string(r.ruined) + " ruined, " +
                std::to_string(r.boundary_ties) + " ties");
    }
    {
        const ModelParams p{0.1, 1.0, 0.5, 1.0};
        SimConfig cfg{p, 1.0, Scheme::exact_cir, 1, opt.oracle_paths, seed, false, opt.threads};
        const auto est = estimate_ruin(cfg);
        const double oracle = exact_ruin_cir(p, cfg.scale());
        const double z = std::abs(est.p_hat - oracle) / est.std_error;
        add("exact_cir estimate matches Feller oracle (z-score)", z, 3.0, z <= 3.0,
            "p_hat=" + io::format_double(est.p_hat) + " oracle=" + io::format_double(oracle));

        const double lb = gaussian_lower_bound(p, cfg.scale());
        const double margin = est.p_hat + 3.0 * est.std_error - lb;
        add("Gaussian lower bound respected", margin, 0.0, margin >= 0.0, "bound=" + io::format_double(lb));
    }
    return report;
}

inline json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"measured", c.measured},
                          {"tolerance", c.tolerance},
                          {"detail", c.detail}});
    return {{"seed", r.seed}, {"all_passed", r.all_passed()}, {"checks", checks}};
}

}  // namespace cevruin
