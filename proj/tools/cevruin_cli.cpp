// cevruin command line: exact | mc | sweep | path | control | validate
#include "cevruin/cevruin.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

using namespace cevruin;

namespace {

struct Flags {
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, std::string> text;
    std::string config;

    void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        options[key] = app->add_option(name, text[key], help);
    }

    Settings settings(Settings s = {}) const {
        if (!config.empty()) s.apply_file(config);
        s.apply_environment();
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) s.apply(key, text.at(key));
        return s;
    }
};

// Options every subcommand understands; unused ones are simply ignored.
void common_flags(CLI::App* app, Flags& f) {
    f.add(app, "--mu", "mu", "drift");
    f.add(app, "--sigma", "sigma", "volatility scale");
    f.add(app, "--gamma", "gamma", "elasticity in [0.5, 1)");
    f.add(app, "--T", "T", "horizon");
    f.add(app, "--K", "K", "initial capital; comma list for sweep");
    f.add(app, "--scheme", "scheme", "exact_cir | euler_full_truncation | lamperti");
    f.add(app, "--n-paths", "n_paths", "Monte Carlo paths");
    f.add(app, "--n-steps", "n_steps", "time steps (grid intervals for path/control)");
    f.add(app, "--seed", "seed", "RNG seed (overrides CEVRUIN_SEED)");
    f.add(app, "--is", "is", "importance sampling: true/false");
    f.add(app, "--out", "out", "output file");
    f.add(app, "--threads", "threads", "worker threads, 0 = hardware");
    app->add_option("--config", f.config, "key = value settings file")->check(CLI::ExistingFile);
}

// Writes to --out when given, stdout otherwise.
template <class F>
void emit(const std::string& out, F&& write) {
    if (out.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream file(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file '" + out + "'");
    write(file);
}

int run_exact(const Settings& s) {
    s.params.validate();
    json rows = json::array();
    for (double K : s.K_list) {
        const ScaleParams scale(K, s.params.gamma);
        json r{{"K", K},
               {"gaussian_lb", gaussian_lower_bound(s.params, scale)},
               {"log_gaussian_lb", log_gaussian_lower_bound(s.params, scale)}};
        r["exact_ruin_cir"] = s.params.gamma == 0.5 ? json(exact_ruin_cir(s.params, scale)) : json(nullptr);
        rows.push_back(r);
    }
    const json out{{"params", to_json(s.params)},
                   {"bracket_variance_T", bracket_variance(s.params, s.params.horizon_T)},
                   {"asymptotic_exponent", asymptotic_exponent(s.params)},
                   {"limit_value", -asymptotic_exponent(s.params)},
                   {"rows", rows}};
    emit(s.out, [&](std::ostream& o) { o << out.dump(2) << '\n'; });
    return 0;
}

int run_mc(const Settings& s, std::size_t export_cap, const std::string& paths_file) {
    const SimConfig cfg = s.sim_config();
    cfg.validate();
    if (export_cap > 0) {
        if (paths_file.empty()) throw std::invalid_argument("--export-paths needs --paths-file");
        std::ofstream file(paths_file, std::ios::binary);
        if (!file) throw std::runtime_error("cannot open output file '" + paths_file + "'");
        export_paths_csv(cfg, export_cap, file);
    }
    const json rec = to_json(estimate_ruin(cfg));
    emit(s.out, [&](std::ostream& o) { o << rec.dump() << '\n'; });
    return 0;
}

int run_sweep_cmd(const Settings& s) {
    const auto result = run_sweep(s.sweep_spec());
    if (s.out.empty()) write_sweep_csv(result.rows, std::cout);
    (s.out.empty() ? std::cerr : std::cout) << result.summary.dump(2) << '\n';
    return 0;
}

int run_path(const Settings& s) {
    s.params.validate();
    const auto path = most_likely_path_grid(s.params, s.n_steps);
    emit(s.out, [&](std::ostream& o) { path.write_csv(o); });
    const Rate r = rate_J(path, s.params);
    const json info{{"rate_J", r.is_finite() ? json(r.value()) : json("inf")},
                    {"asymptotic_exponent", asymptotic_exponent(s.params)},
                    {"n_intervals", s.n_steps}};
    (s.out.empty() ? std::cerr : std::cout) << info.dump() << '\n';
    return 0;
}

int run_control(const Settings& s) {
    const DiscreteControlProblem problem{s.params, s.n_steps, s.params.horizon_T};
    const auto w = solve_least_norm(problem);
    emit(s.out, [&](std::ostream& o) {
        o << "t,w_numeric,w_closed_form\n";
        for (std::size_t i = 0; i < w.grid().size(); ++i)
            o << io::format_double(w.grid()[i]) << ',' << io::format_double(w.values()[i]) << ','
              << io::format_double(optimal_control(s.params, w.grid()[i])) << '\n';
    });
    const auto best = best_theta(s.params, s.n_steps, s.theta_grid);
    const json info{{"action", action(w)},
                    {"best_theta", best.theta},
                    {"best_theta_action", best.action_value},
                    {"asymptotic_exponent", asymptotic_exponent(s.params)}};
    (s.out.empty() ? std::cerr : std::cout) << info.dump() << '\n';
    return 0;
}

int run_validate_cmd(const Settings& s) {
    ValidateOptions opt;
    opt.threads = s.threads;
    const auto report = run_validate(s.seed, opt);
    for (const auto& c : report.checks)
        std::cerr << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << io::format_double(c.measured)
                  << " (tol " << io::format_double(c.tolerance) << ")" << (c.detail.empty() ? "" : " " + c.detail)
                  << '\n';
    emit(s.out, [&](std::ostream& o) { o << to_json(report).dump(2) << '\n'; });
    return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ruin asymptotics for the CEV diffusion"};
    app.require_subcommand(1);

    Flags f_exact, f_mc, f_sweep, f_path, f_control, f_validate;
    auto* exact = app.add_subcommand("exact", "closed-form exponent, bounds and exact ruin (gamma = 0.5)");
    auto* mc = app.add_subcommand("mc", "Monte Carlo ruin estimate as a JSON record");
    auto* sweep = app.add_subcommand("sweep", "K sweep: CSV rows and a JSON summary");
    auto* path = app.add_subcommand("path", "most likely ruin path as CSV t,u");
    auto* control = app.add_subcommand("control", "discrete optimal control vs closed form");
    auto* validate = app.add_subcommand("validate", "cross-checks; nonzero exit on any failure");
    common_flags(exact, f_exact);
    common_flags(mc, f_mc);
    common_flags(sweep, f_sweep);
    common_flags(path, f_path);
    common_flags(control, f_control);
    common_flags(validate, f_validate);

    std::size_t export_cap = 0;
    std::string paths_file;
    mc->add_option("--export-paths", export_cap, "write at most this many paths as CSV path_id,t,x");
    mc->add_option("--paths-file", paths_file, "destination for exported paths");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*exact) return run_exact(f_exact.settings());
        if (*mc) return run_mc(f_mc.settings(), export_cap, paths_file);
        if (*sweep) return run_sweep_cmd(f_sweep.settings());
        // path and control default to a 1000-interval grid rather than the MC step count.
        Settings grid_defaults;
        grid_defaults.n_steps = 1000;
        if (*path) return run_path(f_path.settings(grid_defaults));
        if (*control) return run_control(f_control.settings(grid_defaults));
        if (*validate) return run_validate_cmd(f_validate.settings());
    } catch (const UnsupportedCase& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
