#include "cevruin/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cevruin;

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

TEST(SweepSpec, Validation) {
    SweepSpec spec;
    spec.K_list = {};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.K_list = {1.0, 1.0};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.K_list = {2.0, 1.0};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.K_list = {-1.0, 1.0};
    EXPECT_THROW(spec.validate(), std::invalid_argument);
    spec.K_list = {0.5, 1.0, 8.0};
    EXPECT_NO_THROW(spec.validate());
}

TEST(RunSweep, HalfElasticityNormalizedLogIsMinusExponent) {
    SweepSpec spec;
    spec.params = {0.0, 1.0, 0.5, 1.0};
    // K = 8 sits near e^-16; plain exact sampling at desk scale sees no hits there.
    spec.K_list = {0.5, 1.0, 2.0, 4.0};
    spec.scheme = Scheme::exact_cir;
    spec.n_paths = 1000000;
    spec.seed = 5;
    const auto result = run_sweep(spec);
    ASSERT_EQ(result.rows.size(), 4u);
    for (const auto& row : result.rows) {
        ASSERT_FALSE(row.flagged());
        EXPECT_EQ(row.limit_value, -2.0);
        // Delta method: sd(log p_hat) ~ stderr / p_hat.
        const double tol = 3.0 * row.std_error / row.p_hat / row.K;
        EXPECT_NEAR(row.normalized_log, -2.0, tol) << "K=" << row.K;
        EXPECT_GE(row.p_hat + 3.0 * row.std_error, row.gaussian_lb);
    }
    const auto& summary = result.summary;
    EXPECT_EQ(summary.at("rows").size(), 4u);
    EXPECT_EQ(summary.at("limit_value").get<double>(), -2.0);
    EXPECT_TRUE(summary.at("max_abs_deviation_top_half").is_number());
}

TEST(RunSweep, ZeroHitRowsAreFlaggedNotFatal) {
    SweepSpec spec;
    spec.params = {0.0, 1.0, 0.5, 1.0};
    spec.K_list = {1.0, 30.0};
    spec.scheme = Scheme::exact_cir;
    spec.n_paths = 2000;
    const auto result = run_sweep(spec);
    EXPECT_FALSE(result.rows[0].flagged());
    EXPECT_TRUE(result.rows[1].flagged());
    EXPECT_TRUE(std::isnan(result.rows[1].normalized_log));
    EXPECT_TRUE(result.summary.at("rows")[1].at("normalized_log").is_null());
    EXPECT_TRUE(result.summary.at("max_abs_deviation_top_half").is_null());

    std::stringstream csv;
    write_sweep_csv(result.rows, csv);
    EXPECT_NE(csv.str().find(",nan,"), std::string::npos);
}

TEST(RunSweep, MissingOutputDirectoryNamesThePath) {
    SweepSpec spec;
    spec.K_list = {1.0};
    spec.n_paths = 10;
    spec.output_path = "/nonexistent-dir-for-cevruin/sweep.csv";
    try {
        run_sweep(spec);
        FAIL() << "expected an I/O error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir-for-cevruin"), std::string::npos);
    }
}

TEST(SweepCsv, RoundTripsRowsExactly) {
    const ModelParams p{0.07, 0.9, 0.6, 1.3};
    std::vector<SweepRow> rows;
    RuinEstimate e;
    e.scheme = Scheme::euler_full_truncation;
    for (double K : {0.5, 1.0, 3.0}) {
        e.p_hat = 0.1 / K / 3.0;
        e.std_error = e.p_hat / 7.0;
        rows.push_back(make_row(p, K, e));
    }
    e.p_hat = 0.0;
    e.std_error = 0.0;
    rows.push_back(make_row(p, 9.0, e));

    const auto path = std::filesystem::temp_directory_path() / "cevruin_sweep_roundtrip.csv";
    write_sweep_csv(rows, path.string());
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, kSweepHeader);
    in.seekg(0);
    const auto back = read_sweep_csv(in);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_TRUE(same(back[i].K, rows[i].K));
        EXPECT_TRUE(same(back[i].p_hat, rows[i].p_hat));
        EXPECT_TRUE(same(back[i].std_error, rows[i].std_error));
        EXPECT_TRUE(same(back[i].normalized_log, rows[i].normalized_log));
        EXPECT_TRUE(same(back[i].limit_value, rows[i].limit_value));
        EXPECT_TRUE(same(back[i].gaussian_lb, rows[i].gaussian_lb));
        EXPECT_EQ(back[i].scheme, rows[i].scheme);
    }
    std::filesystem::remove(path);
}

TEST(SweepSummary, LimitValueIsRecomputedOnLoad) {
    SweepSpec spec;
    spec.params = {0.25, 1.1, 0.7, 2.0};
    spec.K_list = {1.0, 2.0};
    RuinEstimate e;
    e.p_hat = 0.01;
    e.std_error = 0.001;
    const std::vector<SweepRow> rows{make_row(spec.params, 1.0, e), make_row(spec.params, 2.0, e)};
    const json text = json::parse(sweep_summary(spec, rows).dump());
    const auto loaded = load_sweep_summary(text);
    EXPECT_EQ(loaded.limit_value, -asymptotic_exponent(spec.params));
    EXPECT_EQ(loaded.stored_limit_value, loaded.limit_value);
    ASSERT_TRUE(loaded.max_abs_deviation_top_half.has_value());
    EXPECT_DOUBLE_EQ(*loaded.max_abs_deviation_top_half, std::abs(rows[1].normalized_log - rows[1].limit_value));
}

TEST(Settings, PrecedenceIsCliOverEnvironmentOverFileOverDefaults) {
    Settings s;
    EXPECT_EQ(s.seed, 1u);
    std::stringstream file("# sweep config\nmu = 0.2\nK = 1,2,4\nseed = 10\nscheme = exact_cir\nis = true\n");
    s.apply_stream(file);
    EXPECT_EQ(s.params.mu, 0.2);
    EXPECT_EQ(s.K_list, (std::vector<double>{1.0, 2.0, 4.0}));
    EXPECT_EQ(s.seed, 10u);
    EXPECT_EQ(s.scheme, Scheme::exact_cir);
    EXPECT_TRUE(s.importance_sampling);

    ::setenv("CEVRUIN_SEED", "20", 1);
    s.apply_environment();
    ::unsetenv("CEVRUIN_SEED");
    EXPECT_EQ(s.seed, 20u);

    s.apply("seed", "30");
    s.apply("mu", "-0.1");
    EXPECT_EQ(s.seed, 30u);
    EXPECT_EQ(s.params.mu, -0.1);
    EXPECT_EQ(s.sim_config().initial_K, 1.0);
}

TEST(Settings, RejectsBadInput) {
    Settings s;
    EXPECT_THROW(s.apply("colour", "blue"), std::invalid_argument);
    EXPECT_THROW(s.apply("n_paths", "1.5"), std::invalid_argument);
    EXPECT_THROW(s.apply("mu", "abc"), std::invalid_argument);
    std::stringstream file("gamma 0.5\n");
    EXPECT_THROW(s.apply_stream(file), std::invalid_argument);
    s.apply("gamma", "1.0");
    EXPECT_THROW(s.sim_config().validate(), std::invalid_argument);
}

TEST(RuinEstimateJson, CarriesTheRecordFields) {
    RuinEstimate e;
    e.p_hat = 0.25;
    e.std_error = 0.01;
    e.n_paths = 100;
    e.seed = 3;
    e.scheme = Scheme::exact_cir;
    const json j = to_json(e);
    for (const char* key : {"p_hat", "stderr", "n_paths", "scheme", "seed", "elapsed"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(j.at("scheme"), "exact_cir");
}

TEST(Validate, DefaultSeedPassesAndIsDeterministic) {
    ValidateOptions opt;
    opt.inclusion_paths = 5000;
    opt.inclusion_steps = 1000;
    const auto first = run_validate(1, opt);
    for (const auto& c : first.checks) EXPECT_TRUE(c.passed) << c.name << " measured=" << c.measured;
    EXPECT_TRUE(first.all_passed());
    const auto second = run_validate(1, opt);
    ASSERT_EQ(first.checks.size(), second.checks.size());
    for (std::size_t i = 0; i < first.checks.size(); ++i) {
        EXPECT_EQ(first.checks[i].measured, second.checks[i].measured) << first.checks[i].name;
    }
}

TEST(Validate, OtherSeedsChangeDigitsNotVerdicts) {
    ValidateOptions opt;
    opt.inclusion_paths = 5000;
    opt.inclusion_steps = 1000;
    const auto a = run_validate(1, opt);
    const auto b = run_validate(2, opt);
    EXPECT_TRUE(b.all_passed());
    bool any_digit_changed = false;
    for (std::size_t i = 0; i < a.checks.size(); ++i) any_digit_changed |= a.checks[i].measured != b.checks[i].measured;
    EXPECT_TRUE(any_digit_changed);
}

TEST(MostLikelyPathOde, HarnessIntegratorMatchesClosedForm) {
    const ModelParams p{0.4, 1.0, 0.8, 1.0};
    const auto u = integrate_most_likely_path(p, 10000);
    for (std::size_t i = 0; i <= 10000; i += 50) EXPECT_NEAR(u[i], most_likely_path(p, i / 10000.0), 1e-9);
}
