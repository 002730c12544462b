// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "avarkit/allan.hpp"
#include "avarkit/identify.hpp"
#include "avarkit/noise_model.hpp"
#include "avarkit/timeseries.hpp"
#include "oracles.hpp"
#include "schema.hpp"

#ifdef AVARKIT_HAVE_CLI
#include "commands.hpp"
#endif

using namespace avarkit;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

SimSpec single(Process p, Coefficient c, double value, std::uint64_t seed) {
    SimSpec s;
    s.dt = 0.01;
    s.n_samples = 1'000'000;
    s.seed = seed;
    s.enabled = {p};
    coefficient(s.params, c) = value;
    s.params.bi_period = 10.0;
    return s;
}

AllanCurve curve_of(const SampleSeries& s) {
    return confidence_bounds(avar_overlapping(detrend_mean(s), tau_grid_log(s.dt(), s.size(), 10)));
}

// 1. Both estimators against the naive reference on random series.
Outcome oracle_equivalence() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> log_n(std::log(9.0), std::log(10'000.0));
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(std::exp(log_n(rng)));
        const double offset = 1000.0 * g(rng);
        const double walk_step = std::abs(g(rng));
        std::vector<double> x(n);
        double walk = 0.0;
        for (auto& v : x) {
            walk += walk_step * g(rng);
            v = offset + walk + g(rng);
        }
        const SampleSeries s(x, 0.01);
        const TauGrid grid = tau_grid_log(0.01, n, 10);
        const AllanCurve st = avar_standard(s, grid);
        const AllanCurve ov = avar_overlapping(s, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const std::size_t m = grid.m_values[i];
            worst = std::max(worst, oracle::rel_diff(st.points[i].avar, oracle::avar_standard(x, m)));
            worst = std::max(worst, oracle::rel_diff(ov.points[i].avar, oracle::avar_overlapping(x, m)));
        }
    }
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-12 && elapsed < 60.0,
            "max rel diff " + fmt("%.3g", worst) + ", " + fmt("%.1f", elapsed) + " s"};
}

// 2. White-noise ADEV against 1/sqrt(tau), pooled over 20 seeds.
Outcome white_noise_law() {
    const auto t0 = Clock::now();
    std::size_t in = 0, total = 0;
    double worst_seed = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SimSpec s;
        s.dt = 1.0;
        s.n_samples = 1'000'000;
        s.seed = seed;
        s.params.n = 1.0;
        s.enabled = {Process::white};
        const AllanCurve c = curve_of(simulate_white(s));
        std::size_t seed_in = 0, seed_total = 0;
        for (const auto& p : c.points) {
            if (!p.usable) continue;
            const double model = 1.0 / std::sqrt(p.tau);
            ++seed_total;
            seed_in += std::abs(p.adev - model) <= 3.0 * p.rel_ci * model;
        }
        in += seed_in;
        total += seed_total;
        worst_seed = std::min(worst_seed, static_cast<double>(seed_in) / static_cast<double>(seed_total));
    }
    const double frac = static_cast<double>(in) / static_cast<double>(total);
    const double elapsed = seconds_since(t0);
    return {frac >= 0.95 && elapsed < 120.0, "pooled " + fmt("%.4f", frac) + " (worst seed " +
                                                  fmt("%.4f", worst_seed) + "), " + fmt("%.1f", elapsed) + " s"};
}

// 3. Log-log slope of each pure process in its dominant decade, on five
// seeds each. The slope is a plain regression over the decade's grid points.
// A pure process dominates every decade; the stochastic ones are read where
// 1e6 samples resolve a one-decade slope well.
Outcome slope_signatures() {
    struct Case {
        const char* name;
        Process process;
        Coefficient coefficient;
        double expected, lo, hi;
    };
    const double t = 10.0;  // bias-instability period: 1000 levels in 1e6 samples
    const Case cases[] = {
        {"q", Process::quantization, Coefficient::q, -1.0, 0.01, 0.1},
        {"n", Process::white, Coefficient::n, -0.5, 0.1, 1.0},
        {"b", Process::bias_instability, Coefficient::b, 0.0, t / std::sqrt(10.0), t * std::sqrt(10.0)},
        {"k", Process::random_walk, Coefficient::k, 0.5, 1.0, 10.0},
        {"r", Process::drift, Coefficient::r, 1.0, 100.0, 1000.0},
    };
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        double worst = 0.0;
        double worst_slope = c.expected;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const AllanCurve curve = curve_of(simulate_composite(single(c.process, c.coefficient, 1.0, seed)));
            const double slope = oracle::loglog_slope_unweighted(curve, c.lo, c.hi);
            if (!(std::abs(slope - c.expected) <= worst)) {
                worst = std::isnan(slope) ? INFINITY : std::abs(slope - c.expected);
                worst_slope = slope;
            }
        }
        const bool ok = worst <= 0.1;
        pass = pass && ok;
        detail += std::string(detail.empty() ? "" : ", ") + c.name + " " + fmt("%+.3f", worst_slope) + (ok ? "" : " (X)");
    }
    return {pass, "worst of 5 seeds: " + detail};
}

// 4. Gyroscope-X round trip over 20 seeds.
Outcome gyro_x_round_trip() {
    const auto t0 = Clock::now();
    int n_ok = 0, k_ok = 0, b_ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SimSpec s;
        s.label = "gyro.x";
        s.dt = 0.01;
        s.n_samples = 1'000'000;
        s.seed = seed;
        s.params.q = 0.0002;
        s.params.n = 0.006;
        s.params.b = 0.0034;
        s.params.k = 6.129;
        s.params.bi_period = 100.0;
        s.enabled = {Process::white, Process::quantization, Process::random_walk, Process::bias_instability};
        const ChannelBudget got = analyze_channel(simulate_composite(s)).budget;
        n_ok += std::abs(got.params.n / s.params.n - 1.0) <= 0.15;
        k_ok += std::abs(got.params.k / s.params.k - 1.0) <= 0.15;
        b_ok += std::abs(got.params.b / s.params.b - 1.0) <= 0.30;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = n_ok >= 18 && k_ok >= 18 && b_ok >= 18 && elapsed < 300.0;
    return {pass, "n " + std::to_string(n_ok) + "/20, k " + std::to_string(k_ok) + "/20, b " + std::to_string(b_ok) +
                      "/20, " + fmt("%.1f", elapsed) + " s"};
}

// 5. Fitted model against the empirical curve over the two central decades,
// on composite simulations of every Table 1 column.
Outcome model_agreement() {
    const auto specs = simspecs_from_json([] {
        std::ifstream in(std::string(AVARKIT_SOURCE_DIR) + "/specs/table1_imu.json");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }());
    bool pass = true;
    std::string detail;
    for (const auto& spec : specs) {
        const ChannelAnalysis a = analyze_channel(simulate_composite(spec));
        double tau_max = 0.0;
        for (const auto& p : a.curve.points) {
            if (p.usable) tau_max = p.tau;
        }
        const double mid = std::sqrt(a.curve.points.front().tau * tau_max);
        std::size_t in = 0, total = 0;
        for (const auto& p : a.curve.points) {
            if (!p.usable || p.tau < mid / 10.0 || p.tau > mid * 10.0) continue;
            ++total;
            const double model = std::sqrt(theoretical_avar(a.budget.params, p.tau));
            in += std::abs(model - p.adev) <= 3.0 * p.rel_ci * p.adev;
        }
        const double frac = total ? static_cast<double>(in) / static_cast<double>(total) : 0.0;
        const bool ok = total > 0 && frac >= 0.90;
        pass = pass && ok;
        detail += std::string(detail.empty() ? "" : ", ") + spec.label + " " + fmt("%.2f", frac) + (ok ? "" : " (X)");
    }
    return {pass, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 6. Byte-identical reruns and schema-valid JSON everywhere.
Outcome determinism_and_schema(Clock::time_point suite_start) {
    bool pass = true;
    std::string detail;
    auto fail = [&](const std::string& why) {
        pass = false;
        detail += (detail.empty() ? "" : "; ") + why;
    };
    auto validate = [&](const std::string& schema_name, const std::string& text, const std::string& what) {
        const auto errors = schema::load(schema_name).errors(json::parse(text));
        if (!errors.empty()) fail(what + ": " + errors.front());
    };

    const fs::path dir = fs::temp_directory_path() / "avarkit_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string imu = std::string(AVARKIT_SOURCE_DIR) + "/specs/table1_imu.json";
    const std::string gyro = std::string(AVARKIT_SOURCE_DIR) + "/specs/table1_gyro_x.json";
    validate("simspec.schema.json", slurp(imu), "table1_imu.json");
    validate("simspec.schema.json", slurp(gyro), "table1_gyro_x.json");

#ifdef AVARKIT_HAVE_CLI
    auto run = [&](std::vector<std::string> args, std::string* err_text = nullptr) {
        args.insert(args.begin(), "avarkit");
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        if (err_text) *err_text = err.str();
        return code;
    };
    for (const char* sub : {"a", "b"}) {
        if (run({"simulate", "--spec", imu, "--output-dir", (dir / sub).string()}) != 0) fail("simulate failed");
    }
    if (slurp(dir / "a" / "recording.csv") != slurp(dir / "b" / "recording.csv")) fail("simulation not byte-identical");

    for (const char* sub : {"a", "b"}) {
        if (run({"analyze", "--input", (dir / "a" / "recording.csv").string(), "--output-dir",
                 (dir / sub / "analysis").string()}) != 0) {
            fail("analyze failed");
        }
    }
    const std::string budget = slurp(dir / "a" / "analysis" / "budget.json");
    if (budget != slurp(dir / "b" / "analysis" / "budget.json")) fail("budget not byte-identical");
    validate("budget.schema.json", budget, "budget.json");

    for (const auto& entry : fs::directory_iterator(dir / "a" / "analysis")) {
        const auto name = entry.path().filename().string();
        if (name.rfind("curve_", 0) == 0) {
            validate("curve.schema.json", curve_to_json(curve_from_csv(slurp(entry.path()))), name);
        }
    }

    if (run({"roundtrip", "--spec", gyro, "--output-dir", (dir / "rt").string()}) != 0) fail("roundtrip failed");
    validate("roundtrip.schema.json", slurp(dir / "rt" / "roundtrip.json"), "roundtrip.json");

    if (run({"validate", "--input", (dir / "a" / "analysis" / "curve_gyro.x.csv").string(), "--params",
             (dir / "a" / "analysis" / "budget.json").string(), "--channel", "gyro.x", "--output-dir",
             (dir / "val").string()}) != 0) {
        fail("validate failed");
    }
    validate("validate.schema.json", slurp(dir / "val" / "validate.json"), "validate.json");

    std::ofstream(dir / "empty.csv").close();
    std::string err;
    if (run({"analyze", "--input", (dir / "empty.csv").string(), "--output-dir", (dir / "e").string()}, &err) == 0) {
        fail("empty input accepted");
    } else {
        validate("error.schema.json", err, "error object");
    }
#else
    const auto specs = simspecs_from_json(slurp(imu));
    if (!(simulate_recording(specs) == simulate_recording(specs))) fail("simulation not identical");
    const std::string text = format_recording(simulate_recording(specs));
    if (text != format_recording(simulate_recording(specs))) fail("simulation not byte-identical");
    const ErrorBudget b = build_error_budget(parse_recording(text));
    validate("budget.schema.json", budget_to_json(b), "budget.json");
#endif
    validate("params.schema.json", params_to_json(NoiseParams{}), "params");
    fs::remove_all(dir);

    const double elapsed = seconds_since(suite_start);
    if (elapsed >= 900.0) fail("suite took " + fmt("%.0f", elapsed) + " s");
    if (detail.empty()) detail = "suite " + fmt("%.1f", elapsed) + " s";
    return {pass, detail};
}

}  // namespace

int main() {
    const auto start = Clock::now();
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {"1 oracle equivalence", oracle_equivalence},
        {"2 white-noise law", white_noise_law},
        {"3 slope signatures", slope_signatures},
        {"4 gyroscope-X round trip", gyro_x_round_trip},
        {"5 model agreement", model_agreement},
        {"6 determinism and schema", [&] { return determinism_and_schema(start); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
