#include "avarkit/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avarkit/error.hpp"
#include "avarkit/random.hpp"
#include "json_util.hpp"

namespace avarkit {

std::string_view to_string(Process process) noexcept {
    switch (process) {
        case Process::white: return "white";
        case Process::quantization: return "quantization";
        case Process::random_constant: return "random_constant";
        case Process::gauss_markov: return "gauss_markov";
        case Process::random_walk: return "random_walk";
        case Process::bias_instability: return "bias_instability";
        case Process::drift: return "drift";
    }
    return "unknown";
}

std::optional<Process> process_from_string(std::string_view name) noexcept {
    for (auto p : kAllProcesses) {
        if (to_string(p) == name) return p;
    }
    return std::nullopt;
}

namespace {

void require(bool ok, const char* field, const char* message) {
    if (!ok) throw SpecError(field, message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void validate(const NoiseParams& p) {
    require(finite_nonneg(p.q), "params.q", "must be finite and >= 0");
    require(finite_nonneg(p.n), "params.n", "must be finite and >= 0");
    require(finite_nonneg(p.b), "params.b", "must be finite and >= 0");
    require(finite_nonneg(p.k), "params.k", "must be finite and >= 0");
    require(finite_nonneg(p.r), "params.r", "must be finite and >= 0");
    require(finite_nonneg(p.gm_sigma), "params.gm_sigma", "must be finite and >= 0");
    require(finite_nonneg(p.gm_tc), "params.gm_tc", "must be finite and >= 0");
    require(finite_nonneg(p.bi_period), "params.bi_period", "must be finite and >= 0");
    require(std::isfinite(p.rc_mu), "params.rc_mu", "must be finite");
    require(finite_nonneg(p.rc_sigma), "params.rc_sigma", "must be finite and >= 0");
    require(p.gm_sigma == 0.0 || p.gm_tc > 0.0, "params.gm_tc", "must be > 0 when gm_sigma > 0");
    require(p.b == 0.0 || p.bi_period > 0.0, "params.bi_period", "must be > 0 when b > 0");
}

void validate(const SimSpec& spec) {
    validate(spec.params);
    require(std::isfinite(spec.dt) && spec.dt > 0.0, "dt", "must be finite and > 0");
    require(spec.n_samples >= 1, "n_samples", "must be >= 1");
    require(!spec.label.empty(), "label", "must not be empty");
    if (spec.enabled.has(Process::bias_instability) && spec.params.b > 0.0) {
        require(spec.params.bi_period >= spec.dt, "params.bi_period", "must be >= dt");
    }
}

namespace {

SampleSeries make_series(std::vector<double> values, const SimSpec& spec) {
    return SampleSeries(std::move(values), spec.dt, spec.label);
}

std::uint32_t stream_id(Process p) { return static_cast<std::uint32_t>(p) + 1; }

}  // namespace

SampleSeries simulate_white(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    const double sigma = spec.params.n / std::sqrt(spec.dt);
    if (sigma > 0.0) {
        GaussianStream rng(spec.seed, stream_id(Process::white));
        for (double& v : out) v = sigma * rng.next();
    }
    return make_series(std::move(out), spec);
}

// Differenced white noise: x_i = q (w_i - w_{i-1}) / dt, giving
// AVAR = 3 q^2 / tau^2 exactly for any cluster size.
SampleSeries simulate_quantization(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    const double scale = spec.params.q / spec.dt;
    if (scale > 0.0) {
        GaussianStream rng(spec.seed, stream_id(Process::quantization));
        double prev = rng.next();
        for (double& v : out) {
            const double w = rng.next();
            v = scale * (w - prev);
            prev = w;
        }
    }
    return make_series(std::move(out), spec);
}

SampleSeries simulate_random_constant(const SimSpec& spec) {
    validate(spec);
    double value = spec.params.rc_mu;
    if (spec.params.rc_sigma > 0.0) {
        GaussianStream rng(spec.seed, stream_id(Process::random_constant));
        value += spec.params.rc_sigma * rng.next();
    }
    return make_series(std::vector<double>(spec.n_samples, value), spec);
}

// Exact discretization of dB = -B/Tc dt + noise, started at 0.
SampleSeries simulate_gauss_markov(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    const auto& p = spec.params;
    if (p.gm_sigma > 0.0) {
        const double phi = std::exp(-spec.dt / p.gm_tc);
        const double drive = p.gm_sigma * std::sqrt(-std::expm1(-2.0 * spec.dt / p.gm_tc));
        GaussianStream rng(spec.seed, stream_id(Process::gauss_markov));
        double state = 0.0;
        for (double& v : out) {
            v = state;
            state = phi * state + drive * rng.next();
        }
    }
    return make_series(std::move(out), spec);
}

// The walk's values at sample boundaries are cumulative sums of
// N(0, k^2 dt) increments. Each reported sample is the walk's mean over its
// sample interval (boundary midpoint plus a Brownian-bridge term), so the
// sampled stream carries AVAR = k^2 tau / 3 with no dt-dependent white
// component.
SampleSeries simulate_random_walk(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    const double k = spec.params.k;
    if (k > 0.0) {
        const double step = k * std::sqrt(spec.dt);
        const double bridge = k * std::sqrt(spec.dt / 12.0);
        GaussianStream rng(spec.seed, stream_id(Process::random_walk));
        double level = 0.0;
        for (double& v : out) {
            const double next = level + step * rng.next();
            v = 0.5 * (level + next) + bridge * rng.next();
            level = next;
        }
    }
    return make_series(std::move(out), spec);
}

// Piecewise constant: a fresh N(0, b^2) value at the start of every
// bias_period window, held until the next one.
SampleSeries simulate_bias_instability(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    const auto& p = spec.params;
    if (p.b > 0.0) {
        const auto window = static_cast<std::size_t>(std::max(1.0, std::round(p.bi_period / spec.dt)));
        GaussianStream rng(spec.seed, stream_id(Process::bias_instability));
        double level = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (i % window == 0) level = p.b * rng.next();
            out[i] = level;
        }
    }
    return make_series(std::move(out), spec);
}

SampleSeries simulate_drift(const SimSpec& spec) {
    validate(spec);
    std::vector<double> out(spec.n_samples, 0.0);
    if (spec.params.r != 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = spec.params.r * (static_cast<double>(i) * spec.dt);
    }
    return make_series(std::move(out), spec);
}

SampleSeries simulate_composite(const SimSpec& spec) {
    validate(spec);
    std::vector<double> sum(spec.n_samples, 0.0);
    auto accumulate = [&](const SampleSeries& part) {
        const auto v = part.values();
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
    };
    const auto& on = spec.enabled;
    if (on.has(Process::white)) accumulate(simulate_white(spec));
    if (on.has(Process::quantization)) accumulate(simulate_quantization(spec));
    if (on.has(Process::random_constant)) accumulate(simulate_random_constant(spec));
    if (on.has(Process::gauss_markov)) accumulate(simulate_gauss_markov(spec));
    if (on.has(Process::random_walk)) accumulate(simulate_random_walk(spec));
    if (on.has(Process::bias_instability)) accumulate(simulate_bias_instability(spec));
    if (on.has(Process::drift)) accumulate(simulate_drift(spec));
    return make_series(std::move(sum), spec);
}

Recording simulate_recording(const std::vector<SimSpec>& specs) {
    if (specs.empty()) throw SpecError("channels", "at least one channel required");
    std::vector<SampleSeries> channels;
    channels.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        const std::string where = "channels[" + std::to_string(i) + "]";
        if (s.dt != specs.front().dt) throw SpecError(where + ".dt", "all channels must share dt");
        if (s.n_samples != specs.front().n_samples) {
            throw SpecError(where + ".n_samples", "all channels must share n_samples");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (specs[j].label == s.label) throw SpecError(where + ".label", "duplicate label " + s.label);
        }
        channels.push_back(simulate_composite(s));
    }
    return Recording(std::move(channels), RecordingMeta{"simulated", 0.0});
}

double gauss_markov_avar(double qc, double tc, double tau) {
    if (qc == 0.0) return 0.0;
    const double x = tau / tc;
    if (x < 0.5) {
        // 1 - (3 - 4e^-x + e^-2x)/(2x) = x^2 * g(x); g from the Taylor series.
        double g = 0.0;
        double xp = 1.0;        // x^(j-3)
        double fact = 6.0;      // j!
        double sign = -1.0;     // (-1)^j
        double two_pow = 8.0;   // 2^j
        for (int j = 3; j < 40; ++j) {
            const double c = (-4.0 * sign + sign * two_pow) / fact;
            const double term = -0.5 * c * xp;
            g += term;
            if (std::abs(term) < 1e-18 * std::abs(g)) break;
            xp *= x;
            fact *= static_cast<double>(j + 1);
            sign = -sign;
            two_pow *= 2.0;
        }
        return qc * qc * tau * g;
    }
    const double f = -4.0 * std::expm1(-x) + std::expm1(-2.0 * x);
    const double bracket = 1.0 - f / (2.0 * x);
    return (qc * tc) * (qc * tc) / tau * bracket;
}

AvarTerms theoretical_avar_terms(const NoiseParams& p, double tau) {
    AvarTerms t;
    t.quantization = 3.0 * p.q * p.q / (tau * tau);
    t.white = p.n * p.n / tau;
    const double flat = kBiasInstabilityFactor * p.b;
    t.bias_instability = flat * flat;
    t.rate_random_walk = p.k * p.k * tau / 3.0;
    t.ramp = p.r * p.r * tau * tau / 2.0;
    if (p.gm_sigma > 0.0 && p.gm_tc > 0.0) {
        const double qc = p.gm_sigma * std::sqrt(2.0 / p.gm_tc);
        t.gauss_markov = gauss_markov_avar(qc, p.gm_tc, tau);
    }
    return t;
}

double theoretical_avar(const NoiseParams& params, double tau) {
    return theoretical_avar_terms(params, tau).total();
}

AllanCurve theoretical_adev(const NoiseParams& params, const TauGrid& grid) {
    if (grid.m_values.empty()) throw Error(ErrorCode::grid_mismatch, "empty grid");
    AllanCurve curve;
    curve.estimator = Estimator::overlapping;
    curve.source_len = grid.n_samples;
    curve.dt = grid.dt;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        AllanPoint p;
        p.tau = grid.taus[i];
        p.m = grid.m_values[i];
        p.avar = theoretical_avar(params, p.tau);
        p.adev = std::sqrt(p.avar);
        curve.points.push_back(p);
    }
    return confidence_bounds(std::move(curve));
}

namespace detail {

NoiseParams params_from(const json& j, const std::string& path) {
    if (!j.is_object()) throw SpecError(path, "must be an object");
    NoiseParams p;
    const std::pair<const char*, double NoiseParams::*> fields[] = {
        {"q", &NoiseParams::q},
        {"n", &NoiseParams::n},
        {"b", &NoiseParams::b},
        {"k", &NoiseParams::k},
        {"r", &NoiseParams::r},
        {"gm_sigma", &NoiseParams::gm_sigma},
        {"gm_tc", &NoiseParams::gm_tc},
        {"bi_period", &NoiseParams::bi_period},
        {"rc_mu", &NoiseParams::rc_mu},
        {"rc_sigma", &NoiseParams::rc_sigma},
    };
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto& [name, member] : fields) {
            if (key != name) continue;
            known = true;
            if (!value.is_number()) throw SpecError(path + "." + key, "must be a number");
            p.*member = value.get<double>();
        }
        if (!known) throw SpecError(path + "." + key, "unknown field");
    }
    return p;
}

}  // namespace detail

std::string params_to_json(const NoiseParams& params) { return detail::params_json(params).dump(2) + "\n"; }

NoiseParams params_from_json(std::string_view text) {
    auto p = detail::params_from(detail::parse_json(text, "params"), "params");
    validate(p);
    return p;
}

namespace {

using detail::json;

json simspec_json(const SimSpec& spec) {
    json enabled = json::array();
    for (auto p : kAllProcesses) {
        if (spec.enabled.has(p)) enabled.push_back(std::string(to_string(p)));
    }
    return json{{"params", detail::params_json(spec.params)},
                {"dt", spec.dt},
                {"n_samples", spec.n_samples},
                {"seed", spec.seed},
                {"enabled", enabled},
                {"label", spec.label}};
}

SimSpec simspec_from(const json& j, const std::string& path) {
    if (!j.is_object()) throw SpecError(path.empty() ? "spec" : path, "must be an object");
    const std::string prefix = path.empty() ? "" : path + ".";
    for (const auto& [key, value] : j.items()) {
        static const char* known[] = {"params", "dt", "n_samples", "seed", "enabled", "label"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw SpecError(prefix + key, "unknown field");
        }
    }
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw SpecError(prefix + key, "required field missing");
        return j.at(key);
    };
    SimSpec s;
    s.params = detail::params_from(need("params"), prefix + "params");

    const json& dt = need("dt");
    if (!dt.is_number()) throw SpecError(prefix + "dt", "must be a number");
    s.dt = dt.get<double>();

    const json& n = need("n_samples");
    if (!n.is_number_integer() || n.get<std::int64_t>() < 1) {
        throw SpecError(prefix + "n_samples", "must be an integer >= 1");
    }
    s.n_samples = n.get<std::size_t>();

    const json& seed = need("seed");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
        throw SpecError(prefix + "seed", "must be an unsigned 64-bit integer");
    }
    s.seed = seed.get<std::uint64_t>();

    const json& enabled = need("enabled");
    if (!enabled.is_array()) throw SpecError(prefix + "enabled", "must be an array of process names");
    for (std::size_t i = 0; i < enabled.size(); ++i) {
        const auto where = prefix + "enabled[" + std::to_string(i) + "]";
        if (!enabled[i].is_string()) throw SpecError(where, "must be a string");
        auto p = process_from_string(enabled[i].get<std::string>());
        if (!p) throw SpecError(where, "unknown process '" + enabled[i].get<std::string>() + "'");
        s.enabled.set(*p);
    }
    if (j.contains("label")) {
        if (!j.at("label").is_string()) throw SpecError(prefix + "label", "must be a string");
        s.label = j.at("label").get<std::string>();
    }
    try {
        validate(s);
    } catch (const SpecError& e) {
        throw SpecError(prefix + e.field(), e.detail());
    }
    return s;
}

}  // namespace

std::string simspec_to_json(const SimSpec& spec) { return simspec_json(spec).dump(2) + "\n"; }

SimSpec simspec_from_json(std::string_view text) { return simspec_from(detail::parse_json(text, "spec"), ""); }

std::vector<SimSpec> simspecs_from_json(std::string_view text) {
    const json doc = detail::parse_json(text, "spec");
    if (doc.is_object() && doc.contains("channels")) {
        if (doc.size() != 1) throw SpecError("spec", "multi-channel document takes only 'channels'");
        const json& arr = doc.at("channels");
        if (!arr.is_array() || arr.empty()) throw SpecError("channels", "must be a non-empty array");
        std::vector<SimSpec> out;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            out.push_back(simspec_from(arr[i], "channels[" + std::to_string(i) + "]"));
        }
        return out;
    }
    return {simspec_from(doc, "")};
}

}  // namespace avarkit
