#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avarkit/allan.hpp"
#include "avarkit/timeseries.hpp"

namespace avarkit {

/// Flat-region readout constant: ADEV of flicker bias instability is
/// 0.664 * b at its minimum.
inline constexpr double kBiasInstabilityFactor = 0.664;

/**
 * Per-axis stochastic error coefficients.
 *
 * Readout conventions on the Allan deviation curve:
 *   q: ADEV = q * sqrt(3) / tau   (slope -1, read at tau = sqrt(3))
 *   n: ADEV = n / sqrt(tau)       (slope -1/2, read at tau = 1)
 *   b: ADEV = 0.664 * b           (slope 0)
 *   k: ADEV = k * sqrt(tau / 3)   (slope +1/2, read at tau = 3)
 *   r: ADEV = r * tau / sqrt(2)   (slope +1, read at tau = sqrt(2))
 *
 * gm_sigma is the stationary standard deviation of the first-order
 * Gauss-Markov bias and gm_tc its correlation time (1/beta).
 */
struct NoiseParams {
    double q = 0.0;
    double n = 0.0;
    double b = 0.0;
    double k = 0.0;
    double r = 0.0;
    double gm_sigma = 0.0;
    double gm_tc = 0.0;
    double bi_period = 0.0;
    double rc_mu = 0.0;
    double rc_sigma = 0.0;

    friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

/// Throws SpecError naming the first field that breaks the invariants.
void validate(const NoiseParams& params);

enum class Process : std::uint8_t {
    white,
    quantization,
    random_constant,
    gauss_markov,
    random_walk,
    bias_instability,
    drift,
};

inline constexpr std::array<Process, 7> kAllProcesses = {
    Process::white,        Process::quantization,     Process::random_constant, Process::gauss_markov,
    Process::random_walk,  Process::bias_instability, Process::drift,
};

std::string_view to_string(Process process) noexcept;
std::optional<Process> process_from_string(std::string_view name) noexcept;

/// Set of enabled processes.
class ProcessFlags {
public:
    constexpr ProcessFlags() = default;
    constexpr ProcessFlags(std::initializer_list<Process> list) {
        for (auto p : list) set(p);
    }

    static constexpr ProcessFlags all() {
        ProcessFlags f;
        for (auto p : kAllProcesses) f.set(p);
        return f;
    }

    constexpr void set(Process p, bool on = true) {
        const auto bit = std::uint8_t(1u << static_cast<unsigned>(p));
        bits_ = on ? std::uint8_t(bits_ | bit) : std::uint8_t(bits_ & ~bit);
    }
    constexpr bool has(Process p) const { return (bits_ >> static_cast<unsigned>(p)) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }

    friend constexpr bool operator==(ProcessFlags, ProcessFlags) = default;

private:
    std::uint8_t bits_ = 0;
};

/// Recipe for one synthetic channel.
struct SimSpec {
    NoiseParams params;
    double dt = 0.01;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    ProcessFlags enabled;
    std::string label = "sim.x";
};

void validate(const SimSpec& spec);

// Each generator draws from its own (seed, process) sub-stream, so toggling
// one process never changes another's realization.

SampleSeries simulate_white(const SimSpec& spec);
SampleSeries simulate_quantization(const SimSpec& spec);
SampleSeries simulate_random_constant(const SimSpec& spec);
SampleSeries simulate_gauss_markov(const SimSpec& spec);
SampleSeries simulate_random_walk(const SimSpec& spec);
SampleSeries simulate_bias_instability(const SimSpec& spec);
SampleSeries simulate_drift(const SimSpec& spec);

/// Sum of the enabled processes.
SampleSeries simulate_composite(const SimSpec& spec);

/// Simulates several channels into one recording. All specs must share dt
/// and n_samples.
Recording simulate_recording(const std::vector<SimSpec>& specs);

/// Per-term Allan variance of the analytic model at one cluster time.
struct AvarTerms {
    double quantization = 0.0;
    double white = 0.0;
    double bias_instability = 0.0;
    double rate_random_walk = 0.0;
    double ramp = 0.0;
    double gauss_markov = 0.0;

    double total() const noexcept {
        return quantization + white + bias_instability + rate_random_walk + ramp + gauss_markov;
    }
};

AvarTerms theoretical_avar_terms(const NoiseParams& params, double tau);
double theoretical_avar(const NoiseParams& params, double tau);

/// Allan variance of a first-order Gauss-Markov process with driving
/// noise density qc and correlation time tc, averaged over tau. Accurate
/// for tau/tc from 1e-12 to 1e12.
double gauss_markov_avar(double qc, double tc, double tau);

/// Analytic Allan curve on `grid`; rel_ci is what an overlapping estimate
/// over grid.n_samples samples would carry.
AllanCurve theoretical_adev(const NoiseParams& params, const TauGrid& grid);

// JSON documents. Keys are sorted; parse functions throw SpecError.
std::string params_to_json(const NoiseParams& params);
NoiseParams params_from_json(std::string_view text);
std::string simspec_to_json(const SimSpec& spec);
SimSpec simspec_from_json(std::string_view text);

/// Accepts either a single SimSpec document or {"channels": [SimSpec...]}.
std::vector<SimSpec> simspecs_from_json(std::string_view text);

}  // namespace avarkit
