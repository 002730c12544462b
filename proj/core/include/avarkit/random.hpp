#pragma once

#include <cstdint>
#include <random>

namespace avarkit {

/**
 * Seeded Gaussian source for one simulated process.
 *
 * The engine is std::mt19937_64 seeded through std::seed_seq from
 * (seed, stream), both of which are fully specified by the standard. The
 * normal transform is done here (Marsaglia polar method) instead of with
 * std::normal_distribution, whose algorithm is implementation-defined, so
 * a given (seed, stream) produces the same doubles with any standard
 * library.
 */
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint32_t stream);

    /// Standard normal variate.
    double next();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace avarkit
