#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "avarkit/timeseries.hpp"

namespace avarkit {

enum class Estimator { standard, overlapping };

std::string_view to_string(Estimator estimator) noexcept;
Estimator estimator_from_string(std::string_view name);

/// Cluster-time grid for one series length. tau[i] == m[i] * dt exactly.
struct TauGrid {
    std::vector<double> taus;
    std::vector<std::size_t> m_values;
    double dt = 0.0;
    std::size_t n_samples = 0;

    std::size_t size() const noexcept { return m_values.size(); }

    /// Largest admissible cluster size for n samples: floor((n - 1) / 2).
    static std::size_t max_cluster(std::size_t n_samples) noexcept {
        return n_samples < 1 ? 0 : (n_samples - 1) / 2;
    }

    /// Builds a grid from explicit cluster sizes; validates ordering and cap.
    static TauGrid from_clusters(std::vector<std::size_t> m_values, double dt, std::size_t n_samples);
};

struct AllanPoint {
    double tau = 0.0;
    double avar = 0.0;
    double adev = 0.0;
    /// 1-sigma relative uncertainty of adev.
    double rel_ci = 0.0;
    std::size_t m = 0;
    /// False when fewer than two independent clusters back this point.
    bool usable = true;
};

struct AllanCurve {
    std::vector<AllanPoint> points;
    Estimator estimator = Estimator::overlapping;
    std::size_t source_len = 0;
    double dt = 0.0;

    std::size_t usable_count() const noexcept;
};

/// Log-spaced cluster sizes, `points_per_decade` per decade of m, rounded
/// to integers and deduplicated, capped at floor((n-1)/2).
TauGrid tau_grid_log(double dt, std::size_t n_samples, std::size_t points_per_decade = 10);

/// Non-overlapping estimator over floor(N/m) disjoint clusters.
AllanCurve avar_standard(const SampleSeries& series, const TauGrid& grid);

/// Fully overlapping estimator from compensated prefix sums.
AllanCurve avar_overlapping(const SampleSeries& series, const TauGrid& grid);

AllanCurve compute_avar(const SampleSeries& series, const TauGrid& grid, Estimator estimator);

/// Fills rel_ci = 1/sqrt(2(K-1)), K = floor(N/m); points with K <= 1 are
/// marked unusable.
AllanCurve confidence_bounds(AllanCurve curve);

/// Number of independent clusters credited to cluster size m.
std::size_t independent_clusters(std::size_t source_len, std::size_t m) noexcept;

/// CSV `tau,avar,adev,rel_ci` with a header row.
std::string curve_to_csv(const AllanCurve& curve);
/// JSON array of point objects (keys sorted).
std::string curve_to_json(const AllanCurve& curve);

/// Reads curves written by curve_to_csv / curve_to_json. m, source_len and
/// estimator are not stored in the files and come back as 0 / overlapping.
AllanCurve curve_from_csv(std::string_view text);
AllanCurve curve_from_json(std::string_view text);

}  // namespace avarkit
