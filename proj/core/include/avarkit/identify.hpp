#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avarkit/allan.hpp"
#include "avarkit/noise_model.hpp"
#include "avarkit/timeseries.hpp"

namespace avarkit {

/// Canonical log-log ADEV slopes and the tolerance for snapping to them.
inline constexpr std::array<double, 5> kCanonicalSlopes = {-1.0, -0.5, 0.0, 0.5, 1.0};
inline constexpr double kSlopeSnapTolerance = 0.15;

/// Straight run of an ADEV curve in log10-log10 space.
struct SlopeSegment {
    double tau_lo = 0.0;
    double tau_hi = 0.0;
    double slope = 0.0;
    /// log10 ADEV of the fitted line at tau = 1 s.
    double intercept = 0.0;
    /// RMS of log10 residuals about the line.
    double rms_residual = 0.0;
    /// Indices into AllanCurve::points, inclusive.
    std::size_t first = 0;
    std::size_t last = 0;
    /// True when slope was snapped to a canonical value.
    bool snapped = false;

    std::size_t point_count() const noexcept { return last - first + 1; }
    /// ADEV of the fitted line at tau.
    double adev_at(double tau) const;
};

/// Piecewise-linear fit of the usable points. Throws when fewer than 10
/// usable points exist; an all-zero curve yields no segments.
std::vector<SlopeSegment> fit_slope_segments(const AllanCurve& curve);

enum class Coefficient { q, n, b, k, r };
inline constexpr std::array<Coefficient, 5> kCoefficients = {Coefficient::q, Coefficient::n, Coefficient::b,
                                                             Coefficient::k, Coefficient::r};

std::string_view to_string(Coefficient c) noexcept;
double& coefficient(NoiseParams& p, Coefficient c) noexcept;
double coefficient(const NoiseParams& p, Coefficient c) noexcept;

enum class CoefficientStatus { detected, not_detected, unreliable };
std::string_view to_string(CoefficientStatus s) noexcept;
CoefficientStatus status_from_string(std::string_view s);

struct CoefficientFlags {
    std::array<CoefficientStatus, 5> status{CoefficientStatus::not_detected, CoefficientStatus::not_detected,
                                            CoefficientStatus::not_detected, CoefficientStatus::not_detected,
                                            CoefficientStatus::not_detected};

    CoefficientStatus operator[](Coefficient c) const noexcept { return status[static_cast<std::size_t>(c)]; }
    CoefficientStatus& operator[](Coefficient c) noexcept { return status[static_cast<std::size_t>(c)]; }

    friend bool operator==(const CoefficientFlags&, const CoefficientFlags&) = default;
};

/// Identified coefficients and their detection status. Coefficients that
/// are not detected are 0.
struct Identification {
    NoiseParams params;
    CoefficientFlags flags;
};

/// Reads each coefficient off its canonical-slope segment:
/// q at tau = sqrt(3), n at 1, b = min ADEV / 0.664, k at 3, r at sqrt(2).
Identification extract_coefficients(const AllanCurve& curve, std::span<const SlopeSegment> segments);

/// Weighted log-space misfit sum_j (ln model_j - ln avar_j)^2 / rel_ci_j^2
/// over usable points with avar > 0. +inf when the model vanishes at such
/// a point.
double wls_objective(const AllanCurve& curve, const NoiseParams& params);

struct WlsOptions {
    int max_iterations = 200;
    /// Also fit a Gauss-Markov term. Its correlation time is taken from the
    /// initial params when positive, otherwise searched on a log grid.
    bool fit_gauss_markov = false;
    /// Terms the fit may use, indexed by Coefficient. Masked terms are 0.
    std::array<bool, 5> free_terms{true, true, true, true, true};
};

struct WlsResult {
    Identification fit;
    double initial_objective = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// Non-negative weighted least squares of the analytic composite Allan
/// variance against the curve, refining `init`. The returned objective is
/// never above the initial one. On non-convergence the initial params are
/// returned with every detected flag turned unreliable.
WlsResult fit_composite_wls(const AllanCurve& curve, const Identification& init, const WlsOptions& options = {});

struct AnalysisOptions {
    Estimator estimator = Estimator::overlapping;
    std::size_t points_per_decade = 10;
    WlsOptions wls{};
};

/// One channel's row of the error budget.
struct ChannelBudget {
    std::string label;
    Unit unit = Unit::generic;
    NoiseParams params;
    CoefficientFlags flags;
    bool reliable = true;
    std::vector<std::string> warnings;
};

/// Full per-channel pipeline output, kept for plotting and validation.
struct ChannelAnalysis {
    AllanCurve curve;
    std::vector<SlopeSegment> segments;
    ChannelBudget budget;
};

/// detrend -> Allan curve -> slope segments -> readout -> WLS refinement.
ChannelAnalysis analyze_channel(const SampleSeries& series, const AnalysisOptions& options = {});

struct ErrorBudget {
    std::vector<ChannelBudget> channels;
    Estimator estimator = Estimator::overlapping;
    std::size_t points_per_decade = 10;

    const ChannelBudget* find(std::string_view label) const noexcept;
};

/// Runs analyze_channel on every channel. A channel that fails keeps an
/// empty curve and an unreliable budget row naming the error; nothing is
/// thrown.
std::vector<ChannelAnalysis> analyze_recording(const Recording& recording, const AnalysisOptions& options = {});

/// Budget rows of analyze_recording.
ErrorBudget build_error_budget(const Recording& recording, const AnalysisOptions& options = {});

std::string budget_to_json(const ErrorBudget& budget);
ErrorBudget budget_from_json(std::string_view text);
/// Rows are error types, columns are channels; second row carries units.
std::string budget_to_csv(const ErrorBudget& budget);

}  // namespace avarkit
