#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avarkit {

/// Physical unit tag of a channel. Values are never converted between units.
enum class Unit { generic, milli_g, deg_per_s, micro_tesla };

std::string_view to_string(Unit unit) noexcept;

/// Unit implied by a channel identifier prefix (accel.*, gyro.*, mag.*).
Unit unit_for_label(std::string_view label) noexcept;

/**
 * Uniformly sampled scalar stream of one sensor axis.
 *
 * Immutable after construction. The constructor enforces dt > 0, a
 * non-empty value sequence and finite values.
 */
class SampleSeries {
public:
    SampleSeries(std::vector<double> values, double dt, std::string axis_label = "sim.x",
                 std::optional<Unit> unit = std::nullopt);

    std::span<const double> values() const noexcept { return values_; }
    double dt() const noexcept { return dt_; }
    std::size_t size() const noexcept { return values_.size(); }
    Unit unit() const noexcept { return unit_; }
    const std::string& axis_label() const noexcept { return label_; }

    double operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Copy with a different label (unit re-derived unless given).
    SampleSeries relabeled(std::string label, std::optional<Unit> unit = std::nullopt) const;

    friend bool operator==(const SampleSeries&, const SampleSeries&) = default;

private:
    std::vector<double> values_;
    double dt_;
    std::string label_;
    Unit unit_;
};

struct RecordingMeta {
    std::string source;
    std::optional<double> start_epoch;

    friend bool operator==(const RecordingMeta&, const RecordingMeta&) = default;
};

/// Set of channels sharing one sample interval and length. Channel order
/// is the column order of the originating file.
class Recording {
public:
    explicit Recording(std::vector<SampleSeries> channels, RecordingMeta meta = {});

    std::span<const SampleSeries> channels() const noexcept { return channels_; }
    const RecordingMeta& meta() const noexcept { return meta_; }
    double dt() const noexcept { return channels_.front().dt(); }
    std::size_t length() const noexcept { return channels_.front().size(); }

    /// nullptr when absent.
    const SampleSeries* find(std::string_view label) const noexcept;

    friend bool operator==(const Recording&, const Recording&) = default;

private:
    std::vector<SampleSeries> channels_;
    RecordingMeta meta_;
};

/// How the first CSV column is interpreted.
struct CsvFormat {
    enum class TimeColumn { seconds, sample_index };

    TimeColumn time_column = TimeColumn::seconds;
    /// Required for sample_index files; ignored otherwise.
    std::optional<double> dt;
    /// Relative uniformity tolerance for timestamps.
    double tolerance = 0.01;
};

Recording parse_recording(std::string_view text, const CsvFormat& format = {},
                          std::string source = "<memory>");
Recording load_recording(const std::filesystem::path& path, const CsvFormat& format = {});

/// Header `t,<chan>,...`; time written as i*dt, all numbers in shortest
/// round-trip decimal form.
std::string format_recording(const Recording& recording);
void save_recording(const Recording& recording, const std::filesystem::path& path);

/// Median successive difference of strictly increasing timestamps. Throws
/// sampling_error if any step deviates from the median by more than
/// `tolerance` relative.
double infer_rate(std::span<const double> timestamps, double tolerance = 0.01);

/// Removes the sample mean (compensated summation).
SampleSeries detrend_mean(const SampleSeries& series);

}  // namespace avarkit
