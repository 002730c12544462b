#include "avarkit/timeseries.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "avarkit/error.hpp"
#include "numeric.hpp"

namespace avarkit {

std::string_view to_string(Unit unit) noexcept {
    switch (unit) {
        case Unit::milli_g: return "mg";
        case Unit::deg_per_s: return "deg/s";
        case Unit::micro_tesla: return "uT";
        case Unit::generic: break;
    }
    return "unit";
}

Unit unit_for_label(std::string_view label) noexcept {
    const auto prefix = label.substr(0, label.find('.'));
    if (prefix == "accel" || prefix == "acc") return Unit::milli_g;
    if (prefix == "gyro") return Unit::deg_per_s;
    if (prefix == "mag") return Unit::micro_tesla;
    return Unit::generic;
}

SampleSeries::SampleSeries(std::vector<double> values, double dt, std::string axis_label,
                           std::optional<Unit> unit)
    : values_(std::move(values)),
      dt_(dt),
      label_(std::move(axis_label)),
      unit_(unit.value_or(unit_for_label(label_))) {
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
        throw Error(ErrorCode::invalid_argument, label_ + ": sample interval must be finite and > 0");
    }
    if (values_.empty()) {
        throw Error(ErrorCode::empty_input, label_ + ": series has no samples");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) throw DataError(label_, i, "non-finite sample");
    }
}

SampleSeries SampleSeries::relabeled(std::string label, std::optional<Unit> unit) const {
    SampleSeries copy = *this;
    copy.unit_ = unit.value_or(unit_for_label(label));
    copy.label_ = std::move(label);
    return copy;
}

Recording::Recording(std::vector<SampleSeries> channels, RecordingMeta meta)
    : channels_(std::move(channels)), meta_(std::move(meta)) {
    if (channels_.empty()) throw Error(ErrorCode::empty_input, "recording has no channels");
    const auto& first = channels_.front();
    for (const auto& ch : channels_) {
        if (ch.dt() != first.dt() || ch.size() != first.size()) {
            throw Error(ErrorCode::sampling_error,
                        "channel " + ch.axis_label() + " does not share dt/length with " +
                            first.axis_label());
        }
    }
}

const SampleSeries* Recording::find(std::string_view label) const noexcept {
    for (const auto& ch : channels_) {
        if (ch.axis_label() == label) return &ch;
    }
    return nullptr;
}

namespace {

// Differences of decimal timestamps land a few ulps off the period that
// produced them. Rounding to 12 significant digits recovers it exactly for
// any decimal rate and moves any other rate by under 1e-11 relative.
double snap_period(double dt) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), dt, std::chars_format::scientific, 11);
    double snapped = dt;
    std::from_chars(buf.data(), res.ptr, snapped);
    return std::abs(snapped - dt) <= 1e-9 * dt ? snapped : dt;
}

}  // namespace

double infer_rate(std::span<const double> timestamps, double tolerance) {
    if (timestamps.size() < 2) {
        throw Error(ErrorCode::sampling_error, "need at least two timestamps to infer a rate");
    }
    std::vector<double> steps(timestamps.size() - 1);
    for (std::size_t i = 0; i + 1 < timestamps.size(); ++i) {
        steps[i] = timestamps[i + 1] - timestamps[i];
        if (!(steps[i] > 0.0)) {
            throw Error(ErrorCode::sampling_error,
                        "timestamps not strictly increasing at row " + std::to_string(i + 1));
        }
    }
    std::vector<double> sorted = steps;
    const auto mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    double median = sorted[mid];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
        median = 0.5 * (lower + median);
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (std::abs(steps[i] - median) > tolerance * median) {
            throw Error(ErrorCode::sampling_error,
                        "non-uniform sampling: step " + std::to_string(i) + " is " +
                            detail::format_double(steps[i]) + " s, median " +
                            detail::format_double(median) + " s");
        }
    }
    return median;
}

SampleSeries detrend_mean(const SampleSeries& series) {
    const double mean = detail::compensated_mean(series.values());
    std::vector<double> out(series.values().begin(), series.values().end());
    for (double& v : out) v -= mean;
    return SampleSeries(std::move(out), series.dt(), series.axis_label(), series.unit());
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// from_chars rejects a leading '+', which some writers emit.
bool parse_number(std::string_view field, double& out) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    if (field.empty()) return false;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

Recording parse_recording(std::string_view text, const CsvFormat& format, std::string source) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

    std::vector<std::string> labels;
    std::vector<double> time;
    std::vector<std::vector<double>> columns;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;

        const auto fields = split_fields(line);
        if (!header_seen) {
            if (fields.size() < 2) throw ParseError(line_no, "header needs a time column and at least one channel");
            for (std::size_t c = 1; c < fields.size(); ++c) {
                if (fields[c].empty()) throw ParseError(line_no, "empty channel name in column " + std::to_string(c + 1));
                const std::string name(fields[c]);
                if (std::find(labels.begin(), labels.end(), name) != labels.end()) {
                    throw ParseError(line_no, "duplicate channel '" + name + "'");
                }
                labels.push_back(name);
            }
            columns.resize(labels.size());
            header_seen = true;
            continue;
        }
        if (fields.size() != labels.size() + 1) {
            throw ParseError(line_no, "expected " + std::to_string(labels.size() + 1) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        const std::size_t row = time.size();
        double t = 0.0;
        if (!parse_number(fields[0], t)) throw ParseError(line_no, "bad time value '" + std::string(fields[0]) + "'");
        if (!std::isfinite(t)) throw ParseError(line_no, "non-finite time value");
        time.push_back(t);
        for (std::size_t c = 0; c < labels.size(); ++c) {
            double v = 0.0;
            if (!parse_number(fields[c + 1], v)) {
                throw ParseError(line_no, "bad value '" + std::string(fields[c + 1]) + "' in column " + labels[c]);
            }
            if (!std::isfinite(v)) throw DataError(labels[c], row, "non-finite sample");
            columns[c].push_back(v);
        }
    }

    if (!header_seen || time.empty()) throw Error(ErrorCode::empty_input, source + ": no data rows");

    double dt = 0.0;
    if (format.time_column == CsvFormat::TimeColumn::seconds) {
        if (time.size() < 2) throw Error(ErrorCode::sampling_error, source + ": one row is not enough to infer dt");
        const double inferred = infer_rate(time, format.tolerance);
        dt = format.dt ? *format.dt : snap_period(inferred);
    } else {
        if (!format.dt || !(*format.dt > 0.0)) {
            throw Error(ErrorCode::invalid_argument, "sample-index CSV needs an explicit dt");
        }
        for (std::size_t i = 0; i < time.size(); ++i) {
            if (time[i] != static_cast<double>(i) + time.front()) {
                throw Error(ErrorCode::sampling_error, "sample index not consecutive at row " + std::to_string(i));
            }
        }
        dt = *format.dt;
    }

    std::vector<SampleSeries> channels;
    channels.reserve(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        channels.emplace_back(std::move(columns[c]), dt, labels[c]);
    }
    RecordingMeta meta{std::move(source), std::nullopt};
    if (format.time_column == CsvFormat::TimeColumn::seconds) meta.start_epoch = time.front();
    return Recording(std::move(channels), std::move(meta));
}

Recording load_recording(const std::filesystem::path& path, const CsvFormat& format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_recording(buf.str(), format, path.string());
}

std::string format_recording(const Recording& recording) {
    std::string out = "t";
    for (const auto& ch : recording.channels()) {
        out += ',';
        out += ch.axis_label();
    }
    out += '\n';
    const double dt = recording.dt();
    const double t0 = recording.meta().start_epoch.value_or(0.0);
    for (std::size_t i = 0; i < recording.length(); ++i) {
        out += detail::format_double(t0 + static_cast<double>(i) * dt);
        for (const auto& ch : recording.channels()) {
            out += ',';
            out += detail::format_double(ch[i]);
        }
        out += '\n';
    }
    return out;
}

void save_recording(const Recording& recording, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    out << format_recording(recording);
    if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

}  // namespace avarkit
