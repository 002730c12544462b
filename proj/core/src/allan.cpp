#include "avarkit/allan.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "avarkit/error.hpp"
#include "numeric.hpp"
#include "parallel.hpp"

namespace avarkit {

std::string_view to_string(Estimator estimator) noexcept {
    return estimator == Estimator::standard ? "standard" : "overlapping";
}

Estimator estimator_from_string(std::string_view name) {
    if (name == "standard") return Estimator::standard;
    if (name == "overlapping") return Estimator::overlapping;
    throw Error(ErrorCode::invalid_argument, "unknown estimator '" + std::string(name) + "'");
}

std::size_t AllanCurve::usable_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const AllanPoint& p) { return p.usable; }));
}

TauGrid TauGrid::from_clusters(std::vector<std::size_t> m_values, double dt, std::size_t n_samples) {
    if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "grid dt must be > 0");
    const std::size_t cap = max_cluster(n_samples);
    if (cap < 1) {
        throw Error(ErrorCode::series_too_short,
                    "series of " + std::to_string(n_samples) + " samples admits no cluster time");
    }
    TauGrid grid;
    grid.dt = dt;
    grid.n_samples = n_samples;
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        const std::size_t m = m_values[i];
        if (m < 1 || m > cap) {
            throw Error(ErrorCode::grid_mismatch,
                        "cluster size " + std::to_string(m) + " outside [1, " + std::to_string(cap) + "]");
        }
        if (i > 0 && m <= m_values[i - 1]) throw Error(ErrorCode::grid_mismatch, "cluster sizes must increase");
        grid.taus.push_back(static_cast<double>(m) * dt);
    }
    grid.m_values = std::move(m_values);
    return grid;
}

TauGrid tau_grid_log(double dt, std::size_t n_samples, std::size_t points_per_decade) {
    if (points_per_decade < 1) throw Error(ErrorCode::invalid_argument, "points_per_decade must be >= 1");
    const std::size_t cap = TauGrid::max_cluster(n_samples);
    if (cap < 1) {
        throw Error(ErrorCode::series_too_short,
                    "series of " + std::to_string(n_samples) + " samples admits no cluster time");
    }
    std::vector<std::size_t> ms;
    const double ppd = static_cast<double>(points_per_decade);
    for (std::size_t k = 0;; ++k) {
        const double m = std::round(std::pow(10.0, static_cast<double>(k) / ppd));
        if (m > static_cast<double>(cap)) break;
        const auto mi = static_cast<std::size_t>(m);
        if (ms.empty() || mi > ms.back()) ms.push_back(mi);
    }
    return TauGrid::from_clusters(std::move(ms), dt, n_samples);
}

namespace {

void check_grid(const SampleSeries& series, const TauGrid& grid) {
    if (grid.n_samples != series.size() || grid.dt != series.dt()) {
        throw Error(ErrorCode::grid_mismatch, "grid built for N=" + std::to_string(grid.n_samples) +
                                                  " does not match series " + series.axis_label() +
                                                  " with N=" + std::to_string(series.size()));
    }
    if (grid.m_values.empty()) throw Error(ErrorCode::grid_mismatch, "empty grid");
}

// Double-double value used for prefix sums.
struct DD {
    double hi = 0.0;
    double lo = 0.0;
};

inline DD two_sum(double a, double b) noexcept {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}

inline DD quick_two_sum(double a, double b) noexcept {
    const double s = a + b;
    return {s, b - (s - a)};
}

inline DD add(DD a, double b) noexcept {
    DD s = two_sum(a.hi, b);
    s.lo += a.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline DD sub(DD a, DD b) noexcept {
    DD s = two_sum(a.hi, -b.hi);
    s.lo += a.lo - b.lo;
    return quick_two_sum(s.hi, s.lo);
}

std::vector<double> centered(const SampleSeries& series) {
    const double mean = detail::compensated_mean(series.values());
    std::vector<double> out(series.values().begin(), series.values().end());
    for (double& v : out) v -= mean;
    return out;
}

AllanCurve make_curve(const SampleSeries& series, const TauGrid& grid, Estimator estimator) {
    AllanCurve curve;
    curve.estimator = estimator;
    curve.source_len = series.size();
    curve.dt = series.dt();
    curve.points.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        curve.points[i].tau = grid.taus[i];
        curve.points[i].m = grid.m_values[i];
    }
    return curve;
}

void finish_point(AllanPoint& p, double avar) {
    p.avar = std::max(avar, 0.0);
    p.adev = std::sqrt(p.avar);
}

}  // namespace

AllanCurve avar_standard(const SampleSeries& series, const TauGrid& grid) {
    check_grid(series, grid);
    const std::vector<double> x = centered(series);
    AllanCurve curve = make_curve(series, grid, Estimator::standard);
    detail::parallel_for(grid.size(), [&](std::size_t g) {
        const std::size_t m = grid.m_values[g];
        const std::size_t clusters = x.size() / m;
        std::vector<double> means(clusters);
        for (std::size_t c = 0; c < clusters; ++c) {
            detail::CompensatedSum s;
            for (std::size_t j = c * m; j < (c + 1) * m; ++j) s.add(x[j]);
            means[c] = s.value() / static_cast<double>(m);
        }
        detail::CompensatedSum acc;
        for (std::size_t c = 0; c + 1 < clusters; ++c) {
            const double d = means[c + 1] - means[c];
            acc.add(d * d);
        }
        finish_point(curve.points[g], acc.value() / (2.0 * static_cast<double>(clusters - 1)));
    });
    return confidence_bounds(std::move(curve));
}

AllanCurve avar_overlapping(const SampleSeries& series, const TauGrid& grid) {
    check_grid(series, grid);
    const std::vector<double> x = centered(series);
    const std::size_t n = x.size();
    std::vector<DD> prefix(n + 1);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = add(prefix[i], x[i]);

    AllanCurve curve = make_curve(series, grid, Estimator::overlapping);
    detail::parallel_for(grid.size(), [&](std::size_t g) {
        const std::size_t m = grid.m_values[g];
        const std::size_t terms = n - 2 * m + 1;
        detail::CompensatedSum acc;
        for (std::size_t i = 0; i < terms; ++i) {
            const DD later = sub(prefix[i + 2 * m], prefix[i + m]);
            const DD earlier = sub(prefix[i + m], prefix[i]);
            const DD d = sub(later, earlier);
            const double v = d.hi + d.lo;
            acc.add(v * v);
        }
        const double md = static_cast<double>(m);
        finish_point(curve.points[g], acc.value() / (2.0 * md * md * static_cast<double>(terms)));
    });
    return confidence_bounds(std::move(curve));
}

AllanCurve compute_avar(const SampleSeries& series, const TauGrid& grid, Estimator estimator) {
    return estimator == Estimator::standard ? avar_standard(series, grid) : avar_overlapping(series, grid);
}

std::size_t independent_clusters(std::size_t source_len, std::size_t m) noexcept {
    return m == 0 ? 0 : source_len / m;
}

AllanCurve confidence_bounds(AllanCurve curve) {
    if (curve.source_len == 0) throw Error(ErrorCode::invalid_argument, "curve has no source length");
    for (auto& p : curve.points) {
        std::size_t m = p.m;
        if (m == 0) m = static_cast<std::size_t>(std::llround(p.tau / curve.dt));
        const std::size_t k = independent_clusters(curve.source_len, m);
        if (k <= 1) {
            p.usable = false;
            p.rel_ci = 1.0;
        } else {
            p.usable = true;
            p.rel_ci = 1.0 / std::sqrt(2.0 * static_cast<double>(k - 1));
        }
    }
    return curve;
}

std::string curve_to_csv(const AllanCurve& curve) {
    std::string out = "tau,avar,adev,rel_ci\n";
    for (const auto& p : curve.points) {
        out += detail::format_double(p.tau) + ',' + detail::format_double(p.avar) + ',' +
               detail::format_double(p.adev) + ',' + detail::format_double(p.rel_ci) + '\n';
    }
    return out;
}

std::string curve_to_json(const AllanCurve& curve) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : curve.points) {
        arr.push_back({{"tau", p.tau}, {"avar", p.avar}, {"adev", p.adev}, {"rel_ci", p.rel_ci}});
    }
    return arr.dump(2) + "\n";
}

namespace {

AllanPoint point_from(double tau, double avar, double adev, double rel_ci) {
    if (!(tau > 0.0) || !(avar >= 0.0) || !(adev >= 0.0) || !(rel_ci > 0.0)) {
        throw Error(ErrorCode::parse_error, "curve point out of range");
    }
    AllanPoint p;
    p.tau = tau;
    p.avar = avar;
    p.adev = adev;
    p.rel_ci = rel_ci;
    p.usable = rel_ci < 1.0;
    return p;
}

void check_increasing(const AllanCurve& curve) {
    if (curve.points.empty()) throw Error(ErrorCode::empty_input, "curve has no points");
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (!(curve.points[i].tau > curve.points[i - 1].tau)) {
            throw Error(ErrorCode::parse_error, "curve taus must be strictly increasing");
        }
    }
}

}  // namespace

AllanCurve curve_from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    AllanCurve curve;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "tau,avar,adev,rel_ci") throw ParseError(line_no, "expected header tau,avar,adev,rel_ci");
            header = true;
            continue;
        }
        double v[4];
        std::istringstream row(line);
        std::string field;
        int c = 0;
        while (std::getline(row, field, ',')) {
            if (c >= 4) throw ParseError(line_no, "too many fields");
            try {
                std::size_t used = 0;
                v[c] = std::stod(field, &used);
                if (used != field.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad number '" + field + "'");
            }
            ++c;
        }
        if (c != 4) throw ParseError(line_no, "expected 4 fields");
        curve.points.push_back(point_from(v[0], v[1], v[2], v[3]));
    }
    check_increasing(curve);
    return curve;
}

AllanCurve curve_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("curve JSON: ") + e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::parse_error, "curve JSON must be an array of points");
    AllanCurve curve;
    for (const auto& p : doc) {
        try {
            curve.points.push_back(point_from(p.at("tau").get<double>(), p.at("avar").get<double>(),
                                              p.at("adev").get<double>(), p.at("rel_ci").get<double>()));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::parse_error, std::string("curve point: ") + e.what());
        }
    }
    check_increasing(curve);
    return curve;
}

}  // namespace avarkit
