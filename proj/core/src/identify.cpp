#include "avarkit/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "avarkit/error.hpp"
#include "json_util.hpp"
#include "nnls.hpp"
#include "numeric.hpp"

namespace avarkit {

std::string_view to_string(Coefficient c) noexcept {
    switch (c) {
        case Coefficient::q: return "q";
        case Coefficient::n: return "n";
        case Coefficient::b: return "b";
        case Coefficient::k: return "k";
        case Coefficient::r: return "r";
    }
    return "?";
}

double& coefficient(NoiseParams& p, Coefficient c) noexcept {
    switch (c) {
        case Coefficient::q: return p.q;
        case Coefficient::n: return p.n;
        case Coefficient::b: return p.b;
        case Coefficient::k: return p.k;
        case Coefficient::r: break;
    }
    return p.r;
}

double coefficient(const NoiseParams& p, Coefficient c) noexcept {
    return coefficient(const_cast<NoiseParams&>(p), c);
}

std::string_view to_string(CoefficientStatus s) noexcept {
    switch (s) {
        case CoefficientStatus::detected: return "detected";
        case CoefficientStatus::not_detected: return "not_detected";
        case CoefficientStatus::unreliable: return "unreliable";
    }
    return "?";
}

CoefficientStatus status_from_string(std::string_view s) {
    if (s == "detected") return CoefficientStatus::detected;
    if (s == "not_detected") return CoefficientStatus::not_detected;
    if (s == "unreliable") return CoefficientStatus::unreliable;
    throw Error(ErrorCode::parse_error, "unknown coefficient status '" + std::string(s) + "'");
}

double SlopeSegment::adev_at(double tau) const { return std::pow(10.0, intercept + slope * std::log10(tau)); }

// ---------------------------------------------------------------------------
// Slope segmentation

namespace {

struct LogPoint {
    double x;  // log10 tau
    double y;  // log10 adev
    double w;  // 1 / rel_ci^2
    std::size_t index;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LineFit weighted_line(std::span<const LogPoint> pts) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (const auto& p : pts) {
        sw += p.w;
        sx += p.w * p.x;
        sy += p.w * p.y;
    }
    const double mx = sx / sw;
    const double my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        sxx += p.w * (p.x - mx) * (p.x - mx);
        sxy += p.w * (p.x - mx) * (p.y - my);
    }
    LineFit f;
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

double fixed_slope_intercept(std::span<const LogPoint> pts, double slope) {
    double sw = 0.0, s = 0.0;
    for (const auto& p : pts) {
        sw += p.w;
        s += p.w * (p.y - slope * p.x);
    }
    return s / sw;
}

std::optional<double> nearest_canonical(double slope) {
    for (double c : kCanonicalSlopes) {
        if (std::abs(slope - c) <= kSlopeSnapTolerance) return c;
    }
    return std::nullopt;
}

// Label marking a point whose local slope is not near any canonical value.
constexpr int kFreeLabel = 99;

int label_of(double slope) {
    const auto c = nearest_canonical(slope);
    return c ? static_cast<int>(std::lround(*c * 2.0)) : kFreeLabel;
}

constexpr std::size_t kMinSegmentPoints = 3;
constexpr std::size_t kMinUsablePoints = 10;
constexpr std::size_t kSlopeHalfWindow = 2;

SlopeSegment make_segment(const AllanCurve& curve, std::span<const LogPoint> run, double slope, bool snapped,
                          double intercept) {
    SlopeSegment seg;
    seg.first = run.front().index;
    seg.last = run.back().index;
    seg.tau_lo = curve.points[seg.first].tau;
    seg.tau_hi = curve.points[seg.last].tau;
    seg.slope = slope;
    seg.snapped = snapped;
    seg.intercept = intercept;
    double ss = 0.0;
    for (const auto& p : run) {
        const double r = p.y - (seg.intercept + seg.slope * p.x);
        ss += r * r;
    }
    seg.rms_residual = std::sqrt(ss / static_cast<double>(run.size()));
    return seg;
}

// A curve that rises along one run and later falls along another crosses
// slope 0 in between, often too briefly for three consecutive 0 labels. The
// peak still marks a flat region, so a 3-point 0-slope segment centred on
// the highest point between the runs is added when its own slope snaps to 0.
// It may overlap the two runs when they nearly touch.
// Valleys are left alone: a sum of the canonical terms already produces them.
void add_turnovers(const AllanCurve& curve, std::span<const LogPoint> pts, std::vector<SlopeSegment>& segments) {
    auto position = [&](std::size_t index) {
        return static_cast<std::size_t>(
            std::lower_bound(pts.begin(), pts.end(), index, [](const LogPoint& p, std::size_t i) { return p.index < i; }) -
            pts.begin());
    };
    std::vector<SlopeSegment> added;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& rise = segments[s];
        if (rise.slope < kSlopeSnapTolerance) continue;
        std::size_t f = s + 1;
        while (f < segments.size() && segments[f].slope > -kSlopeSnapTolerance) ++f;
        if (f == segments.size()) continue;
        const std::size_t lo = position(rise.last);
        const std::size_t hi = position(segments[f].first);
        if (hi < lo + kMinSegmentPoints - 1) continue;
        std::size_t top = lo;
        for (std::size_t i = lo; i <= hi; ++i) {
            if (pts[i].y > pts[top].y) top = i;
        }
        const std::size_t centre = std::clamp<std::size_t>(top, 1, pts.size() - 2);
        const auto run = pts.subspan(centre - 1, 3);
        if (std::abs(weighted_line(run).slope) > kSlopeSnapTolerance) continue;
        const std::size_t first = run.front().index;
        const std::size_t last = run.back().index;
        bool clash = false;
        for (std::size_t o = s + 1; o < f; ++o) clash = clash || !(last < segments[o].first || first > segments[o].last);
        if (!clash) added.push_back(make_segment(curve, run, 0.0, true, fixed_slope_intercept(run, 0.0)));
    }
    segments.insert(segments.end(), added.begin(), added.end());
    std::stable_sort(segments.begin(), segments.end(),
                     [](const SlopeSegment& x, const SlopeSegment& y) { return x.first < y.first; });
}

}  // namespace

std::vector<SlopeSegment> fit_slope_segments(const AllanCurve& curve) {
    std::vector<LogPoint> pts;
    std::size_t usable = 0;
    bool any_signal = false;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const auto& p = curve.points[i];
        if (!p.usable) continue;
        ++usable;
        if (p.adev > 0.0) {
            any_signal = true;
            pts.push_back({std::log10(p.tau), std::log10(p.adev), 1.0 / (p.rel_ci * p.rel_ci), i});
        }
    }
    if (usable == 0) throw Error(ErrorCode::series_too_short, "no usable Allan points");
    if (usable < kMinUsablePoints) {
        throw Error(ErrorCode::series_too_short,
                    "slope fitting needs >= 10 usable points, curve has " + std::to_string(usable));
    }
    if (!any_signal) return {};

    std::vector<int> labels(pts.size(), kFreeLabel);
    if (pts.size() >= kMinSegmentPoints) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const std::size_t lo = i >= kSlopeHalfWindow ? i - kSlopeHalfWindow : 0;
            const std::size_t hi = std::min(pts.size() - 1, i + kSlopeHalfWindow);
            labels[i] = label_of(weighted_line(std::span(pts).subspan(lo, hi - lo + 1)).slope);
        }
    }

    std::vector<SlopeSegment> segments;
    std::size_t start = 0;
    while (start < pts.size()) {
        std::size_t end = start;
        while (end + 1 < pts.size() && labels[end + 1] == labels[start]) ++end;
        const std::size_t count = end - start + 1;
        if (count >= kMinSegmentPoints) {
            const auto run = std::span(pts).subspan(start, count);
            const LineFit free_fit = weighted_line(run);
            if (auto canon = nearest_canonical(free_fit.slope)) {
                segments.push_back(make_segment(curve, run, *canon, true, fixed_slope_intercept(run, *canon)));
            } else {
                segments.push_back(make_segment(curve, run, free_fit.slope, false, free_fit.intercept));
            }
        }
        start = end + 1;
    }
    add_turnovers(curve, pts, segments);
    return segments;
}

// ---------------------------------------------------------------------------
// Coefficient readout

Identification extract_coefficients(const AllanCurve& curve, std::span<const SlopeSegment> segments) {
    Identification out;
    auto best_for = [&](double slope) -> const SlopeSegment* {
        const SlopeSegment* best = nullptr;
        for (const auto& s : segments) {
            if (!s.snapped || s.slope != slope) continue;
            if (!best || s.point_count() > best->point_count()) best = &s;
        }
        return best;
    };
    auto read = [&](Coefficient c, double slope, double tau_read) {
        if (const auto* seg = best_for(slope)) {
            coefficient(out.params, c) = seg->adev_at(tau_read);
            out.flags[c] = CoefficientStatus::detected;
        }
    };
    read(Coefficient::q, -1.0, std::numbers::sqrt3);
    read(Coefficient::n, -0.5, 1.0);
    read(Coefficient::k, 0.5, 3.0);
    read(Coefficient::r, 1.0, std::numbers::sqrt2);
    if (const auto* seg = best_for(0.0)) {
        double lowest = std::numeric_limits<double>::infinity();
        for (std::size_t i = seg->first; i <= seg->last; ++i) {
            if (curve.points[i].usable && curve.points[i].adev > 0.0) lowest = std::min(lowest, curve.points[i].adev);
        }
        if (std::isfinite(lowest)) {
            out.params.b = lowest / kBiasInstabilityFactor;
            out.flags[Coefficient::b] = CoefficientStatus::detected;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Composite weighted least squares
//
// AVAR is linear in theta = (3q^2, n^2, (0.664 b)^2, k^2/3, r^2/2[, qc^2]),
// so every Gauss-Newton step on the log-space objective is itself a
// non-negative least-squares problem in theta.

namespace {

struct FitPoint {
    double tau;
    double avar;
    double weight;  // 1 / rel_ci^2
};

std::vector<FitPoint> fit_points(const AllanCurve& curve) {
    std::vector<FitPoint> out;
    for (const auto& p : curve.points) {
        if (p.usable && p.avar > 0.0) out.push_back({p.tau, p.avar, 1.0 / (p.rel_ci * p.rel_ci)});
    }
    return out;
}

constexpr Eigen::Index kBaseTerms = 5;

Eigen::VectorXd basis(double tau, std::optional<double> gm_tc) {
    Eigen::VectorXd phi(gm_tc ? kBaseTerms + 1 : kBaseTerms);
    phi << 1.0 / (tau * tau), 1.0 / tau, 1.0, tau, tau * tau;
    if (gm_tc) phi(kBaseTerms) = gauss_markov_avar(1.0, *gm_tc, tau);
    return phi;
}

Eigen::VectorXd theta_from(const NoiseParams& p, std::optional<double> gm_tc) {
    Eigen::VectorXd theta(gm_tc ? kBaseTerms + 1 : kBaseTerms);
    const double flat = kBiasInstabilityFactor * p.b;
    theta << 3.0 * p.q * p.q, p.n * p.n, flat * flat, p.k * p.k / 3.0, p.r * p.r / 2.0;
    if (gm_tc) theta(kBaseTerms) = p.gm_sigma > 0.0 ? 2.0 * p.gm_sigma * p.gm_sigma / *gm_tc : 0.0;
    return theta;
}

NoiseParams params_from(const Eigen::VectorXd& theta, std::optional<double> gm_tc, const NoiseParams& base) {
    NoiseParams p = base;
    p.q = std::sqrt(theta(0) / 3.0);
    p.n = std::sqrt(theta(1));
    p.b = std::sqrt(theta(2)) / kBiasInstabilityFactor;
    p.k = std::sqrt(3.0 * theta(3));
    p.r = std::sqrt(2.0 * theta(4));
    if (gm_tc) {
        p.gm_sigma = std::sqrt(theta(kBaseTerms) * *gm_tc / 2.0);
        p.gm_tc = p.gm_sigma > 0.0 ? *gm_tc : 0.0;
    } else {
        p.gm_sigma = 0.0;
        p.gm_tc = 0.0;
    }
    return p;
}

class CompositeProblem {
public:
    CompositeProblem(std::vector<FitPoint> pts, std::optional<double> gm_tc, const std::array<bool, 5>& free_terms)
        : pts_(std::move(pts)), gm_tc_(gm_tc) {
        const auto cols = gm_tc ? kBaseTerms + 1 : kBaseTerms;
        design_.resize(static_cast<Eigen::Index>(pts_.size()), cols);
        for (std::size_t j = 0; j < pts_.size(); ++j) {
            design_.row(static_cast<Eigen::Index>(j)) = basis(pts_[j].tau, gm_tc).transpose();
        }
        // A masked term keeps a zero column, which NNLS leaves at zero.
        for (std::size_t c = 0; c < free_terms.size(); ++c) {
            if (!free_terms[c]) design_.col(static_cast<Eigen::Index>(c)).setZero();
        }
    }

    double objective(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd model = design_ * theta;
        double acc = 0.0;
        for (std::size_t j = 0; j < pts_.size(); ++j) {
            const double m = model(static_cast<Eigen::Index>(j));
            if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
            const double r = std::log(m) - std::log(pts_[j].avar);
            acc += pts_[j].weight * r * r;
        }
        return acc;
    }

    /// Relative-residual linearization: min sum w (A theta / avar - 1)^2.
    Eigen::VectorXd linear_start() const {
        const auto rows = design_.rows();
        Eigen::MatrixXd a(rows, design_.cols());
        Eigen::VectorXd rhs(rows);
        for (Eigen::Index j = 0; j < rows; ++j) {
            const auto& p = pts_[static_cast<std::size_t>(j)];
            const double sw = std::sqrt(p.weight);
            a.row(j) = design_.row(j) * (sw / p.avar);
            rhs(j) = sw;
        }
        return detail::nnls(a, rhs);
    }

    /// Target of one projected Gauss-Newton step from theta.
    Eigen::VectorXd gauss_newton_target(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd model = design_ * theta;
        const auto rows = design_.rows();
        Eigen::MatrixXd jac(rows, design_.cols());
        Eigen::VectorXd rhs(rows);
        for (Eigen::Index j = 0; j < rows; ++j) {
            const auto& p = pts_[static_cast<std::size_t>(j)];
            const double sw = std::sqrt(p.weight);
            const double m = model(j);
            jac.row(j) = design_.row(j) * (sw / m);
            const double resid = std::log(m) - std::log(p.avar);
            rhs(j) = sw * (1.0 - resid);  // J theta = sw for this linearization
        }
        return detail::nnls(jac, rhs);
    }

    const Eigen::MatrixXd& design() const { return design_; }
    std::optional<double> gm_tc() const { return gm_tc_; }

private:
    std::vector<FitPoint> pts_;
    std::optional<double> gm_tc_;
    Eigen::MatrixXd design_;
};

struct SolveResult {
    Eigen::VectorXd theta;
    double objective;
    int iterations;
    bool converged;
};

SolveResult solve(const CompositeProblem& problem, const Eigen::VectorXd& start, int max_iterations) {
    Eigen::VectorXd theta = problem.linear_start();
    double f = problem.objective(theta);
    const double f_start = problem.objective(start);
    if (f_start < f) {
        theta = start;
        f = f_start;
    }
    if (!std::isfinite(f)) return {theta, f, 0, false};

    for (int it = 1; it <= max_iterations; ++it) {
        const Eigen::VectorXd target = problem.gauss_newton_target(theta);
        const Eigen::VectorXd step = target - theta;
        double alpha = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
            const Eigen::VectorXd trial = theta + alpha * step;
            const double ft = problem.objective(trial);
            if (ft <= f) {
                const double gain = f - ft;
                theta = trial;
                const double before = f;
                f = ft;
                improved = true;
                if (gain <= 1e-12 * std::max(before, 1e-300)) return {theta, f, it, true};
                break;
            }
        }
        if (!improved) return {theta, f, it, true};
    }
    return {theta, f, max_iterations, false};
}

// A term counts as detected when it carries more of the model variance than
// twice the AVAR estimate's 1-sigma relative error at some point.
constexpr double kSignificance = 2.0;

bool significant(const std::vector<FitPoint>& pts, const NoiseParams& params, Coefficient c) {
    for (const auto& p : pts) {
        const AvarTerms t = theoretical_avar_terms(params, p.tau);
        double term = 0.0;
        switch (c) {
            case Coefficient::q: term = t.quantization; break;
            case Coefficient::n: term = t.white; break;
            case Coefficient::b: term = t.bias_instability; break;
            case Coefficient::k: term = t.rate_random_walk; break;
            case Coefficient::r: term = t.ramp; break;
        }
        const double total = t.total();
        const double avar_rel_err = 2.0 / std::sqrt(p.weight);
        if (total > 0.0 && term / total > kSignificance * avar_rel_err) return true;
    }
    return false;
}

// A detected term whose fitted theta is within this many standard errors of
// zero is reported unreliable: other terms can absorb it.
constexpr double kDetermination = 2.0;

// Standard error of each theta from the Gauss-Newton normal matrix at the
// fit, with var(ln avar) = (2 rel_ci)^2. Zero terms are held fixed and get
// an error of 0; a singular normal matrix gives +inf for the active terms.
Eigen::VectorXd theta_std_error(const std::vector<FitPoint>& pts, const Eigen::VectorXd& theta,
                                std::optional<double> gm_tc) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
        if (theta(c) > 0.0) active.push_back(c);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(theta.size());
    if (active.empty()) return out;
    const auto na = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(pts.size()), na);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const Eigen::VectorXd phi = basis(pts[j].tau, gm_tc);
        const double model = phi.dot(theta);
        const double scale = std::sqrt(pts[j].weight) / (2.0 * model);
        for (Eigen::Index a = 0; a < na; ++a) jac(static_cast<Eigen::Index>(j), a) = phi(active[static_cast<std::size_t>(a)]) * scale;
    }
    // Column scaling keeps the normal matrix well conditioned.
    Eigen::VectorXd norms = jac.colwise().norm().transpose();
    for (Eigen::Index a = 0; a < na; ++a) jac.col(a) /= norms(a);
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (!lu.isInvertible()) {
        for (auto c : active) out(c) = std::numeric_limits<double>::infinity();
        return out;
    }
    const Eigen::MatrixXd cov = lu.inverse();
    for (Eigen::Index a = 0; a < na; ++a) {
        out(active[static_cast<std::size_t>(a)]) = std::sqrt(std::max(cov(a, a), 0.0)) / norms(a);
    }
    return out;
}

}  // namespace

double wls_objective(const AllanCurve& curve, const NoiseParams& params) {
    double acc = 0.0;
    for (const auto& p : fit_points(curve)) {
        const double m = theoretical_avar(params, p.tau);
        if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
        const double r = std::log(m) - std::log(p.avar);
        acc += p.weight * r * r;
    }
    return acc;
}

WlsResult fit_composite_wls(const AllanCurve& curve, const Identification& init, const WlsOptions& options) {
    WlsResult result;
    result.fit = init;
    const auto pts = fit_points(curve);
    if (pts.empty()) {
        result.fit.params = NoiseParams{};
        result.fit.flags = CoefficientFlags{};
        result.initial_objective = result.objective = 0.0;
        return result;
    }
    result.initial_objective = wls_objective(curve, init.params);

    std::vector<std::optional<double>> candidates;
    if (!options.fit_gauss_markov) {
        candidates.push_back(std::nullopt);
    } else if (init.params.gm_tc > 0.0) {
        candidates.push_back(init.params.gm_tc);
    } else {
        const double lo = std::log10(pts.front().tau);
        const double hi = std::log10(pts.back().tau);
        for (int i = 0; i <= 24; ++i) candidates.push_back(std::pow(10.0, lo + (hi - lo) * i / 24.0));
    }

    std::optional<SolveResult> best;
    std::optional<double> best_tc;
    for (const auto& tc : candidates) {
        CompositeProblem problem(pts, tc, options.free_terms);
        NoiseParams start_params = init.params;
        for (auto c : kCoefficients) {
            if (!options.free_terms[static_cast<std::size_t>(c)]) coefficient(start_params, c) = 0.0;
        }
        if (tc && start_params.gm_tc != *tc) start_params.gm_sigma = 0.0;
        auto solved = solve(problem, theta_from(start_params, tc), options.max_iterations);
        if (!best || solved.objective < best->objective) {
            best = std::move(solved);
            best_tc = tc;
        }
    }

    result.iterations = best->iterations;
    if (!best->converged || !(best->objective <= result.initial_objective) || !std::isfinite(best->objective)) {
        result.objective = result.initial_objective;
        if (!best->converged) {
            result.converged = false;
            for (auto c : kCoefficients) {
                if (result.fit.flags[c] == CoefficientStatus::detected) result.fit.flags[c] = CoefficientStatus::unreliable;
            }
        }
        return result;
    }

    NoiseParams fitted = params_from(best->theta, best_tc, init.params);
    if (!options.fit_gauss_markov) {
        fitted.gm_sigma = init.params.gm_sigma;
        fitted.gm_tc = init.params.gm_tc;
    }
    Identification out;
    out.params = fitted;
    for (auto c : kCoefficients) {
        if (coefficient(fitted, c) > 0.0 && significant(pts, fitted, c)) {
            out.flags[c] = CoefficientStatus::detected;
        } else {
            coefficient(out.params, c) = 0.0;
            out.flags[c] = CoefficientStatus::not_detected;
        }
    }
    // Dropping insignificant terms can only matter at the rounding level;
    // keep whichever candidate scores lower.
    const double pruned = wls_objective(curve, out.params);
    result.objective = best->objective;
    if (pruned <= result.initial_objective) {
        std::optional<double> tc;
        if (options.fit_gauss_markov && best_tc) tc.emplace(*best_tc);
        const Eigen::VectorXd theta = theta_from(out.params, tc);
        const Eigen::VectorXd se = theta_std_error(pts, theta, tc);
        for (auto c : kCoefficients) {
            const auto i = static_cast<Eigen::Index>(c);
            if (out.flags[c] == CoefficientStatus::detected && !(theta(i) > kDetermination * se(i))) {
                out.flags[c] = CoefficientStatus::unreliable;
            }
        }
        result.fit = out;
        result.objective = pruned;
    } else {
        result.objective = result.initial_objective;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Budget

namespace {

// How far, in points, to look on each side of a hump for a lower flank.
constexpr std::size_t kHumpReach = 8;
// The flank must sit below the peak by this many relative 1-sigma errors.
constexpr double kHumpProminence = 2.0;

// The highest 0-slope segment that rises significantly above the curve on
// both sides.
const SlopeSegment* flat_hump(const AllanCurve& curve, std::span<const SlopeSegment> segments) {
    auto lower_beyond = [&](std::size_t from, int dir, double peak, double peak_ci) {
        for (std::size_t step = 1; step <= kHumpReach; ++step) {
            const auto j = static_cast<std::ptrdiff_t>(from) + dir * static_cast<std::ptrdiff_t>(step);
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(curve.points.size())) return false;
            const auto& p = curve.points[static_cast<std::size_t>(j)];
            if (!p.usable) return false;
            if (p.adev > 0.0 && std::log(peak / p.adev) > kHumpProminence * std::max(p.rel_ci, peak_ci)) return true;
        }
        return false;
    };
    const SlopeSegment* best = nullptr;
    double best_peak = 0.0;
    for (const auto& s : segments) {
        if (!s.snapped || s.slope != 0.0) continue;
        double peak = 0.0, peak_ci = 0.0;
        for (std::size_t i = s.first; i <= s.last; ++i) {
            if (curve.points[i].adev > peak) {
                peak = curve.points[i].adev;
                peak_ci = curve.points[i].rel_ci;
            }
        }
        if (peak > best_peak && lower_beyond(s.first, -1, peak, peak_ci) && lower_beyond(s.last, +1, peak, peak_ci)) {
            best = &s;
            best_peak = peak;
        }
    }
    return best;
}

}  // namespace

ChannelAnalysis analyze_channel(const SampleSeries& series, const AnalysisOptions& options) {
    ChannelAnalysis out;
    out.budget.label = series.axis_label();
    out.budget.unit = series.unit();
    const SampleSeries centered = detrend_mean(series);
    const TauGrid grid = tau_grid_log(series.dt(), series.size(), options.points_per_decade);
    out.curve = confidence_bounds(compute_avar(centered, grid, options.estimator));

    const bool silent = std::all_of(out.curve.points.begin(), out.curve.points.end(),
                                    [](const AllanPoint& p) { return p.avar == 0.0; });
    if (silent) {
        out.budget.warnings.emplace_back("constant_channel");
        return out;
    }
    out.segments = fit_slope_segments(out.curve);
    for (const auto& s : out.segments) {
        if (!s.snapped) {
            out.budget.warnings.push_back("unsnapped_segment:" + detail::format_double(s.tau_lo) + "-" +
                                          detail::format_double(s.tau_hi));
        }
    }
    const Identification init = extract_coefficients(out.curve, out.segments);
    const WlsResult wls = fit_composite_wls(out.curve, init, options.wls);
    out.budget.params = wls.fit.params;
    out.budget.flags = wls.fit.flags;
    // A flat segment sitting on a local maximum cannot come from any sum of
    // the canonical terms, all of which are monotone or convex in log-log.
    // The fit then explains it with its flanks and loses b, so b is read off
    // the hump instead.
    if (const SlopeSegment* hump = flat_hump(out.curve, out.segments)) {
        const SlopeSegment only[] = {*hump};
        const Identification readout = extract_coefficients(out.curve, only);
        if (readout.flags[Coefficient::b] == CoefficientStatus::detected) {
            out.budget.params.b = readout.params.b;
            out.budget.flags[Coefficient::b] = CoefficientStatus::detected;
            out.budget.warnings.emplace_back("bias_hump");
        }
    }
    if (!wls.converged) {
        out.budget.reliable = false;
        out.budget.warnings.emplace_back("wls_not_converged");
    }
    return out;
}

const ChannelBudget* ErrorBudget::find(std::string_view label) const noexcept {
    for (const auto& c : channels) {
        if (c.label == label) return &c;
    }
    return nullptr;
}

std::vector<ChannelAnalysis> analyze_recording(const Recording& recording, const AnalysisOptions& options) {
    std::vector<ChannelAnalysis> out;
    out.reserve(recording.channels().size());
    for (const auto& series : recording.channels()) {
        try {
            out.push_back(analyze_channel(series, options));
        } catch (const Error& e) {
            ChannelAnalysis failed;
            failed.budget.label = series.axis_label();
            failed.budget.unit = series.unit();
            failed.budget.reliable = false;
            for (auto c : kCoefficients) failed.budget.flags[c] = CoefficientStatus::unreliable;
            failed.budget.warnings.push_back(std::string(to_string(e.code())) + ": " + e.what());
            out.push_back(std::move(failed));
        }
    }
    return out;
}

ErrorBudget build_error_budget(const Recording& recording, const AnalysisOptions& options) {
    ErrorBudget budget;
    budget.estimator = options.estimator;
    budget.points_per_decade = options.points_per_decade;
    for (auto& analysis : analyze_recording(recording, options)) budget.channels.push_back(std::move(analysis.budget));
    return budget;
}

namespace {

using detail::json;

Unit unit_from_string(std::string_view s) {
    for (auto u : {Unit::generic, Unit::milli_g, Unit::deg_per_s, Unit::micro_tesla}) {
        if (to_string(u) == s) return u;
    }
    throw Error(ErrorCode::parse_error, "unknown unit '" + std::string(s) + "'");
}

constexpr std::array<const char*, 5> kRowNames = {"quantization_noise", "angle_random_walk", "bias_instability",
                                                  "rate_random_walk", "rate_ramp"};

}  // namespace

std::string budget_to_json(const ErrorBudget& budget) {
    json channels = json::object();
    for (const auto& ch : budget.channels) {
        json flags = json::object();
        json entry = json::object();
        for (auto c : kCoefficients) {
            entry[std::string(to_string(c))] = coefficient(ch.params, c);
            flags[std::string(to_string(c))] = std::string(to_string(ch.flags[c]));
        }
        entry["flags"] = flags;
        entry["units"] = std::string(to_string(ch.unit));
        entry["reliable"] = ch.reliable;
        entry["warnings"] = ch.warnings;
        channels[ch.label] = entry;
    }
    json doc{{"channels", channels},
             {"estimator", std::string(to_string(budget.estimator))},
             {"points_per_decade", budget.points_per_decade}};
    return doc.dump(2) + "\n";
}

ErrorBudget budget_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse_error, std::string("budget JSON: ") + e.what());
    }
    ErrorBudget budget;
    try {
        budget.estimator = estimator_from_string(doc.at("estimator").get<std::string>());
        budget.points_per_decade = doc.at("points_per_decade").get<std::size_t>();
        for (const auto& [label, entry] : doc.at("channels").items()) {
            ChannelBudget ch;
            ch.label = label;
            ch.unit = unit_from_string(entry.at("units").get<std::string>());
            ch.reliable = entry.at("reliable").get<bool>();
            ch.warnings = entry.at("warnings").get<std::vector<std::string>>();
            for (auto c : kCoefficients) {
                const std::string key(to_string(c));
                coefficient(ch.params, c) = entry.at(key).get<double>();
                ch.flags[c] = status_from_string(entry.at("flags").at(key).get<std::string>());
            }
            budget.channels.push_back(std::move(ch));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("budget JSON: ") + e.what());
    }
    return budget;
}

std::string budget_to_csv(const ErrorBudget& budget) {
    std::string out = "error_type";
    for (const auto& ch : budget.channels) out += "," + ch.label;
    out += "\nunits";
    for (const auto& ch : budget.channels) out += "," + std::string(to_string(ch.unit));
    out += '\n';
    for (std::size_t row = 0; row < kCoefficients.size(); ++row) {
        out += kRowNames[row];
        for (const auto& ch : budget.channels) out += "," + detail::format_double(coefficient(ch.params, kCoefficients[row]));
        out += '\n';
    }
    return out;
}

}  // namespace avarkit
