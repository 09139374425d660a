#ifndef KS_EXPONENT_HPP
#define KS_EXPONENT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "ks/errors.hpp"
#include "ks/kernel.hpp"

namespace ks {

struct TwoStar {
    bool supercritical = false;
    double value = 0.0;  // 2N/(N - 2 s0) when defined
};

// Critical embedding exponent 2N/(N-2s); flagged supercritical when 2s >= N.
inline TwoStar two_star(double s0, int N) {
    require(s0 > 0.0 && s0 <= 1.0, errc::invalid_argument, "s0 must be in (0,1]");
    require(N >= 2, errc::invalid_argument, "dimension must be >= 2");
    TwoStar t;
    if (2.0 * s0 >= static_cast<double>(N)) {
        t.supercritical = true;
        return t;
    }
    t.value = 2.0 * N / (N - 2.0 * s0);
    return t;
}

struct SlopeWindow {
    double r_lo = 0.0, r_hi = 0.0;  // analyzed radius window (two smallest decades)
    double slope_min = 0.0, slope_max = 0.0;
    double s_lo = 0.0, s_hi = 0.0;
    bool oscillatory = false;
};

struct ExponentReport {
    double s0_lo = 0.0, s0_hi = 0.0;  // headline bracket (refined window)
    SlopeWindow window_base, window_refined;
    std::vector<double> r_grid;  // refined grid, ascending
    std::vector<double> slopes;  // d log T / d log r per grid point
    TwoStar twostar;             // evaluated at s0_hi
    double r_min = 0.0;
    int points = 0;
};

namespace detail {

// least squares fit of y ~ poly(x - xbar) of degree 1 and 2; returns the
// extrapolated values at x = 0 and the max residual of the quadratic fit
struct SlopeFit {
    double lin_at_zero = 0.0, quad_at_zero = 0.0, max_resid = 0.0;
};

inline SlopeFit fit_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double xbar = 0.0;
    for (double v : x) xbar += v;
    xbar /= static_cast<double>(n);
    double s0 = static_cast<double>(n), s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    double b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = x[i] - xbar;
        const double t2 = t * t;
        s1 += t; s2 += t2; s3 += t2 * t; s4 += t2 * t2;
        b0 += y[i]; b1 += y[i] * t; b2 += y[i] * t2;
    }
    SlopeFit out;
    // linear: [s0 s1; s1 s2] [c0 c1] = [b0 b1]
    {
        const double det = s0 * s2 - s1 * s1;
        const double c0 = (b0 * s2 - s1 * b1) / det;
        const double c1 = (s0 * b1 - s1 * b0) / det;
        out.lin_at_zero = c0 - c1 * xbar;
    }
    // quadratic via Cramer on the 3x3 normal equations
    {
        const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) +
                           s2 * (s1 * s3 - s2 * s2);
        const double c0 = (b0 * (s2 * s4 - s3 * s3) - s1 * (b1 * s4 - s3 * b2) +
                           s2 * (b1 * s3 - s2 * b2)) / det;
        const double c1 = (s0 * (b1 * s4 - s3 * b2) - b0 * (s1 * s4 - s3 * s2) +
                           s2 * (s1 * b2 - b1 * s2)) / det;
        const double c2 = (s0 * (s2 * b2 - b1 * s3) - s1 * (s1 * b2 - b1 * s2) +
                           b0 * (s1 * s3 - s2 * s2)) / det;
        out.quad_at_zero = c0 - c1 * xbar + c2 * xbar * xbar;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = x[i] - xbar;
            out.max_resid = std::max(out.max_resid, std::abs(c0 + c1 * t + c2 * t * t - y[i]));
        }
    }
    return out;
}

struct SlopeAnalysis {
    SlopeWindow window;
    std::vector<double> r_grid, slopes;
};

// Local log-log slopes of the tail on a log-spaced grid. The bracket comes
// from the two smallest decades: slowly varying tails get a bias-corrected
// point bracket (extrapolation of the slope in 1/(1 - log r), which removes
// the leading finite-radius drift of log-corrected tails); oscillatory tails
// get [-max_slope/2, -window_secant/2], the secant being the average slope
// across the window.
inline SlopeAnalysis analyze_slopes(const KernelSpec& spec, double r_lo, double r_hi, int points) {
    SlopeAnalysis out;
    const double llo = std::log(r_lo), lhi = std::log(r_hi);
    std::vector<double> ell(points), phi(points);
    for (int i = 0; i < points; ++i) {
        ell[i] = llo + (lhi - llo) * i / (points - 1.0);
        out.r_grid.push_back(std::exp(ell[i]));
        phi[i] = std::log(tail(spec, out.r_grid.back()));
    }
    out.slopes.resize(points);
    for (int i = 1; i + 1 < points; ++i)
        out.slopes[i] = (phi[i + 1] - phi[i - 1]) / (ell[i + 1] - ell[i - 1]);
    out.slopes[0] = (phi[1] - phi[0]) / (ell[1] - ell[0]);
    out.slopes[points - 1] = (phi[points - 1] - phi[points - 2]) / (ell[points - 1] - ell[points - 2]);

    const double w_hi = std::min(r_hi, 100.0 * r_lo);
    std::size_t w_end = 0;  // window = indices [0, w_end]
    while (w_end + 1 < out.r_grid.size() && out.r_grid[w_end + 1] <= w_hi * (1.0 + 1e-12)) ++w_end;

    SlopeWindow& w = out.window;
    w.r_lo = r_lo;
    w.r_hi = out.r_grid[w_end];
    w.slope_min = kInf;
    w.slope_max = -kInf;
    std::vector<double> xs, ms;
    for (std::size_t i = 0; i <= w_end; ++i) {
        w.slope_min = std::min(w.slope_min, out.slopes[i]);
        w.slope_max = std::max(w.slope_max, out.slopes[i]);
        xs.push_back(1.0 / (1.0 - ell[i]));
        ms.push_back(out.slopes[i]);
    }
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    w.oscillatory = (w.slope_max - w.slope_min) > 0.2;
    if (!w.oscillatory) {
        const SlopeFit fit = fit_slopes(xs, ms);
        const double half = std::abs(fit.quad_at_zero - fit.lin_at_zero) + fit.max_resid + 1e-9;
        w.s_lo = clamp01(-(fit.quad_at_zero + half) / 2.0);
        w.s_hi = clamp01(-(fit.quad_at_zero - half) / 2.0);
    } else {
        const double secant = (phi[w_end] - phi[0]) / (ell[w_end] - ell[0]);
        w.s_hi = clamp01(-secant / 2.0);
        w.s_lo = std::min(clamp01(-w.slope_max / 2.0), w.s_hi);
    }
    return out;
}

} // namespace detail

inline constexpr double kRadiusFloor = 1e-8;  // grids never go below this

// Bracket for the critical order s0 from tail slopes. Runs the slope analysis
// on the requested grid and once more on a refined grid (double the points,
// half the r_min, floored at kRadiusFloor); the refined window is the
// headline bracket, the base window is kept for trend inspection.
inline ExponentReport estimate_s0(const KernelSpec& spec, double r_min, double r_max, int points) {
    require(r_min > 0.0 && r_min < r_max && r_max <= 1.0, errc::invalid_argument,
            "need 0 < r_min < r_max <= 1");
    require(points >= 16, errc::invalid_argument, "points must be >= 16");
    r_min = std::max(r_min, kRadiusFloor);

    detail::SlopeAnalysis base = detail::analyze_slopes(spec, r_min, r_max, points);
    const double r_min_ref = std::max(0.5 * r_min, kRadiusFloor);
    detail::SlopeAnalysis fine = detail::analyze_slopes(spec, r_min_ref, r_max, 2 * points);

    const double width_base = base.window.s_hi - base.window.s_lo;
    const double width_fine = fine.window.s_hi - fine.window.s_lo;
    if (width_fine > 0.5 && width_fine >= width_base - 1e-12)
        fail(errc::grid_too_coarse, "slope bracket did not stabilize under refinement");

    ExponentReport rep;
    rep.window_base = base.window;
    rep.window_refined = fine.window;
    rep.s0_lo = fine.window.s_lo;
    rep.s0_hi = fine.window.s_hi;
    rep.r_grid = std::move(fine.r_grid);
    rep.slopes = std::move(fine.slopes);
    rep.r_min = r_min_ref;
    rep.points = 2 * points;
    if (rep.s0_hi > 0.0) {
        const double s_eval = std::min(rep.s0_hi, 1.0);
        rep.twostar = two_star(s_eval, spec.dimension());
    }
    return rep;
}

enum class LInfKind { zero, finite_positive, infinite_ };

inline const char* linf_kind_name(LInfKind k) {
    switch (k) {
        case LInfKind::zero:            return "Zero";
        case LInfKind::finite_positive: return "FinitePositive";
        case LInfKind::infinite_:       return "Infinite";
    }
    return "?";
}

struct LInfReport {
    LInfKind kind = LInfKind::finite_positive;
    double value_lo = 0.0, value_hi = 0.0;  // bracket over the last decade (finite case)
    double total_factor = 1.0;              // last decade minimum / first decade minimum
    std::vector<double> decade_minima;
};

// Classification of liminf_{r->0} r^{2 s0} T(r) from g(r) = r^{2 s0} T(r) on
// dyadic radii descending from 0.5. Uses per-decade minima m_d; the trend over
// the whole run decides: total decay by a factor >= 4 is Zero, total growth by
// a factor >= 4 is Infinite, otherwise FinitePositive with the last-decade
// bracket. A reversal (both growth > 1.25x and decay < 0.8x between adjacent
// decades) is reported as Inconclusive.
inline LInfReport estimate_l_infinity(const KernelSpec& spec, double s0, double r_min) {
    require(s0 > 0.0 && s0 <= 1.0, errc::invalid_argument, "s0 must be in (0,1]");
    require(r_min > 0.0 && r_min < 0.25, errc::invalid_argument, "r_min must be < 0.25");
    r_min = std::max(r_min, kRadiusFloor);

    const double r0 = 0.5;
    std::vector<double> rs, g;
    for (double r = r0; r >= r_min * 0.999999; r *= 0.5) {
        rs.push_back(r);
        g.push_back(std::pow(r, 2.0 * s0) * tail(spec, r));
    }
    LInfReport rep;
    std::vector<double> mins;
    std::vector<int> decades;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const int d = static_cast<int>(std::floor(std::log10(r0 / rs[i]) + 1e-12));
        if (static_cast<std::size_t>(d) >= mins.size()) {
            mins.resize(d + 1, kInf);
        }
        mins[d] = std::min(mins[d], g[i]);
    }
    rep.decade_minima = mins;
    bool up = false, down = false;
    for (std::size_t d = 1; d < mins.size(); ++d) {
        const double ratio = mins[d] / mins[d - 1];
        if (ratio > 1.25) up = true;
        if (ratio < 0.8) down = true;
    }
    if (up && down)
        fail(errc::inconclusive, "decade-minimum trend of r^{2 s0} T(r) reverses");
    rep.total_factor = mins.back() / mins.front();
    if (rep.total_factor <= 0.25) {
        rep.kind = LInfKind::zero;
    } else if (rep.total_factor >= 4.0) {
        rep.kind = LInfKind::infinite_;
    } else {
        rep.kind = LInfKind::finite_positive;
        rep.value_lo = kInf;
        rep.value_hi = -kInf;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            if (rs[i] <= rs.back() * 10.0 * (1.0 + 1e-12)) {
                rep.value_lo = std::min(rep.value_lo, g[i]);
                rep.value_hi = std::max(rep.value_hi, g[i]);
            }
        }
    }
    return rep;
}

// Independent cross-check of the s0 bracket from the pointwise decay of the
// profile: s1 = largest s whose running minimum of K(r) r^{N+2s} over the two
// smallest decades stays >= 1, s2 = smallest s whose running maximum is <= 1.
inline std::pair<double, double> bracket_from_asymptotics(const KernelSpec& spec, double r_min) {
    require(r_min > 0.0 && r_min < 1e-3, errc::invalid_argument, "r_min must be < 1e-3");
    r_min = std::max(r_min, kRadiusFloor);
    const int N = spec.dimension();

    std::vector<double> rs;
    const int per_decade = 32;
    const double decades = std::log10(1.0 / r_min);
    const int n = std::max(64, static_cast<int>(per_decade * decades)) + 1;
    for (int i = 0; i < n; ++i)
        rs.push_back(std::exp(std::log(r_min) * (1.0 - static_cast<double>(i) / (n - 1))));
    for (double b : spec.breakpoints(r_min, 1.0)) {
        rs.push_back(b);
        if (b * (1.0 - 1e-9) > r_min) rs.push_back(b * (1.0 - 1e-9));
    }
    std::sort(rs.begin(), rs.end());

    const double w_hi = 100.0 * r_min;
    std::vector<double> wr, wk;
    for (double r : rs)
        if (r <= w_hi * (1.0 + 1e-12)) {
            wr.push_back(r);
            wk.push_back(spec.eval(r));
        }

    auto win_min = [&](double s) {
        double m = kInf;
        for (std::size_t i = 0; i < wr.size(); ++i)
            m = std::min(m, wk[i] * std::pow(wr[i], N + 2.0 * s));
        return m;
    };
    auto win_max = [&](double s) {
        double m = -kInf;
        for (std::size_t i = 0; i < wr.size(); ++i)
            m = std::max(m, wk[i] * std::pow(wr[i], N + 2.0 * s));
        return m;
    };

    double s1 = 0.0, s2 = 1.0;
    const int steps = 200;
    for (int i = 0; i <= steps; ++i) {
        const double s = static_cast<double>(i) / steps;
        if (win_min(s) >= 1.0 - 1e-9) s1 = s;
    }
    for (int i = steps; i >= 0; --i) {
        const double s = static_cast<double>(i) / steps;
        if (win_max(s) <= 1.0 + 1e-9) s2 = s;
    }
    if (s1 > s2)
        fail(errc::inconclusive, "asymptotic thresholds incoherent (s1 > s2)");
    return {s1, s2};
}

struct BlowupReport {
    std::vector<double> radii;  // decreasing
    bool complete = false;      // found the requested count
};

// Greedy search for radii r_1 > r_2 > ... along which r^{N+2s} K(r) increases
// past k times its starting value; shorter-than-requested lists are the
// expected diagnostic for s close to the critical order.
inline BlowupReport find_blowup_radii(const KernelSpec& spec, double s, int count) {
    require(count >= 1, errc::invalid_argument, "count must be >= 1");
    const int N = spec.dimension();
    std::vector<double> rs;
    const double r_start = 0.5, r_stop = kRadiusFloor;
    const int per_decade = 64;
    const double decades = std::log10(r_start / r_stop);
    const int n = static_cast<int>(per_decade * decades) + 1;
    for (int i = 0; i < n; ++i)
        rs.push_back(std::exp(std::log(r_start) +
                              (std::log(r_stop) - std::log(r_start)) * i / (n - 1.0)));
    for (double b : spec.breakpoints(r_stop, r_start)) {
        rs.push_back(b);
        rs.push_back(b * (1.0 - 1e-9));
    }
    std::sort(rs.begin(), rs.end(), std::greater<>());

    auto q = [&](double r) { return spec.eval(r) * std::pow(r, N + 2.0 * s); };
    BlowupReport rep;
    const double v1 = q(rs.front());
    double last = -kInf;
    for (double r : rs) {
        const double v = q(r);
        if (v > last && v >= (rep.radii.size() + 1.0) * v1) {
            rep.radii.push_back(r);
            last = v;
            if (static_cast<int>(rep.radii.size()) == count) break;
        }
    }
    rep.complete = static_cast<int>(rep.radii.size()) == count;
    return rep;
}

} // namespace ks

#endif
