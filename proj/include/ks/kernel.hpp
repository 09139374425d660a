#ifndef KS_KERNEL_HPP
#define KS_KERNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ks/errors.hpp"
#include "ks/hash.hpp"
#include "ks/quadrature.hpp"

namespace ks {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Surface measure of the unit (N-1)-sphere: 2 pi^{N/2} / Gamma(N/2).
inline double sphere_measure(int N) {
    const double pi = 3.14159265358979323846264338327950288;
    return 2.0 * std::pow(pi, 0.5 * N) / std::tgamma(0.5 * N);
}

enum class KernelFamily { fractional, log_corrected, lacunary, tabulated };

inline const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::fractional:    return "fractional";
        case KernelFamily::log_corrected: return "log_corrected";
        case KernelFamily::lacunary:      return "lacunary";
        case KernelFamily::tabulated:     return "tabulated";
    }
    return "?";
}

namespace detail {
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace detail

// Radial profile of a symmetric Levy-type kernel, K(x) = profile(|x|).
// Radial representation makes K(x) = K(-x) hold by construction.
//
// Families:
//   fractional(s):          K(r) = r^{-(N+2s)}
//   log_corrected(s0,sig):  K(r) = r^{-(N+2s0)} [(-log r)_+ + 1]^sigma
//   lacunary(s,a0):         piecewise constant a_n^{-N-2s} on [a_{n+1}, a_n),
//                           r^{-N} on [a_1, 1), r^{-N-2s} on [1, inf),
//                           with a_n = a0^{b^n}, b = (N+2s)/N
//   tabulated:              log-log linear interpolation of (radius, value) samples
//
// An optional positive scale multiplies the whole profile.
class KernelSpec {
public:
    static KernelSpec fractional(double s, int N, double scale = 1.0) {
        // s in (0,2) rather than (0,1): out-of-range orders are constructible so
        // the integrability check can diagnose them.
        require(s > 0.0 && s < 2.0, errc::invalid_argument, "fractional order s out of range");
        KernelSpec k(KernelFamily::fractional, N, scale);
        k.s_ = s;
        return k;
    }

    static KernelSpec log_corrected(double s0, double sigma, int N, double scale = 1.0) {
        require(s0 > 0.0 && s0 <= 1.0, errc::invalid_argument, "log_corrected order s0 out of (0,1]");
        KernelSpec k(KernelFamily::log_corrected, N, scale);
        k.s_ = s0;
        k.sigma_ = sigma;
        return k;
    }

    static KernelSpec lacunary(double s, double a0, int N, double scale = 1.0) {
        require(s > 0.0 && s < 1.0, errc::invalid_argument, "lacunary order s out of (0,1)");
        require(a0 > 0.0 && a0 < 1.0, errc::invalid_argument, "lacunary seed a0 out of (0,1)");
        KernelSpec k(KernelFamily::lacunary, N, scale);
        k.s_ = s;
        k.a0_ = a0;
        return k;
    }

    // Samples (radius, value), radii strictly ascending and positive.
    // Monotonicity of the profile is recorded, not enforced: check_monotone
    // reports it so that bad tables are a diagnosable condition.
    static KernelSpec tabulated(std::vector<std::pair<double, double>> samples, int N,
                                double scale = 1.0) {
        require(samples.size() >= 2, errc::invalid_argument, "tabulated kernel needs >= 2 samples");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            require(samples[i].first > 0.0, errc::invalid_argument, "tabulated radii must be positive");
            require(samples[i].second > 0.0, errc::invalid_argument, "tabulated values must be positive");
            if (i > 0)
                require(samples[i].first > samples[i - 1].first, errc::invalid_argument,
                        "tabulated radii must be strictly ascending");
        }
        KernelSpec k(KernelFamily::tabulated, N, scale);
        k.samples_ = std::move(samples);
        return k;
    }

    KernelFamily family() const { return family_; }
    int dimension() const { return N_; }
    double scale() const { return scale_; }
    double order() const { return s_; }         // s (fractional/lacunary) or s0 (log_corrected)
    double sigma() const { return sigma_; }
    double seed_a0() const { return a0_; }
    const std::vector<std::pair<double, double>>& samples() const { return samples_; }

    KernelSpec with_scale(double c) const {
        require(c > 0.0, errc::invalid_argument, "kernel scale must be positive");
        KernelSpec k = *this;
        k.scale_ = scale_ * c;
        return k;
    }

    double operator()(double r) const { return eval(r); }

    double eval(double r) const {
        require(r > 0.0, errc::non_positive_radius, "kernel radius must be positive");
        switch (family_) {
            case KernelFamily::fractional:
                return scale_ * std::pow(r, -(N_ + 2.0 * s_));
            case KernelFamily::log_corrected: {
                const double lg = (r < 1.0) ? (1.0 - std::log(r)) : 1.0;
                return scale_ * std::pow(r, -(N_ + 2.0 * s_)) * std::pow(lg, sigma_);
            }
            case KernelFamily::lacunary: {
                if (r >= 1.0) return scale_ * std::pow(r, -(N_ + 2.0 * s_));
                const double a1 = lacunary_a(1);
                if (r >= a1) return scale_ * std::pow(r, -static_cast<double>(N_));
                int n = 1;
                while (true) {
                    const double lo = lacunary_a(n + 1);
                    if (r >= lo || lo == 0.0) break;
                    ++n;
                    require(n < 4000, errc::overflow, "lacunary piece search did not terminate");
                }
                const double v = scale_ * std::pow(lacunary_a(n), -(N_ + 2.0 * s_));
                require(std::isfinite(v), errc::overflow, "lacunary value overflow");
                return v;
            }
            case KernelFamily::tabulated: {
                const double r0 = samples_.front().first, r1 = samples_.back().first;
                require(r >= r0 && r <= r1, errc::out_of_tabulated_range,
                        "radius outside tabulated range");
                auto it = std::upper_bound(samples_.begin(), samples_.end(), r,
                                           [](double x, const auto& s) { return x < s.first; });
                std::size_t hi = std::min<std::size_t>(
                    static_cast<std::size_t>(it - samples_.begin()), samples_.size() - 1);
                if (hi == 0) hi = 1;
                const auto& [ra, va] = samples_[hi - 1];
                const auto& [rb, vb] = samples_[hi];
                // log-log linear: exact on power laws
                const double t = (std::log(r) - std::log(ra)) / (std::log(rb) - std::log(ra));
                return scale_ * std::exp((1.0 - t) * std::log(va) + t * std::log(vb));
            }
        }
        return 0.0;
    }

    // a_n = a0^{b^n}; a_0 = a0. Underflows to 0 for large n.
    double lacunary_a(int n) const {
        return std::pow(a0_, std::pow(lacunary_b(), n));
    }

    double lacunary_b() const { return (N_ + 2.0 * s_) / N_; }

    // Profile discontinuities / kinks inside (lo, hi), ascending.
    std::vector<double> breakpoints(double lo, double hi) const {
        std::vector<double> bp;
        auto push = [&](double r) {
            if (r > lo && r < hi) bp.push_back(r);
        };
        switch (family_) {
            case KernelFamily::fractional:
                break;
            case KernelFamily::log_corrected:
                push(1.0);
                break;
            case KernelFamily::lacunary: {
                push(1.0);
                for (int n = 1; n < 4000; ++n) {
                    const double a = lacunary_a(n);
                    if (a == 0.0 || a <= lo) break;
                    push(a);
                }
                break;
            }
            case KernelFamily::tabulated:
                for (const auto& s : samples_) push(s.first);
                break;
        }
        std::sort(bp.begin(), bp.end());
        return bp;
    }

    std::string describe() const {
        using detail::fmt_g;
        std::string d = family_name(family_);
        d += "(";
        switch (family_) {
            case KernelFamily::fractional:
                d += "s=" + fmt_g(s_);
                break;
            case KernelFamily::log_corrected:
                d += "s0=" + fmt_g(s_) + ",sigma=" + fmt_g(sigma_);
                break;
            case KernelFamily::lacunary:
                d += "s=" + fmt_g(s_) + ",a0=" + fmt_g(a0_);
                break;
            case KernelFamily::tabulated: {
                std::string blob;
                for (const auto& [r, v] : samples_) blob += fmt_g(r) + ":" + fmt_g(v) + ";";
                d += "n=" + std::to_string(samples_.size()) + ",hash=" + fingerprint_of(blob);
                break;
            }
        }
        d += ",N=" + std::to_string(N_) + ",scale=" + fmt_g(scale_) + ")";
        return d;
    }

private:
    KernelSpec(KernelFamily f, int N, double scale) : family_(f), N_(N), scale_(scale) {
        require(N >= 2, errc::invalid_argument, "kernel dimension must be >= 2");
        require(scale > 0.0, errc::invalid_argument, "kernel scale must be positive");
    }

    KernelFamily family_;
    int N_;
    double scale_;
    double s_ = 0.0;
    double sigma_ = 0.0;
    double a0_ = 0.0;
    std::vector<std::pair<double, double>> samples_;
};

namespace detail {

// Piecewise description of the profile for radial-moment integrals.
struct Segment {
    enum Kind { power_law, constant, log_power } kind;
    double lo, hi;       // hi may be kInf; lo may be 0
    double coef = 0.0;   // power_law: K = coef r^expo; constant: K = coef
    double expo = 0.0;
    double s0 = 0.0, sigma = 0.0;  // log_power: coef * r^{-(N+2 s0)} (1-log r)^sigma
    int N = 0;
};

// Segments of [lo, hi] (hi may be kInf, lo may be 0). Throws divergent_tail /
// out_of_tabulated_range where the family cannot represent the request.
inline std::vector<Segment> segments(const KernelSpec& k, double lo, double hi) {
    std::vector<Segment> out;
    const int N = k.dimension();
    const double c = k.scale();
    auto clip_push = [&](Segment s) {
        s.lo = std::max(s.lo, lo);
        s.hi = std::min(s.hi, hi);
        if (s.lo < s.hi) out.push_back(s);
    };
    switch (k.family()) {
        case KernelFamily::fractional: {
            Segment s{Segment::power_law, 0.0, kInf};
            s.coef = c;
            s.expo = -(N + 2.0 * k.order());
            clip_push(s);
            break;
        }
        case KernelFamily::log_corrected: {
            Segment near{Segment::log_power, 0.0, 1.0};
            near.coef = c;
            near.s0 = k.order();
            near.sigma = k.sigma();
            near.N = N;
            clip_push(near);
            Segment far{Segment::power_law, 1.0, kInf};
            far.coef = c;
            far.expo = -(N + 2.0 * k.order());
            clip_push(far);
            break;
        }
        case KernelFamily::lacunary: {
            Segment far{Segment::power_law, 1.0, kInf};
            far.coef = c;
            far.expo = -(N + 2.0 * k.order());
            clip_push(far);
            Segment mid{Segment::power_law, k.lacunary_a(1), 1.0};
            mid.coef = c;
            mid.expo = -static_cast<double>(N);
            clip_push(mid);
            for (int n = 1; n < 4000; ++n) {
                const double an = k.lacunary_a(n);
                const double an1 = k.lacunary_a(n + 1);
                if (an == 0.0) break;
                Segment piece{Segment::constant, an1, an};
                piece.coef = c * std::pow(an, -(N + 2.0 * k.order()));
                // overflow only happens at radii ~1e-123 and below, where the
                // remaining moment contributions (exponents >= N+1) vanish
                if (!std::isfinite(piece.coef)) break;
                clip_push(piece);
                if (an1 <= lo || an1 == 0.0) break;
            }
            std::sort(out.begin(), out.end(), [](const Segment& a, const Segment& b) { return a.lo < b.lo; });
            break;
        }
        case KernelFamily::tabulated: {
            const auto& sm = k.samples();
            for (std::size_t i = 0; i + 1 < sm.size(); ++i) {
                const double expo = (std::log(sm[i + 1].second) - std::log(sm[i].second)) /
                                    (std::log(sm[i + 1].first) - std::log(sm[i].first));
                Segment s{Segment::power_law, sm[i].first, sm[i + 1].first};
                s.expo = expo;
                s.coef = c * sm[i].second * std::pow(sm[i].first, -expo);
                clip_push(s);
            }
            // extrapolate the first/last segment's power law outside the table
            if (lo < sm.front().first) {
                const double expo = (std::log(sm[1].second) - std::log(sm[0].second)) /
                                    (std::log(sm[1].first) - std::log(sm[0].first));
                Segment s{Segment::power_law, 0.0, sm.front().first};
                s.expo = expo;
                s.coef = c * sm[0].second * std::pow(sm[0].first, -expo);
                clip_push(s);
                std::sort(out.begin(), out.end(),
                          [](const Segment& a, const Segment& b) { return a.lo < b.lo; });
            }
            if (hi > sm.back().first) {
                const std::size_t n = sm.size();
                const double expo = (std::log(sm[n - 1].second) - std::log(sm[n - 2].second)) /
                                    (std::log(sm[n - 1].first) - std::log(sm[n - 2].first));
                Segment s{Segment::power_law, sm.back().first, kInf};
                s.expo = expo;
                s.coef = c * sm[n - 1].second * std::pow(sm[n - 1].first, -expo);
                clip_push(s);
            }
            break;
        }
    }
    return out;
}

// int_{lo}^{hi} r^m K(r) dr on one segment. Returns +inf for divergent pieces.
inline double segment_moment(const Segment& s, double m) {
    switch (s.kind) {
        case Segment::constant: {
            const double q = m + 1.0;
            return s.coef * (std::pow(s.hi, q) - std::pow(s.lo, q)) / q;
        }
        case Segment::power_law: {
            const double q = m + s.expo + 1.0;
            if (s.hi == kInf) {
                if (q >= 0.0) return kInf;
                return -s.coef * std::pow(s.lo, q) / q;
            }
            if (s.lo == 0.0 && q <= 0.0) return kInf;
            if (std::abs(q) < 1e-13) return s.coef * std::log(s.hi / s.lo);
            return s.coef * (std::pow(s.hi, q) - std::pow(s.lo, q)) / q;
        }
        case Segment::log_power: {
            // substitute t = log r: coef * int e^{g t} (1 - t)^sigma dt, g = m - N - 2 s0 + 1
            const double g = m - s.N - 2.0 * s.s0 + 1.0;
            const double t_hi = std::log(s.hi);
            double t_lo;
            if (s.lo == 0.0) {
                if (g <= 0.0) {
                    if (g == 0.0 && s.sigma < -1.0) {
                        // int_{-inf}^{t_hi} (1-t)^sigma dt
                        return s.coef * std::pow(1.0 - t_hi, s.sigma + 1.0) / (-s.sigma - 1.0);
                    }
                    return kInf;
                }
                // truncate where e^{g(t - t_hi)} (1-t)^sigma is negligible
                double w = 50.0 / g;
                while (std::exp(-g * w) * std::pow(1.0 - (t_hi - w), std::max(s.sigma, 0.0)) >
                       1e-18 * std::pow(1.0 - t_hi, std::max(s.sigma, 0.0))) {
                    w *= 1.5;
                    require(w < 1e6, errc::quadrature_non_convergence,
                            "log-power moment window expansion failed");
                }
                t_lo = t_hi - w;
            } else {
                t_lo = std::log(s.lo);
            }
            auto f = [&](double t) { return std::exp(g * t + s.sigma * std::log(1.0 - t)); };
            return s.coef * integrate_checked(f, t_lo, t_hi, 1e-11);
        }
    }
    return 0.0;
}

inline double radial_moment(const KernelSpec& k, double m, double lo, double hi) {
    double acc = 0.0;
    for (const Segment& s : segments(k, lo, hi)) {
        const double v = segment_moment(s, m);
        if (v == kInf) return kInf;
        acc += v;
    }
    return acc;
}

} // namespace detail

// T(r) = int_{|y| > r} K(y) dy = sigma_{N-1} int_r^inf K(t) t^{N-1} dt.
// Exact piecewise antiderivatives everywhere except the log-corrected near
// field, which uses adaptive quadrature; relative accuracy ~1e-10.
inline double tail(const KernelSpec& spec, double r) {
    require(r > 0.0, errc::non_positive_radius, "tail radius must be positive");
    require(r >= 1e-100, errc::invalid_argument, "tail radius below representable range");
    const double v = detail::radial_moment(spec, spec.dimension() - 1.0, r, kInf);
    require(v != kInf, errc::divergent_tail, "kernel tail integral diverges");
    return sphere_measure(spec.dimension()) * v;
}

// Near-field second moment m(delta) = int_{|z| < delta} |z|^2 K(z) dz.
inline double second_moment(const KernelSpec& spec, double delta) {
    require(delta > 0.0, errc::non_positive_radius, "second_moment radius must be positive");
    const double v = detail::radial_moment(spec, spec.dimension() + 1.0, 0.0, delta);
    require(v != kInf, errc::quadrature_non_convergence,
            "near-field second moment diverges (kernel not Levy-integrable)");
    return sphere_measure(spec.dimension()) * v;
}

struct IntegrabilityReport {
    bool pass = false;
    bool near_diverges = false;   // int_0^1 |x|^2 K piece
    bool far_diverges = false;    // int_{|x|>1} K piece
    double near_value = 0.0;      // partial integral at the smallest cutoff reached
    double far_value = 0.0;
    double near_last_change = 0.0;  // relative change of the final halving
    double far_last_change = 0.0;

    std::string divergent_piece() const {
        if (near_diverges && far_diverges) return "near-origin+far-field";
        if (near_diverges) return "near-origin";
        if (far_diverges) return "far-field";
        return "";
    }
};

// Levy integrability of min{|x|^2, 1} K(x): partial integrals on shrinking
// inner cutoffs 2^{-k} (growing outer cutoffs 2^{+k}). Divergence criterion:
// the last three halvings each changed the partial integral by more than 1%.
inline IntegrabilityReport check_levy_integrability(const KernelSpec& spec) {
    const int N = spec.dimension();
    const double sg = sphere_measure(N);
    const int k_max = 48;  // cutoff depth 2^{-48}; deeper, the 1% criterion goes blind
    IntegrabilityReport rep;

    auto run = [&](bool near) -> std::pair<double, std::vector<double>> {
        double acc = 0.0;
        std::vector<double> changes;
        for (int k = 1; k <= k_max; ++k) {
            const double a = near ? std::ldexp(1.0, -k) : std::ldexp(1.0, k - 1);
            const double b = near ? std::ldexp(1.0, -k + 1) : std::ldexp(1.0, k);
            const double m = near ? N + 1.0 : N - 1.0;
            double dv = detail::radial_moment(spec, m, a, b);
            if (dv == kInf) {
                changes.push_back(kInf);
                acc = kInf;
                break;
            }
            acc += dv;
            changes.push_back(acc > 0.0 ? dv / acc : 0.0);
        }
        return {acc, changes};
    };

    auto [nv, nc] = run(true);
    auto [fv, fc] = run(false);
    auto diverges = [](const std::vector<double>& ch) {
        if (ch.empty()) return false;
        if (ch.back() == kInf) return true;
        std::size_t n = ch.size();
        if (n < 3) return false;
        return ch[n - 1] > 0.01 && ch[n - 2] > 0.01 && ch[n - 3] > 0.01;
    };
    rep.near_diverges = diverges(nc);
    rep.far_diverges = diverges(fc);
    rep.near_value = (nv == kInf) ? kInf : sg * nv;
    rep.far_value = (fv == kInf) ? kInf : sg * fv;
    rep.near_last_change = nc.empty() ? 0.0 : nc.back();
    rep.far_last_change = fc.empty() ? 0.0 : fc.back();
    rep.pass = !rep.near_diverges && !rep.far_diverges;
    return rep;
}

struct MonotoneReport {
    bool pass = true;
    double r_lo = 0.0, r_hi = 0.0;  // first offending pair, if any
};

// Samples the profile on a log grid plus all family breakpoints (and points
// just inside each side of a breakpoint); passes iff nonincreasing everywhere
// sampled, with 1e-12 relative slack for roundoff.
inline MonotoneReport check_monotone(const KernelSpec& spec, int sample_count) {
    require(sample_count >= 2, errc::invalid_argument, "sample_count must be >= 2");
    double lo = 1e-6, hi = 10.0;
    if (spec.family() == KernelFamily::tabulated) {
        lo = spec.samples().front().first;
        hi = spec.samples().back().first;
    }
    std::vector<double> rs;
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < sample_count; ++i)
        rs.push_back(std::exp(llo + (lhi - llo) * i / (sample_count - 1.0)));
    for (double b : spec.breakpoints(lo, hi)) {
        rs.push_back(b);
        rs.push_back(b * (1.0 - 1e-9));
        rs.push_back(b * (1.0 + 1e-9));
    }
    std::sort(rs.begin(), rs.end());
    MonotoneReport rep;
    double prev_r = rs.front(), prev_v = spec.eval(rs.front());
    for (std::size_t i = 1; i < rs.size(); ++i) {
        const double v = spec.eval(rs[i]);
        if (v > prev_v * (1.0 + 1e-12)) {
            rep.pass = false;
            rep.r_lo = prev_r;
            rep.r_hi = rs[i];
            return rep;
        }
        prev_r = rs[i];
        prev_v = v;
    }
    return rep;
}

// a_1 .. a_{n_max} for a lacunary kernel; strictly decreasing to 0.
inline std::vector<double> lacunary_sequence(const KernelSpec& spec, int n_max) {
    require(spec.family() == KernelFamily::lacunary, errc::invalid_argument,
            "lacunary_sequence requires the lacunary family");
    require(n_max >= 1, errc::invalid_argument, "n_max must be >= 1");
    std::vector<double> out;
    for (int n = 1; n <= n_max; ++n) {
        const double a = spec.lacunary_a(n);
        if (a == 0.0 || !std::isfinite(std::pow(a, -(spec.dimension() + 2.0 * spec.order()))))
            fail(errc::overflow, "a_n underflows past n = " + std::to_string(n - 1) +
                                     "; largest valid n is " + std::to_string(n - 1));
        out.push_back(a);
    }
    return out;
}

struct TailTable {
    enum class Method { closed_form, quadrature };
    std::vector<double> radii;   // decreasing
    std::vector<double> values;  // T(r) per radius
    Method method = Method::closed_form;
};

inline TailTable make_tail_table(const KernelSpec& spec, double r_min, double r_max, int points) {
    require(r_min > 0.0 && r_min < r_max, errc::invalid_argument, "bad tail table range");
    require(points >= 2, errc::invalid_argument, "tail table needs >= 2 points");
    TailTable t;
    t.method = (spec.family() == KernelFamily::log_corrected && r_min < 1.0)
                   ? TailTable::Method::quadrature
                   : TailTable::Method::closed_form;
    const double llo = std::log(r_min), lhi = std::log(r_max);
    for (int i = 0; i < points; ++i) {
        const double r = std::exp(lhi + (llo - lhi) * i / (points - 1.0));
        t.radii.push_back(r);
        t.values.push_back(tail(spec, r));
    }
    return t;
}

} // namespace ks

#endif
