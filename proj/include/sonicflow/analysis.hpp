#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"
#include "grid.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "regime.hpp"
#include "solution.hpp"

namespace sonicflow {

struct ResidualReport {
    double maxResidual = 0.0;
    double location = 0.0;
    std::size_t pointsChecked = 0;
    // max |E_x - (rho - b)| over the same stencils; reported, not part of maxResidual
    double fieldResidual = 0.0;
    // max |weak residual| over the hat basis; set for solutions with an interior sonic point
    std::optional<double> weakResidual;
};

inline constexpr double kResidualBand = 1e-2;
inline constexpr int kWeakBasisSize = 32;

namespace detail {

inline double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double t) {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    if (it == x.begin()) return y.front();
    if (it == x.end()) return y.back();
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    double w = (t - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + w * (y[i] - y[i - 1]);
}

// Weak residual of (Phi(rho)_x + 1/(tau rho))_x = rho - b against hats on a
// uniform mesh, Phi' = c(rho)/rho.
inline double weak_residual(const Solution& s, const ModelParams& p) {
    const int K = kWeakBasisSize;
    const double hh = 1.0 / (K + 1);
    const double g = p.gamma;
    auto phi = [g](double rho) {
        double base = g == 1.0 ? std::log(rho) : std::expm1((g - 1.0) * std::log(rho)) / (g - 1.0);
        return base + 0.5 / (rho * rho);
    };
    // merged quadrature nodes
    std::vector<double> xs = s.x;
    for (int k = 0; k <= K + 1; ++k) xs.push_back(k * hh);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> rho(xs.size()), src(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        rho[i] = interp_linear(s.x, s.rho, xs[i]);
        src[i] = rho[i] - p.b(xs[i]);
    }
    double worst = 0.0;
    for (int k = 1; k <= K; ++k) {
        double yl = (k - 1) * hh, yc = k * hh, yr = (k + 1) * hh;
        double stiff = (2.0 * phi(interp_linear(s.x, s.rho, yc)) - phi(interp_linear(s.x, s.rho, yl)) -
                        phi(interp_linear(s.x, s.rho, yr))) / hh;
        double adv = 0.0, load = 0.0;
        for (std::size_t i = 1; i < xs.size(); ++i) {
            double a = xs[i - 1], c = xs[i];
            if (c <= yl || a >= yr) continue;
            double m = 0.5 * (a + c);
            double dphi = m < yc ? 1.0 / hh : -1.0 / hh;
            auto hat = [&](double t) { return std::max(0.0, 1.0 - std::abs(t - yc) / hh); };
            adv += 0.5 * (c - a) * dphi * (1.0 / rho[i - 1] + 1.0 / rho[i]);
            load += 0.5 * (c - a) * (src[i - 1] * hat(a) + src[i] * hat(c));
        }
        double r = stiff + adv / p.tau + load;
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

} // namespace detail

// Pointwise residual of c(rho) rho_x = rho E - 1/tau, scaled by 1 + |rho_x|,
// plus |E_x - (rho - b)| reported separately. Stencils touching the sonic band
// are skipped: rho_x is unbounded at square-root endpoints and the graded cells
// there (down to 1e-10) turn any rounding into O(1) derivative noise. The
// constant sonic state has no such endpoint and is checked everywhere. Shock
// cells are skipped.
inline ResidualReport residual_norm(const Solution& s, const ModelParams& p) {
    ResidualReport rep;
    const std::size_t n = s.size();
    constexpr std::size_t kStencil = 7, kHalf = 3;
    if (n < kStencil) throw Error(ErrorCode::InvalidParameter, "residual check needs at least 7 grid points");
    const double itau = 1.0 / p.tau;
    const bool useBand = s.kind != SolutionKind::Sonic;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        std::size_t lo = i < kHalf ? 0 : i - kHalf;
        lo = std::min(lo, n - kStencil);
        if (s.shockIndex && *s.shockIndex >= lo && *s.shockIndex < lo + kStencil - 1) continue;
        bool inBand = false;
        for (std::size_t k = lo; k < lo + kStencil; ++k)
            if (std::abs(s.rho[k] - 1.0) < kResidualBand) inBand = true;
        if (useBand && inBand) continue;
        auto w = fd_weights_first(s.x[i], &s.x[lo], kStencil);
        // differences against the centre value: exact zero for constant data
        double rx = 0.0, ex = 0.0;
        for (std::size_t k = 0; k < kStencil; ++k) {
            rx += w[k] * (s.rho[lo + k] - s.rho[i]);
            ex += w[k] * (s.e[lo + k] - s.e[i]);
        }
        double c = pressure_coefficient(s.rho[i], p.gamma);
        double r = std::abs(c * rx - (s.rho[i] * s.e[i] - itau)) / (1.0 + std::abs(rx));
        ++rep.pointsChecked;
        if (r > rep.maxResidual || rep.pointsChecked == 1) {
            rep.maxResidual = r;
            rep.location = s.x[i];
        }
        rep.fieldResidual = std::max(rep.fieldResidual, std::abs(ex - (s.rho[i] - p.b(s.x[i]))));
    }
    if (s.kind == SolutionKind::C1Transonic) rep.weakResidual = detail::weak_residual(s, p);
    return rep;
}

// ---------- Hoelder exponent ----------

struct ExponentFit {
    double at = 0.0; // sonic point the distance is measured from
    int side = 0;    // -1: points to the left of `at`, +1: to the right
    double exponent = 0.0;
    double confidenceHalfWidth = 0.0; // 95% t-interval
    double windowInner = 1e-4;
    double windowOuter = 1e-2;
    std::size_t points = 0;
    double regressionResidual = 0.0; // RMS of the log-log fit
};

inline ExponentFit fit_holder_exponent_near(const Solution& s, double at, int side, double inner = 1e-4,
                                            double outer = 1e-2) {
    if (s.kind == SolutionKind::Sonic)
        throw Error(ErrorCode::PreconditionViolation, "the sonic solution has no square-root endpoint");
    if (s.transition && std::abs(at - s.transition->x0) < 1e-12)
        throw Error(ErrorCode::PreconditionViolation,
                    "the smooth transition point is C1 with linear departure, not a square-root endpoint");
    if (!(inner > 0.0 && outer > inner)) throw Error(ErrorCode::InvalidParameter, "invalid fit window");
    if (side != -1 && side != 1) throw Error(ErrorCode::InvalidParameter, "side must be -1 or +1");

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double d = side * (s.x[i] - at);
        if (d < inner || d > outer) continue;
        double dev = std::abs(s.rho[i] - 1.0);
        if (!(dev > 0.0)) continue;
        lx.push_back(std::log(d));
        ly.push_back(std::log(dev));
    }
    ExponentFit f;
    f.at = at;
    f.side = side;
    f.windowInner = inner;
    f.windowOuter = outer;
    f.points = lx.size();
    if (lx.size() < 8)
        throw Error(ErrorCode::InsufficientWindow,
                    "only " + std::to_string(lx.size()) + " grid points in the fit window, need 8");
    const double m = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    f.exponent = sxy / sxx;
    double icpt = my - f.exponent * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double e = ly[i] - icpt - f.exponent * lx[i];
        ssr += e * e;
    }
    f.regressionResidual = std::sqrt(ssr / m);
    boost::math::students_t dist(m - 2.0);
    double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.confidenceHalfWidth = tq * std::sqrt(ssr / (m - 2.0) / sxx);
    return f;
}

inline ExponentFit fit_holder_exponent(const Solution& s, int endpoint, double inner = 1e-4, double outer = 1e-2) {
    if (endpoint != 0 && endpoint != 1) throw Error(ErrorCode::InvalidParameter, "endpoint must be 0 or 1");
    return endpoint == 0 ? fit_holder_exponent_near(s, 0.0, 1, inner, outer)
                         : fit_holder_exponent_near(s, 1.0, -1, inner, outer);
}

// ---------- trajectory lemmas in the (n, F) chart ----------

struct LemmaReport {
    bool positive = true;          // trajectory lies in n >= 0
    std::size_t pointsChecked = 0;
    double worstMargin = 0.0;      // max of (F - 1.5 Xi) (positive) or (1.5 Xi - F) (negative), scaled
    double worstAt = 0.0;          // n at the worst margin
    double originDistance = 0.0;   // start (positive) or end (negative) distance to (0,0)
    double slopeAtOrigin = 0.0;    // fitted F'(0)
};

inline double lemma_tau_threshold(double b) { return 1.0 / (3.0 * std::sqrt(b * b * b + b)); }

inline LemmaReport check_trajectory_lemmas(const ModelParams& p, const TrajectorySegment& seg) {
    if (!p.doping.is_constant() || !p.isothermal())
        throw Error(ErrorCode::PreconditionViolation, "trajectory lemmas need constant doping and isothermal flow");
    double b = p.doping.constant_value();
    if (!(b > 1.0)) throw Error(ErrorCode::PreconditionViolation, "trajectory lemmas need b > 1");
    double thr = lemma_tau_threshold(b);
    if (!(p.tau < thr))
        throw Error(ErrorCode::PreconditionViolation,
                    "tau = " + std::to_string(p.tau) + " is not below 1/(3 sqrt(b^3 + b)) = " + std::to_string(thr));
    if (seg.pieces.empty()) throw Error(ErrorCode::InvalidParameter, "trajectory has no dense output");

    // dense samples ordered by x
    struct Pt {
        double x, n, f;
    };
    std::vector<Pt> pts;
    const double itau = 1.0 / p.tau;
    for (const auto& pc : seg.pieces)
        for (int k = 0; k <= 8; ++k) {
            State s = seg.eval(pc, pc.thetaEnd * k / 8.0);
            pts.push_back({s.x, s.rho - 1.0, s.e - itau / s.rho});
        }
    std::stable_sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& c) { return a.x < c.x; });

    LemmaReport rep;
    double sumN = 0.0;
    for (const auto& q : pts) sumN += q.n;
    rep.positive = sumN >= 0.0;
    const double sgn = rep.positive ? 1.0 : -1.0;
    rep.worstMargin = -INFINITY;
    for (const auto& q : pts) {
        if (sgn * q.n < 0.0) continue;
        double xi = xi_curve(q.n, p);
        double margin = sgn * (q.f - 1.5 * xi);
        ++rep.pointsChecked;
        if (margin > rep.worstMargin) {
            rep.worstMargin = margin;
            rep.worstAt = q.n;
        }
        if (margin > 1e-8 * (1.0 + std::abs(xi)))
            throw Error(ErrorCode::LemmaViolation,
                        std::string(rep.positive ? "F > 1.5 Xi" : "F < 1.5 Xi") + " at n = " + std::to_string(q.n) +
                            ", F = " + std::to_string(q.f) + ", 1.5 Xi = " + std::to_string(1.5 * xi));
    }
    const Pt& origin = rep.positive ? pts.front() : pts.back();
    rep.originDistance = std::hypot(origin.n, origin.f);
    if (rep.originDistance > 1e-4)
        throw Error(ErrorCode::LemmaViolation, std::string(rep.positive ? "positive trajectory does not start"
                                                                          : "negative trajectory does not end") +
                                                   " at (0,0); distance " + std::to_string(rep.originDistance));

    // F = a n + c n^2 through the origin, small-|n| window
    double s11 = 0.0, s12 = 0.0, s22 = 0.0, r1 = 0.0, r2 = 0.0;
    int used = 0;
    // only the run of samples adjacent to the origin end
    std::vector<Pt> near;
    if (rep.positive) {
        for (auto it = pts.begin(); it != pts.end() && std::abs(it->n) <= 1e-3; ++it) near.push_back(*it);
    } else {
        for (auto it = pts.rbegin(); it != pts.rend() && std::abs(it->n) <= 1e-3; ++it) near.push_back(*it);
    }
    for (const auto& q : near) {
        double an = std::abs(q.n);
        if (an < 1e-6 || sgn * q.n < 0.0) continue;
        s11 += q.n * q.n;
        s12 += q.n * q.n * q.n;
        s22 += q.n * q.n * q.n * q.n;
        r1 += q.n * q.f;
        r2 += q.n * q.n * q.f;
        ++used;
    }
    if (used < 8) throw Error(ErrorCode::InsufficientWindow, "too few trajectory samples near the origin");
    double det = s11 * s22 - s12 * s12;
    rep.slopeAtOrigin = (r1 * s22 - r2 * s12) / det;
    return rep;
}

// ---------- structural checks ----------

struct ShapeReport {
    int localMinima = 0;
    int localMaxima = 0;
    int criticalCrossings = 0; // sign changes of rho E - 1/tau over the interior
    double minRho = 0.0;
    double maxRho = 0.0;
};

inline ShapeReport shape_report(const Solution& s, const ModelParams& p) {
    ShapeReport r;
    r.minRho = *std::min_element(s.rho.begin(), s.rho.end());
    r.maxRho = *std::max_element(s.rho.begin(), s.rho.end());
    const double itau = 1.0 / p.tau;
    int lastSign = 0;
    int trend = 0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        double g = s.rho[i] * s.e[i] - itau;
        int sg = g > 0.0 ? 1 : (g < 0.0 ? -1 : 0);
        if (sg != 0) {
            if (lastSign != 0 && sg != lastSign) ++r.criticalCrossings;
            lastSign = sg;
        }
        double d = s.rho[i + 1] - s.rho[i];
        int t = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (t != 0) {
            if (trend == -1 && t == 1) ++r.localMinima;
            if (trend == 1 && t == -1) ++r.localMaxima;
            trend = t;
        }
    }
    return r;
}

// inf over interior grid points of (rho - 1)/sin(pi x)
inline double subsonic_margin(const Solution& s) {
    double m = INFINITY;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) m = std::min(m, (s.rho[i] - 1.0) / std::sin(M_PI * s.x[i]));
    return m;
}

struct ShockReport {
    double productError = 0.0;  // |rhoL rhoR - 1|
    double momentumError = 0.0; // |(rhoL + 1/rhoL) - (rhoR + 1/rhoR)|
    double fieldJump = 0.0;     // |E_left - E_right| on the grid
    bool entropy = false;       // rhoL < 1 < rhoR
};

inline ShockReport shock_report(const Solution& s) {
    if (!s.shock || !s.shockIndex) throw Error(ErrorCode::InvalidParameter, "solution carries no shock");
    ShockReport r;
    std::size_t i = *s.shockIndex;
    double rl = s.rho[i], rr = s.rho[i + 1];
    r.productError = std::abs(rl * rr - 1.0);
    r.momentumError = std::abs((rl + 1.0 / rl) - (rr + 1.0 / rr));
    r.fieldJump = std::abs(s.e[i] - s.e[i + 1]);
    r.entropy = rl > 0.0 && rl < 1.0 && rr > 1.0;
    return r;
}

} // namespace sonicflow
