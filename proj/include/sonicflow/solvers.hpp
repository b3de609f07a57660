#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "dopri.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "regime.hpp"
#include "solution.hpp"

namespace sonicflow {

struct SolverOptions {
    IntegratorConfig integrator;
    GridConfig grid;
    std::vector<double> jSchedule{0.5, 0.9, 0.99, 0.999, 0.9999};
    std::vector<double> deltaSchedule{1e-2, 1e-3, 1e-4};
    double boundaryTol = 1e-6;
    double crossCheckTol = 1e-4;
    double glueTol = 1e-6;
    double slopeTol = 1e-3;
    int newtonMaxIter = 80;
    int supersonicSamples = 64;
    // integration range allowed to a shooting pass, in units of the target length
    double lengthBudget = 20.0;
    // tolerance factor for the final pass that fills the output grid; dense
    // output error is amplified by grid differencing near the sonic band
    double assemblyTolFactor = 1e-3;

    IntegratorConfig assembly() const {
        IntegratorConfig c = integrator;
        c.relTol *= assemblyTolFactor;
        c.absTol *= assemblyTolFactor;
        return c;
    }
};

struct ShootingResult {
    std::vector<double> parameters;
    double residual = INFINITY;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Bisection on a bracket whose end values have opposite signs. Infinite
// values are allowed and only their sign is used.
template <class F>
ShootingResult bisect(F&& f, double lo, double hi, double flo, double fhi, int maxIt = 200) {
    ShootingResult r;
    if ((flo > 0.0) == (fhi > 0.0) || std::isnan(flo) || std::isnan(fhi))
        throw Error(ErrorCode::BracketFailure, "bisection bracket has no sign change");
    for (; r.iterations < maxIt; ++r.iterations) {
        double mid = 0.5 * (lo + hi);
        if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi)) break;
        double fm = f(mid);
        if (std::isnan(fm)) throw Error(ErrorCode::ShootingDivergence, "shooting residual is undefined");
        if (fm == 0.0) {
            lo = hi = mid;
            flo = fhi = 0.0;
            break;
        }
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // report the end with the smaller finite residual
    bool useLo = std::abs(flo) <= std::abs(fhi);
    r.parameters = {useLo ? lo : hi, lo, hi};
    r.residual = useLo ? flo : fhi;
    r.converged = std::isfinite(r.residual);
    return r;
}

inline void require_kind(const ModelParams& p, SolutionKind k) {
    auto rep = classify_regime(p);
    const auto& v = rep.of(k);
    if (v.verdict == Verdict::NotExists) {
        ErrorCode code = k == SolutionKind::Subsonic     ? ErrorCode::PreconditionViolation
                         : k == SolutionKind::Supersonic ? ErrorCode::NoSolutionInRegime
                                                         : ErrorCode::RegimeRejection;
        throw Error(code, std::string("no ") + to_string(k) + " solution: " + v.condition, v.theoremRef);
    }
}

inline std::vector<double> sample_doping(const ModelParams& p, const std::vector<double>& x) {
    std::vector<double> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) b[i] = p.b(x[i]);
    return b;
}

template <std::size_t N>
dopri::Vec<N> dense_eval(const std::vector<dopri::Dense<N>>& pieces, double t) {
    // pieces ascend in t
    auto it = std::lower_bound(pieces.begin(), pieces.end(), t,
                               [](const dopri::Dense<N>& d, double v) { return d.t1 < v; });
    if (it == pieces.end()) --it;
    double theta = (t - it->t0) / (it->t1 - it->t0);
    return (*it)(std::clamp(theta, 0.0, 1.0));
}

// ---------- elliptic continuation ----------

inline double kirchhoff(double rho, double j, double gamma) {
    double base = gamma == 1.0 ? std::log(rho) : std::expm1((gamma - 1.0) * std::log(rho)) / (gamma - 1.0);
    return base + 0.5 * j * j / (rho * rho);
}

inline double kirchhoff_d(double rho, double j, double gamma) {
    return std::pow(rho, gamma - 2.0) - j * j / (rho * rho * rho);
}

struct EllipticLevel {
    std::vector<double> rho;
    std::vector<double> e;
    int iterations = 0;
    double residual = 0.0;
};

// Finite-volume form of [Phi_j(rho)_x + j/(tau rho)]_x = rho - b with
// rho = 1 at both ends, solved by damped Newton.
inline EllipticLevel elliptic_level(const ModelParams& p, const std::vector<double>& x, const std::vector<double>& b,
                                    std::vector<double> rho, double j, int maxIt) {
    const std::size_t M = x.size() - 1;
    const double g = p.gamma;
    const double adv = j / (2.0 * p.tau);
    const double floorRho = std::pow(j, 2.0 / (g + 1.0));
    std::vector<double> phi(M + 1), dphi(M + 1);

    auto residual = [&](const std::vector<double>& r, std::vector<double>& R) {
        for (std::size_t i = 0; i <= M; ++i) phi[i] = kirchhoff(r[i], j, g);
        double s = 0.0;
        for (std::size_t i = 1; i < M; ++i) {
            double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
            R[i - 1] = (phi[i + 1] - phi[i]) / hp - (phi[i] - phi[i - 1]) / hm + adv * (1.0 / r[i + 1] - 1.0 / r[i - 1]) -
                       0.5 * (hm + hp) * (r[i] - b[i]);
            s += R[i - 1] * R[i - 1];
        }
        return std::sqrt(s);
    };

    std::vector<double> R(M - 1), trialR(M - 1), lo(M - 1), di(M - 1), up(M - 1), d(M - 1), trial(M + 1);
    double norm = residual(rho, R);
    EllipticLevel out;
    bool converged = false;
    for (int it = 0; it < maxIt; ++it) {
        out.iterations = it + 1;
        for (std::size_t i = 0; i <= M; ++i) dphi[i] = kirchhoff_d(rho[i], j, g);
        for (std::size_t i = 1; i < M; ++i) {
            double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
            lo[i - 1] = dphi[i - 1] / hm + adv / (rho[i - 1] * rho[i - 1]);
            di[i - 1] = -dphi[i] * (1.0 / hp + 1.0 / hm) - 0.5 * (hm + hp);
            up[i - 1] = dphi[i + 1] / hp - adv / (rho[i + 1] * rho[i + 1]);
            d[i - 1] = -R[i - 1];
        }
        if (!solve_tridiagonal(lo, di, up, d))
            throw Error(ErrorCode::NewtonDivergence, "singular Jacobian in the elliptic continuation");
        double step = 0.0;
        for (double v : d) step = std::max(step, std::abs(v));

        // Close to the solution the residual sits at its roundoff floor (tiny
        // cells near the ends), so small steps are taken undamped.
        const bool undamped = step < 1e-4;
        double alpha = 1.0, trialNorm = kInf;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
            bool ok = true;
            trial = rho;
            for (std::size_t i = 1; i < M; ++i) {
                trial[i] = rho[i] + alpha * d[i - 1];
                if (!(trial[i] > floorRho)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            trialNorm = residual(trial, trialR);
            if (undamped || trialNorm < (1.0 - 1e-4 * alpha) * norm || alpha * step < 1e-12) break;
        }
        if (!std::isfinite(trialNorm)) throw Error(ErrorCode::NewtonDivergence, "Newton step left the elliptic range");
        rho.swap(trial);
        R.swap(trialR);
        norm = trialNorm;
        if (alpha * step < 1e-13 || (alpha == 1.0 && step < 1e-12)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        Error err(ErrorCode::NewtonDivergence,
                  "elliptic Newton did not converge at j = " + std::to_string(j) +
                      ", last residual " + std::to_string(norm));
        throw err;
    }
    out.residual = norm;

    // field from the face fluxes, shifted to the nodes with the discrete balance
    for (std::size_t i = 0; i <= M; ++i) phi[i] = kirchhoff(rho[i], j, g);
    std::vector<double> face(M);
    for (std::size_t i = 0; i < M; ++i)
        face[i] = (phi[i + 1] - phi[i]) / (x[i + 1] - x[i]) + adv * (1.0 / rho[i] + 1.0 / rho[i + 1]);
    out.e.resize(M + 1);
    out.e[0] = face[0] - 0.5 * (x[1] - x[0]) * (rho[0] - b[0]);
    for (std::size_t i = 1; i <= M; ++i) out.e[i] = face[i - 1] + 0.5 * (x[i] - x[i - 1]) * (rho[i] - b[i]);
    out.rho = std::move(rho);
    return out;
}

} // namespace detail

// ---------- sonic ----------

inline Solution solve_sonic(const ModelParams& p, const SolverOptions& opts = {}) {
    if (!p.doping.is_sonic())
        throw Error(ErrorCode::NotSonicDoping, "the sonic solution needs b = 1 identically", "Remark after Theorem 1.2");
    Solution s;
    s.kind = SolutionKind::Sonic;
    s.x = graded_grid(0.0, 1.0, opts.grid);
    s.rho.assign(s.x.size(), 1.0);
    s.e.assign(s.x.size(), 1.0 / p.tau);
    s.diagnostics["boundaryError"] = 0.0;
    return s;
}

// ---------- subsonic ----------

inline void validate_j_schedule(const std::vector<double>& js) {
    if (js.size() < 2) throw Error(ErrorCode::InvalidParameter, "j schedule needs at least two values");
    for (std::size_t i = 0; i < js.size(); ++i) {
        if (!(js[i] > 0.0 && js[i] < 1.0)) throw Error(ErrorCode::InvalidParameter, "j values must lie in (0,1)");
        if (i > 0 && !(js[i] > js[i - 1])) throw Error(ErrorCode::InvalidParameter, "j schedule must increase");
    }
    if (js.back() < 1.0 - 1e-4) throw Error(ErrorCode::InvalidParameter, "final j must be at least 1 - 1e-4");
}

inline Solution solve_subsonic_elliptic(const ModelParams& p, const std::vector<double>& jSchedule,
                                        const SolverOptions& opts = {}) {
    detail::require_kind(p, SolutionKind::Subsonic);
    if (!(p.doping.lower() > 1.0))
        throw Error(ErrorCode::PreconditionViolation, "elliptic continuation needs bLower > 1");
    validate_j_schedule(jSchedule);

    Solution s;
    s.kind = SolutionKind::Subsonic;
    s.x = graded_grid(0.0, 1.0, opts.grid);
    const auto& x = s.x;
    auto b = detail::sample_doping(p, x);
    const std::size_t M = x.size() - 1;

    std::vector<double> rho(M + 1, 1.0);
    for (std::size_t i = 1; i < M; ++i) rho[i] = 1.0 + 0.5 * (b[i] - 1.0) * std::sqrt(std::sin(M_PI * x[i]));

    std::vector<detail::EllipticLevel> levels;
    int iters = 0;
    for (double j : jSchedule) {
        auto lvl = detail::elliptic_level(p, x, b, levels.empty() ? rho : levels.back().rho, j, opts.newtonMaxIter);
        iters += lvl.iterations;
        levels.push_back(std::move(lvl));
    }
    const auto& l1 = levels[levels.size() - 2];
    const auto& l2 = levels.back();
    double s1 = 1.0 - jSchedule[jSchedule.size() - 2], s2 = 1.0 - jSchedule.back();
    double w = s2 / (s1 - s2);
    s.rho.resize(M + 1);
    s.e.resize(M + 1);
    double gap = 0.0;
    for (std::size_t i = 0; i <= M; ++i) {
        s.rho[i] = l2.rho[i] + w * (l2.rho[i] - l1.rho[i]);
        s.e[i] = l2.e[i] + w * (l2.e[i] - l1.e[i]);
        gap = std::max(gap, std::abs(s.rho[i] - l2.rho[i]));
    }
    s.rho.front() = s.rho.back() = 1.0;
    s.diagnostics["newtonIterations"] = iters;
    s.diagnostics["finalJ"] = jSchedule.back();
    s.diagnostics["richardsonCorrection"] = gap;
    s.diagnostics["finalNewtonResidual"] = l2.residual;
    s.diagnostics["boundaryError"] = 0.0;
    return s;
}

inline std::vector<double> default_j_schedule() { return SolverOptions{}.jSchedule; }

namespace detail {

struct WShot {
    dopri::Run<2> run;
    double residual = kInf;
};

// w = (rho - 1)^2 on the subsonic side, with E(a) = g0 and w(a) = 0.
inline WShot shoot_w(const ModelParams& p, double a, double c, double g0, const IntegratorConfig& cfg) {
    const double itau = 1.0 / p.tau;
    const double gam = p.gamma;
    auto f = [&](double x, const dopri::Vec<2>& y, dopri::Vec<2>& dy) {
        double n = std::sqrt(std::max(y[0], 0.0));
        double rho = 1.0 + n;
        dy[0] = 2.0 * sonic_ratio_n(n, gam) * (rho * y[1] - itau);
        dy[1] = rho - p.b(x);
        return true;
    };
    auto ev = [](double, const dopri::Vec<2>& y) { return y[0]; };
    WShot out;
    out.run = dopri::run<2>(f, a, c, {0.0, g0}, cfg.relTol, cfg.absTol, cfg.maxStep, ev, cfg.blowUpDensity);
    if (!out.run.ok)
        out.residual = kInf;
    else if (out.run.event)
        out.residual = out.run.tEnd - c;
    else if (out.run.yEnd[0] < 0.0)
        out.residual = a - c; // w turned negative on the first step: landed at once
    else
        out.residual = out.run.yEnd[0];
    return out;
}

} // namespace detail

inline Solution solve_subsonic_shooting(const ModelParams& p, const SolverOptions& opts = {}) {
    detail::require_kind(p, SolutionKind::Subsonic);
    if (!(p.doping.lower() > 1.0))
        throw Error(ErrorCode::PreconditionViolation, "w-shooting needs bLower > 1");
    const double itau = 1.0 / p.tau;
    auto res = [&](double g0) { return detail::shoot_w(p, 0.0, 1.0, g0, opts.integrator).residual; };

    double lo = itau + 1e-9 * std::max(1.0, itau);
    double flo = res(lo);
    if (!(flo < 0.0)) throw Error(ErrorCode::BracketFailure, "w-shooting lower bracket does not land early");
    double off = 1.0, hi = itau + off, fhi = res(hi);
    for (int k = 0; k < 60 && fhi < 0.0; ++k) {
        lo = hi;
        flo = fhi;
        off *= 2.0;
        hi = itau + off;
        fhi = res(hi);
    }
    if (!(fhi >= 0.0)) throw Error(ErrorCode::BracketFailure, "no sign change of the w-shooting residual");
    auto sr = detail::bisect(res, lo, hi, flo, fhi);
    // the upper end of the bracket reaches x = 1 with w >= 0
    double g0 = sr.parameters[2];
    auto shot = detail::shoot_w(p, 0.0, 1.0, g0, opts.integrator);
    // a landing event within boundaryTol of x = 1 is the converged limit
    double landGap = shot.run.event ? 1.0 - shot.run.tEnd : 0.0;
    if (!shot.run.ok || landGap > opts.boundaryTol)
        throw Error(ErrorCode::ShootingDivergence, "w-shooting did not converge");

    Solution s;
    s.kind = SolutionKind::Subsonic;
    s.x = graded_grid(0.0, 1.0, opts.grid);
    s.rho.resize(s.x.size());
    s.e.resize(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        auto y = detail::dense_eval(shot.run.pieces, s.x[i]);
        s.rho[i] = 1.0 + std::sqrt(std::max(y[0], 0.0));
        s.e[i] = y[1];
    }
    s.rho.front() = s.rho.back() = 1.0;
    s.e.front() = g0;
    s.e.back() = shot.run.yEnd[1];
    s.diagnostics["shootingParameter"] = g0;
    s.diagnostics["shootingIterations"] = sr.iterations;
    s.diagnostics["boundaryError"] = std::max(std::sqrt(std::max(shot.run.yEnd[0], 0.0)), landGap);
    return s;
}

// ---------- supersonic ----------

namespace detail {

struct Arcs {
    bool ok = false;
    double lMinus = kInf;
    double lPlus = kInf;
    TrajectorySegment back;
    TrajectorySegment fwd;
};

// Arcs from an interior critical point (rho_min, E = 1/(tau rho_min)) at x = z to
// the sonic line on both sides.
inline Arcs arcs_from_minimum(const ModelParams& p, double rhoMin, double z, double budget,
                              const IntegratorConfig& cfg) {
    Arcs a;
    State s{z, rhoMin, 1.0 / (p.tau * rhoMin)};
    a.back = integrate(s, Direction::Backward, {EventSpec::sonic(), EventSpec::domain(z - budget)}, p, cfg);
    if (a.back.terminator.kind != EventKind::SonicArrival) return a;
    a.fwd = integrate(s, Direction::Forward, {EventSpec::sonic(), EventSpec::domain(z + budget)}, p, cfg);
    if (a.fwd.terminator.kind != EventKind::SonicArrival) return a;
    a.lMinus = z - a.back.terminator.location.x;
    a.lPlus = a.fwd.terminator.location.x - z;
    a.ok = true;
    return a;
}

inline Solution assemble_supersonic(const Arcs& a, double left, double right, double z0, const GridConfig& grid) {
    Solution s;
    s.kind = SolutionKind::Supersonic;
    s.x = graded_grid(left, right, grid);
    s.rho.resize(s.x.size());
    s.e.resize(s.x.size());
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        double x = s.x[i];
        State st = x <= z0 ? a.back.at(std::max(x, z0 - a.lMinus)) : a.fwd.at(std::min(x, z0 + a.lPlus));
        s.rho[i] = std::min(st.rho, 1.0);
        s.e[i] = st.e;
    }
    s.rho.front() = s.rho.back() = 1.0;
    s.e.front() = a.back.terminator.location.e;
    s.e.back() = a.fwd.terminator.location.e;
    return s;
}

} // namespace detail

struct ResidualSample {
    double rhoMin = 0.0;
    double residual = 0.0;
};

// Length residual L_minus + L_plus - L over a uniform rho_min sweep (constant doping).
inline std::vector<ResidualSample> supersonic_residual_sweep(const ModelParams& p, int samples, double lo, double hi,
                                                             double length = 1.0, const SolverOptions& opts = {}) {
    if (!p.doping.is_constant())
        throw Error(ErrorCode::NotConstantDoping, "the rho_min sweep is defined for constant doping");
    if (samples < 2) throw Error(ErrorCode::InvalidParameter, "sweep needs at least two samples");
    std::vector<ResidualSample> out;
    for (int k = 0; k < samples; ++k) {
        double r = lo + (hi - lo) * k / (samples - 1);
        auto a = detail::arcs_from_minimum(p, r, 0.0, opts.lengthBudget * length, opts.integrator);
        out.push_back({r, a.ok ? a.lMinus + a.lPlus - length : detail::kInf});
    }
    return out;
}

inline int count_sign_changes(const std::vector<ResidualSample>& v) {
    int n = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if ((v[i].residual > 0.0) != (v[i - 1].residual > 0.0)) ++n;
    return n;
}

namespace detail {

inline std::vector<Solution> supersonic_constant(const ModelParams& p, double left, double right,
                                                 const SolverOptions& opts) {
    const double L = right - left;
    const double budget = opts.lengthBudget * L;
    auto sweep = supersonic_residual_sweep(p, opts.supersonicSamples, 0.01, 0.99, L, opts);
    std::vector<Solution> out;
    for (std::size_t k = 1; k < sweep.size(); ++k) {
        const auto& A = sweep[k - 1];
        const auto& B = sweep[k];
        if ((A.residual > 0.0) == (B.residual > 0.0)) continue;
        auto f = [&](double r) {
            auto a = arcs_from_minimum(p, r, 0.0, budget, opts.integrator);
            return a.ok ? a.lMinus + a.lPlus - L : kInf;
        };
        auto sr = bisect(f, A.rhoMin, B.rhoMin, A.residual, B.residual);
        if (!sr.converged || std::abs(sr.residual) > 1e-9 * std::max(1.0, L)) continue;
        double rm = sr.parameters[0];
        auto a0 = arcs_from_minimum(p, rm, 0.0, budget, opts.integrator);
        if (!a0.ok) continue;
        // constant doping is translation invariant: rerun with the minimum at z0
        double z0 = left + a0.lMinus;
        auto a = arcs_from_minimum(p, rm, z0, budget, opts.assembly());
        if (!a.ok) continue;
        Solution s = assemble_supersonic(a, left, right, z0, opts.grid);
        s.diagnostics["rhoMin"] = rm;
        s.diagnostics["z0"] = z0;
        s.diagnostics["lengthMismatch"] = std::abs(a.lMinus + a.lPlus - L);
        s.diagnostics["shootingIterations"] = sr.iterations;
        s.diagnostics["leftArrivalSmooth"] = a.back.terminator.smooth ? 1.0 : 0.0;
        s.diagnostics["rightArrivalSmooth"] = a.fwd.terminator.smooth ? 1.0 : 0.0;
        s.diagnostics["boundaryError"] = std::abs(a.lMinus + a.lPlus - L);
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(),
              [](const Solution& a, const Solution& b) { return a.diagnostics.at("rhoMin") < b.diagnostics.at("rhoMin"); });
    return out;
}

// Two residuals (left arrival at 0, right arrival at 1) over (rho_min, z0).
inline Solution supersonic_variable(const ModelParams& p, const SolverOptions& opts) {
    const double budget = opts.lengthBudget;
    auto resid = [&](double rm, double z, Arcs* keep = nullptr) -> std::array<double, 2> {
        if (!(rm > 0.0 && rm < 1.0)) return {kInf, kInf};
        auto a = arcs_from_minimum(p, rm, z, budget, opts.integrator);
        if (!a.ok) return {kInf, kInf};
        std::array<double, 2> r{a.back.terminator.location.x, a.fwd.terminator.location.x - 1.0};
        if (keep) *keep = std::move(a);
        return r;
    };
    auto norm = [](const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); };

    // constant-doping start with the mean doping
    double mean = 0.0;
    for (int k = 0; k <= 200; ++k) mean += p.b(k / 200.0);
    mean /= 201.0;
    ModelParams pc(p.tau, DopingProfile::constant(mean), p.gamma);
    auto seeds = supersonic_constant(pc, 0.0, 1.0, opts);
    if (seeds.empty()) throw Error(ErrorCode::ShootingDivergence, "no constant-doping seed for the supersonic shooting");
    double rm = seeds.front().diagnostics.at("rhoMin");
    double z = seeds.front().diagnostics.at("z0");

    auto r = resid(rm, z);
    int it = 0;
    bool converged = norm(r) < 1e-11;
    for (; it < opts.newtonMaxIter && !converged; ++it) {
        const double h = 1e-7;
        auto rr = resid(rm + h, z);
        auto rz = resid(rm, z + h);
        double J00 = (rr[0] - r[0]) / h, J10 = (rr[1] - r[1]) / h;
        double J01 = (rz[0] - r[0]) / h, J11 = (rz[1] - r[1]) / h;
        double det = J00 * J11 - J01 * J10;
        if (!std::isfinite(det) || det == 0.0) break;
        double dr = -(J11 * r[0] - J01 * r[1]) / det;
        double dz = -(-J10 * r[0] + J00 * r[1]) / det;
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
            auto t = resid(rm + alpha * dr, z + alpha * dz);
            if (norm(t) < norm(r)) {
                rm += alpha * dr;
                z += alpha * dz;
                r = t;
                moved = true;
                break;
            }
        }
        if (!moved) break;
        converged = norm(r) < 1e-11;
    }

    if (!converged) {
        // nested bisection: inner on rho_min for unit length, outer on z0 for the left arrival
        auto inner = [&](double zz) {
            auto f = [&](double r2) {
                auto a = arcs_from_minimum(p, r2, zz, budget, opts.integrator);
                return a.ok ? a.lMinus + a.lPlus - 1.0 : kInf;
            };
            double a0 = 0.01, a1 = 0.99;
            double f0 = f(a0), f1 = f(a1);
            if ((f0 > 0.0) == (f1 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
            return bisect(f, a0, a1, f0, f1).parameters[0];
        };
        auto outer = [&](double zz) {
            double r2 = inner(zz);
            if (std::isnan(r2)) return kInf;
            auto a = arcs_from_minimum(p, r2, zz, budget, opts.integrator);
            return a.ok ? a.back.terminator.location.x : kInf;
        };
        double z0 = 0.05, z1 = 0.95;
        double f0 = outer(z0), f1 = outer(z1);
        if ((f0 > 0.0) == (f1 > 0.0))
            throw Error(ErrorCode::ShootingDivergence, "two-parameter supersonic shooting failed to converge");
        z = bisect(outer, z0, z1, f0, f1).parameters[0];
        rm = inner(z);
        r = resid(rm, z);
    }

    Arcs a = arcs_from_minimum(p, rm, z, budget, opts.assembly());
    if (a.ok) r = {a.back.terminator.location.x, a.fwd.terminator.location.x - 1.0};
    if (!a.ok) throw Error(ErrorCode::ShootingDivergence, "two-parameter supersonic shooting lost its arcs");
    Solution s = assemble_supersonic(a, 0.0, 1.0, z, opts.grid);
    s.diagnostics["rhoMin"] = rm;
    s.diagnostics["z0"] = z;
    s.diagnostics["shootingIterations"] = it;
    s.diagnostics["boundaryError"] = norm(r);
    return s;
}

} // namespace detail

// All supersonic solutions found by the shooting, ordered by rho_min.
inline std::vector<Solution> solve_supersonic_all(const ModelParams& p, const SolverOptions& opts = {}) {
    detail::require_kind(p, SolutionKind::Supersonic);
    std::vector<Solution> out;
    if (p.doping.is_constant())
        out = detail::supersonic_constant(p, 0.0, 1.0, opts);
    else
        out.push_back(detail::supersonic_variable(p, opts));
    if (out.empty())
        throw Error(ErrorCode::ShootingDivergence,
                    "no sign change of the rho_min length residual over [0.01, 0.99]");
    return out;
}

inline Solution solve_supersonic(const ModelParams& p, const SolverOptions& opts = {}) {
    return solve_supersonic_all(p, opts).front();
}

// ---------- transonic shock ----------

struct UndampedArc {
    double rhoMin = 0.0;
    double e0 = 0.0;
};

// Supersonic arc of the undamped constant-doping system with sonic ends and
// length L, from the conserved energy E^2/2 - V(rho).
inline UndampedArc undamped_supersonic_arc(double b, double L) {
    if (!(b > 1.0)) throw Error(ErrorCode::InvalidParameter, "undamped seed needs b > 1");
    auto halfLength = [b](double rm) {
        double vm = undamped_potential(rm, b);
        auto integrand = [&](double t) {
            double rho = rm + (1.0 - rm) * t * t;
            double dv = undamped_potential(rho, b) - vm;
            if (!(dv > 0.0)) return 0.0;
            return 2.0 * (1.0 - rm) * t * (1.0 - rho * rho) / (rho * rho * rho * std::sqrt(2.0 * dv));
        };
        return boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, 1.0);
    };
    auto f = [&](double rm) { return 2.0 * halfLength(rm) - L; };
    auto tol = [](double a, double c) { return std::abs(c - a) < 1e-14; };
    auto [a, c] = boost::math::tools::bisect(f, 1e-6, 1.0 - 1e-9, tol);
    double rm = 0.5 * (a + c);
    return {rm, std::sqrt(2.0 * (undamped_potential(1.0, b) - undamped_potential(rm, b)))};
}

namespace detail {

struct ShockShot {
    double residual = kInf;
    bool ok = false;
    double xShock = 0.0;
    double eShock = 0.0;
    TrajectorySegment sup;
    TrajectorySegment sub;
};

inline ShockShot shoot_shock(const ModelParams& p, double rhoL, double delta, double e0, double budget,
                             const IntegratorConfig& cfg) {
    ShockShot out;
    std::vector<EventSpec> stops{EventSpec::sonic(), EventSpec::domain(budget)};
    std::vector<EventSpec> watch{EventSpec::target(rhoL)};
    if (delta > 0.0) {
        State s{0.0, 1.0 - delta, e0};
        // the supersonic branch must start downward
        if (!(s.rho * e0 - 1.0 / p.tau > 0.0)) {
            out.residual = -kInf;
            return out;
        }
        out.sup = integrate(s, Direction::Forward, stops, p, cfg, watch);
    } else {
        if (!(e0 > 1.0 / p.tau)) {
            out.residual = -kInf;
            return out;
        }
        out.sup = integrate_from_sonic(0.0, FlowRegime::Supersonic, e0, stops, p, cfg, watch);
    }
    const auto& cr = out.sup.crossings;
    if (cr.empty()) {
        // the arc never dips to rhoL: too short for a jump
        out.residual = -kInf;
        return out;
    }
    if (out.sup.terminator.kind != EventKind::SonicArrival || cr.size() < 2) {
        out.residual = kInf;
        return out;
    }
    const State& last = cr.back().location;
    out.xShock = last.x;
    out.eShock = last.e;
    auto jump = rh_jump(rhoL, last.e);
    State r{last.x, jump.rhoR, jump.eR};
    std::vector<EventSpec> subStops{EventSpec::domain(budget)};
    subStops.push_back(delta > 0.0 ? EventSpec::target(1.0 + delta) : EventSpec::sonic());
    out.sub = integrate(r, Direction::Forward, subStops, p, cfg);
    auto k = out.sub.terminator.kind;
    bool arrived = delta > 0.0 ? k == EventKind::TargetDensity : k == EventKind::SonicArrival;
    if (!arrived) {
        out.residual = kInf;
        return out;
    }
    out.ok = true;
    out.residual = out.sub.terminator.location.x - 1.0;
    return out;
}

inline ShootingResult solve_shock_e0(const ModelParams& p, double rhoL, double delta, double lo, double hi,
                                     const SolverOptions& opts) {
    const double budget = opts.lengthBudget;
    const double itau = 1.0 / p.tau;
    bool admissible = false;
    auto f = [&](double e0) {
        auto shot = shoot_shock(p, rhoL, delta, e0, budget, opts.integrator);
        admissible = admissible || shot.ok;
        return shot.residual;
    };
    double flo = f(lo), fhi = f(hi);
    for (int k = 0; k < 60 && !(flo < 0.0); ++k) {
        hi = lo;
        fhi = flo;
        lo = itau + 0.5 * (lo - itau);
        flo = f(lo);
    }
    for (int k = 0; k < 60 && !(fhi > 0.0); ++k) {
        lo = hi;
        flo = fhi;
        hi = itau + 1.5 * (hi - itau);
        fhi = f(hi);
    }
    auto missing = [&] {
        return Error(ErrorCode::LastCrossingMissing,
                     "no supersonic branch returns to rhoL = " + std::to_string(rhoL) + "; the jump is too large");
    };
    if (!(flo < 0.0) || !(fhi > 0.0)) {
        if (!admissible) throw missing();
        throw Error(ErrorCode::ShootingDivergence, "no E0 bracket for the shock construction");
    }
    auto r = bisect(f, lo, hi, flo, fhi);
    if (!std::isfinite(r.residual)) {
        // no crossing on the short side of the jump: unit-length branches never reach rhoL
        if (!admissible || f(r.parameters[1]) == -kInf) throw missing();
        throw Error(ErrorCode::ShootingDivergence, "shock length residual jumps across its root");
    }
    return r;
}

} // namespace detail

inline Solution solve_transonic_shock(const ModelParams& p, double rhoL, const std::vector<double>& deltaSchedule,
                                      const SolverOptions& opts = {}) {
    if (!(rhoL > 0.0 && rhoL < 1.0))
        throw Error(ErrorCode::EntropyViolation, "left shock state must satisfy 0 < rhoL < 1");
    if (!p.isothermal())
        throw Error(ErrorCode::InvalidParameter, "the shock constructor uses the isothermal jump conditions");
    detail::require_kind(p, SolutionKind::TransonicShock);
    if (deltaSchedule.size() < 2) throw Error(ErrorCode::InvalidParameter, "delta schedule needs two values");
    for (std::size_t i = 0; i < deltaSchedule.size(); ++i)
        if (!(deltaSchedule[i] > 0.0) || (i > 0 && !(deltaSchedule[i] < deltaSchedule[i - 1])))
            throw Error(ErrorCode::InvalidParameter, "delta schedule must be positive and decreasing");

    const double itau = 1.0 / p.tau;
    // bracket seeds from the undamped arcs of length 1/2 and 3/2
    double lo = itau + 1e-3, hi = itau + 1.0;
    bool seeded = false;
    if (p.doping.lower() > 1.0) {
        double b = p.doping.lower();
        lo = std::max(undamped_supersonic_arc(b, 0.5).e0, itau * (1.0 + 1e-6) + 1e-12);
        hi = std::max(undamped_supersonic_arc(b, 1.5).e0, lo * 1.5);
        seeded = true;
    }

    std::vector<double> e0s, xs;
    for (double d : deltaSchedule) {
        auto sr = detail::solve_shock_e0(p, rhoL, d, lo, hi, opts);
        auto shot = detail::shoot_shock(p, rhoL, d, sr.parameters[0], opts.lengthBudget, opts.integrator);
        if (!shot.ok) throw Error(ErrorCode::ShootingDivergence, "shock shooting failed at delta = " + std::to_string(d));
        e0s.push_back(sr.parameters[0]);
        xs.push_back(shot.xShock);
    }
    // linear-in-delta extrapolation from the two smallest deltas
    std::size_t n = deltaSchedule.size();
    double d1 = deltaSchedule[n - 2], d2 = deltaSchedule[n - 1];
    double w = d2 / (d1 - d2);
    double e0x = e0s[n - 1] + w * (e0s[n - 1] - e0s[n - 2]);
    double x0x = xs[n - 1] + w * (xs[n - 1] - xs[n - 2]);

    // final shot launched exactly on the sonic line
    double span = std::max(1e-6, 10.0 * std::abs(e0s[n - 1] - e0x));
    auto sr = detail::solve_shock_e0(p, rhoL, 0.0, std::max(e0x - span, itau * (1.0 + 1e-9)), e0x + span, opts);
    double e0 = sr.parameters[0];
    auto shot = detail::shoot_shock(p, rhoL, 0.0, e0, opts.lengthBudget, opts.assembly());
    if (!shot.ok) throw Error(ErrorCode::ShootingDivergence, "sonic-boundary shock shot failed");

    const double xs0 = shot.xShock;
    const double xEnd = shot.sub.terminator.location.x;
    auto jump = rh_jump(rhoL, shot.eShock);

    Solution s;
    s.kind = SolutionKind::TransonicShock;
    auto left = graded_grid(0.0, xs0, opts.grid, true, false);
    auto right = graded_grid(xs0, 1.0, opts.grid, false, true);
    for (double x : left) {
        State st = shot.sup.at(std::min(x, xs0));
        s.x.push_back(x);
        s.rho.push_back(std::min(st.rho, 1.0));
        s.e.push_back(st.e);
    }
    s.rho.front() = 1.0;
    s.e.front() = e0;
    s.rho.back() = rhoL;
    s.e.back() = shot.eShock;
    s.shockIndex = s.x.size() - 1;
    s.x.push_back(std::nextafter(xs0, 2.0));
    s.rho.push_back(jump.rhoR);
    s.e.push_back(jump.eR);
    for (std::size_t i = 1; i < right.size(); ++i) {
        double x = right[i];
        State st = shot.sub.at(std::min(x, xEnd));
        s.x.push_back(x);
        s.rho.push_back(std::max(st.rho, 1.0));
        s.e.push_back(st.e);
    }
    s.rho.back() = 1.0;
    s.e.back() = shot.sub.terminator.location.e;

    s.shock = ShockData{xs0, rhoL, jump.rhoR, shot.eShock};
    s.diagnostics["e0"] = e0;
    s.diagnostics["e0Extrapolated"] = e0x;
    s.diagnostics["x0Extrapolated"] = x0x;
    s.diagnostics["extrapolationGapE0"] = std::abs(e0 - e0x);
    s.diagnostics["extrapolationGapX0"] = std::abs(xs0 - x0x);
    s.diagnostics["boundaryError"] = std::abs(xEnd - 1.0);
    s.diagnostics["bracketSeeded"] = seeded ? 1.0 : 0.0;
    s.diagnostics["shootingIterations"] = sr.iterations;
    for (std::size_t i = 0; i < n; ++i) {
        s.diagnostics["e0AtDelta" + std::to_string(i)] = e0s[i];
        s.diagnostics["x0AtDelta" + std::to_string(i)] = xs[i];
    }
    return s;
}

// ---------- C1 transonic ----------

struct C1Construction {
    Solution solution;
    TrajectorySegment supersonicBack;
    TrajectorySegment supersonicForward;
    TrajectorySegment subsonicBackward;
};

namespace detail {

inline double one_sided_slope(const TrajectorySegment& seg, double x0, double h) {
    // second-order one-sided difference with rho(x0) = 1
    double r1 = seg.at(x0 + h).rho, r2 = seg.at(x0 + 2.0 * h).rho;
    return (-3.0 * 1.0 + 4.0 * r1 - r2) / (2.0 * h);
}

} // namespace detail

inline C1Construction construct_c1_transonic(const ModelParams& p, double x0, const SolverOptions& opts = {}) {
    if (!p.doping.is_constant())
        throw Error(ErrorCode::NotConstantDoping, "smooth transition construction needs constant doping");
    if (!p.isothermal())
        throw Error(ErrorCode::InvalidParameter, "smooth transition construction is isothermal only");
    double b = p.doping.constant_value();
    if (!(b > 1.0)) throw Error(ErrorCode::RegimeRejection, "smooth transition needs constant b > 1", "Theorem 2.22");
    double t0 = tau0_bound(b);
    if (!(p.tau < t0))
        throw Error(ErrorCode::RegimeRejection,
                    "tau = " + std::to_string(p.tau) + " is not below tau0(b) = " + std::to_string(t0), "Theorem 2.22");
    if (!(x0 > 0.0 && x0 < 1.0)) throw Error(ErrorCode::InvalidParameter, "transition point must lie in (0,1)");
    const double itau = 1.0 / p.tau;
    const double slope = c1_transition_slope(b, p.tau);

    // supersonic part on [0, x0] with the node arrival on the right
    auto sups = detail::supersonic_constant(p, 0.0, x0, opts);
    const Solution* sup = nullptr;
    for (const auto& s : sups)
        if (s.diagnostics.at("rightArrivalSmooth") == 1.0) {
            sup = &s;
            break;
        }
    if (!sup) throw Error(ErrorCode::GlueMismatch, "no supersonic arc on [0, x0] reaches the transition node");
    double rm = sup->diagnostics.at("rhoMin");
    auto arcs = detail::arcs_from_minimum(p, rm, sup->diagnostics.at("z0"), opts.lengthBudget, opts.assembly());

    // subsonic part: backward from x = 1 into the node at x0
    const double budget = opts.lengthBudget;
    auto shootSub = [&](double e1, const IntegratorConfig& cfg) {
        return integrate_from_sonic(1.0, FlowRegime::Subsonic, e1, {EventSpec::sonic(), EventSpec::domain(1.0 - budget)},
                                    p, cfg);
    };
    auto resid = [&](double e1) {
        auto seg = shootSub(e1, opts.integrator);
        if (seg.terminator.kind != EventKind::SonicArrival) return detail::kInf;
        return x0 - seg.terminator.location.x;
    };
    // Arcs launched very close to the critical value hug the node and may end
    // in a step failure; those shots are skipped, not counted as long arcs.
    double hi = 0.0, fhi = 0.0, lo = 0.0, flo = detail::kInf;
    bool haveShort = false;
    for (double d = 1e-4 * itau; d < itau; d *= 2.0) {
        double r = resid(itau - d);
        if (!std::isfinite(r)) continue;
        if (r < 0.0) {
            hi = itau - d;
            fhi = r;
            haveShort = true;
        } else {
            lo = itau - d;
            flo = r;
            break;
        }
    }
    if (!haveShort || !std::isfinite(flo))
        throw Error(ErrorCode::BracketFailure, "no subsonic arc bracket for the transition point");
    auto sr = detail::bisect(resid, lo, hi, flo, fhi);
    double e1 = std::isfinite(resid(sr.parameters[1])) ? sr.parameters[1] : sr.parameters[2];
    auto sub = shootSub(e1, opts.assembly());
    if (sub.terminator.kind != EventKind::SonicArrival)
        throw Error(ErrorCode::ShootingDivergence, "subsonic shooting lost its arrival");

    C1Construction c;
    Solution& s = c.solution;
    s.kind = SolutionKind::C1Transonic;
    auto right = graded_grid(x0, 1.0, opts.grid);
    s.x = sup->x;
    s.rho = sup->rho;
    s.e = sup->e;
    const double xSubEnd = sub.terminator.location.x;
    for (std::size_t i = 1; i < right.size(); ++i) {
        State st = sub.at(std::max(right[i], xSubEnd));
        s.x.push_back(right[i]);
        s.rho.push_back(std::max(st.rho, 1.0));
        s.e.push_back(st.e);
    }
    s.rho.back() = 1.0;
    s.e.back() = e1;
    std::size_t ix0 = sup->x.size() - 1;
    double eLeft = arcs.fwd.terminator.location.e;
    double eRight = sub.terminator.location.e;
    s.rho[ix0] = 1.0;
    s.e[ix0] = 0.5 * (eLeft + eRight);

    double h = 2e-3 * std::min(x0, 1.0 - x0);
    double sL = detail::one_sided_slope(arcs.fwd, x0, -h);
    double sR = detail::one_sided_slope(sub, x0, h);
    s.transition = Transition{x0, 0.5 * (sL + sR)};
    s.diagnostics["rhoMin"] = rm;
    s.diagnostics["z0"] = sup->diagnostics.at("z0");
    s.diagnostics["slopeExpected"] = slope;
    s.diagnostics["slopeLeft"] = sL;
    s.diagnostics["slopeRight"] = sR;
    s.diagnostics["eLeftAtX0"] = eLeft;
    s.diagnostics["eRightAtX0"] = eRight;
    s.diagnostics["glueGapE"] = std::max(std::abs(eLeft - itau), std::abs(eRight - itau));
    s.diagnostics["glueGapX"] = std::max(std::abs(arcs.fwd.terminator.location.x - x0), std::abs(xSubEnd - x0));
    s.diagnostics["subsonicE1"] = e1;
    s.diagnostics["boundaryError"] =
        std::max(sup->diagnostics.at("boundaryError"), std::abs(xSubEnd - x0));

    if (!sub.terminator.smooth)
        throw Error(ErrorCode::GlueMismatch, "subsonic arc reaches x0 on a square-root branch, not through the node");
    double gapE = s.diagnostics["glueGapE"];
    if (gapE > opts.glueTol || s.diagnostics["glueGapX"] > opts.glueTol)
        throw Error(ErrorCode::GlueMismatch, "glue gap at x0: |E - 1/tau| = " + std::to_string(gapE));
    double rel = std::max(std::abs(sL - slope), std::abs(sR - slope)) / slope;
    s.diagnostics["slopeRelativeGap"] = rel;
    if (rel > opts.slopeTol)
        throw Error(ErrorCode::GlueMismatch, "one-sided slopes differ from the transition slope by " +
                                                 std::to_string(rel) + " (relative)");
    c.supersonicBack = std::move(arcs.back);
    c.supersonicForward = std::move(arcs.fwd);
    c.subsonicBackward = std::move(sub);
    return c;
}

inline Solution solve_c1_transonic(const ModelParams& p, double x0, const SolverOptions& opts = {}) {
    return construct_c1_transonic(p, x0, opts).solution;
}

} // namespace sonicflow
