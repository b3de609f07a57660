#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>

#include "doping.hpp"
#include "error.hpp"

namespace sonicflow {

// Dimensionless parameters with T = J = 1 (T*gamma = 1 when gamma > 1).
struct ModelParams {
    double tau = 1.0;
    DopingProfile doping;
    double gamma = 1.0;

    ModelParams() = default;
    ModelParams(double tau_, DopingProfile doping_, double gamma_ = 1.0)
        : tau(tau_), doping(std::move(doping_)), gamma(gamma_) {
        validate();
    }

    void validate() const {
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw Error(ErrorCode::InvalidParameter, "tau must be positive and finite");
        if (!(gamma >= 1.0) || !std::isfinite(gamma))
            throw Error(ErrorCode::InvalidParameter, "gamma must be >= 1");
    }

    bool isothermal() const { return gamma == 1.0; }
    double b(double x) const { return doping(x); }
};

struct State {
    double x = 0.0;
    double rho = 1.0;
    double e = 0.0;
};

enum class FlowRegime { Supersonic, Sonic, Subsonic };

inline FlowRegime regime_of(double rho, double tol = 0.0) {
    if (rho < 1.0 - tol) return FlowRegime::Supersonic;
    if (rho > 1.0 + tol) return FlowRegime::Subsonic;
    return FlowRegime::Sonic;
}

inline const char* to_string(FlowRegime r) {
    switch (r) {
    case FlowRegime::Supersonic: return "supersonic";
    case FlowRegime::Sonic: return "sonic";
    case FlowRegime::Subsonic: return "subsonic";
    }
    return "sonic";
}

struct TransformedState {
    double n = 0.0;
    double f = 0.0;
};

struct ShockData {
    double x0 = 0.0;
    double rhoL = 0.0;
    double rhoR = 0.0;
    double eJump = 0.0;
};

struct Derivative {
    double dRho = 0.0;
    double dE = 0.0;
};

inline constexpr double kSonicGuard = 1e-3;

// rho^(gamma-1) - rho^-2 written in n = rho - 1 without cancellation near n = 0.
inline double pressure_coefficient_n(double n, double gamma) {
    double l = std::log1p(n);
    return std::expm1((gamma - 1.0) * l) - std::expm1(-2.0 * l);
}

inline double pressure_coefficient(double rho, double gamma) {
    return pressure_coefficient_n(rho - 1.0, gamma);
}

// (rho - 1) / coefficient, regular across the sonic line.
inline double sonic_ratio_n(double n, double gamma) {
    if (n == 0.0) return 1.0 / (gamma + 1.0);
    if (gamma == 1.0) return (1.0 + n) * (1.0 + n) / (2.0 + n);
    return n / pressure_coefficient_n(n, gamma);
}

inline Derivative rhs_primal(const State& s, const ModelParams& p, double guard = kSonicGuard) {
    double c = pressure_coefficient(s.rho, p.gamma);
    if (std::abs(c) < guard)
        throw Error(ErrorCode::SonicSingularity, "primal chart evaluated inside the sonic guard");
    return {(s.rho * s.e - 1.0 / p.tau) / c, s.rho - p.b(s.x)};
}

inline TransformedState to_transformed(const State& s, const ModelParams& p) {
    double n = s.rho - 1.0;
    return {n, s.e - 1.0 / (p.tau * (1.0 + n))};
}

inline State from_transformed(const TransformedState& t, double x, const ModelParams& p) {
    return {x, 1.0 + t.n, t.f + 1.0 / (p.tau * (1.0 + t.n))};
}

struct TransformedDerivative {
    double dN = 0.0;
    double dF = 0.0;
};

inline TransformedDerivative rhs_transformed(const TransformedState& t, double x, const ModelParams& p,
                                             double guard = kSonicGuard) {
    if (!p.isothermal())
        throw Error(ErrorCode::InvalidParameter, "the (n,F) chart is defined for isothermal flow only");
    if (!(t.n > -1.0)) throw Error(ErrorCode::InvalidParameter, "n must exceed -1");
    if (std::abs(t.n) < guard)
        throw Error(ErrorCode::SonicSingularity, "(n,F) chart evaluated inside the sonic guard");
    double n = t.n;
    double q = (2.0 + n) * n;
    return {(1.0 + n) * (1.0 + n) * (1.0 + n) * t.f / q,
            n + 1.0 - p.b(x) + (1.0 + n) * t.f / (p.tau * q)};
}

struct DirectionField {
    double dEdRho = 0.0;
    double dXdRho = 0.0;
};

inline DirectionField rhs_rho_independent(double rho, double e, const ModelParams& p,
                                          std::optional<double> x = std::nullopt, double guard = kSonicGuard) {
    if (!x && !p.doping.is_constant())
        throw Error(ErrorCode::NotConstantDoping, "position is required for a variable doping profile");
    double g = rho * e - 1.0 / p.tau;
    if (std::abs(g) < guard)
        throw Error(ErrorCode::CriticalLocus, "rho-chart evaluated on the critical locus");
    double c = pressure_coefficient(rho, p.gamma);
    double b = p.b(x.value_or(0.0));
    return {(rho - b) * c / g, c / g};
}

enum class CriticalKind { Saddle, StableFocus, StableNode, Other };

inline const char* to_string(CriticalKind k) {
    switch (k) {
    case CriticalKind::Saddle: return "saddle";
    case CriticalKind::StableFocus: return "stable focus";
    case CriticalKind::StableNode: return "stable node";
    case CriticalKind::Other: return "other";
    }
    return "other";
}

struct CriticalPointInfo {
    double rho = 0.0;
    double e = 0.0;
    std::complex<double> lambda1;
    std::complex<double> lambda2;
    CriticalKind kind = CriticalKind::Other;
};

// Linearisation of the primal field at A = (b, 1/(tau b)):
// lambda^2 - lambda/(tau b c(b)) - b/c(b) = 0.
inline CriticalPointInfo critical_point_analysis(const ModelParams& p) {
    if (!p.doping.is_constant())
        throw Error(ErrorCode::NotConstantDoping, "critical point analysis needs constant doping");
    double b = p.doping.constant_value();
    double c = pressure_coefficient(b, p.gamma);
    if (b == 1.0 || c == 0.0) throw Error(ErrorCode::SonicDoping, "critical point lies on the sonic line");
    double trace = 1.0 / (p.tau * b * c);
    double det = -b / c;
    std::complex<double> disc = std::sqrt(std::complex<double>(trace * trace - 4.0 * det, 0.0));
    CriticalPointInfo info;
    info.rho = b;
    info.e = 1.0 / (p.tau * b);
    info.lambda1 = 0.5 * (trace + disc);
    info.lambda2 = 0.5 * (trace - disc);
    double disc2 = trace * trace - 4.0 * det;
    if (det < 0.0)
        info.kind = CriticalKind::Saddle;
    else if (disc2 < 0.0 && trace < 0.0)
        info.kind = CriticalKind::StableFocus;
    else if (disc2 >= 0.0 && trace < 0.0)
        info.kind = CriticalKind::StableNode;
    else
        info.kind = CriticalKind::Other;
    return info;
}

inline double constant_doping(const ModelParams& p) { return p.doping.constant_value(); }

inline double xi_curve(double n, const ModelParams& p) {
    if (!(n > -1.0)) throw Error(ErrorCode::InvalidParameter, "n must exceed -1");
    double b = constant_doping(p);
    return -p.tau * (n + 1.0 - b) * (2.0 + n) * n / (1.0 + n);
}

struct JumpState {
    double rhoR = 0.0;
    double eR = 0.0;
};

inline JumpState rh_jump(double rhoL, double eL) {
    if (!(rhoL > 0.0) || !(rhoL < 1.0))
        throw Error(ErrorCode::EntropyViolation, "left shock state must satisfy 0 < rhoL < 1");
    return {1.0 / rhoL, eL};
}

// Root theta1 of theta^2 - theta/tau + 2(b-1) = 0: the slope F'(0) along the
// node direction of the (n,F) system.
inline double c1_trajectory_slope(double b, double tau) {
    if (!(b > 1.0)) throw Error(ErrorCode::InvalidParameter, "transition slope needs b > 1");
    double s = 1.0 / (tau * tau) - 8.0 * (b - 1.0);
    if (s < 0.0)
        throw Error(ErrorCode::ComplexSlope, "1/tau^2 < 8(b-1): tau is outside the smooth transition regime");
    // 1/tau - sqrt(.) rewritten to avoid cancellation
    return 0.5 * (8.0 * (b - 1.0)) / (1.0 / tau + std::sqrt(s));
}

inline double c1_transition_slope(double b, double tau) { return 0.5 * c1_trajectory_slope(b, tau); }

inline double tau0_bound(double b) {
    if (!(b > 1.0)) throw Error(ErrorCode::InvalidParameter, "tau0 bound needs b > 1");
    double t1 = 1.0 / (3.0 * std::sqrt(b * b * b + b));
    double t2 = 1.0 / (4.0 * std::sqrt(b - 1.0));
    double t3 = 1.0 / (3.0 * std::sqrt(b));
    return std::min({t1, t2, t3});
}

// Supersonic-minimum bracket for the undamped problem on an interval of length L.
struct MinDensityBounds {
    double beta = 0.0;
    double gamma = 0.0;
};

inline MinDensityBounds undamped_min_density_bounds(double L, double bLower) {
    double d = 2.0 + std::sqrt(2.0 * std::sqrt(2.0) * bLower) * L;
    return {1.0 / d, 1.0 - L * L / (16.0 * d * d * d)};
}

// Energy potential of the undamped constant-doping system: E^2/2 - V(rho) is conserved.
inline double undamped_potential(double rho, double b) {
    return rho - b * std::log(rho) + 1.0 / rho - b / (2.0 * rho * rho);
}

} // namespace sonicflow
