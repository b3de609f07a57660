#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "model.hpp"

namespace sonicflow {

enum class SolutionKind { Sonic, Subsonic, Supersonic, TransonicShock, C1Transonic };

inline const char* to_string(SolutionKind k) {
    switch (k) {
    case SolutionKind::Sonic: return "sonic";
    case SolutionKind::Subsonic: return "subsonic";
    case SolutionKind::Supersonic: return "supersonic";
    case SolutionKind::TransonicShock: return "transonic-shock";
    case SolutionKind::C1Transonic: return "c1-transonic";
    }
    return "sonic";
}

enum class Verdict { Exists, NotExists, Undetermined };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Exists: return "exists";
    case Verdict::NotExists: return "not-exists";
    case Verdict::Undetermined: return "undetermined";
    }
    return "undetermined";
}

struct KindVerdict {
    Verdict verdict = Verdict::Undetermined;
    std::string condition;
    std::string theoremRef;
    // set where a construction attempt is worthwhile although no theorem applies
    bool attemptAdvised = false;
};

struct RegimeReport {
    double tau = 0.0;
    double gamma = 1.0;
    double bLower = 0.0;
    double bUpper = 0.0;
    bool constantDoping = false;
    KindVerdict sonic, subsonic, supersonic, shock, c1;

    const KindVerdict& of(SolutionKind k) const {
        switch (k) {
        case SolutionKind::Sonic: return sonic;
        case SolutionKind::Subsonic: return subsonic;
        case SolutionKind::Supersonic: return supersonic;
        case SolutionKind::TransonicShock: return shock;
        case SolutionKind::C1Transonic: return c1;
        }
        return sonic;
    }
};

inline constexpr double kLargeTauAdvisory = 10.0;
inline constexpr double kNearSonicAdvisory = 0.1;

namespace detail {
inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}
} // namespace detail

// Sufficient conditions only; gaps stay Undetermined.
inline RegimeReport classify_regime(const ModelParams& p) {
    using detail::fmt;
    RegimeReport r;
    r.tau = p.tau;
    r.gamma = p.gamma;
    r.bLower = p.doping.lower();
    r.bUpper = p.doping.upper();
    r.constantDoping = p.doping.is_constant();
    const double bl = r.bLower, bu = r.bUpper, tau = p.tau;

    auto set = [](KindVerdict& k, Verdict v, std::string cond, std::string ref) {
        k.verdict = v;
        k.condition = std::move(cond);
        k.theoremRef = std::move(ref);
    };

    if (p.doping.is_sonic())
        set(r.sonic, Verdict::Exists, "b = 1 identically, (rho, E) = (1, 1/tau)", "Remark after Theorem 1.2");
    else
        set(r.sonic, Verdict::NotExists, "E_x = 1 - b(x) does not vanish identically", "");

    if (bl > 1.0) {
        set(r.subsonic, Verdict::Exists, "bLower = " + fmt(bl) + " > 1 (unique)", "Theorem 1.1(1)");
        set(r.supersonic, Verdict::Exists, "bLower = " + fmt(bl) + " > 1", "Theorem 1.1(2)");
        // tau0(b) is derived for isothermal flow only
        bool smooth = r.constantDoping && p.isothermal() && tau < tau0_bound(bl);
        if (smooth) {
            std::string cond = "constant b = " + fmt(bl) + ", tau = " + fmt(tau) + " < tau0(b) = " + fmt(tau0_bound(bl));
            set(r.c1, Verdict::Exists, cond, "Theorem 2.22");
            set(r.shock, Verdict::NotExists, cond, "Theorem 2.23");
        } else {
            set(r.shock, Verdict::Undetermined,
                "shock family needs tau large and bUpper - bLower small; no explicit threshold", "Theorem 1.1(3)");
            r.shock.attemptAdvised = tau >= kLargeTauAdvisory;
            if (r.constantDoping)
                set(r.c1, Verdict::Undetermined, "tau = " + fmt(tau) + " >= tau0(b) = " + fmt(tau0_bound(bl)),
                    "Theorem 1.1(4)");
            else
                set(r.c1, Verdict::Undetermined, "smooth transition results cover constant doping only",
                    "Theorem 1.1(4)");
        }
        return r;
    }

    if (bu <= 1.0) {
        set(r.subsonic, Verdict::NotExists, "bUpper = " + fmt(bu) + " <= 1",
            p.isothermal() ? "Theorem 3.1" : "Isentropic classification theorem, part 2(b)");
        double small = bu * (1.0 + std::sqrt(2.0 * bu));
        if (!p.isothermal()) {
            // the isentropic statement gives no explicit smallness thresholds
            set(r.supersonic, Verdict::Undetermined, "isentropic flow: smallness thresholds are not explicit", "");
            set(r.shock, Verdict::Undetermined, "isentropic flow: smallness thresholds are not explicit", "");
            set(r.c1, Verdict::Undetermined, "no smooth transition result for bUpper <= 1", "");
        } else if (small < 1.0) {
            std::string cond = "bUpper(1 + sqrt(2 bUpper)) = " + fmt(small) + " < 1";
            set(r.supersonic, Verdict::NotExists, cond, "Theorem 3.2");
            set(r.shock, Verdict::NotExists, cond, "Theorem 3.3");
            set(r.c1, Verdict::NotExists, cond, "Theorem 3.3");
        } else if (tau < 1.0 / 3.0) {
            std::string cond = "tau = " + fmt(tau) + " < 1/3";
            set(r.supersonic, Verdict::NotExists, cond, "Theorem 3.2");
            set(r.shock, Verdict::NotExists, cond, "Theorem 3.3");
            set(r.c1, Verdict::NotExists, cond, "Theorem 3.3");
        } else {
            bool near = 1.0 - bl < kNearSonicAdvisory && tau >= kLargeTauAdvisory;
            set(r.supersonic, Verdict::Undetermined, "doping close to 1 and tau large; no explicit threshold",
                "Theorem 3.4");
            set(r.shock, Verdict::Undetermined, "doping close to 1 and tau large; no explicit threshold",
                "Theorem 3.5");
            r.supersonic.attemptAdvised = near;
            r.shock.attemptAdvised = near;
            set(r.c1, Verdict::Undetermined, "no smooth transition result for bUpper <= 1", "");
        }
        return r;
    }

    // bLower <= 1 < bUpper
    set(r.subsonic, Verdict::Undetermined, "bLower <= 1 < bUpper", "");
    set(r.supersonic, Verdict::Undetermined, "bLower <= 1 < bUpper", "");
    set(r.shock, Verdict::Undetermined, "bLower <= 1 < bUpper", "");
    set(r.c1, Verdict::Undetermined, "bLower <= 1 < bUpper", "");
    return r;
}

} // namespace sonicflow
