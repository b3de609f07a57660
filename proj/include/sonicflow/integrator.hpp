#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dopri.hpp"
#include "error.hpp"
#include "model.hpp"

namespace sonicflow {

struct IntegratorConfig {
    double relTol = 1e-9;
    double absTol = 1e-11;
    double maxStep = 1e-2;
    double sonicSwitchBand = 1e-2;
    double blowUpDensity = 1e4;
    double blowUpField = 1e4;
    double maxArcLength = 1e3;
    // |dx/dn| above which the band chart hands over to the x chart
    double foldRatio = 1e4;
    // distance from the sonic line where a node approach is closed by extrapolation
    double nodeStop = 1e-9;
    double minDensity = 1e-8;

    void validate() const {
        for (double v : {relTol, absTol, maxStep, sonicSwitchBand, blowUpDensity, blowUpField, maxArcLength, foldRatio,
                         nodeStop, minDensity})
            if (!(v > 0.0) || !std::isfinite(v))
                throw Error(ErrorCode::InvalidParameter, "integrator settings must be positive and finite");
        if (!(sonicSwitchBand > kSonicGuard))
            throw Error(ErrorCode::InvalidParameter, "sonicSwitchBand must exceed the sonic guard");
    }
};

enum class Direction { Forward, Backward };

enum class EventKind { SonicArrival, TargetDensity, CriticalPoint, BlowUp, DomainEnd, StepFailure };

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::SonicArrival: return "SonicArrival";
    case EventKind::TargetDensity: return "TargetDensity";
    case EventKind::CriticalPoint: return "CriticalPoint";
    case EventKind::BlowUp: return "BlowUp";
    case EventKind::DomainEnd: return "DomainEnd";
    case EventKind::StepFailure: return "StepFailure";
    }
    return "StepFailure";
}

struct EventSpec {
    EventKind kind = EventKind::SonicArrival;
    double value = 0.0;

    static EventSpec sonic() { return {EventKind::SonicArrival, 1.0}; }
    static EventSpec target(double rho) { return {EventKind::TargetDensity, rho}; }
    static EventSpec critical() { return {EventKind::CriticalPoint, 0.0}; }
    static EventSpec domain(double x) { return {EventKind::DomainEnd, x}; }
};

struct Event {
    EventKind kind = EventKind::StepFailure;
    double value = 0.0;
    State location;
    // sonic arrival through the node of the (n,F) system, i.e. with E = 1/tau
    bool smooth = false;
    std::string detail;
};

enum class Chart { Primal, Band };

// One accepted step. Primal pieces carry (rho, E) over x; band pieces carry
// (x, g = rho E - 1/tau) over n = rho - 1.
struct Piece {
    Chart chart = Chart::Primal;
    dopri::Dense<2> dense;
    double thetaEnd = 1.0;
};

struct TrajectorySegment {
    std::vector<State> states;
    Event terminator;
    std::vector<Event> crossings;
    std::vector<Piece> pieces;
    Direction direction = Direction::Forward;
    double invTau = 0.0;

    bool forward() const { return direction == Direction::Forward; }
    const State& front() const { return states.front(); }
    const State& back() const { return states.back(); }

    State eval(const Piece& pc, double theta) const {
        double t = pc.dense.t0 + theta * (pc.dense.t1 - pc.dense.t0);
        auto y = pc.dense(theta);
        if (pc.chart == Chart::Primal) return {t, y[0], y[1]};
        double rho = 1.0 + t;
        return {y[0], rho, (y[1] + invTau) / rho};
    }

    double piece_x(const Piece& pc, double theta) const {
        if (pc.chart == Chart::Primal) return pc.dense.t0 + theta * (pc.dense.t1 - pc.dense.t0);
        return pc.dense(theta)[0];
    }

    bool covers(double x) const {
        double a = states.front().x, b = states.back().x;
        return x >= std::min(a, b) && x <= std::max(a, b);
    }

    // Dense evaluation at position x inside the covered range.
    State at(double x) const {
        if (pieces.empty()) return states.front();
        double s = forward() ? 1.0 : -1.0;
        // first piece whose end lies at or beyond x along the marching direction
        std::size_t lo = 0, hi = pieces.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            const Piece& pc = pieces[mid];
            if (s * (piece_x(pc, pc.thetaEnd) - x) >= 0.0)
                hi = mid;
            else
                lo = mid + 1;
        }
        const Piece& pc = pieces[lo];
        double x0 = piece_x(pc, 0.0), x1 = piece_x(pc, pc.thetaEnd);
        if (s * (x - x0) <= 0.0) return eval(pc, 0.0);
        if (s * (x - x1) >= 0.0) return eval(pc, pc.thetaEnd);
        if (pc.chart == Chart::Primal) {
            double theta = (x - pc.dense.t0) / (pc.dense.t1 - pc.dense.t0);
            return eval(pc, theta);
        }
        double a = 0.0, b = pc.thetaEnd;
        for (int it = 0; it < 100 && b - a > 1e-17; ++it) {
            double m = 0.5 * (a + b);
            if (s * (piece_x(pc, m) - x) < 0.0)
                a = m;
            else
                b = m;
        }
        State st = eval(pc, 0.5 * (a + b));
        st.x = x;
        return st;
    }
};

namespace detail {

using V2 = dopri::Vec<2>;

class Runner {
public:
    Runner(const ModelParams& p, const IntegratorConfig& cfg, std::vector<EventSpec> stops,
           std::vector<EventSpec> watch)
        : p_(p), cfg_(cfg), itau_(1.0 / p.tau), stops_(std::move(stops)), watch_(std::move(watch)) {
        cfg_.validate();
        seg_.invTau = itau_;
    }

    TrajectorySegment from_state(const State& s0, Direction dir) {
        if (!(s0.rho > 0.0)) throw Error(ErrorCode::InvalidParameter, "density must be positive");
        if (s0.rho == 1.0)
            throw Error(ErrorCode::SonicSingularity, "start on the sonic line requires a sonic launch");
        dirX_ = dir == Direction::Forward ? 1.0 : -1.0;
        seg_.direction = dir;
        set_limit(s0.x);
        seg_.states.push_back(s0);
        double n = s0.rho - 1.0;
        double g = s0.rho * s0.e - itau_;
        if (std::abs(n) >= cfg_.sonicSwitchBand) {
            enter_primal(s0);
        } else {
            double c = pressure_coefficient_n(n, p_.gamma);
            if (g != 0.0 && std::abs(c / g) <= cfg_.foldRatio)
                enter_band(n, {s0.x, g}, (g / c) * dirX_ > 0.0 ? 1.0 : -1.0);
            else if (std::abs(c) > kSonicGuard)
                enter_primal(s0);
            else
                return fail("start is both near-sonic and near-critical");
        }
        return run();
    }

    TrajectorySegment from_sonic(double x0, FlowRegime branch, double e0) {
        double q = e0 - itau_;
        if (q == 0.0) throw Error(ErrorCode::DegenerateLaunch, "square-root launch needs E != 1/tau");
        dirX_ = q > 0.0 ? 1.0 : -1.0;
        seg_.direction = q > 0.0 ? Direction::Forward : Direction::Backward;
        set_limit(x0);
        seg_.states.push_back({x0, 1.0, e0});
        enter_band(0.0, {x0, q}, branch == FlowRegime::Supersonic ? -1.0 : 1.0);
        return run();
    }

private:
    void set_limit(double x0) {
        xLimit_ = x0 + dirX_ * cfg_.maxArcLength;
        for (const auto& e : stops_)
            if (e.kind == EventKind::DomainEnd && dirX_ * (e.value - x0) >= 0.0) xLimit_ = e.value;
    }

    bool f_primal(double x, const V2& y, V2& dy) const {
        double rho = y[0];
        if (!(rho > 0.0)) return false;
        double c = pressure_coefficient(rho, p_.gamma);
        if (!(std::abs(c) >= kSonicGuard)) return false;
        dy[0] = (rho * y[1] - itau_) / c;
        dy[1] = rho - p_.b(x);
        return true;
    }

    bool f_band(double n, const V2& y, V2& dy) const {
        double rho = 1.0 + n;
        if (!(rho > 0.0) || y[1] == 0.0) return false;
        double c = pressure_coefficient_n(n, p_.gamma);
        double r = c / y[1];
        if (!(std::abs(r) <= 10.0 * cfg_.foldRatio)) return false;
        double e = (y[1] + itau_) / rho;
        dy[0] = r;
        dy[1] = e + rho * (rho - p_.b(y[0])) * r;
        return true;
    }

    bool f(double t, const V2& y, V2& dy) const {
        return chart_ == Chart::Primal ? f_primal(t, y, dy) : f_band(t, y, dy);
    }

    State state_of(double t, const V2& y) const {
        if (chart_ == Chart::Primal) return {t, y[0], y[1]};
        return {y[0], 1.0 + t, (y[1] + itau_) / (1.0 + t)};
    }

    void enter_primal(const State& s) {
        chart_ = Chart::Primal;
        t_ = s.x;
        y_ = {s.rho, s.e};
        f(t_, y_, k_);
        double slope = std::abs(k_[0]) + std::abs(k_[1]);
        h_ = dirX_ * std::min(cfg_.maxStep, 1e-3 / std::max(1.0, slope));
    }

    void enter_band(double n, const V2& y, double sn) {
        chart_ = Chart::Band;
        sn_ = sn;
        t_ = n;
        y_ = y;
        f(t_, y_, k_);
        toward_ = sn_ * t_ < 0.0;
        nTarget_ = toward_ ? (t_ > 0.0 ? cfg_.nodeStop : -cfg_.nodeStop) : 0.0;
        finalLeg_ = toward_ && std::abs(t_) <= cfg_.nodeStop;
        if (finalLeg_) nTarget_ = 0.0;
        h_ = sn_ * std::min(band_max_step(), std::max(1e-12, 1e-3 * std::abs(t_) + 1e-8));
    }

    double band_max_step() const { return 0.25 * cfg_.sonicSwitchBand; }

    TrajectorySegment fail(const std::string& why) {
        Event ev;
        ev.kind = EventKind::StepFailure;
        ev.location = seg_.states.back();
        ev.detail = why;
        seg_.terminator = ev;
        return std::move(seg_);
    }

    TrajectorySegment finish(Event ev) {
        seg_.terminator = std::move(ev);
        if (seg_.states.back().x != seg_.terminator.location.x || seg_.states.size() == 1)
            seg_.states.push_back(seg_.terminator.location);
        else
            seg_.states.back() = seg_.terminator.location;
        return std::move(seg_);
    }

    // scalar event function at a state
    double event_value(const EventSpec& e, const State& s) const {
        switch (e.kind) {
        case EventKind::TargetDensity: return s.rho - e.value;
        case EventKind::CriticalPoint: return s.rho * s.e - itau_;
        case EventKind::DomainEnd: return dirX_ * (s.x - xLimit_);
        default: return 0.0;
        }
    }

    double locate(const Piece& pc, const EventSpec& e, double f0) const {
        double a = 0.0, b = 1.0;
        for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
            double m = 0.5 * (a + b);
            double fm = event_value(e, seg_.eval(pc, m));
            if (fm == 0.0) return m;
            if ((fm > 0.0) == (f0 > 0.0))
                a = m;
            else
                b = m;
        }
        return b;
    }

    TrajectorySegment run() {
        const double hMinRel = 1e-14;
        double arc = 0.0;
        // level-crossing events; stops first, then watched ones
        std::vector<EventSpec> scan;
        std::vector<bool> terminal;
        auto add = [&](const std::vector<EventSpec>& list, bool term) {
            for (const auto& e : list)
                if (e.kind == EventKind::TargetDensity || e.kind == EventKind::CriticalPoint) {
                    scan.push_back(e);
                    terminal.push_back(term);
                }
        };
        add(stops_, true);
        add(watch_, false);

        for (long iter = 0; iter < 5'000'000; ++iter) {
            // step limits
            double hmax = chart_ == Chart::Primal ? cfg_.maxStep : band_max_step();
            if (std::abs(h_) > hmax) h_ = std::copysign(hmax, h_);
            bool clipped = false;
            if (chart_ == Chart::Primal) {
                if (dirX_ * (t_ + h_ - xLimit_) >= 0.0) {
                    h_ = xLimit_ - t_;
                    clipped = true;
                }
            } else if (toward_) {
                if (sn_ * (t_ + h_ - nTarget_) >= 0.0) {
                    h_ = nTarget_ - t_;
                    clipped = true;
                }
            }
            if (h_ == 0.0 && chart_ == Chart::Primal) return finish_domain(state_of(t_, y_));

            auto res = dopri::step<2>([this](double t, const V2& y, V2& dy) { return f(t, y, dy); }, t_, y_, k_, h_,
                                      cfg_.relTol, cfg_.absTol);
            bool ok = res.valid && res.err <= 1.0;
            if (ok && chart_ == Chart::Primal) {
                // the x chart may not jump over the sonic line
                if ((res.y1[0] - 1.0) * (y_[0] - 1.0) <= 0.0) ok = false;
            }
            if (!ok) {
                double hn = res.valid ? dopri::next_step(h_, res.err) : 0.25 * h_;
                if (std::abs(hn) < hMinRel * std::max(1.0, std::abs(t_))) {
                    if (chart_ == Chart::Band) return fail("step size underflow in the band chart");
                    return fail("step size underflow");
                }
                h_ = hn;
                continue;
            }

            Piece pc{chart_, res.dense, 1.0};
            State s0 = state_of(t_, y_);
            State s1 = state_of(t_ + h_, res.y1);

            // event scan on the accepted step
            double firstTheta = 2.0;
            std::size_t firstIdx = scan.size();
            std::vector<std::pair<double, std::size_t>> hits;
            for (std::size_t i = 0; i < scan.size(); ++i) {
                if (scan[i].kind == EventKind::CriticalPoint && chart_ == Chart::Band) continue;
                double f0 = event_value(scan[i], s0), f1 = event_value(scan[i], s1);
                // a step that starts on the level set does not cross it
                double zero = scan[i].kind == EventKind::CriticalPoint ? 1e-14 * itau_ : 1e-15;
                if (std::abs(f0) <= zero) continue;
                if (f1 == 0.0 || (f0 > 0.0) != (f1 > 0.0)) {
                    double th = f1 == 0.0 ? 1.0 : locate(pc, scan[i], f0);
                    hits.push_back({th, i});
                    if (terminal[i] && th < firstTheta) {
                        firstTheta = th;
                        firstIdx = i;
                    }
                }
            }
            bool domainHit = false;
            if (chart_ == Chart::Band) {
                EventSpec dom = EventSpec::domain(xLimit_);
                double f0 = event_value(dom, s0), f1 = event_value(dom, s1);
                if (f0 < 0.0 && f1 >= 0.0) {
                    double th = f1 == 0.0 ? 1.0 : locate(pc, dom, f0);
                    if (th < firstTheta) {
                        firstTheta = th;
                        firstIdx = scan.size();
                        domainHit = true;
                    }
                }
            }
            std::sort(hits.begin(), hits.end());
            for (const auto& [th, i] : hits) {
                if (th > firstTheta || (th == firstTheta && i == firstIdx)) continue;
                Event ev;
                ev.kind = scan[i].kind;
                ev.value = scan[i].value;
                ev.location = seg_.eval(pc, th);
                seg_.crossings.push_back(ev);
            }
            if (firstTheta <= 1.0) {
                pc.thetaEnd = firstTheta;
                seg_.pieces.push_back(pc);
                Event ev;
                if (domainHit) {
                    ev.kind = EventKind::DomainEnd;
                    ev.value = xLimit_;
                    ev.location = seg_.eval(pc, firstTheta);
                    ev.location.x = xLimit_;
                } else {
                    ev.kind = scan[firstIdx].kind;
                    ev.value = scan[firstIdx].value;
                    ev.location = seg_.eval(pc, firstTheta);
                    if (ev.kind == EventKind::TargetDensity) ev.location.rho = ev.value;
                }
                return finish(ev);
            }

            seg_.pieces.push_back(pc);
            if (dirX_ * (s1.x - seg_.states.back().x) > 0.0) seg_.states.push_back(s1);
            arc += std::hypot(s1.x - s0.x, s1.rho - s0.rho, s1.e - s0.e);
            double hOld = h_;
            t_ += h_;
            y_ = res.y1;
            k_ = res.k7;
            h_ = dopri::next_step(hOld, res.err);

            if (!(s1.rho < cfg_.blowUpDensity) || !(std::abs(s1.e) < cfg_.blowUpField) ||
                !(s1.rho > cfg_.minDensity)) {
                Event ev;
                ev.kind = EventKind::BlowUp;
                ev.location = s1;
                return finish(ev);
            }
            if (arc > cfg_.maxArcLength) return fail("arc length budget exhausted");

            if (chart_ == Chart::Primal) {
                if (clipped) return finish_domain(s1);
                double n = s1.rho - 1.0;
                if (std::abs(n) < cfg_.sonicSwitchBand) {
                    double g = s1.rho * s1.e - itau_;
                    double c = pressure_coefficient_n(n, p_.gamma);
                    if (g != 0.0 && std::abs(c / g) <= 0.5 * cfg_.foldRatio) {
                        double sn = (g / c) * dirX_ > 0.0 ? 1.0 : -1.0;
                        double hx = hOld;
                        enter_band(n, {s1.x, g}, sn);
                        // carry the step size over through dn = (dn/dx) dx
                        h_ = sn_ * std::clamp(std::abs(hx * g / c), 1e-12, band_max_step());
                    }
                }
                continue;
            }

            // band chart bookkeeping
            double n = t_;
            double g = y_[1];
            double c = pressure_coefficient_n(n, p_.gamma);
            if (toward_ && clipped) {
                if (!finalLeg_) {
                    if (std::abs(g) <= 1e3 * std::abs(n)) return node_arrival();
                    finalLeg_ = true;
                    nTarget_ = 0.0;
                    continue;
                }
                Event ev;
                ev.kind = EventKind::SonicArrival;
                ev.value = 1.0;
                ev.location = {y_[0], 1.0, y_[1] + itau_};
                return finish(ev);
            }
            if (std::abs(n) >= cfg_.sonicSwitchBand && !toward_) {
                double hn = h_;
                enter_primal(s1);
                h_ = dirX_ * std::clamp(std::abs(hn * c / g), 1e-12, cfg_.maxStep);
                continue;
            }
            if (std::abs(c / g) > cfg_.foldRatio) {
                if (std::abs(c) > kSonicGuard) {
                    enter_primal(s1);
                        continue;
                }
                return fail("trajectory is both near-sonic and near-critical");
            }
        }
        return fail("iteration budget exhausted");
    }

    TrajectorySegment finish_domain(const State& s) {
        Event ev;
        ev.kind = EventKind::DomainEnd;
        ev.value = xLimit_;
        ev.location = s;
        ev.location.x = xLimit_;
        return finish(ev);
    }

    // Close a node approach (g ~ theta n) by a linear piece to n = 0.
    TrajectorySegment node_arrival() {
        V2 dy{};
        f(t_, y_, dy);
        V2 y1 = {y_[0] - dy[0] * t_, y_[1] - dy[1] * t_};
        Piece pc{Chart::Band, dopri::Dense<2>::linear(t_, 0.0, y_, y1), 1.0};
        seg_.pieces.push_back(pc);
        Event ev;
        ev.kind = EventKind::SonicArrival;
        ev.value = 1.0;
        ev.smooth = true;
        ev.location = {y1[0], 1.0, y1[1] + itau_};
        ev.detail = "node arrival";
        return finish(ev);
    }

    const ModelParams& p_;
    IntegratorConfig cfg_;
    double itau_;
    std::vector<EventSpec> stops_;
    std::vector<EventSpec> watch_;
    TrajectorySegment seg_;

    Chart chart_ = Chart::Primal;
    double dirX_ = 1.0;
    double sn_ = 1.0;
    double xLimit_ = 0.0;
    double t_ = 0.0;
    V2 y_{};
    V2 k_{};
    double h_ = 0.0;
    bool toward_ = false;
    bool finalLeg_ = false;
    double nTarget_ = 0.0;
};

} // namespace detail

// Integrate from an off-sonic state until the first stop event. Sonic arrival,
// blow-up and step failure always terminate. Crossings of watched events are
// recorded without stopping.
inline TrajectorySegment integrate(const State& start, Direction dir, const std::vector<EventSpec>& stops,
                                   const ModelParams& p, const IntegratorConfig& cfg = {},
                                   const std::vector<EventSpec>& watch = {}) {
    detail::Runner r(p, cfg, stops, watch);
    return r.from_state(start, dir);
}

// Integrate away from the sonic point (x0, rho = 1, E = e0) on the requested
// branch. The marching direction in x is fixed by the sign of e0 - 1/tau.
inline TrajectorySegment integrate_from_sonic(double x0, FlowRegime branch, double e0,
                                              const std::vector<EventSpec>& stops, const ModelParams& p,
                                              const IntegratorConfig& cfg = {},
                                              const std::vector<EventSpec>& watch = {}) {
    if (branch == FlowRegime::Sonic) throw Error(ErrorCode::InvalidParameter, "launch branch must be sub- or supersonic");
    detail::Runner r(p, cfg, stops, watch);
    return r.from_sonic(x0, branch, e0);
}

inline bool in_smooth_transition_regime(const ModelParams& p) {
    if (!p.isothermal() || !p.doping.is_constant()) return false;
    double b = p.doping.constant_value();
    return b > 1.0 && p.tau < tau0_bound(b);
}

inline State launch_from_sonic(double x0, FlowRegime branch, double e0, const ModelParams& p,
                               const IntegratorConfig& cfg = {}) {
    if (branch == FlowRegime::Sonic) throw Error(ErrorCode::InvalidParameter, "launch branch must be sub- or supersonic");
    double half = 0.5 * cfg.sonicSwitchBand;
    double q = e0 - 1.0 / p.tau;
    if (q == 0.0) {
        if (!in_smooth_transition_regime(p))
            throw Error(ErrorCode::DegenerateLaunch,
                        "E = 1/tau at the sonic point is only admissible for constant b > 1 and tau < tau0(b)");
        double b = p.doping.constant_value();
        double theta = c1_trajectory_slope(b, p.tau);
        double n = branch == FlowRegime::Subsonic ? half : -half;
        double x = x0 + n / (0.5 * theta);
        return from_transformed({n, theta * n}, x, p);
    }
    double target = branch == FlowRegime::Subsonic ? 1.0 + half : 1.0 - half;
    auto seg = integrate_from_sonic(x0, branch, e0, {EventSpec::target(target)}, p, cfg);
    if (seg.terminator.kind != EventKind::TargetDensity)
        throw Error(ErrorCode::StepFailure, "sonic launch did not leave the switching band");
    return seg.terminator.location;
}

inline std::vector<TransformedState> to_transformed(const TrajectorySegment& seg, const ModelParams& p) {
    std::vector<TransformedState> out;
    out.reserve(seg.states.size());
    for (const auto& s : seg.states) out.push_back(to_transformed(s, p));
    return out;
}

} // namespace sonicflow
