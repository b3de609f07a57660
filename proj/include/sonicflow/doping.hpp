#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"

namespace sonicflow {

struct ConstantDoping {
    double b = 1.0;
};

// b(x) = b0 + amplitude * sin(2 pi frequency x)
struct SineDoping {
    double b0 = 1.0;
    double amplitude = 0.0;
    double frequency = 1.0;
};

// values[k] holds on [breakpoints[k-1], breakpoints[k]); right-continuous.
struct PiecewiseDoping {
    std::vector<double> breakpoints;
    std::vector<double> values;
};

// Linear interpolation between knots, clamped outside the knot range.
struct TabulatedDoping {
    std::vector<double> knots;
    std::vector<double> values;
};

class DopingProfile {
public:
    using Variant = std::variant<ConstantDoping, SineDoping, PiecewiseDoping, TabulatedDoping>;

    DopingProfile() : DopingProfile(ConstantDoping{1.0}) {}
    DopingProfile(double b) : DopingProfile(ConstantDoping{b}) {}
    DopingProfile(Variant v) : v_(std::move(v)) {
        validate();
        compute_bounds();
    }

    static DopingProfile constant(double b) { return DopingProfile(ConstantDoping{b}); }
    static DopingProfile sine(double b0, double amplitude, double frequency) {
        return DopingProfile(SineDoping{b0, amplitude, frequency});
    }
    static DopingProfile piecewise(std::vector<double> breaks, std::vector<double> values) {
        return DopingProfile(PiecewiseDoping{std::move(breaks), std::move(values)});
    }
    static DopingProfile tabulated(std::vector<double> knots, std::vector<double> values) {
        return DopingProfile(TabulatedDoping{std::move(knots), std::move(values)});
    }

    // Points outside [0,1] are clamped; the autonomous shooting passes use
    // shifted coordinates only for constant profiles.
    double operator()(double x) const {
        x = std::clamp(x, 0.0, 1.0);
        return std::visit([x](const auto& d) { return eval(d, x); }, v_);
    }

    double lower() const { return lower_; }
    double upper() const { return upper_; }
    bool is_constant() const { return lower_ == upper_; }
    double constant_value() const {
        if (!is_constant())
            throw Error(ErrorCode::NotConstantDoping, "doping profile is not constant");
        return lower_;
    }
    bool is_sonic(double tol = 1e-12) const {
        return std::abs(lower_ - 1.0) <= tol && std::abs(upper_ - 1.0) <= tol;
    }

    const Variant& variant() const { return v_; }

    std::string kind_name() const {
        switch (v_.index()) {
        case 0: return "constant";
        case 1: return "sine";
        case 2: return "piecewise";
        default: return "tabulated";
        }
    }

private:
    static double eval(const ConstantDoping& d, double) { return d.b; }
    static double eval(const SineDoping& d, double x) {
        return d.b0 + d.amplitude * std::sin(2.0 * std::numbers::pi * d.frequency * x);
    }
    static double eval(const PiecewiseDoping& d, double x) {
        auto it = std::upper_bound(d.breakpoints.begin(), d.breakpoints.end(), x);
        return d.values[static_cast<std::size_t>(it - d.breakpoints.begin())];
    }
    static double eval(const TabulatedDoping& d, double x) {
        const auto& k = d.knots;
        if (x <= k.front()) return d.values.front();
        if (x >= k.back()) return d.values.back();
        auto it = std::upper_bound(k.begin(), k.end(), x);
        std::size_t i = static_cast<std::size_t>(it - k.begin()) - 1;
        double t = (x - k[i]) / (k[i + 1] - k[i]);
        return d.values[i] + t * (d.values[i + 1] - d.values[i]);
    }

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidParameter, m); };
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, ConstantDoping>) {
                    if (!(d.b > 0.0) || !std::isfinite(d.b)) bad("constant doping must be positive");
                } else if constexpr (std::is_same_v<T, SineDoping>) {
                    if (!std::isfinite(d.b0) || !std::isfinite(d.amplitude) || !std::isfinite(d.frequency))
                        bad("sine doping parameters must be finite");
                    if (d.frequency < 0.0) bad("sine doping frequency must be non-negative");
                } else if constexpr (std::is_same_v<T, PiecewiseDoping>) {
                    if (d.values.size() != d.breakpoints.size() + 1)
                        bad("piecewise doping needs one more value than breakpoints");
                    if (!std::is_sorted(d.breakpoints.begin(), d.breakpoints.end()) ||
                        std::adjacent_find(d.breakpoints.begin(), d.breakpoints.end()) != d.breakpoints.end())
                        bad("piecewise breakpoints must be strictly increasing");
                } else {
                    if (d.knots.size() < 2 || d.knots.size() != d.values.size())
                        bad("tabulated doping needs at least two knots and matching values");
                    for (std::size_t i = 1; i < d.knots.size(); ++i)
                        if (!(d.knots[i] > d.knots[i - 1])) bad("tabulated knots must be strictly increasing");
                }
            },
            v_);
    }

    void compute_bounds() {
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, ConstantDoping>) {
                    lower_ = upper_ = d.b;
                } else if constexpr (std::is_same_v<T, SineDoping>) {
                    // extrema of sin over [0, 2 pi f]
                    const double pi = std::numbers::pi;
                    double span = 2.0 * pi * d.frequency;
                    double smax = span >= 0.5 * pi ? 1.0 : std::sin(span);
                    double smin = span >= 1.5 * pi ? -1.0 : std::min(0.0, std::sin(span));
                    double a = d.b0 + d.amplitude * smax;
                    double c = d.b0 + d.amplitude * smin;
                    lower_ = std::min(a, c);
                    upper_ = std::max(a, c);
                } else if constexpr (std::is_same_v<T, PiecewiseDoping>) {
                    // only the pieces that intersect [0,1] count
                    lower_ = INFINITY;
                    upper_ = -INFINITY;
                    for (std::size_t k = 0; k < d.values.size(); ++k) {
                        double a = k == 0 ? -INFINITY : d.breakpoints[k - 1];
                        double c = k == d.breakpoints.size() ? INFINITY : d.breakpoints[k];
                        if (c <= 0.0 || a > 1.0) continue;
                        lower_ = std::min(lower_, d.values[k]);
                        upper_ = std::max(upper_, d.values[k]);
                    }
                } else {
                    lower_ = INFINITY;
                    upper_ = -INFINITY;
                    for (double x : sample_points(d)) {
                        double v = eval(d, x);
                        lower_ = std::min(lower_, v);
                        upper_ = std::max(upper_, v);
                    }
                }
            },
            v_);
        if (!(lower_ > 0.0) || !std::isfinite(upper_))
            throw Error(ErrorCode::InvalidParameter, "doping profile must be finite and strictly positive on [0,1]");
    }

    static std::vector<double> sample_points(const TabulatedDoping& d) {
        std::vector<double> pts{0.0, 1.0};
        for (double k : d.knots)
            if (k > 0.0 && k < 1.0) pts.push_back(k);
        return pts;
    }

    Variant v_;
    double lower_ = 1.0;
    double upper_ = 1.0;
};

} // namespace sonicflow
