#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace sonicflow::dopri {

// Dormand-Prince 5(4) with the Hairer/Wanner fourth-order continuous extension.

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
struct Dense {
    double t0 = 0.0;
    double t1 = 0.0;
    std::array<Vec<N>, 5> r{};

    Vec<N> operator()(double theta) const {
        Vec<N> y;
        double u = 1.0 - theta;
        for (std::size_t i = 0; i < N; ++i)
            y[i] = r[0][i] + theta * (r[1][i] + u * (r[2][i] + theta * (r[3][i] + u * r[4][i])));
        return y;
    }

    Vec<N> at(double t) const { return (*this)(t1 == t0 ? 1.0 : (t - t0) / (t1 - t0)); }

    static Dense linear(double t0, double t1, const Vec<N>& y0, const Vec<N>& y1) {
        Dense d;
        d.t0 = t0;
        d.t1 = t1;
        for (std::size_t i = 0; i < N; ++i) {
            d.r[0][i] = y0[i];
            d.r[1][i] = y1[i] - y0[i];
        }
        return d;
    }
};

template <std::size_t N>
struct StepResult {
    bool valid = false;   // every stage evaluation succeeded
    double err = INFINITY; // scaled error norm, accept when <= 1
    Vec<N> y1{};
    Vec<N> k7{};
    Dense<N> dense;
};

// f(t, y, dy) -> bool; false marks the stage as outside the chart.
template <std::size_t N, class F>
StepResult<N> step(F&& f, double t, const Vec<N>& y, const Vec<N>& k1, double h, double rtol, double atol) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                     a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                     d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                     d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

    StepResult<N> out;
    Vec<N> k2, k3, k4, k5, k6, k7, tmp;
    auto stage = [&](double tt, Vec<N>& k) {
        if (!f(tt, tmp, k)) return false;
        for (double v : k)
            if (!std::isfinite(v)) return false;
        return true;
    };

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    if (!stage(t + c2 * h, k2)) return out;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    if (!stage(t + c3 * h, k3)) return out;
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    if (!stage(t + c4 * h, k4)) return out;
    for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    if (!stage(t + c5 * h, k5)) return out;
    for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    if (!stage(t + h, k6)) return out;
    Vec<N> y1;
    for (std::size_t i = 0; i < N; ++i)
        y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    tmp = y1;
    if (!stage(t + h, k7)) return out;

    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y1[i]));
        sum += (ei / sc) * (ei / sc);
    }
    out.err = std::sqrt(sum / N);
    if (!std::isfinite(out.err)) return out;

    out.valid = true;
    out.y1 = y1;
    out.k7 = k7;
    out.dense.t0 = t;
    out.dense.t1 = t + h;
    for (std::size_t i = 0; i < N; ++i) {
        double dy = y1[i] - y[i];
        double bspl = h * k1[i] - dy;
        out.dense.r[0][i] = y[i];
        out.dense.r[1][i] = dy;
        out.dense.r[2][i] = bspl;
        out.dense.r[3][i] = dy - h * k7[i] - bspl;
        out.dense.r[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
    return out;
}

// Standard step-size update with safety factor 0.9 and growth limits [0.2, 5].
inline double next_step(double h, double err) {
    double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    return h * std::clamp(fac, 0.2, 5.0);
}

template <std::size_t N>
struct Run {
    std::vector<Dense<N>> pieces;
    bool ok = false;     // reached tEnd or the event
    bool event = false;  // the scalar event changed sign
    double tEnd = 0.0;
    Vec<N> yEnd{};
};

// Adaptive run from t0 toward t1 that stops early when ev(t, y) changes sign
// (located by bisection on the dense output) or any component exceeds limit.
template <std::size_t N, class F, class G>
Run<N> run(F&& f, double t0, double t1, const Vec<N>& y0, double rtol, double atol, double hmax, G&& ev,
           double limit = 1e8) {
    Run<N> out;
    double dir = t1 >= t0 ? 1.0 : -1.0;
    double t = t0;
    Vec<N> y = y0, k;
    if (!f(t, y, k)) return out;
    double h = dir * std::min(hmax, 1e-4 * std::abs(t1 - t0) + 1e-12);
    double g0 = ev(t, y);
    for (long it = 0; it < 2'000'000; ++it) {
        bool last = false;
        if (dir * (t + h - t1) >= 0.0) {
            h = t1 - t;
            last = true;
        }
        auto r = step<N>(f, t, y, k, h, rtol, atol);
        if (!r.valid || r.err > 1.0) {
            h = r.valid ? next_step(h, r.err) : 0.25 * h;
            if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t))) return out;
            continue;
        }
        double g1 = ev(t + h, r.y1);
        if (g0 != 0.0 && (g1 == 0.0 || (g1 > 0.0) != (g0 > 0.0))) {
            double a = 0.0, b = 1.0;
            for (int i = 0; i < 200 && b - a > 1e-16; ++i) {
                double m = 0.5 * (a + b);
                double gm = ev(r.dense.t0 + m * h, r.dense(m));
                if ((gm > 0.0) == (g0 > 0.0) && gm != 0.0)
                    a = m;
                else
                    b = m;
            }
            Dense<N> d = r.dense;
            out.pieces.push_back(d);
            out.tEnd = t + b * h;
            out.yEnd = d(b);
            out.ok = true;
            out.event = true;
            return out;
        }
        out.pieces.push_back(r.dense);
        t = last ? t1 : t + h;
        y = r.y1;
        k = r.k7;
        g0 = g1;
        for (double v : y)
            if (!(std::abs(v) < limit)) return out;
        if (last) {
            out.ok = true;
            out.tEnd = t;
            out.yEnd = y;
            return out;
        }
        h = std::min(std::abs(next_step(h, r.err)), hmax) * dir;
    }
    return out;
}

} // namespace sonicflow::dopri
