#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"

namespace sonicflow {

struct GridConfig {
    int coreCells = 4096;   // cells per unit length in the uniform core
    double ratio = 0.9;     // geometric shrink factor toward each refined end
    double minSpacing = 1e-10;
};

// Grid on [a, c]: uniform core, geometric refinement toward the ends that are
// flagged. Both end points are included exactly.
inline std::vector<double> graded_grid(double a, double c, const GridConfig& g = {}, bool refineLeft = true,
                                       bool refineRight = true) {
    if (!(c > a)) throw Error(ErrorCode::InvalidParameter, "grid interval must have positive length");
    if (!(g.ratio > 0.0 && g.ratio < 1.0) || g.coreCells < 8 || !(g.minSpacing > 0.0))
        throw Error(ErrorCode::InvalidParameter, "invalid grid settings");
    double len = c - a;
    int cells = std::max(64, static_cast<int>(std::ceil(g.coreCells * len)));
    double h0 = len / cells;

    // geometric cell sizes, smallest first
    std::vector<double> geo;
    for (double h = h0 * g.ratio; h >= g.minSpacing; h *= g.ratio) geo.push_back(h);
    std::reverse(geo.begin(), geo.end());
    double geoLen = 0.0;
    for (double h : geo) geoLen += h;

    int ends = (refineLeft ? 1 : 0) + (refineRight ? 1 : 0);
    while (ends > 0 && ends * geoLen > 0.5 * len && !geo.empty()) {
        geoLen -= geo.back();
        geo.pop_back();
    }

    std::vector<double> x{a};
    if (refineLeft)
        for (double h : geo) x.push_back(x.back() + h);
    double left = x.back();
    double right = refineRight ? c - geoLen : c;
    int mid = std::max(1, static_cast<int>(std::lround((right - left) / h0)));
    for (int i = 1; i < mid; ++i) x.push_back(left + (right - left) * i / mid);
    x.push_back(right);
    if (refineRight) {
        double pos = right;
        for (auto it = geo.rbegin(); it != geo.rend(); ++it) {
            pos += *it;
            x.push_back(pos);
        }
        x.back() = c;
    }
    // guard against a degenerate last cell from rounding
    std::vector<double> out;
    out.reserve(x.size());
    for (double v : x)
        if (out.empty() || v > out.back()) out.push_back(v);
    out.back() = c;
    return out;
}

// Finite-difference weights for the first derivative at z (Fornberg).
inline std::vector<double> fd_weights_first(double z, const double* xs, int m) {
    std::vector<double> c0(m, 0.0), c1(m, 0.0);
    double cc1 = 1.0;
    double c4 = xs[0] - z;
    c0[0] = 1.0;
    for (int i = 1; i < m; ++i) {
        int mn = std::min(i, 1);
        double cc2 = 1.0;
        double c5 = c4;
        c4 = xs[i] - z;
        for (int j = 0; j < i; ++j) {
            double c3 = xs[i] - xs[j];
            cc2 *= c3;
            if (j == i - 1) {
                if (mn >= 1) c1[i] = cc1 * (c0[i - 1] - c5 * c1[i - 1]) / cc2;
                c0[i] = -cc1 * c5 * c0[i - 1] / cc2;
            }
            if (mn >= 1) c1[j] = (c4 * c1[j] - c0[j]) / c3;
            c0[j] = c4 * c0[j] / c3;
        }
        cc1 = cc2;
    }
    return c1;
}

// Thomas algorithm; a is the sub-diagonal (a[0] unused), c the super-diagonal.
inline bool solve_tridiagonal(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                              std::vector<double>& d) {
    std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (b[i - 1] == 0.0) return false;
        double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    if (b[n - 1] == 0.0) return false;
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
    for (double v : d)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace sonicflow
