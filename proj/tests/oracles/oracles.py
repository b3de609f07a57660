"""Independent reference values for the frozen constants in the C++ tests.

Uses scipy (LSODA/RK45 + brentq) with its own chart handling, sharing no code
with the library. Run: python3 tests/oracles/oracles.py
"""
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

SWITCH = 0.05  # |rho - 1| where the x chart hands over to the rho chart


def c(rho):
    return 1.0 - 1.0 / rho**2  # isothermal, T = J = 1


def rhs_x(b, tau):
    # c(rho) rho_x = rho E - 1/tau
    def f(x, y):
        rho, e = y
        return [(rho * e - 1.0 / tau) / c(rho), rho - b]
    return f


def rhs_rho(b, tau):
    # x and E as functions of rho
    def f(rho, y):
        x, e = y
        dx = c(rho) / (rho * e - 1.0 / tau)
        return [dx, (rho - b) * dx]
    return f


TOL = dict(rtol=1e-12, atol=1e-13)


def to_sonic(b, tau, x, rho, e):
    """From an off-sonic state, integrate in the rho chart to rho = 1. Returns (x, E)."""
    sol = solve_ivp(rhs_rho(b, tau), [rho, 1.0], [x, e], method="LSODA", **TOL)
    return sol.y[0, -1], sol.y[1, -1]


def x_until(b, tau, x0, y0, x1, target):
    """Integrate in x from x0 toward x1 until rho hits target; returns the event state or None."""
    ev = lambda x, y: y[0] - target
    ev.terminal = True
    sol = solve_ivp(rhs_x(b, tau), [x0, x1], y0, method="RK45", events=ev, **TOL)
    if sol.t_events[0].size == 0:
        return None
    return sol.t_events[0][0], sol.y_events[0][0]


def critical_eigs(b, tau):
    # Jacobian of the x-field at (b, 1/(tau b)) by central differences
    f = rhs_x(b, tau)
    y0 = np.array([b, 1.0 / (tau * b)])
    jac = np.zeros((2, 2))
    h = 1e-6
    for k in range(2):
        d = np.zeros(2)
        d[k] = h
        jac[:, k] = (np.array(f(0, y0 + d)) - np.array(f(0, y0 - d))) / (2 * h)
    return np.linalg.eigvals(jac)


def supersonic_min(b, tau, L=1.0):
    """rho_min and its position for the constant-doping supersonic solution."""
    e_min = lambda rm: 1.0 / (tau * rm)

    def arcs(rm):
        y0 = [rm, e_min(rm)]
        r = x_until(b, tau, 0.0, y0, 10.0, 1.0 - SWITCH)
        l = x_until(b, tau, 0.0, y0, -10.0, 1.0 - SWITCH)
        xr, _ = to_sonic(b, tau, r[0], r[1][0], r[1][1])
        xl, _ = to_sonic(b, tau, l[0], l[1][0], l[1][1])
        return xl, xr

    def mismatch(rm):
        xl, xr = arcs(rm)
        return (xr - xl) - L

    rm = brentq(mismatch, 0.3, 0.94, xtol=1e-14)
    xl, _ = arcs(rm)
    return rm, -xl


def shock_x0(b, tau, rho_l, lo, hi):
    """Shock position for left state rho_l: shoot E(0) so the subsonic part ends at x = 1."""

    def shot(e0):
        # launch from the sonic point x=0 on the supersonic side (rho chart), down to 1 - SWITCH
        sol = solve_ivp(rhs_rho(b, tau), [1.0, 1.0 - SWITCH], [0.0, e0], method="LSODA", **TOL)
        x, e = sol.y[0, -1], sol.y[1, -1]
        # pass the minimum in x, stop at the (last) crossing of rho_l on the way up
        mid = x_until(b, tau, x, [1.0 - SWITCH, e], 5.0, 0.5 * (1.0 - SWITCH + rho_l))
        if mid is None:
            return None
        # mid sits below rho_l only if the minimum is deeper; march on to rho_l
        ev = lambda t, y: y[0] - rho_l
        ev.terminal = True
        ev.direction = 1
        s2 = solve_ivp(rhs_x(b, tau), [mid[0], 5.0], mid[1], events=ev, **TOL)
        if s2.t_events[0].size == 0:
            return None
        xs, (rl, el) = s2.t_events[0][0], s2.y_events[0][0]
        sub = x_until(b, tau, xs, [1.0 / rl, el], 5.0, 1.0 + SWITCH)
        if sub is None:
            return None
        x1, _ = to_sonic(b, tau, sub[0], sub[1][0], sub[1][1])
        return x1 - 1.0, xs

    e0 = brentq(lambda e: shot(e)[0], lo, hi, xtol=1e-14)
    return e0, shot(e0)[1]


def subsonic_e0(b, tau, lo, hi, switch=1e-4):
    """E(0) of the interior subsonic solution: rho rises from 1 at x=0 and returns to 1 at x=1."""

    def shot(e0):
        sol = solve_ivp(rhs_rho(b, tau), [1.0, 1.0 + switch], [0.0, e0], method="LSODA", **TOL)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            return -1.0  # turns back below the switch level: far too short
        x, e = sol.y[0, -1], sol.y[1, -1]
        ev = lambda t, y: y[0] - (1.0 + switch)
        ev.terminal = True
        ev.direction = -1
        s2 = solve_ivp(rhs_x(b, tau), [x, 5.0], [1.0 + switch, e], events=ev, **TOL)
        if s2.t_events[0].size == 0:
            return 5.0  # never comes back within reach: too long
        x1, _ = to_sonic(b, tau, s2.t_events[0][0], *s2.y_events[0][0])
        return x1 - 1.0

    return brentq(shot, lo, hi, xtol=1e-14)


def c1_theta(b, tau):
    # smaller root of theta^2 - theta/tau + 2(b - 1) = 0
    return np.sort(np.roots([1.0, -1.0 / tau, 2.0 * (b - 1.0)]).real)[0]


if __name__ == "__main__":
    for b, tau in [(1.5, 15), (1.5, 0.5), (0.5, 15)]:
        print(f"eigs b={b} tau={tau}:", np.sort_complex(critical_eigs(b, tau)))
    th = c1_theta(1.5, 0.1)
    print(f"theta1 = {th:.9f}  slope = {th / 2:.9f}")
    t0 = min(1 / (3 * math.sqrt(1.5**3 + 1.5)), 1 / (4 * math.sqrt(0.5)), 1 / (3 * math.sqrt(1.5)))
    print(f"tau0(1.5) = {t0:.9f}")
    d = 2 + math.sqrt(2 * math.sqrt(2) * 1.5)
    print(f"beta = {1 / d:.9f}  gamma = {1 - 1 / (16 * d**3):.9f}")
    print("small(0.4) =", 0.4 * (1 + math.sqrt(0.8)))
    rm, z = supersonic_min(1.5, 15)
    print(f"supersonic b=1.5 tau=15: rho_min = {rm:.9f} at x = {z:.9f}")
    for b, tau in [(1.2, 1), (1.2, 15), (1.5, 1), (1.5, 15), (2.0, 1), (2.0, 15)]:
        print(f"subsonic b={b} tau={tau}: E0 = {subsonic_e0(b, tau, 1.0 / tau + 1e-8, 1.0 / tau + 1.0):.9f}")
    for rl in (0.9, 0.95):
        # the bracket is wide enough for both left states
        e0, xs = shock_x0(1.5, 50, rl, 0.365, 0.38)
        print(f"shock rhoL={rl}: E0 = {e0:.9f}  x0 = {xs:.9f}")
