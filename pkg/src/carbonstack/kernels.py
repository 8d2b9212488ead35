"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The module-level names without a suffix (``active_left_end``, ``pde_step``,
``simulate_paths``) are bound to the numba flavour unless the numpy backend is
requested through ``CARBONSTACK_BACKEND=numpy``. Both flavours are always
importable so they can be cross-checked and benchmarked.

Stack coefficients travel as a flat float tuple
``(b_min, b_span, theta1, e_max, e_span, theta2, xi_max)`` with
``b_span = b_max - b_min`` and ``e_span = e_max - e_min``.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# Relative bisection tolerance on interval endpoints (times xi_max).
ENDPOINT_RTOL = 1e-10


# ---------------------------------------------------------------------------
# merit-order active set
# ---------------------------------------------------------------------------

@njit
def _bid_nb(a, xi, b_min, b_span, th1, e_hi, e_span, th2, xm):
    x = xi / xm
    return b_min + b_span * x**th1 + a * (e_hi - e_span * x**th2)


@njit
def _minimizer_nb(a, b_span, th1, e_span, th2, xm):
    if a <= 0.0 or e_span <= 0.0 or th2 <= 0.0:
        return 0.0
    if b_span <= 0.0:
        return xm
    x = (a * th2 * e_span / (th1 * b_span)) ** (1.0 / (th1 - th2))
    return xm * min(x, 1.0)


@njit
def _gap_nb(a, x, d, b_span, th1, e_span, th2, xm):
    """``g(x + d) - g(x)`` and its derivative in ``x`` (``b_min``/``e_max`` cancel)."""
    u = x / xm
    v = (x + d) / xm
    # u = 0 has an infinite slope when th2 < 1; report it as such
    if u > 0.0:
        lu = math.log(u)
        pu1 = math.exp(th1 * lu)
        pu2 = math.exp(th2 * lu)
        du = (th1 * b_span * pu1 - a * th2 * e_span * pu2) / x
    else:
        pu1 = 0.0
        pu2 = 0.0
        du = -math.inf
    if v > 0.0:
        lv = math.log(v)
        pv1 = math.exp(th1 * lv)
        pv2 = math.exp(th2 * lv)
        dv = (th1 * b_span * pv1 - a * th2 * e_span * pv2) / (x + d)
    else:
        pv1 = 0.0
        pv2 = 0.0
        dv = -math.inf
    h = b_span * (pv1 - pu1) - a * e_span * (pv2 - pu2)
    return h, dv - du


@njit
def _left_end_nb(a, d, b_min, b_span, th1, e_hi, e_span, th2, xm, tol):
    """Root of the increasing gap on its bracket: Newton steps kept inside the
    bracket, bisection whenever Newton would leave it or stalls. The result
    always comes from a bracket no wider than ``tol``."""
    m = _minimizer_nb(a, b_span, th1, e_span, th2, xm)
    lo = max(0.0, m - d)
    hi = min(m, xm - d)
    if hi <= lo:
        return lo
    h_lo, _ = _gap_nb(a, lo, d, b_span, th1, e_span, th2, xm)
    if h_lo >= 0.0:
        return lo
    h_hi, _ = _gap_nb(a, hi, d, b_span, th1, e_span, th2, xm)
    if h_hi <= 0.0:
        return hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        h, dh = _gap_nb(a, x, d, b_span, th1, e_span, th2, xm)
        if h > 0.0:
            hi = x
        elif h < 0.0:
            lo = x
        else:
            return x
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        step_ok = False
        if dh > 0.0 and math.isfinite(dh):
            nx = x - h / dh
            if lo < nx < hi:
                if abs(nx - x) <= 0.5 * tol:
                    # certify with a bracket of width tol around the Newton iterate
                    for probe in (nx - 0.5 * tol, nx + 0.5 * tol):
                        if lo < probe < hi:
                            hp, _ = _gap_nb(a, probe, d, b_span, th1, e_span, th2, xm)
                            if hp > 0.0:
                                hi = probe
                            else:
                                lo = probe
                    if hi - lo <= tol:
                        return 0.5 * (lo + hi)
                else:
                    x = nx
                    step_ok = True
        if not step_ok:
            x = 0.5 * (lo + hi)
    return math.nan


@njit
def _active_left_end_loop(a, d, coeffs, out):
    b_min, b_span, th1, e_hi, e_span, th2, xm = coeffs
    tol = ENDPOINT_RTOL * xm
    for k in range(a.size):
        out[k] = _left_end_nb(a[k], d[k], b_min, b_span, th1, e_hi, e_span,
                              th2, xm, tol)


def active_left_end_numba(a, d, coeffs):
    """Left endpoint of the active interval of measure ``d`` (flat arrays)."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    d = np.ascontiguousarray(d, dtype=np.float64).ravel()
    out = np.empty_like(a)
    _active_left_end_loop(a, d, tuple(float(c) for c in coeffs), out)
    return out


def bid_numpy(a, xi, coeffs):
    b_min, b_span, th1, e_hi, e_span, th2, xm = coeffs
    x = xi / xm
    return b_min + b_span * x**th1 + a * (e_hi - e_span * x**th2)


def minimizer_numpy(a, coeffs):
    _, b_span, th1, _, e_span, th2, xm = coeffs
    a = np.asarray(a, dtype=np.float64)
    if e_span <= 0.0 or th2 <= 0.0:
        return np.zeros_like(a)
    if b_span <= 0.0:
        return np.where(a > 0.0, xm, 0.0)
    x = (np.maximum(a, 0.0) * th2 * e_span / (th1 * b_span)) ** (1.0 / (th1 - th2))
    return xm * np.minimum(x, 1.0)


def active_left_end_numpy(a, d, coeffs):
    a = np.asarray(a, dtype=np.float64).ravel()
    d = np.asarray(d, dtype=np.float64).ravel()
    xm = coeffs[6]
    tol = ENDPOINT_RTOL * xm
    m = minimizer_numpy(a, coeffs)
    lo = np.maximum(0.0, m - d)
    hi = np.minimum(m, xm - d)
    hi = np.maximum(hi, lo)
    h_lo = bid_numpy(a, lo + d, coeffs) - bid_numpy(a, lo, coeffs)
    h_hi = bid_numpy(a, hi + d, coeffs) - bid_numpy(a, hi, coeffs)
    at_lo = (h_lo >= 0.0) | (hi <= lo)
    at_hi = ~at_lo & (h_hi <= 0.0)
    n_iter = int(math.ceil(math.log2(max(xm / tol, 2.0)))) + 2
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        h = bid_numpy(a, mid + d, coeffs) - bid_numpy(a, mid, coeffs)
        up = h > 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    out = 0.5 * (lo + hi)
    out = np.where(at_lo, np.maximum(0.0, m - d), out)
    out = np.where(at_hi, np.minimum(m, xm - d), out)
    out[~np.isfinite(a) | ~np.isfinite(d)] = np.nan
    return out


# ---------------------------------------------------------------------------
# explicit backward step of the allowance / option PDE
# ---------------------------------------------------------------------------
#
# Arrays are stacked over independent slices: u, src have shape (S, nD, nE).
# ``diff[i]`` is sigma_d^2(D_i) / (2 dD^2), ``drift[i]`` is mu_d(D_i) / dD.
# ``rates[q, i]`` tabulates mu_e at price level q * a_step and demand D_i.
# The transport speed at a node reads ``src`` (the allowance value), which is
# ``u`` itself for the semilinear allowance problem.

@njit
def _pde_step_nb(u, src, out, diff, drift, rates, a_step, dt, inv_de, rate, top):
    n_s, n_d, n_e = u.shape
    n_a = rates.shape[0]
    inv_a = 1.0 / a_step
    for s in range(n_s):
        for i in range(n_d):
            for j in range(n_e - 1):
                c = u[s, i, j]
                # D direction
                if i == 0:
                    lin = drift[i] * (u[s, 1, j] - c)
                elif i == n_d - 1:
                    lin = drift[i] * (c - u[s, i - 1, j])
                else:
                    up = u[s, i + 1, j]
                    dn = u[s, i - 1, j]
                    lin = diff[i] * (up - 2.0 * c + dn) + 0.5 * drift[i] * (up - dn)
                # semilinear speed from the tabulated emissions rate
                x = src[s, i, j] * inv_a
                if x <= 0.0:
                    mu = rates[0, i]
                elif x >= n_a - 1:
                    mu = rates[n_a - 1, i]
                else:
                    q = int(x)
                    w = x - q
                    mu = (1.0 - w) * rates[q, i] + w * rates[q + 1, i]
                adv = mu * (u[s, i, j + 1] - c) * inv_de
                out[s, i, j] = c + dt * (lin + adv - rate * c)
            out[s, i, n_e - 1] = top[s, i]


def pde_step_numba(u, src, out, diff, drift, rates, a_step, dt, inv_de, rate, top):
    _pde_step_nb(u, src, out, diff, drift, rates, a_step, dt, inv_de, rate, top)
    return out


def _lookup_rates_numpy(src, rates, a_step):
    n_a, n_d = rates.shape
    x = np.clip(src / a_step, 0.0, n_a - 1)
    q = np.minimum(x.astype(np.intp), n_a - 2) if n_a > 1 else np.zeros(x.shape, np.intp)
    w = x - q
    cols = np.arange(n_d)[None, :, None]
    if n_a == 1:
        return np.broadcast_to(rates[0][None, :, None], src.shape)
    return (1.0 - w) * rates[q, cols] + w * rates[q + 1, cols]


def pde_step_numpy(u, src, out, diff, drift, rates, a_step, dt, inv_de, rate, top):
    body = u[:, :, :-1]
    lin = np.empty_like(body)
    up = u[:, 2:, :-1]
    dn = u[:, :-2, :-1]
    mid = u[:, 1:-1, :-1]
    lin[:, 1:-1] = (diff[None, 1:-1, None] * (up - 2.0 * mid + dn)
                    + 0.5 * drift[None, 1:-1, None] * (up - dn))
    lin[:, 0] = drift[0] * (u[:, 1, :-1] - u[:, 0, :-1])
    lin[:, -1] = drift[-1] * (u[:, -1, :-1] - u[:, -2, :-1])
    mu = _lookup_rates_numpy(src[:, :, :-1], rates, a_step)
    adv = mu * (u[:, :, 1:] - body) * inv_de
    out[:, :, :-1] = body + dt * (lin + adv - rate * body)
    out[:, :, -1] = top
    return out


# ---------------------------------------------------------------------------
# Euler paths of (D, E) driven by a stored allowance surface
# ---------------------------------------------------------------------------

@njit
def _bilinear_nb(field, x, y, inv_dx, inv_dy):
    nx, ny = field.shape
    fx = x * inv_dx
    fy = y * inv_dy
    i = int(fx)
    j = int(fy)
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    if i < 0:
        i = 0
    if j < 0:
        j = 0
    wx = fx - i
    wy = fy - j
    return ((1.0 - wx) * ((1.0 - wy) * field[i, j] + wy * field[i, j + 1])
            + wx * ((1.0 - wy) * field[i + 1, j] + wy * field[i + 1, j + 1]))


@njit
def _simulate_paths_nb(d0, levels, level_of_step, normals, rate_table, a_max,
                       d_bar, eta, sig2_scale, xm, e_max, dt, de, dd_tab, out_e):
    n_paths, n_steps = normals.shape
    n_dgrid = levels.shape[1]
    dd_grid = xm / (n_dgrid - 1)
    inv_dd = 1.0 / dd_grid
    inv_de = 1.0 / de
    n_a = rate_table.shape[0]
    a_step = a_max / (n_a - 1) if n_a > 1 else 1.0
    inv_a = 1.0 / a_step
    inv_dtab = 1.0 / dd_tab
    sqdt = math.sqrt(dt)
    for p in range(n_paths):
        d = d0
        e = 0.0
        for k in range(n_steps):
            lev = levels[level_of_step[k]]
            a = _bilinear_nb(lev, d, e, inv_dd, inv_de)
            if a < 0.0:
                a = 0.0
            elif a > a_max:
                a = a_max
            if n_a > 1:
                mu = _bilinear_nb(rate_table, a, d, inv_a, inv_dtab)
            else:
                fd = d * inv_dtab
                jd = min(int(fd), rate_table.shape[1] - 2)
                w = fd - jd
                mu = (1.0 - w) * rate_table[0, jd] + w * rate_table[0, jd + 1]
            e = e + mu * dt
            if e > e_max:
                e = e_max
            var = sig2_scale * d * (xm - d)
            if var < 0.0:
                var = 0.0
            d = d - eta * (d - d_bar) * dt + math.sqrt(var) * sqdt * normals[p, k]
            if d < 0.0:
                d = -d
            if d > xm:
                d = 2.0 * xm - d
            d = min(max(d, 0.0), xm)
        out_e[p] = e


def simulate_paths_numba(d0, levels, level_of_step, normals, rate_table, a_max,
                         d_bar, eta, sig2_scale, xm, e_max, dt, de):
    out = np.empty(normals.shape[0])
    dd_tab = xm / (rate_table.shape[1] - 1)
    _simulate_paths_nb(float(d0), levels, level_of_step, normals, rate_table,
                       float(a_max), float(d_bar), float(eta), float(sig2_scale),
                       float(xm), float(e_max), float(dt), float(de), dd_tab, out)
    return out


def _bilinear_numpy(field, x, y, inv_dx, inv_dy):
    nx, ny = field.shape
    fx = x * inv_dx
    fy = y * inv_dy
    i = np.clip(fx.astype(np.intp), 0, nx - 2)
    j = np.clip(fy.astype(np.intp), 0, ny - 2)
    wx = fx - i
    wy = fy - j
    return ((1.0 - wx) * ((1.0 - wy) * field[i, j] + wy * field[i, j + 1])
            + wx * ((1.0 - wy) * field[i + 1, j] + wy * field[i + 1, j + 1]))


def simulate_paths_numpy(d0, levels, level_of_step, normals, rate_table, a_max,
                         d_bar, eta, sig2_scale, xm, e_max, dt, de):
    n_paths, n_steps = normals.shape
    inv_dd = (levels.shape[1] - 1) / xm
    inv_de = 1.0 / de
    n_a = rate_table.shape[0]
    inv_dtab = (rate_table.shape[1] - 1) / xm
    sqdt = math.sqrt(dt)
    d = np.full(n_paths, float(d0))
    e = np.zeros(n_paths)
    for k in range(n_steps):
        a = _bilinear_numpy(levels[level_of_step[k]], d, e, inv_dd, inv_de)
        a = np.clip(a, 0.0, a_max)
        if n_a > 1:
            mu = _bilinear_numpy(rate_table, a, d, (n_a - 1) / a_max, inv_dtab)
        else:
            fd = d * inv_dtab
            jd = np.minimum(fd.astype(np.intp), rate_table.shape[1] - 2)
            w = fd - jd
            mu = (1.0 - w) * rate_table[0, jd] + w * rate_table[0, jd + 1]
        e = np.minimum(e + mu * dt, e_max)
        var = np.maximum(sig2_scale * d * (xm - d), 0.0)
        d = d - eta * (d - d_bar) * dt + np.sqrt(var) * sqdt * normals[:, k]
        d = np.where(d < 0.0, -d, d)
        d = np.where(d > xm, 2.0 * xm - d, d)
        d = np.clip(d, 0.0, xm)
    return e


if USE_NUMBA:
    active_left_end = active_left_end_numba
    pde_step = pde_step_numba
    simulate_paths = simulate_paths_numba
else:
    active_left_end = active_left_end_numpy
    pde_step = pde_step_numpy
    simulate_paths = simulate_paths_numpy
