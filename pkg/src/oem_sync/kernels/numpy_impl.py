"""Pure-numpy integration backend.

Reference implementation of the adaptive Dormand-Prince segment integrator.
Sparse matrix-vector products go through np.bincount, so there is no
compilation step and no dependency beyond numpy.  Semantics match the numba
backend; only floating-point summation order inside the matvec may differ.
"""
from __future__ import annotations

import numpy as np

from . import _dopri5 as dp

BACKEND_NAME = "numpy"


def csr_matvec(data, indices, indptr, x):
    """y = A x for a CSR matrix; empty rows yield exact zeros."""
    dim = indptr.shape[0] - 1
    if data.shape[0] == 0:
        return np.zeros(dim, dtype=np.complex128)
    counts = np.diff(indptr)
    rows = np.repeat(np.arange(dim, dtype=np.int64), counts)
    prod = data * x[indices]
    return np.bincount(rows, weights=prod.real, minlength=dim) + 1j * np.bincount(
        rows, weights=prod.imag, minlength=dim
    )


def csr_expect(data, indices, indptr, x):
    return complex(np.vdot(x, csr_matvec(data, indices, indptr, x)))


class _Rhs:
    """Generator application y -> G(t) y with precomputed COO row indices."""

    def __init__(self, gd, gi, gp, dd, di, dp2, damp, dfreq):
        dim = gp.shape[0] - 1
        self.dim = dim
        self.gd, self.gi = gd, gi
        self.g_rows = np.repeat(np.arange(dim, dtype=np.int64), np.diff(gp))
        self.damp, self.dfreq = damp, dfreq
        self.drives = []
        for k in range(damp.shape[0]):
            counts = np.diff(dp2[k])
            rows = np.repeat(np.arange(dim, dtype=np.int64), counts)
            lo, hi = dp2[k, 0], dp2[k, -1]
            self.drives.append((rows, dd[lo:hi], di[lo:hi]))

    def __call__(self, t, y):
        prod = self.gd * y[self.gi]
        out = np.bincount(self.g_rows, weights=prod.real, minlength=self.dim) + 1j * np.bincount(
            self.g_rows, weights=prod.imag, minlength=self.dim
        )
        for k, (rows, data, idx) in enumerate(self.drives):
            coeff = self.damp[k] * np.exp(1j * self.dfreq[k] * t)
            prod = data * y[idx]
            out += coeff * (
                np.bincount(rows, weights=prod.real, minlength=self.dim)
                + 1j * np.bincount(rows, weights=prod.imag, minlength=self.dim)
            )
        return out


def _stages(f, t, y, h, k1):
    k2 = f(t + dp.C2 * h, y + h * (dp.A21 * k1))
    k3 = f(t + dp.C3 * h, y + h * (dp.A31 * k1 + dp.A32 * k2))
    k4 = f(t + dp.C4 * h, y + h * (dp.A41 * k1 + dp.A42 * k2 + dp.A43 * k3))
    k5 = f(t + dp.C5 * h, y + h * (dp.A51 * k1 + dp.A52 * k2 + dp.A53 * k3 + dp.A54 * k4))
    k6 = f(
        t + h,
        y + h * (dp.A61 * k1 + dp.A62 * k2 + dp.A63 * k3 + dp.A64 * k4 + dp.A65 * k5),
    )
    ynew = y + h * (dp.A71 * k1 + dp.A73 * k3 + dp.A74 * k4 + dp.A75 * k5 + dp.A76 * k6)
    k7 = f(t + h, ynew)
    return ynew, k3, k4, k5, k6, k7


def _norm_sq(y):
    return float(np.vdot(y, y).real)


def integrate_segment(
    t0,
    t_end,
    y0,
    r_target,
    h0,
    gd,
    gi,
    gp,
    dd,
    di,
    dp2,
    damp,
    dfreq,
    rel_tol,
    abs_tol,
    max_step,
):
    """Advance y' = G(t) y from t0 toward t_end.

    Returns (status, t, y, h_next, n_steps).  status 1 means the squared
    norm crossed r_target; the crossing time is then located by bisection
    inside the accepted step and y is the state at the crossing.  status 2
    reports step-size underflow at the returned t.
    """
    f = _Rhs(gd, gi, gp, dd, di, dp2, damp, dfreq)
    y = y0.astype(np.complex128, copy=True)
    t = float(t0)
    h = float(h0)
    if h <= 0.0:
        h = 1e-4

    if r_target > 0.0 and _norm_sq(y) <= r_target:
        return dp.STATUS_JUMP, t, y, h, 0

    if t_end <= t:
        return dp.STATUS_REACHED, t, y, h, 0

    k1 = f(t, y)
    n_steps = 0
    while t < t_end:
        n_steps += 1
        if n_steps > dp.MAX_STEPS_PER_SEGMENT:
            return dp.STATUS_UNDERFLOW, t, y, h, n_steps
        if h > max_step:
            h = max_step
        hs = min(h, t_end - t)
        landed = hs >= (t_end - t)

        ynew, k3, k4, k5, k6, k7 = _stages(f, t, y, hs, k1)
        err = hs * (dp.E1 * k1 + dp.E3 * k3 + dp.E4 * k4 + dp.E5 * k5 + dp.E6 * k6 + dp.E7 * k7)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(ynew))
        errnorm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))

        if errnorm <= 1.0:
            factor = dp.MAX_FACTOR if errnorm == 0.0 else min(
                dp.MAX_FACTOR, max(dp.MIN_FACTOR, dp.SAFETY * errnorm ** (-dp.ORDER_EXPONENT))
            )
            if r_target > 0.0 and _norm_sq(ynew) <= r_target:
                t_jump, y_jump = _bisect_crossing(f, t, y, hs, k1, r_target)
                return dp.STATUS_JUMP, t_jump, y_jump, h, n_steps
            t = t_end if landed else t + hs
            y = ynew
            k1 = k7
            h = hs * factor
        else:
            if np.isfinite(errnorm):
                factor = max(dp.MIN_FACTOR, dp.SAFETY * errnorm ** (-dp.ORDER_EXPONENT))
            else:
                factor = dp.MIN_FACTOR
            h = hs * factor
            if h < 1e-13 * max(1.0, abs(t)):
                return dp.STATUS_UNDERFLOW, t, y, h, n_steps
    return dp.STATUS_REACHED, t, y, h, n_steps


def _bisect_crossing(f, t, y, h, k1, r_target):
    """Locate norm^2(y(t+s)) = r_target for s in (0, h] by bisection."""
    lo, hi = 0.0, h
    tol = dp.JUMP_TIME_RTOL * max(1.0, abs(t + h))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        ytrial = _stages(f, t, y, mid, k1)[0]
        if _norm_sq(ytrial) > r_target:
            lo = mid
        else:
            hi = mid
    y_jump = _stages(f, t, y, hi, k1)[0]
    return t + hi, y_jump


def warmup():
    """No compilation needed for the numpy backend."""
