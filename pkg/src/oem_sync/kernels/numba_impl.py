"""Numba-compiled integration backend.

Same contract as numpy_impl but with the whole segment loop, stage math and
bisection compiled to machine code.  Arrays are complex128/int64 throughout;
fastmath stays off so results are reproducible bit for bit for a given
backend, seed and grid.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from . import _dopri5 as dp

BACKEND_NAME = "numba"

_C2, _C3, _C4, _C5 = dp.C2, dp.C3, dp.C4, dp.C5
_A21 = dp.A21
_A31, _A32 = dp.A31, dp.A32
_A41, _A42, _A43 = dp.A41, dp.A42, dp.A43
_A51, _A52, _A53, _A54 = dp.A51, dp.A52, dp.A53, dp.A54
_A61, _A62, _A63, _A64, _A65 = dp.A61, dp.A62, dp.A63, dp.A64, dp.A65
_A71, _A73, _A74, _A75, _A76 = dp.A71, dp.A73, dp.A74, dp.A75, dp.A76
_E1, _E3, _E4, _E5, _E6, _E7 = dp.E1, dp.E3, dp.E4, dp.E5, dp.E6, dp.E7
_SAFETY, _MIN_F, _MAX_F, _EXP = dp.SAFETY, dp.MIN_FACTOR, dp.MAX_FACTOR, dp.ORDER_EXPONENT
_JUMP_RTOL = dp.JUMP_TIME_RTOL
_MAX_STEPS = dp.MAX_STEPS_PER_SEGMENT
_REACHED, _JUMP, _UNDERFLOW = dp.STATUS_REACHED, dp.STATUS_JUMP, dp.STATUS_UNDERFLOW


@nb.njit(cache=True)
def csr_matvec(data, indices, indptr, x):
    n = indptr.shape[0] - 1
    out = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        acc = 0.0 + 0.0j
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc
    return out


@nb.njit(cache=True)
def csr_expect(data, indices, indptr, x):
    n = indptr.shape[0] - 1
    acc = 0.0 + 0.0j
    for i in range(n):
        row = 0.0 + 0.0j
        for k in range(indptr[i], indptr[i + 1]):
            row += data[k] * x[indices[k]]
        acc += np.conj(x[i]) * row
    return acc


@nb.njit(cache=True)
def _rhs(out, t, y, gd, gi, gp, dd, di, dp2, damp, dfreq):
    n = y.shape[0]
    for i in range(n):
        acc = 0.0 + 0.0j
        for k in range(gp[i], gp[i + 1]):
            acc += gd[k] * y[gi[k]]
        out[i] = acc
    for d in range(damp.shape[0]):
        coeff = damp[d] * np.exp(1j * dfreq[d] * t)
        for i in range(n):
            acc = 0.0 + 0.0j
            for k in range(dp2[d, i], dp2[d, i + 1]):
                acc += dd[k] * y[di[k]]
            out[i] += coeff * acc


@nb.njit(cache=True)
def _norm_sq(y):
    acc = 0.0
    for i in range(y.shape[0]):
        acc += y[i].real * y[i].real + y[i].imag * y[i].imag
    return acc


@nb.njit(cache=True)
def _stages(
    t, y, h, k1, k2, k3, k4, k5, k6, k7, ynew, ytmp,
    gd, gi, gp, dd, di, dp2, damp, dfreq,
):
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * (_A21 * k1[i])
    _rhs(k2, t + _C2 * h, ytmp, gd, gi, gp, dd, di, dp2, damp, dfreq)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
    _rhs(k3, t + _C3 * h, ytmp, gd, gi, gp, dd, di, dp2, damp, dfreq)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
    _rhs(k4, t + _C4 * h, ytmp, gd, gi, gp, dd, di, dp2, damp, dfreq)
    for i in range(n):
        ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
    _rhs(k5, t + _C5 * h, ytmp, gd, gi, gp, dd, di, dp2, damp, dfreq)
    for i in range(n):
        ytmp[i] = y[i] + h * (
            _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
        )
    _rhs(k6, t + h, ytmp, gd, gi, gp, dd, di, dp2, damp, dfreq)
    for i in range(n):
        ynew[i] = y[i] + h * (
            _A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i]
        )
    _rhs(k7, t + h, ynew, gd, gi, gp, dd, di, dp2, damp, dfreq)


@nb.njit(cache=True)
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
    n = y0.shape[0]
    y = y0.copy()
    t = t0
    h = h0
    if h <= 0.0:
        h = 1e-4

    if r_target > 0.0 and _norm_sq(y) <= r_target:
        return _JUMP, t, y, h, 0

    if t_end <= t:
        return _REACHED, t, y, h, 0

    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    k5 = np.empty(n, dtype=np.complex128)
    k6 = np.empty(n, dtype=np.complex128)
    k7 = np.empty(n, dtype=np.complex128)
    ynew = np.empty(n, dtype=np.complex128)
    ytmp = np.empty(n, dtype=np.complex128)

    _rhs(k1, t, y, gd, gi, gp, dd, di, dp2, damp, dfreq)
    n_steps = 0
    while t < t_end:
        n_steps += 1
        if n_steps > _MAX_STEPS:
            return _UNDERFLOW, t, y, h, n_steps
        if h > max_step:
            h = max_step
        remaining = t_end - t
        landed = h >= remaining
        hs = remaining if landed else h

        _stages(
            t, y, hs, k1, k2, k3, k4, k5, k6, k7, ynew, ytmp,
            gd, gi, gp, dd, di, dp2, damp, dfreq,
        )

        errnorm_sq = 0.0
        for i in range(n):
            err = hs * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            ay = abs(y[i])
            an = abs(ynew[i])
            sc = abs_tol + rel_tol * (ay if ay > an else an)
            q = abs(err) / sc
            errnorm_sq += q * q
        errnorm = np.sqrt(errnorm_sq / n)

        if errnorm <= 1.0:
            if errnorm == 0.0:
                factor = _MAX_F
            else:
                factor = _SAFETY * errnorm ** (-_EXP)
                if factor > _MAX_F:
                    factor = _MAX_F
                elif factor < _MIN_F:
                    factor = _MIN_F
            if r_target > 0.0 and _norm_sq(ynew) <= r_target:
                lo = 0.0
                hi = hs
                tol = _JUMP_RTOL * max(1.0, abs(t + hs))
                while hi - lo > tol:
                    mid = 0.5 * (lo + hi)
                    if mid <= lo or mid >= hi:
                        break
                    _stages(
                        t, y, mid, k1, k2, k3, k4, k5, k6, k7, ynew, ytmp,
                        gd, gi, gp, dd, di, dp2, damp, dfreq,
                    )
                    if _norm_sq(ynew) > r_target:
                        lo = mid
                    else:
                        hi = mid
                _stages(
                    t, y, hi, k1, k2, k3, k4, k5, k6, k7, ynew, ytmp,
                    gd, gi, gp, dd, di, dp2, damp, dfreq,
                )
                for i in range(n):
                    y[i] = ynew[i]
                return _JUMP, t + hi, y, h, n_steps
            t = t_end if landed else t + hs
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            h = hs * factor
        else:
            if np.isfinite(errnorm):
                factor = _SAFETY * errnorm ** (-_EXP)
                if factor < _MIN_F:
                    factor = _MIN_F
            else:
                factor = _MIN_F
            h = hs * factor
            if h < 1e-13 * max(1.0, abs(t)):
                return _UNDERFLOW, t, y, h, n_steps
    return _REACHED, t, y, h, n_steps


def warmup():
    """Trigger compilation of every kernel code path on a toy problem."""
    gd = np.array([-0.5 + 0.0j, -1.0 + 0.0j])
    gi = np.array([0, 1], dtype=np.int64)
    gp = np.array([0, 1, 2], dtype=np.int64)
    dd = np.array([0.01 + 0.0j])
    di = np.array([0], dtype=np.int64)
    dp2 = np.array([[0, 1, 1]], dtype=np.int64)
    damp = np.array([0.05 + 0.0j])
    dfreq = np.array([1.0])
    y0 = np.array([1.0 + 0.0j, 1.0 + 0.0j]) / np.sqrt(2.0)
    integrate_segment(
        0.0, 0.5, y0, 0.0, 1e-3, gd, gi, gp, dd, di, dp2, damp, dfreq, 1e-8, 1e-10, np.inf
    )
    integrate_segment(
        0.0, 50.0, y0, 0.5, 1e-3, gd, gi, gp, dd, di, dp2, damp, dfreq, 1e-8, 1e-10, np.inf
    )
    csr_matvec(gd, gi, gp, y0)
    csr_expect(gd, gi, gp, y0)
