"""Hot loop for price-path assembly, numba-jitted when available.

The deterministic impact and the permanent random-impact component share
the same (metaorder x observation point) sweep, so both are accumulated in
a single pass.  Results are identical between the numba and numpy paths up
to floating-point associativity; within one installation the backend is
fixed, so runs are bitwise reproducible.
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

MODE_STANDARD = 0
MODE_TWO_TIME = 1  # also used for permanent (beta_q = 0)


def _sweep_numpy(grid_t, starts, durs, w_det, w_noise, one_minus_beta, mode, out_det, out_noise):
    chunk = max(1, int(4e6 // max(len(starts), 1)))
    for lo in range(0, grid_t.size, chunk):
        g = grid_t[lo : lo + chunk, None]
        el = g - starts[None, :]
        durs_b = durs[None, :]
        act = (el > 0.0) & (el <= durs_b)
        post = el > durs_b
        vd = np.zeros_like(el)
        vn = np.zeros_like(el)
        if mode == MODE_TWO_TIME:
            vd[act] = np.sqrt(el[act])
            if post.any():
                idx = np.nonzero(post)
                s = durs[idx[1]]
                omb = one_minus_beta[idx[1]]
                x = el[idx] / s
                vd[idx] = np.sqrt(s) * (x**omb - (x - 1.0) ** omb)
        else:
            omb = one_minus_beta[None, :]
            vd[act] = (el**omb)[act]
            if post.any():
                idx = np.nonzero(post)
                o = one_minus_beta[idx[1]]
                vd[idx] = el[idx] ** o - (el[idx] - durs[idx[1]]) ** o
        vn[act] = np.sqrt(el[act])
        if post.any():
            vn[post] = np.sqrt(np.broadcast_to(durs_b, el.shape)[post])
        out_det[lo : lo + chunk] = vd @ w_det
        out_noise[lo : lo + chunk] = vn @ w_noise


if HAVE_NUMBA:

    @njit(cache=True, fastmath=True, parallel=True)
    def _sweep_numba(grid_t, starts, durs, w_det, w_noise, one_minus_beta, mode, out_det, out_noise):  # pragma: no cover
        for j in prange(grid_t.size):
            t = grid_t[j]
            acc_d = 0.0
            acc_n = 0.0
            for i in range(starts.size):
                el = t - starts[i]
                if el <= 0.0:
                    continue
                s = durs[i]
                if el <= s:
                    r = math.sqrt(el)
                    if mode == MODE_TWO_TIME:
                        acc_d += w_det[i] * r
                    else:
                        acc_d += w_det[i] * el ** one_minus_beta[i]
                    acc_n += w_noise[i] * r
                else:
                    if mode == MODE_TWO_TIME:
                        x = el / s
                        omb = one_minus_beta[i]
                        acc_d += w_det[i] * math.sqrt(s) * (x**omb - (x - 1.0) ** omb)
                    else:
                        omb = one_minus_beta[i]
                        acc_d += w_det[i] * (el**omb - (el - s) ** omb)
                    acc_n += w_noise[i] * math.sqrt(s)
            out_det[j] = acc_d
            out_noise[j] = acc_n


def impact_sweep(grid_t, starts, durs, w_det, w_noise, one_minus_beta, mode: int):
    """Accumulate deterministic and noise impact components on grid_t.

    All metaorder arrays must be aligned; `mode` is MODE_STANDARD or
    MODE_TWO_TIME (permanent runs through MODE_TWO_TIME with beta = 0).
    """
    out_det = np.zeros(grid_t.size)
    out_noise = np.zeros(grid_t.size)
    args = (
        np.ascontiguousarray(grid_t, dtype=np.float64),
        np.ascontiguousarray(starts, dtype=np.float64),
        np.ascontiguousarray(durs, dtype=np.float64),
        np.ascontiguousarray(w_det, dtype=np.float64),
        np.ascontiguousarray(w_noise, dtype=np.float64),
        np.ascontiguousarray(one_minus_beta, dtype=np.float64),
        mode,
        out_det,
        out_noise,
    )
    if HAVE_NUMBA:
        _sweep_numba(*args)
    else:
        _sweep_numpy(*args)
    return out_det, out_noise
