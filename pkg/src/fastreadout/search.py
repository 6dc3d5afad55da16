"""Derivative-free 1-D maximization helpers."""

from __future__ import annotations

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Golden-section search for the maximum of a unimodal function on [lo, hi].

    Returns (x, f(x)). `tol` is relative to the bracket width.
    """
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    width0 = b - a
    for _ in range(max_iter):
        if b - a <= tol * width0:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc > fd:
        return c, fc
    return d, fd


def maximize_unimodal(f, lo: float, hi: float, n_scan: int = 17, tol: float = 1e-6,
                      n_fallback: int = 400):
    """Maximize f on [lo, hi]: coarse pre-scan, then golden-section refinement.

    The pre-scan checks unimodality; if several separated local maxima are
    found the search falls back to a dense grid scan.
    """
    xs = [lo + (hi - lo) * i / (n_scan - 1) for i in range(n_scan)]
    fs = [f(x) for x in xs]
    peaks = [
        i for i in range(1, n_scan - 1)
        if fs[i] >= fs[i - 1] and fs[i] >= fs[i + 1]
    ]
    best = max(range(n_scan), key=fs.__getitem__)
    if len(peaks) > 1:
        # non-unimodal pre-scan: dense grid fallback
        xs = [lo + (hi - lo) * i / (n_fallback - 1) for i in range(n_fallback)]
        fs = [f(x) for x in xs]
        best = max(range(n_fallback), key=fs.__getitem__)
        a = xs[max(best - 1, 0)]
        b = xs[min(best + 1, n_fallback - 1)]
        return golden_section_max(f, a, b, tol=tol)
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, n_scan - 1)]
    return golden_section_max(f, a, b, tol=tol)
