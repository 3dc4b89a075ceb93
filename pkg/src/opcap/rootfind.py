"""Bracketing bisection for monotone scalar equations."""

from __future__ import annotations

import math
from typing import Callable


class NoRootError(ValueError):
    """Raised when no sign change can be bracketed."""


def expand_bracket(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    factor: float = 10.0,
    max_expansions: int = 200,
) -> tuple[float, float]:
    """Grow ``[lo, hi]`` geometrically until ``func`` changes sign.

    ``func`` is assumed nondecreasing and ``0 < lo < hi``. The lower end is
    divided by ``factor`` while func(lo) > 0, the upper end multiplied while
    func(hi) < 0.
    """
    if not (0 < lo < hi):
        raise ValueError("expand_bracket needs 0 < lo < hi")
    f_lo, f_hi = func(lo), func(hi)
    n = 0
    while f_lo > 0:
        if n >= max_expansions:
            raise NoRootError(f"no sign change below {lo!r}")
        hi, f_hi = lo, f_lo
        lo /= factor
        f_lo = func(lo)
        n += 1
    while f_hi < 0:
        if n >= max_expansions or not math.isfinite(hi * factor):
            raise NoRootError(f"no sign change above {hi!r}")
        lo, f_lo = hi, f_hi
        hi *= factor
        f_hi = func(hi)
        n += 1
    return lo, hi


def bisect_increasing(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    rtol: float = 1e-12,
    log_scale: bool = False,
    max_iter: int = 400,
) -> float:
    """Root of a nondecreasing ``func`` in ``[lo, hi]``.

    With ``log_scale`` the midpoint is geometric, which keeps the iteration
    count small when the bracket spans many orders of magnitude. Returns
    the upper end of the final bracket, i.e. the smallest point found with
    func >= 0 (the quantile convention).
    """
    if lo > hi:
        lo, hi = hi, lo
    f_lo, f_hi = func(lo), func(hi)
    if f_lo >= 0:
        return lo
    if f_hi < 0:
        if log_scale and lo > 0:
            lo, hi = expand_bracket(func, lo, hi if hi > lo else 2.0 * lo)
        else:
            raise NoRootError(f"func({hi!r}) < 0; root not bracketed")
    for _ in range(max_iter):
        if hi - lo <= rtol * abs(hi):
            break
        mid = math.sqrt(lo * hi) if log_scale and lo > 0 else 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if func(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi
