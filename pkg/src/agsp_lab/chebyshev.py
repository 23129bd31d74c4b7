"""Rescaled Chebyshev window filters.

Given a spectral window ``eps0 < eps1 <= u`` (ground energy, bottom and top
of the excited band), the degree-l filter

    C_l(y) = T_l(f(y)) / T_l(f(eps0)),   f(y) = (u + eps1 - 2y) / (u - eps1)

is 1 at ``eps0`` and uniformly small on ``[eps1, u]``: the guaranteed bound
is ``2 exp(-2 l sqrt((eps1 - eps0) / (u - eps0)))``.  Evaluation outside
``[-1, 1]`` runs in the log domain so the normalization never overflows.

Applying the filter to an operator uses the three-term recurrence on the
affinely rescaled matrix, never a dense matrix polynomial.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import HermitianOperator


class FilterError(ValueError):
    """Degenerate window or invalid degree/target."""


def chebyshev_T(l: int, x):
    """Chebyshev polynomial T_l(x), scalar or elementwise on arrays.

    Uses cos(l arccos x) on [-1, 1] and cosh(l arccosh |x|) with sign
    handling outside; matches the three-term recurrence to high accuracy
    for moderate degrees.
    """
    if l < 0:
        raise FilterError(f"degree must be >= 0, got {l}")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    inside = np.abs(x) <= 1.0
    out[inside] = np.cos(l * np.arccos(x[inside]))
    big = ~inside
    if big.any():
        ax = np.abs(x[big])
        val = np.cosh(l * np.arccosh(ax))
        sign = np.where(x[big] < 0, (-1.0) ** l, 1.0)
        out[big] = sign * val
    return out if out.ndim else float(out)


def _log_cosh(w):
    """log(cosh(w)) for w >= 0, overflow-safe."""
    w = np.asarray(w, dtype=float)
    return w + np.log1p(np.exp(-2.0 * w)) - np.log(2.0)


def _log_abs_chebyshev(l: int, x):
    """(log |T_l(x)|, sign) elementwise, stable for large l."""
    x = np.asarray(x, dtype=float)
    logv = np.empty_like(x)
    sign = np.ones_like(x)
    inside = np.abs(x) <= 1.0
    if inside.any():
        t = np.cos(l * np.arccos(x[inside]))
        with np.errstate(divide="ignore"):
            logv[inside] = np.log(np.abs(t))
        sign[inside] = np.sign(t)
    big = ~inside
    if big.any():
        logv[big] = _log_cosh(l * np.arccosh(np.abs(x[big])))
        sign[big] = np.where(x[big] < 0, (-1.0) ** l, 1.0)
    return logv, sign


@dataclass(frozen=True)
class ChebyshevFilter:
    """Degree-l window filter with cached log normalization.

    ``point_window`` marks the degenerate case ``eps1 == u``, where the
    filter collapses to the monomial ``((eps1 - y) / (eps1 - eps0))^l``.
    """

    degree: int
    eps0: float
    eps1: float
    u: float
    log_norm: float
    point_window: bool

    def map(self, y):
        """The affine map f sending eps1 -> 1 and u -> -1."""
        if self.point_window:
            raise FilterError("point window has no affine map")
        return (self.u + self.eps1 - 2.0 * np.asarray(y, dtype=float)) / (self.u - self.eps1)

    def to_descriptor(self) -> dict:
        return {
            "l": self.degree,
            "eps0": self.eps0,
            "eps1": self.eps1,
            "u": self.u,
            "shrink_bound": shrink_bound(self),
        }


def build_filter(l: int, eps0: float, eps1: float, u: float) -> ChebyshevFilter:
    """Construct the filter for the window (eps0, eps1, u).

    Requires ``eps0 < eps1 <= u`` and ``l >= 0`` (degree 0 is the constant
    1, the identity filter).
    """
    if l < 0:
        raise FilterError(f"degree must be >= 0, got {l}")
    if not (np.isfinite(eps0) and np.isfinite(eps1) and np.isfinite(u)):
        raise FilterError("window values must be finite")
    if eps1 <= eps0:
        raise FilterError(f"degenerate window: eps1={eps1} <= eps0={eps0}")
    if u < eps1:
        raise FilterError(f"degenerate window: u={u} < eps1={eps1}")
    if u == eps1:
        return ChebyshevFilter(l, eps0, eps1, u, log_norm=0.0, point_window=True)
    x0 = (u + eps1 - 2.0 * eps0) / (u - eps1)  # f(eps0) > 1
    log_norm, _ = _log_abs_chebyshev(l, x0)
    return ChebyshevFilter(l, eps0, eps1, u, log_norm=float(log_norm), point_window=False)


def eval_filter(filt: ChebyshevFilter, y):
    """C_l(y), scalar or elementwise; exact 1 at eps0 by construction."""
    y = np.asarray(y, dtype=float)
    if filt.point_window:
        out = ((filt.eps1 - y) / (filt.eps1 - filt.eps0)) ** filt.degree
        return out if out.ndim else float(out)
    z = filt.map(y)
    logv, sign = _log_abs_chebyshev(filt.degree, z)
    out = sign * np.exp(logv - filt.log_norm)
    return out if out.ndim else float(out)


def shrink_bound(filt: ChebyshevFilter) -> float:
    """Guaranteed sup of |C_l| on [eps1, u]: 2 exp(-2 l sqrt((eps1-eps0)/(u-eps0)))."""
    return shrink_bound_for_window(filt.degree, filt.eps0, filt.eps1, filt.u)


def shrink_bound_for_window(l: int, eps0: float, eps1: float, u: float) -> float:
    ratio = (eps1 - eps0) / (u - eps0)
    return float(2.0 * np.exp(-2.0 * l * np.sqrt(ratio)))


def degree_for_target(delta_target: float, eps0: float, eps1: float, u: float) -> int:
    """Smallest degree whose shrink bound is at most sqrt(delta_target)."""
    if not (0.0 < delta_target < 1.0):
        raise FilterError(f"delta target must lie in (0, 1), got {delta_target}")
    if eps1 <= eps0 or u < eps1:
        raise FilterError(f"degenerate window ({eps0}, {eps1}, {u})")
    target = np.sqrt(delta_target)
    ratio = (eps1 - eps0) / (u - eps0)
    l = max(1, int(np.ceil(np.log(2.0 / target) / (2.0 * np.sqrt(ratio)))))
    while l > 1 and shrink_bound_for_window(l - 1, eps0, eps1, u) <= target:
        l -= 1
    while shrink_bound_for_window(l, eps0, eps1, u) > target:
        l += 1
    return l


def apply_filter_dense(filt: ChebyshevFilter, H, v: np.ndarray, spectrum: tuple[float, float] | None = None) -> np.ndarray:
    """C_l(H) v by the three-term recurrence on the rescaled operator.

    ``v`` may be a unit vector or a matrix of unit columns.  The spectrum of
    ``H`` should sit inside the filter window up to a relative slack of
    1e-6 (u - eps0); values outside amplify and only trigger a warning.
    Intermediate vectors are renormalized against overflow, so degrees in
    the hundreds stay finite.
    """
    mat = H.entries if isinstance(H, HermitianOperator) else np.asarray(H)
    v = np.asarray(v)
    norms = np.linalg.norm(v, axis=0)
    if np.abs(norms - 1.0).max() > 1e-10:
        raise FilterError("input columns must be normalized")

    slack = 1e-6 * (filt.u - filt.eps0)
    if spectrum is None and isinstance(H, HermitianOperator) and H._decomposition is not None:
        w = H._decomposition.eigenvalues
        spectrum = (float(w[0]), float(w[-1]))
    if spectrum is not None and (spectrum[0] < filt.eps0 - slack or spectrum[1] > filt.u + slack):
        warnings.warn(
            f"operator spectrum {spectrum} leaves the filter window "
            f"({filt.eps0:g}, {filt.u:g}); filter values there amplify",
            stacklevel=2,
        )

    if filt.degree == 0:
        return v.copy()

    if filt.point_window:
        c = 1.0 / (filt.eps1 - filt.eps0)
        out = v
        for _ in range(filt.degree):
            out = c * (filt.eps1 * out - mat @ out)
        return out

    a = -2.0 / (filt.u - filt.eps1)
    b = (filt.u + filt.eps1) / (filt.u - filt.eps1)

    def fH(x):
        return a * (mat @ x) + b * x

    log_scale = 0.0
    w_prev = v.astype(np.result_type(mat.dtype, v.dtype), copy=True)
    w_cur = fH(w_prev)
    for _ in range(filt.degree - 1):
        w_next = 2.0 * fH(w_cur) - w_prev
        w_prev, w_cur = w_cur, w_next
        peak = np.abs(w_cur).max()
        if peak > 1e120:
            w_prev = w_prev / peak
            w_cur = w_cur / peak
            log_scale += np.log(peak)
    return w_cur * np.exp(log_scale - filt.log_norm)
