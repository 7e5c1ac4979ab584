"""Nodes, extrema and the rotation (eigenvelocity) curve of a state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FeatureError
from .potential import RadialProfile, cumulative_mass

TAIL_TOL = 1e-12
KEPLER_START = 1.2


def find_nodes(f: RadialProfile, n: int | None = None) -> np.ndarray:
    """Radii where ``f`` changes sign, linearly interpolated.

    Exact zeros are skipped over, so a sample that hits zero is not counted
    twice.  With ``n`` given, a different count raises :class:`FeatureError`.
    """
    r = f.r
    v = f.values
    idx = np.nonzero(v != 0.0)[0]
    idx = idx[idx > 0] if v[0] == 0.0 else idx
    a, b = idx[:-1], idx[1:]
    flip = v[a] * v[b] < 0
    a, b = a[flip], b[flip]
    nodes = r[a] - v[a] * (r[b] - r[a]) / (v[b] - v[a])
    if n is not None and nodes.size != n:
        raise FeatureError(f"found {nodes.size} nodes, expected {n}", expected=n, found=nodes.size)
    return nodes


def _vertex(r, y, i):
    """Quadratic vertex through samples ``i-1, i, i+1``."""
    if i <= 0 or i >= y.size - 1:
        return float(r[i]), float(y[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    h0, h1 = r[i] - r[i - 1], r[i + 1] - r[i]
    # divided differences of the interpolating parabola
    d1 = (y1 - y0) / h0
    d2 = (y2 - y1) / h1
    c = (d2 - d1) / (h0 + h1)
    if c == 0.0:
        return float(r[i]), float(y1)
    b = d1 - c * (r[i - 1] + r[i])
    x = -b / (2.0 * c)
    x = min(max(x, r[i - 1]), r[i + 1])
    val = y0 + (x - r[i - 1]) * (d1 + c * (x - r[i]))
    return float(x), float(val)


def _turning_indices(y: np.ndarray, tol: float) -> np.ndarray:
    """Indices of local extrema of ``y`` ignoring steps smaller than ``tol``."""
    d = np.diff(y)
    s = np.sign(d)
    s[np.abs(d) <= tol] = 0
    nz = np.nonzero(s)[0]
    if nz.size < 2:
        return np.zeros(0, dtype=int)
    flips = np.nonzero(s[nz[1:]] != s[nz[:-1]])[0]
    out = []
    for k in flips:
        lo, hi = nz[k], nz[k + 1]
        # extremum sample lies in (lo, hi]; take the most extreme one there
        seg = y[lo + 1 : hi + 1]
        j = np.argmax(seg) if s[lo] > 0 else np.argmin(seg)
        out.append(lo + 1 + j)
    return np.asarray(out, dtype=int)


def find_extrema(f: RadialProfile, n: int | None = None, tol: float = TAIL_TOL):
    """Local extrema ``(r_i, f_i)``, the first one at ``r = 0``.

    Interior extrema are refined by a three-point quadratic vertex.  Beyond
    the last extremum the profile must be monotone up to wiggles of ``tol``.
    With ``n`` given, anything but ``n + 1`` extrema raises
    :class:`FeatureError`.

    Returns
    -------
    radii, values : ndarray
    """
    r = f.r
    v = f.values
    turns = _turning_indices(v, tol)
    turns = turns[turns > 0]
    pts = [(0.0, float(v[0]))] + [_vertex(r, v, i) for i in turns]
    radii = np.array([p[0] for p in pts])
    values = np.array([p[1] for p in pts])
    if n is not None and radii.size != n + 1:
        raise FeatureError(
            f"found {radii.size} extrema, expected {n + 1}", expected=n + 1, found=radii.size
        )
    if not tail_is_monotone(f, radii[-1], tol):
        raise FeatureError("profile is not monotone beyond its last extremum")
    return radii, values


def tail_is_monotone(f: RadialProfile, start: float, tol: float = TAIL_TOL) -> bool:
    """``|f|`` never increases by more than ``tol`` for ``r > start``."""
    tail = np.abs(f.values[f.r > start])
    if tail.size < 2:
        return True
    return bool(np.all(np.diff(tail) <= tol))


@dataclass(frozen=True, eq=False)
class EigenFeatures:
    """Nodes ``z``, nodal distances ``d`` and extrema of one eigenfunction."""

    n: int
    nodes: np.ndarray
    nodal_distances: np.ndarray
    extrema_r: np.ndarray
    extrema_f: np.ndarray

    @property
    def effective_support(self) -> float:
        return float(self.extrema_r[-1])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.extrema_f)

    @property
    def amplitudes_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.amplitudes) < 0))

    @property
    def signs_alternate(self) -> bool:
        s = np.sign(self.extrema_f)
        return bool(np.all(s != 0) and np.all(s[1:] == -s[:-1]))

    @property
    def interlaced(self) -> bool:
        """``r_{i-1} < z_i < r_i`` for every node."""
        z = self.nodes
        if z.size != self.extrema_r.size - 1:
            return False
        return bool(np.all(self.extrema_r[:-1] < z) and np.all(z < self.extrema_r[1:]))


def extract_features(state) -> EigenFeatures:
    """Features of a solved state; counts are checked against ``state.n``."""
    n = state.n
    z = find_nodes(state.f, n)
    rr, ff = find_extrema(state.f, n)
    return EigenFeatures(n=n, nodes=z, nodal_distances=np.diff(z), extrema_r=rr, extrema_f=ff)


@dataclass(frozen=True)
class AmplitudeWindow:
    indices: np.ndarray
    r_min: float
    monotone: bool


def amplitude_fit_window(features: EigenFeatures, cutoff: float = 0.95) -> AmplitudeWindow:
    """Extrema used for the amplitude power law.

    ``r_min`` is the radius of the smallest ``|f_i|`` over ``i >= 1``; the
    window keeps ``i >= 1`` with ``r_i <= cutoff * r_min``.  When the
    amplitudes never turn up again (minimum at the last extremum) the window
    is every ``i >= 1`` and ``monotone`` is set.
    """
    if features.n < 3:
        raise ContractError("amplitude window needs n >= 3")
    amp = features.amplitudes
    rr = features.extrema_r
    k = 1 + int(np.argmin(amp[1:]))
    r_min = float(rr[k])
    if k == amp.size - 1:
        return AmplitudeWindow(np.arange(1, amp.size), r_min, True)
    idx = np.nonzero(rr[1:] <= cutoff * r_min)[0] + 1
    return AmplitudeWindow(idx, r_min, False)


@dataclass(frozen=True, eq=False)
class VelocityCurve:
    """Eigenvelocity profile with its extrema and mid-range linear fit."""

    n: int
    v: RadialProfile
    extrema_r: np.ndarray
    extrema_v: np.ndarray
    total_mass: float
    plateau_fit: object | None = None
    kepler_deviation: float = math.nan
    asymptotic_prefactor: float = math.nan

    @property
    def outer_extremum(self) -> tuple[float, float]:
        return float(self.extrema_r[-1]), float(self.extrema_v[-1])

    @property
    def plateau_window(self) -> tuple[float, float] | None:
        if self.n < 3:
            return None
        return float(self.extrema_r[2]), float(self.extrema_r[2 * self.n - 2])


def velocity_profile(density: RadialProfile, quadrature: str = "trapezoid") -> RadialProfile:
    """``v(r) = sqrt(M(r) / r)`` with ``v(0) = 0``."""
    r = density.r
    m = cumulative_mass(density, quadrature)
    v = np.zeros_like(r)
    v[1:] = np.sqrt(np.maximum(m[1:], 0.0) / r[1:])
    return RadialProfile(density.grid, v)


def kepler_deviation(v: RadialProfile, start: float) -> float:
    """``max |r v^2 - M_tot| / M_tot`` over ``r >= start``."""
    r = v.r
    mass = r * v.values ** 2
    total = mass[-1]
    if total == 0.0:
        return 0.0
    sel = r >= start
    return float(np.max(np.abs(mass[sel] - total)) / total)


def velocity_curve(state, features: EigenFeatures | None = None) -> VelocityCurve:
    """Eigenvelocity of ``state`` with its ``2n + 1`` extrema and plateau fit."""
    from .fits import fit_linear

    n = state.n
    quad = state.config.quadrature if state.config else "trapezoid"
    density = RadialProfile(state.grid, state.f.values ** 2)
    v = velocity_profile(density, quad)
    r = v.r
    total = float(r[-1] * v.values[-1] ** 2)
    turns = _turning_indices(v.values, 0.0)
    turns = turns[turns > 0]
    pts = [_vertex(r, v.values, i) for i in turns]
    er = np.array([p[0] for p in pts])
    ev = np.array([p[1] for p in pts])
    if total == 0.0:
        return VelocityCurve(n, v, er, ev, 0.0, None, 0.0, 0.0)
    if er.size != 2 * n + 1:
        raise FeatureError(
            f"velocity curve has {er.size} extrema, expected {2 * n + 1}",
            expected=2 * n + 1, found=er.size,
        )
    if features is None:
        features = extract_features(state)
    plateau = None
    # [r_2, r_{2n-2}] collapses to a point for n = 2
    if n >= 3:
        sel = (r >= er[2]) & (r <= er[2 * n - 2])
        plateau = fit_linear(r[sel], v.values[sel], window=f"[{er[2]:.6g}, {er[2 * n - 2]:.6g}]")
    dev = kepler_deviation(v, KEPLER_START * features.effective_support)
    prefactor = float(v.values[-1] * math.sqrt(r[-1]))
    return VelocityCurve(n, v, er, ev, total, plateau, dev, prefactor)


def velocity_interlaced(curve: VelocityCurve, features: EigenFeatures) -> bool:
    """Each velocity extremum sits strictly inside its own gap of the merged
    sequence ``0 = r_0 < z_1 < r_1 < ... < z_n < r_n < r_max``."""
    merged = np.sort(np.concatenate([features.extrema_r, features.nodes, [curve.v.r[-1]]]))
    if curve.extrema_r.size != merged.size - 1:
        return False
    return bool(np.all(merged[:-1] < curve.extrema_r) and np.all(curve.extrema_r < merged[1:]))
