"""Rescaled nodal patterns and rotation curves, and a measure of their collapse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FeatureError
from .features import EigenFeatures, VelocityCurve

NODAL = "nodal-pattern"
VELOCITY = "velocity"
DEFAULT_VELOCITY_WINDOW = (0.1, 1.0)
GRID_POINTS = 512


@dataclass(frozen=True, eq=False)
class RescaledCurve:
    """Curve normalized so that its anchor point maps to ``(1, 1)``."""

    n: int
    x: np.ndarray
    y: np.ndarray
    kind: str
    anchor: tuple[float, float] = (1.0, 1.0)

    def scaled(self, factor: float) -> "RescaledCurve":
        return RescaledCurve(self.n, self.x, self.y * factor, self.kind, self.anchor)


def rescale_nodal_pattern(features: EigenFeatures) -> RescaledCurve:
    """Points ``(z_{i+1} / z_n, d_i / d_{n-1})`` for ``i = 1..n-1``."""
    if features.n < 2 or features.nodes.size < 2:
        raise FeatureError("nodal pattern needs at least 2 nodes")
    z = features.nodes
    d = features.nodal_distances
    x = z[1:] / z[-1]
    y = d / d[-1]
    # exact self-normalization of the last point
    x[-1] = 1.0
    y[-1] = 1.0
    return RescaledCurve(features.n, x, y, NODAL, (float(z[-1]), float(d[-1])))


def rescale_velocity(curve) -> RescaledCurve:
    """``R = r / r_2n``, ``V = v / v_2n`` with ``(r_2n, v_2n)`` the outer extremum.

    Accepts a :class:`VelocityCurve` or an already rescaled velocity curve
    (which comes back unchanged in shape, its anchor being ``(1, 1)``).
    """
    if isinstance(curve, VelocityCurve):
        r0, v0 = curve.outer_extremum
        return RescaledCurve(curve.n, curve.v.r / r0, curve.v.values / v0, VELOCITY, (r0, v0))
    if isinstance(curve, RescaledCurve) and curve.kind == VELOCITY:
        return RescaledCurve(curve.n, curve.x.copy(), curve.y.copy(), VELOCITY, (1.0, 1.0))
    raise ContractError("rescale_velocity needs a velocity curve")


def _overlap(curves, window):
    lo = max(float(c.x[0]) for c in curves)
    hi = min(float(c.x[-1]) for c in curves)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    if not hi > lo:
        raise ContractError(f"curves have no common abscissa range (overlap [{lo:.4g}, {hi:.4g}])")
    return lo, hi


def collapse_metric(curves, window=None, points: int = GRID_POINTS) -> float:
    """Largest relative spread ``(max - min) / mean`` across curves.

    Curves are interpolated piecewise-linearly onto ``points`` abscissae
    spanning ``window`` clipped to the range shared by all curves.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ContractError("collapse metric needs at least 2 curves")
    kinds = {c.kind for c in curves}
    if len(kinds) != 1:
        raise ContractError(f"cannot compare curves of different kinds {sorted(kinds)}")
    lo, hi = _overlap(curves, window)
    grid = np.linspace(lo, hi, points)
    ys = np.array([np.interp(grid, c.x, c.y) for c in curves])
    mean = ys.mean(axis=0)
    spread = ys.max(axis=0) - ys.min(axis=0)
    return float(np.max(spread / np.abs(mean)))


def peak_normalized_velocity(curve: VelocityCurve, length_unit: float) -> RescaledCurve:
    """Velocity divided by its own maximum, radius by a common ``length_unit``.

    Baseline for judging how much the outer-extremum rescaling contributes.
    """
    v = curve.v.values
    return RescaledCurve(curve.n, curve.v.r / length_unit, v / v.max(), VELOCITY, (length_unit, float(v.max())))


def consecutive_nodal_metrics(features_by_n: dict[int, EigenFeatures]) -> list[tuple[int, int, float]]:
    """Collapse metric of each consecutive pair of nodal patterns (sorted by n)."""
    ns = sorted(features_by_n)
    curves = {n: rescale_nodal_pattern(features_by_n[n]) for n in ns}
    return [(a, b, collapse_metric([curves[a], curves[b]])) for a, b in zip(ns[:-1], ns[1:])]


def count_inversions(values) -> int:
    """Number of consecutive increases in a sequence expected to be non-increasing."""
    v = np.asarray(values, dtype=float)
    return int(np.count_nonzero(np.diff(v) > 0))


def collapse_summary(curves_by_n: dict[int, VelocityCurve], features_by_n: dict[int, EigenFeatures], window=DEFAULT_VELOCITY_WINDOW) -> dict:
    """Velocity collapse with its peak-normalized baseline, plus nodal pair metrics.

    The baseline divides each velocity by its own maximum and every radius by
    the smallest outer-extremum radius of the batch, so it shares the window
    but skips the per-state rescaling.
    """
    ns = sorted(curves_by_n)
    out = {"window": list(window), "n_values": ns}
    if len(ns) >= 2:
        scaled = [rescale_velocity(curves_by_n[n]) for n in ns]
        unit = min(curves_by_n[n].outer_extremum[0] for n in ns)
        raw = [peak_normalized_velocity(curves_by_n[n], unit) for n in ns]
        out["velocity_metric"] = collapse_metric(scaled, window)
        out["baseline_metric"] = collapse_metric(raw, window)
    nodal = {n: f for n, f in features_by_n.items() if f.n >= 3}
    if len(nodal) >= 2:
        pairs = consecutive_nodal_metrics(nodal)
        out["nodal_pairs"] = [list(p) for p in pairs]
        out["nodal_inversions"] = count_inversions([p[2] for p in pairs])
    return out
