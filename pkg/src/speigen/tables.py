"""Tabular datasets behind each figure-style output.

Every builder returns ``(header, rows)``; :mod:`speigen.io` renders them with
a fixed float format so identical inputs give byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .features import EigenFeatures, VelocityCurve
from .fits import HeuristicReport
from .universality import RescaledCurve, rescale_nodal_pattern

RESCALED_VELOCITY_GRID = np.linspace(0.0, 2.0, 401)


def node_table(feats: EigenFeatures):
    return ["i", "z"], [(i + 1, z) for i, z in enumerate(feats.nodes)]


def nodal_distance_table(feats: EigenFeatures):
    """``d_i`` against its right node ``z_{i+1}``, ``i = 1..n-1``."""
    z = feats.nodes
    rows = [(i + 1, z[i + 1], d) for i, d in enumerate(feats.nodal_distances)]
    return ["i", "right_node", "distance"], rows


def extrema_table(feats: EigenFeatures):
    rows = [(i, r, f) for i, (r, f) in enumerate(zip(feats.extrema_r, feats.extrema_f))]
    return ["i", "r", "f"], rows


def velocity_extrema_table(curve: VelocityCurve):
    rows = [(i, r, v) for i, (r, v) in enumerate(zip(curve.extrema_r, curve.extrema_v))]
    return ["i", "r", "v"], rows


def rescaled_nodal_table(feats: EigenFeatures):
    """Normalized pattern ``(Z_{i+1}, D_i)``; empty for ``n < 2``."""
    if feats.n < 2:
        return ["i", "Z", "D"], []
    c = rescale_nodal_pattern(feats)
    return ["i", "Z", "D"], [(i + 1, x, y) for i, (x, y) in enumerate(zip(c.x, c.y))]


def support_table(report: HeuristicReport):
    return ["n", "r_hat_n"], [(n, s.support) for n, s in sorted(report.states.items())]


def outer_node_table(report: HeuristicReport):
    rows = [
        (n, s.outer_node, s.outer_distance)
        for n, s in sorted(report.states.items())
        if s.outer_distance is not None
    ]
    return ["n", "z_n", "d_n_minus_1"], rows


def amplitude_table(report: HeuristicReport, features_by_n: dict[int, EigenFeatures]):
    """Every ``(r_i, |f_i|)`` for ``i >= 1`` with a flag for fit inclusion."""
    rows = []
    for n, s in sorted(report.states.items()):
        if s.amplitude_window is None:
            continue
        feats = features_by_n[n]
        used = set(s.amplitude_window)
        for i in range(1, n + 1):
            rows.append((n, i, feats.extrema_r[i], abs(feats.extrema_f[i]), i in used))
    return ["n", "i", "r_hat", "abs_f", "included"], rows


def exponent_table(report: HeuristicReport):
    rows = [
        (n, s.amplitude_fit.coefficients[1], s.amplitude_fit.coefficients[0], s.amplitude_r_min, s.amplitude_monotone)
        for n, s in sorted(report.states.items())
        if s.amplitude_fit is not None
    ]
    return ["n", "a", "b", "r_min", "monotone"], rows


def plateau_table(report: HeuristicReport, curves_by_n: dict[int, VelocityCurve]):
    rows = []
    for n, s in sorted(report.states.items()):
        if s.plateau_fit is None:
            continue
        lo, hi = curves_by_n[n].plateau_window
        rows.append((n, s.plateau_fit.coefficients[0], s.plateau_fit.coefficients[1], lo, hi))
    return ["n", "sigma", "q", "r_lo", "r_hi"], rows


def outer_velocity_table(report: HeuristicReport):
    rows = [(n, s.outer_velocity_radius, s.outer_velocity) for n, s in sorted(report.states.items())]
    return ["n", "r_2n", "v_2n"], rows


def rescaled_velocity_table(curves: list[RescaledCurve], grid=RESCALED_VELOCITY_GRID):
    """Rescaled curves resampled on a shared ``R`` grid (clipped to each curve)."""
    rows = []
    for c in sorted(curves, key=lambda c: c.n):
        sel = grid[grid <= c.x[-1]]
        for R, V in zip(sel, np.interp(sel, c.x, c.y)):
            rows.append((c.n, R, V))
    return ["n", "R", "V"], rows


def nodal_collapse_table(pairs):
    return ["n_a", "n_b", "metric"], list(pairs)
