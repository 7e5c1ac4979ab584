"""Least-squares fitters and the batch pipeline of scaling laws."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, FeatureError, FitError, SpEigenError
from .features import amplitude_fit_window, extract_features, velocity_curve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    """Coefficients of one fitted model with OLS diagnostics.

    ``coefficients`` follow the model kind:

    * ``parabola``: ``(a2, a1, a0)`` for ``a2 x^2 + a1 x + a0``
    * ``linear``: ``(slope, intercept)``
    * ``power``: ``(prefactor, exponent)`` for ``b x^a``
    * ``shifted-power``: ``(prefactor, exponent)`` for ``asymptote + b x^a``
    """

    kind: str
    coefficients: tuple[float, ...]
    stderr: tuple[float, ...]
    r_squared: float
    n_points: int
    window: str = ""
    asymptote: float | None = None

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        if self.kind == "parabola":
            return c[0] * x * x + c[1] * x + c[2]
        if self.kind == "linear":
            return c[0] * x + c[1]
        if self.kind == "power":
            return c[0] * x ** c[1]
        if self.kind == "shifted-power":
            return self.asymptote + c[0] * x ** c[1]
        raise ValueError(self.kind)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coefficients"] = list(self.coefficients)
        d["stderr"] = list(self.stderr)
        return d


def _ols(design: np.ndarray, y: np.ndarray):
    n, p = design.shape
    if n < p:
        raise FitError(f"need at least {p} points, got {n}")
    if np.linalg.matrix_rank(design) < p:
        raise FitError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    dof = n - p
    if dof > 0:
        cov = ss_res / dof * np.linalg.inv(design.T @ design)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    else:
        se = np.full(p, math.nan)
    return coef, se, r2


def _arrays(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise FitError(f"x and y differ in length ({x.size} vs {y.size})")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data must be finite")
    return x, y


def fit_parabola(x, y, window: str = "") -> FitResult:
    """OLS fit of ``y = a2 x^2 + a1 x + a0``."""
    x, y = _arrays(x, y)
    if np.unique(x).size < 3:
        raise FitError("parabola needs at least 3 distinct x values")
    coef, se, r2 = _ols(np.column_stack([x * x, x, np.ones_like(x)]), y)
    return FitResult("parabola", tuple(map(float, coef)), tuple(map(float, se)), r2, x.size, window)


def fit_linear(x, y, window: str = "") -> FitResult:
    """OLS fit of ``y = slope * x + intercept``."""
    x, y = _arrays(x, y)
    if np.unique(x).size < 2:
        raise FitError("linear fit needs at least 2 distinct x values")
    coef, se, r2 = _ols(np.column_stack([x, np.ones_like(x)]), y)
    return FitResult("linear", tuple(map(float, coef)), tuple(map(float, se)), r2, x.size, window)


def fit_power_law(x, y, window: str = "") -> FitResult:
    """``y = b x^a`` by OLS in log-log space; R^2 refers to the log data."""
    x, y = _arrays(x, y)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("power-law fit needs strictly positive x and y")
    lin = fit_linear(np.log(x), np.log(y), window)
    a, logb = lin.coefficients
    se_a, se_logb = lin.stderr
    b = math.exp(logb)
    return FitResult("power", (b, a), (b * se_logb, se_a), lin.r_squared, x.size, window)


def fit_shifted_power(n, a, asymptote: float = -1.0, window: str = "") -> FitResult:
    """``a = asymptote + c n^p`` with the asymptote held fixed.

    ``a - asymptote`` must have one sign throughout; a negative offset is
    fitted as ``-|c| n^p``.
    """
    n, a = _arrays(n, a)
    off = a - asymptote
    pos, neg = off > 0, off < 0
    if not (np.all(pos) or np.all(neg)):
        major = pos if pos.sum() >= neg.sum() else neg
        bad = [(float(ni), float(ai)) for ni, ai, ok in zip(n, a, major) if not ok]
        raise DomainError(f"a - asymptote changes sign; offending points (n, a): {bad}")
    sign = 1.0 if np.all(pos) else -1.0
    pw = fit_power_law(n, sign * off, window)
    b, p = pw.coefficients
    return FitResult(
        "shifted-power", (sign * b, p), pw.stderr, pw.r_squared, n.size, window, float(asymptote)
    )


# --------------------------------------------------------------------------
# batch pipeline

LAW_NAMES = (
    "support_law",
    "outer_node_law",
    "outer_distance_law",
    "amplitude_laws",
    "exponent_law",
    "plateau_fits",
    "slope_law",
    "outer_velocity_law",
    "outer_radius_law",
)

EXPONENT_MIN_N = 20


@dataclass
class StateSummary:
    """Per-state quantities entering the scaling laws."""

    n: int
    epsilon: float
    support: float
    outer_node: float | None
    outer_distance: float | None
    amplitude_fit: FitResult | None
    amplitude_r_min: float | None
    amplitude_window: list[int] | None
    amplitude_monotone: bool | None
    plateau_fit: FitResult | None
    outer_velocity_radius: float
    outer_velocity: float


@dataclass
class HeuristicReport:
    """Every fitted scaling law over a batch of states."""

    states: dict[int, StateSummary] = field(default_factory=dict)
    support_law: FitResult | None = None
    outer_node_law: FitResult | None = None
    outer_distance_law: FitResult | None = None
    exponent_law: FitResult | None = None
    slope_law: FitResult | None = None
    outer_velocity_law: FitResult | None = None
    outer_radius_law: FitResult | None = None
    omitted: dict[str, str] = field(default_factory=dict)
    excluded: dict[int, str] = field(default_factory=dict)
    config_hash: str = ""
    eigenvalue_signs: dict[int, int] = field(default_factory=dict)

    @property
    def n_values(self) -> list[int]:
        return sorted(self.states)

    def amplitude_exponents(self) -> dict[int, float]:
        return {n: s.amplitude_fit.coefficients[1] for n, s in sorted(self.states.items()) if s.amplitude_fit}

    def amplitude_prefactors(self) -> dict[int, float]:
        return {n: s.amplitude_fit.coefficients[0] for n, s in sorted(self.states.items()) if s.amplitude_fit}

    def plateau_slopes(self) -> dict[int, float]:
        return {n: s.plateau_fit.coefficients[0] for n, s in sorted(self.states.items()) if s.plateau_fit}

    def present_laws(self) -> list[str]:
        out = []
        for name in LAW_NAMES:
            if name == "amplitude_laws":
                ok = bool(self.amplitude_exponents())
            elif name == "plateau_fits":
                ok = bool(self.plateau_slopes())
            else:
                ok = getattr(self, name) is not None
            if ok:
                out.append(name)
        return out

    def to_dict(self) -> dict:
        def fr(x):
            return None if x is None else x.to_dict()

        states = {}
        for n, s in sorted(self.states.items()):
            d = asdict(s)
            d["amplitude_fit"] = fr(s.amplitude_fit)
            d["plateau_fit"] = fr(s.plateau_fit)
            states[str(n)] = d
        return {
            "config_hash": self.config_hash,
            "n_values": self.n_values,
            "laws": {
                name: fr(getattr(self, name))
                for name in LAW_NAMES
                if name not in ("amplitude_laws", "plateau_fits")
            },
            "amplitude_exponents": {str(k): v for k, v in self.amplitude_exponents().items()},
            "amplitude_prefactors": {str(k): v for k, v in self.amplitude_prefactors().items()},
            "plateau_slopes": {str(k): v for k, v in self.plateau_slopes().items()},
            "states": states,
            "omitted": dict(sorted(self.omitted.items())),
            "excluded": {str(k): v for k, v in sorted(self.excluded.items())},
            "eigenvalue_signs": {str(k): v for k, v in sorted(self.eigenvalue_signs.items())},
        }


def summarize_state(state) -> StateSummary:
    """Features, amplitude law and velocity extrema of one state."""
    feats = extract_features(state)
    curve = velocity_curve(state, feats)
    n = state.n
    amp_fit = win = None
    if n >= 3:
        win = amplitude_fit_window(feats)
        idx = win.indices
        amp_fit = fit_power_law(
            feats.extrema_r[idx], feats.amplitudes[idx],
            window=f"i in [{idx[0]}, {idx[-1]}], r <= 0.95 r_min" if not win.monotone else "all i >= 1",
        )
    r2n, v2n = curve.outer_extremum
    return StateSummary(
        n=n,
        epsilon=state.epsilon,
        support=feats.effective_support,
        outer_node=float(feats.nodes[-1]) if n >= 1 else None,
        outer_distance=float(feats.nodal_distances[-1]) if n >= 2 else None,
        amplitude_fit=amp_fit,
        amplitude_r_min=None if win is None else win.r_min,
        amplitude_window=None if win is None else [int(i) for i in win.indices],
        amplitude_monotone=None if win is None else win.monotone,
        plateau_fit=curve.plateau_fit,
        outer_velocity_radius=r2n,
        outer_velocity=v2n,
    )


def _law(report, name, fitter, xs, ys, min_points, what, window=""):
    if len(xs) < min_points:
        report.omitted[name] = f"needs >= {min_points} states with {what}, have {len(xs)}"
        return
    try:
        setattr(report, name, fitter(xs, ys, window=window or f"n in {sorted(int(v) for v in xs)}"))
    except (FitError, DomainError) as exc:
        report.omitted[name] = str(exc)


def build_heuristic_report(states, config_hash: str = "") -> HeuristicReport:
    """Run every per-state and batch-level fit over ``states``.

    Non-converged states and states whose features cannot be extracted are
    listed in ``excluded`` instead of aborting the batch.
    """
    report = HeuristicReport(config_hash=config_hash)
    for st in sorted(states, key=lambda s: s.n):
        if not st.converged:
            report.excluded[st.n] = f"not converged: {st.message}"
            continue
        try:
            report.states[st.n] = summarize_state(st)
        except (SpEigenError, FeatureError) as exc:
            report.excluded[st.n] = f"feature extraction failed: {exc}"
            continue
        report.eigenvalue_signs[st.n] = int(np.sign(st.epsilon))

    items = sorted(report.states.items())

    ns = [n for n, _ in items]
    _law(report, "support_law", fit_parabola, ns, [s.support for _, s in items], 3, "an outer extremum")

    sel = [(n, s) for n, s in items if s.outer_node is not None]
    _law(report, "outer_node_law", fit_parabola, [n for n, _ in sel], [s.outer_node for _, s in sel], 3, "n >= 1")

    sel = [(n, s) for n, s in items if s.outer_distance is not None]
    _law(report, "outer_distance_law", fit_parabola, [n for n, _ in sel], [s.outer_distance for _, s in sel], 3, "n >= 2")

    sel = [(n, s) for n, s in items if s.amplitude_fit is not None and n >= EXPONENT_MIN_N]
    _law(
        report, "exponent_law", fit_shifted_power,
        [n for n, _ in sel], [s.amplitude_fit.coefficients[1] for _, s in sel], 2, f"n >= {EXPONENT_MIN_N}",
    )

    sel = [(n, s) for n, s in items if s.plateau_fit is not None]
    _law(report, "slope_law", fit_power_law, [n for n, _ in sel], [s.plateau_fit.coefficients[0] for _, s in sel], 2, "a plateau fit")

    nz = [(n, s) for n, s in items if n >= 1]
    _law(
        report, "outer_velocity_law", fit_power_law,
        [s.outer_velocity_radius for _, s in nz], [s.outer_velocity for _, s in nz], 2, "n >= 1",
        window=f"n in {[n for n, _ in nz]}",
    )
    _law(report, "outer_radius_law", fit_parabola, [n for n, _ in nz], [s.outer_velocity_radius for _, s in nz], 3, "n >= 1")
    return report
