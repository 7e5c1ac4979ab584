"""Spherically symmetric stationary states of the Schrödinger–Poisson system.

The stationary problem for ``(eps, f, phi)`` is::

    Laplacian(f) - 2 phi f = eps f,   Laplacian(phi) = f^2,   4 pi int f^2 r^2 dr = 1

With ``u = r f`` the radial equation reads ``u'' = (eps + 2 phi) u`` with
``u(0) = 0``; bound states have ``eps > 0`` in this convention.

The solve is two nested loops.  The inner loop freezes ``phi``, finds the
linear eigenfunction with exactly ``n`` nodes by shooting and bisection on
``eps``, renormalizes it and updates ``phi`` with damped mixing, until ``eps``
stops moving.  The outer loop enlarges the domain until ``eps`` no longer
depends on its size.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import _shooting
from .errors import BracketError, ContractError, DomainError, FeatureError, NodeCountError
from .potential import QUADRATURES, RadialGrid, RadialProfile, l2_mass, poisson_potential

log = logging.getLogger(__name__)

MAX_N = 80
INTEGRATORS = ("numerov", "rk4")


def support_estimate(n: int) -> float:
    """Rough radius of the outermost oscillation of state ``n``.

    Empirical quadratic in ``n``; only used to size the first domain.
    """
    return 131.0 * n * n + 53.53 * n + 340.0


def default_grid_points(n: int) -> int:
    """Default number of points on the initial domain.

    Keeps well over 16 points per shortest local wavelength for n <= 80.
    """
    return 6000 + 800 * n


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of one stationary-state solve.

    ``initial_domain`` and ``grid_points`` default to ``None``, meaning they
    are derived from ``n`` (see :meth:`resolved`).  The grid step fixed on the
    initial domain is kept when the domain grows.
    """

    n: int
    initial_domain: float | None = None
    domain_growth_factor: float = 1.5
    inner_tol: float = 1e-10
    outer_tol: float = 1e-6
    max_inner_iters: int = 2000
    max_outer_iters: int = 30
    grid_points: int | None = None
    mixing: float = 0.5
    integrator: str = "numerov"
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 0:
            raise DomainError(f"excitation index must be a non-negative integer, got {self.n!r}")
        if self.n > MAX_N:
            raise DomainError(f"excitation index {self.n} exceeds the validated range n <= {MAX_N}")
        object.__setattr__(self, "n", int(self.n))
        if not (self.inner_tol > 0 and self.outer_tol > 0):
            raise ContractError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ContractError("iteration caps must be >= 1")
        if not self.domain_growth_factor > 1:
            raise ContractError("domain_growth_factor must exceed 1")
        if not 0.0 <= self.mixing <= 1.0:
            raise ContractError("mixing must lie in [0, 1]")
        if self.initial_domain is not None and not self.initial_domain > 0:
            raise ContractError("initial_domain must be positive")
        if self.grid_points is not None and self.grid_points < 16:
            raise ContractError("grid_points must be at least 16")
        if self.integrator not in INTEGRATORS:
            raise ContractError(f"integrator must be one of {INTEGRATORS}")
        if self.quadrature not in QUADRATURES:
            raise ContractError(f"quadrature must be one of {QUADRATURES}")

    def resolved(self) -> "SolverConfig":
        """Copy with the ``None`` defaults filled in."""
        domain = self.initial_domain
        if domain is None:
            domain = 1.3 * support_estimate(self.n)
        points = self.grid_points if self.grid_points is not None else default_grid_points(self.n)
        return replace(self, initial_domain=float(domain), grid_points=int(points))

    @property
    def step(self) -> float:
        cfg = self.resolved()
        return cfg.initial_domain / (cfg.grid_points - 1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def config_hash(self) -> str:
        """Stable digest of the resolved configuration, excluding ``n``."""
        payload = self.resolved().to_dict()
        payload.pop("n")
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class EigenState:
    """One stationary state ``(eps_n, f_n, phi_n)`` with solve diagnostics."""

    n: int
    epsilon: float
    f: RadialProfile
    phi: RadialProfile
    norm_residual: float
    eq_residual: float
    converged: bool
    iterations: tuple[int, int] = (0, 0)
    config: SolverConfig | None = None
    eps_history: tuple[float, ...] = ()
    message: str = ""

    @property
    def grid(self) -> RadialGrid:
        return self.f.grid

    @property
    def r(self) -> np.ndarray:
        return self.f.grid.r

    def __repr__(self):
        flag = "converged" if self.converged else "NOT converged"
        return (
            f"EigenState(n={self.n}, epsilon={self.epsilon:.10g}, r_max={self.grid.r_max:.6g}, "
            f"points={self.grid.size}, {flag})"
        )


def count_sign_changes(values: np.ndarray) -> int:
    """Sign changes between consecutive non-zero samples."""
    v = values[values != 0.0]
    return int(np.count_nonzero(v[1:] * v[:-1] < 0))


def _f_from_u(r: np.ndarray, u: np.ndarray) -> np.ndarray:
    f = np.empty_like(u)
    f[1:] = u[1:] / r[1:]
    # f is even in r: extrapolate in r^2
    f[0] = (4.0 * f[1] - f[2]) / 3.0
    return f


def normalize(f: np.ndarray, grid: RadialGrid, quadrature: str = "trapezoid") -> np.ndarray:
    """Scale ``f`` to unit 3-D norm with ``f(0) > 0``."""
    mass = l2_mass(RadialProfile(grid, f), quadrature)
    if not mass > 0:
        raise ContractError("cannot normalize a vanishing profile")
    out = f / math.sqrt(mass)
    if out[0] < 0:
        out = -out
    return out


def equation_residual(epsilon: float, f: RadialProfile, phi: RadialProfile) -> float:
    """Relative L2 residual of ``u'' = (eps + 2 phi) u`` for ``u = r f``.

    Uses the fourth-order compact (Numerov) stencil on interior points.
    """
    grid = f.grid
    if not grid.same_as(phi.grid):
        raise ContractError("f and phi live on different grids")
    if not grid.is_uniform:
        raise ContractError("equation_residual requires a uniform grid")
    h = grid.step
    u = grid.r * f.values
    gu = (epsilon + 2.0 * phi.values) * u
    res = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h) - (gu[2:] + 10.0 * gu[1:-1] + gu[:-2]) / 12.0
    scale = np.linalg.norm(gu[1:-1])
    if scale == 0.0:
        return float(np.linalg.norm(res))
    return float(np.linalg.norm(res) / scale)


def residual_floor(state: EigenState) -> float:
    """Round-off level of :func:`equation_residual` for ``state``.

    One ulp of error in each sample of ``u`` perturbs the second difference
    by about ``eps_mach * (|u_-| + 2|u| + |u_+|) / h^2``; this is that bound in
    the same relative L2 norm.  Residuals at or below it carry no information.
    """
    h = state.grid.step
    u = state.grid.r * state.f.values
    gu = (state.epsilon + 2.0 * state.phi.values) * u
    scale = np.linalg.norm(gu[1:-1])
    if h is None or scale == 0.0:
        return math.nan
    stencil = (np.abs(u[2:]) + 2.0 * np.abs(u[1:-1]) + np.abs(u[:-2])) / (h * h)
    return float(np.finfo(float).eps * np.linalg.norm(stencil) / scale)


def points_per_wavelength(state: EigenState) -> float:
    """Grid points per shortest local oscillation wavelength of ``state``."""
    g = state.epsilon + 2.0 * state.phi.values
    kmax = math.sqrt(max(-g.min(), 0.0))
    if kmax == 0.0:
        return math.inf
    return 2.0 * math.pi / (kmax * state.grid.step)


# --------------------------------------------------------------------------
# frozen-potential linear eigenproblem


def _node_counter(integrator: str, h: float, phi: np.ndarray):
    if integrator == "numerov":
        return lambda eps: _shooting.numerov_count(eps + 2.0 * phi, h)
    phim = _shooting.midpoint_values(phi)
    return lambda eps: _shooting.rk4_count(eps + 2.0 * phi, eps + 2.0 * phim, h)


def bracket_eigenvalue(phi: RadialProfile, n: int, integrator: str = "numerov", max_expansions: int = 200):
    """Interval ``(lo, hi)`` with ``>= n+1`` nodes at ``lo`` and ``<= n`` at ``hi``."""
    h = phi.grid.step
    pv = phi.values
    count = _node_counter(integrator, h, pv)
    depth = -2.0 * pv.min()
    hi = max(depth, 0.0) * (1.0 + 1e-9) + 1e-300
    nodes_hi = count(hi)
    if nodes_hi > n:
        raise BracketError(
            f"upper bracket {hi:.6g} still has {nodes_hi} nodes (> {n})",
            n=n, hi=hi, nodes_hi=nodes_hi,
        )
    lo = 0.0
    nodes_lo = count(lo)
    step = max(hi, 1e-300)
    k = 0
    while nodes_lo < n + 1:
        k += 1
        if k > max_expansions:
            raise BracketError(
                f"no eigenvalue window with {n} nodes: {nodes_lo} nodes at eps={lo:.6g}, "
                f"{nodes_hi} at eps={hi:.6g}",
                n=n, lo=lo, hi=hi, nodes_lo=nodes_lo, nodes_hi=nodes_hi,
            )
        lo = -step
        step *= 2.0
        nodes_lo = count(lo)
    return lo, hi, count


def solve_frozen(phi: RadialProfile, n: int, integrator: str = "numerov", quadrature: str = "trapezoid"):
    """Eigenvalue and normalized eigenfunction with ``n`` nodes in a fixed potential.

    Returns
    -------
    epsilon : float
    f : ndarray
        Unit-norm eigenfunction samples, ``f(0) > 0``.
    """
    grid = phi.grid
    if not grid.is_uniform:
        raise ContractError("shooting requires a uniform grid")
    h = grid.step
    lo, hi, count = bracket_eigenvalue(phi, n, integrator)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if count(mid) >= n + 1:
            lo = mid
        else:
            hi = mid
    eps = 0.5 * (lo + hi)

    pv = phi.values
    g = eps + 2.0 * pv
    size = g.size
    allowed = np.nonzero(g < 0.0)[0]
    # match at the outermost classical turning point, where |u| peaks
    m = int(allowed[-1]) + 1 if allowed.size else size - 1
    if integrator == "numerov":
        if m >= size - 3:
            u = _shooting.numerov_outward(g, h, size - 1)
        else:
            u_out = _shooting.numerov_outward(g, h, m)
            u_in = _shooting.numerov_inward(g, h, m)
            u = np.concatenate([u_out[:m], u_in[m:] * (u_out[m] / u_in[m])])
    else:
        gm = eps + 2.0 * _shooting.midpoint_values(pv)
        if m >= size - 3:
            u = _shooting.rk4_outward(g, gm, h, size - 1)
        else:
            u_out = _shooting.rk4_outward(g, gm, h, m)
            u_in = _shooting.rk4_inward(g, gm, h, m)
            u = np.concatenate([u_out[:m], u_in[m:] * (u_out[m] / u_in[m])])
    u[-1] = 0.0
    f = normalize(_f_from_u(grid.r, u), grid, quadrature)
    found = count_sign_changes(f[1:])
    if found != n:
        raise NodeCountError(
            f"shooting produced {found} nodes, expected {n} (eps={eps:.10g})",
            expected=n, found=found,
        )
    return eps, f


# --------------------------------------------------------------------------
# self-consistent iteration


def _make_state(cfg, eps, f, phi, converged, iterations=(0, 0), history=(), message="", residual=True):
    f_prof = f if isinstance(f, RadialProfile) else RadialProfile(phi.grid, f)
    norm_res = abs(l2_mass(f_prof, cfg.quadrature) - 1.0)
    eq_res = equation_residual(eps, f_prof, phi) if residual else math.nan
    return EigenState(
        n=cfg.n, epsilon=float(eps), f=f_prof, phi=phi, norm_residual=norm_res, eq_residual=eq_res,
        converged=converged, iterations=tuple(iterations), config=cfg,
        eps_history=tuple(float(e) for e in history), message=message,
    )


def initial_guess(config: SolverConfig) -> EigenState:
    """``sin((n+1) pi r / R0) / r`` on the initial domain, normalized.

    It already has ``n`` interior nodes, so the first shooting step targets
    the right branch.
    """
    cfg = config.resolved()
    grid = RadialGrid.uniform(cfg.initial_domain, cfg.grid_points)
    r = grid.r
    k = (cfg.n + 1) * math.pi / cfg.initial_domain
    f = np.empty_like(r)
    f[1:] = np.sin(k * r[1:]) / r[1:]
    f[0] = k
    f[-1] = 0.0
    f = normalize(f, grid, cfg.quadrature)
    phi = poisson_potential(RadialProfile(grid, f * f), cfg.quadrature)
    return _make_state(cfg, math.nan, f, phi, False, residual=False)


def inner_scf_step(state_guess: EigenState, config: SolverConfig) -> EigenState:
    """One frozen-potential solve followed by a damped potential update.

    The returned state carries the new eigenpair and the *mixed* potential
    ``(1 - m) phi_old + m phi[f_new^2]`` that seeds the next step.
    """
    cfg = config.resolved()
    if state_guess.n != cfg.n:
        raise ContractError(f"guess has n={state_guess.n}, config has n={cfg.n}")
    phi_old = state_guess.phi
    eps, f = solve_frozen(phi_old, cfg.n, cfg.integrator, cfg.quadrature)
    phi_new = poisson_potential(RadialProfile(phi_old.grid, f * f), cfg.quadrature)
    m = cfg.mixing
    phi = RadialProfile(phi_old.grid, (1.0 - m) * phi_old.values + m * phi_new.values)
    return _make_state(cfg, eps, f, phi, False, state_guess.iterations, residual=False)


def _self_consistent(state: EigenState, cfg: SolverConfig):
    history = []
    prev = state.epsilon
    for it in range(1, cfg.max_inner_iters + 1):
        state = inner_scf_step(state, cfg)
        eps = state.epsilon
        history.append(eps)
        if math.isfinite(prev) and abs(eps - prev) < cfg.inner_tol * abs(eps):
            return state, True, it, history
        prev = eps
    return state, False, cfg.max_inner_iters, history


def _extend_domain(state: EigenState, cfg: SolverConfig) -> EigenState:
    grid = state.grid
    h = grid.step
    size = int(math.ceil(grid.r_max * cfg.domain_growth_factor / h)) + 1
    new_grid = RadialGrid.from_step(h, size)
    f = np.zeros(size)
    f[: grid.size] = state.f.values
    f = normalize(f, new_grid, cfg.quadrature)
    phi = poisson_potential(RadialProfile(new_grid, f * f), cfg.quadrature)
    return _make_state(cfg, state.epsilon, f, phi, False, state.iterations, residual=False)


def _finalize(state: EigenState, cfg, converged, iterations, history, message):
    # store the potential of the final density, not the mixed one
    phi = poisson_potential(RadialProfile(state.grid, state.f.values ** 2), cfg.quadrature)
    return _make_state(cfg, state.epsilon, state.f, phi, converged, iterations, history, message)


def solve_stationary_state(config: SolverConfig) -> EigenState:
    """Solve for the ``n``-th excited stationary state.

    A run that exhausts an iteration cap returns a state with
    ``converged=False`` and a diagnostic ``message``.  Shooting failures raise
    :class:`BracketError` or :class:`NodeCountError`.
    """
    cfg = config.resolved()
    state = initial_guess(cfg)
    prev_eps = math.nan
    inner_total = 0
    for outer in range(1, cfg.max_outer_iters + 1):
        state, ok, its, history = _self_consistent(state, cfg)
        inner_total += its
        log.debug("n=%d outer=%d r_max=%.6g inner=%d eps=%.12g", cfg.n, outer, state.grid.r_max, its, state.epsilon)
        if not ok:
            msg = (
                f"inner iteration did not reach tol {cfg.inner_tol:g} within {cfg.max_inner_iters} "
                f"steps on r_max={state.grid.r_max:.6g} (last eps={state.epsilon:.10g})"
            )
            return _finalize(state, cfg, False, (outer, inner_total), history, msg)
        eps = state.epsilon
        if math.isfinite(prev_eps) and abs(eps - prev_eps) < cfg.outer_tol * abs(eps):
            return _finalize(state, cfg, True, (outer, inner_total), history, "")
        prev_eps = eps
        if outer < cfg.max_outer_iters:
            state = _extend_domain(state, cfg)
    msg = f"domain extension did not reach tol {cfg.outer_tol:g} within {cfg.max_outer_iters} steps"
    return _finalize(state, cfg, False, (cfg.max_outer_iters, inner_total), history, msg)


# --------------------------------------------------------------------------
# symmetry and resolution checks


def scale_state(state: EigenState, N: float) -> EigenState:
    """Apply the norm-scaling symmetry ``r -> r/N, f -> N^2 f, phi -> N^2 phi``.

    The eigenvalue becomes ``N^2 eps`` and the 3-D norm of ``f`` becomes ``N``.
    """
    if not (N > 0) or not math.isfinite(N):
        raise DomainError(f"scaling factor must be positive, got {N!r}")
    if N == 1:
        return state
    grid = state.grid
    step = grid.step / N if grid.step is not None else None
    new_grid = RadialGrid(grid.r / N, step=step)
    f = RadialProfile(new_grid, state.f.values * N * N)
    phi = RadialProfile(new_grid, state.phi.values * N * N)
    eps = state.epsilon * N * N
    quad = state.config.quadrature if state.config else "trapezoid"
    return replace(
        state,
        epsilon=eps,
        f=f,
        phi=phi,
        norm_residual=abs(l2_mass(f, quad) - 1.0),
        eq_residual=equation_residual(eps, f, phi),
    )


@dataclass
class ResolutionReport:
    """Relative changes of a state under 2x grid refinement."""

    n: int
    eps_change: float
    node_change: float
    extremum_radius_change: float
    amplitude_change: float
    points_per_wavelength: float
    threshold: float
    reliable: bool
    refined: EigenState | None = field(default=None, repr=False)
    message: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("refined")
        return d


def _rel_change(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape:
        return math.inf
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.abs(b), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / scale))


def validate_resolution(state: EigenState, threshold: float = 1e-4) -> ResolutionReport:
    """Re-solve ``state`` on a grid with half the step and compare.

    The state is flagged unreliable when the eigenvalue, any node radius or
    any extremum (radius or amplitude) moves by more than ``threshold``
    relative to the refined solution.
    """
    from .features import extract_features

    if state.config is None:
        raise ContractError("state carries no solver config to refine")
    cfg = state.config.resolved()
    fine_cfg = replace(cfg, grid_points=2 * cfg.grid_points - 1)
    fine = solve_stationary_state(fine_cfg)
    ppw = points_per_wavelength(state)
    d_eps = abs(state.epsilon - fine.epsilon) / abs(fine.epsilon)
    try:
        a = extract_features(state)
        b = extract_features(fine)
    except FeatureError as exc:
        return ResolutionReport(
            state.n, d_eps, math.inf, math.inf, math.inf, ppw, threshold, False, fine,
            message=f"feature extraction failed: {exc}",
        )
    d_nodes = _rel_change(a.nodes, b.nodes)
    d_rad = _rel_change(a.extrema_r[1:], b.extrema_r[1:])
    d_amp = _rel_change(a.extrema_f, b.extrema_f)
    worst = max(d_eps, d_nodes, d_rad, d_amp)
    reliable = bool(worst <= threshold and state.converged and fine.converged)
    msg = "" if reliable else f"max relative change {worst:.3g} vs threshold {threshold:g}"
    return ResolutionReport(state.n, d_eps, d_nodes, d_rad, d_amp, ppw, threshold, reliable, fine, msg)
