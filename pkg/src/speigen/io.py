"""State archives, the on-disk cache and deterministic table export.

Archive layout (JSON, UTF-8)::

    {
      "schema": "speigen.state",
      "schema_version": 1,
      "config_hash": "...",
      "config": {...SolverConfig fields...},
      "n": 8, "epsilon": ..., "norm_residual": ..., "eq_residual": ...,
      "converged": true, "iterations": [outer, inner], "message": "",
      "eps_history": [...],
      "grid": {"size": N, "step": h},
      "profiles": {"r": "<base64 float64 LE>", "f": "...", "phi": "..."}
    }
"""

from __future__ import annotations

import base64
import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ContractError, SpEigenError
from .potential import RadialGrid, RadialProfile
from .solver import EigenState, SolverConfig

SCHEMA = "speigen.state"
SCHEMA_VERSION = 1
CACHE_ENV = "SP_EIGEN_CACHE"
DEFAULT_CACHE = ".speigen-cache"
FLOAT_FORMAT = "{:.12e}"


class ArchiveNotFound(SpEigenError, FileNotFoundError):
    def __init__(self, n, config_hash, path):
        super().__init__(f"no archive for n={n}, config hash {config_hash} (looked for {path})")
        self.n = n
        self.config_hash = config_hash


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _decode(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").astype(np.float64)


def state_to_dict(state: EigenState) -> dict:
    cfg = state.config.resolved() if state.config else None
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.config_hash() if cfg else "",
        "config": cfg.to_dict() if cfg else None,
        "n": state.n,
        "epsilon": state.epsilon,
        "norm_residual": state.norm_residual,
        "eq_residual": state.eq_residual,
        "converged": state.converged,
        "iterations": list(state.iterations),
        "message": state.message,
        "eps_history": list(state.eps_history),
        "grid": {"size": state.grid.size, "step": state.grid.step},
        "profiles": {
            "r": _encode(state.grid.r),
            "f": _encode(state.f.values),
            "phi": _encode(state.phi.values),
        },
    }


def state_from_dict(data: dict) -> EigenState:
    if data.get("schema") != SCHEMA:
        raise ContractError(f"not a state archive (schema={data.get('schema')!r})")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ContractError(f"unsupported archive version {data.get('schema_version')!r}")
    prof = data["profiles"]
    grid = RadialGrid(_decode(prof["r"]), step=data["grid"]["step"])
    cfg = SolverConfig.from_dict(data["config"]) if data.get("config") else None
    return EigenState(
        n=int(data["n"]),
        epsilon=float(data["epsilon"]),
        f=RadialProfile(grid, _decode(prof["f"])),
        phi=RadialProfile(grid, _decode(prof["phi"])),
        norm_residual=float(data["norm_residual"]),
        eq_residual=float(data["eq_residual"]),
        converged=bool(data["converged"]),
        iterations=tuple(data["iterations"]),
        config=cfg,
        eps_history=tuple(data.get("eps_history", ())),
        message=data.get("message", ""),
    )


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_archive(state: EigenState, path) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(state_to_dict(state), indent=1, sort_keys=True) + "\n")
    return path


def read_archive(path) -> EigenState:
    return state_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or DEFAULT_CACHE)


class StateCache:
    """Archives keyed by ``(n, config hash)`` under one directory.

    Only one process should write (the CLI funnels worker results through
    the parent); writes are atomic renames so readers never see partial files.
    """

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def path_for(self, config: SolverConfig) -> Path:
        return self.root / f"state_n{config.n:03d}_{config.config_hash()}.json"

    def has(self, config: SolverConfig) -> bool:
        return self.path_for(config).is_file()

    def get(self, config: SolverConfig) -> EigenState:
        path = self.path_for(config)
        if not path.is_file():
            raise ArchiveNotFound(config.n, config.config_hash(), path)
        return read_archive(path)

    def put(self, state: EigenState) -> Path:
        if state.config is None:
            raise ContractError("cannot cache a state without its solver config")
        return write_archive(state, self.path_for(state.config))


def format_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FORMAT.format(float(x))
    if x is None:
        return ""
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    _atomic_write(path, csv_text(header, rows))
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (float, np.floating)):
        # NaN/Inf are not JSON; undefined values (e.g. stderr of an exact fit) become null
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(_jsonable(payload), indent=1, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
