"""Run-configuration parsing and validation for the batch driver.

Configs are UTF-8 text files of `key = value` lines with `#` comments.
Nested names use dots (`potential.kind`, `window.near`, `tol.greens`).
Every key is validated before any computation starts; unknown keys, bad
types, and violated preconditions raise ConfigError with the offending
key and line number so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .potmat import PotentialModel
from .refsol import BasisSpec, PhysicalParams

COMMANDS = ("reference-convergence", "scatter", "quadrature-check", "greens-check")
FAMILIES = ("laguerre", "oscillator")
POTENTIAL_KINDS = ("exponential", "gaussian", "poschl_teller", "none")
PRECISIONS = ("double", "extended")


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one CLI invocation."""

    command: str
    # physical system
    family: str = "laguerre"
    beta: float = 4.0
    ell: int = 0
    strength: float = 9.25
    lam: float = 1.0
    k: float = 2.0
    # potential (scatter)
    potential_kind: str = "exponential"
    potential_v0: float = 1.0
    potential_range: float = 1.0
    # reference-convergence study
    n_list: tuple = (100, 1000, 10000)
    x_start: float = 0.001
    x_stop: float = 40.0
    x_count: int = 400
    window_near: tuple = (0.001, 0.05)
    window_far: tuple = (20.0, 40.0)
    # scattering sweep
    e_start: float = 0.25
    e_stop: float = 4.0
    e_count: int = 40
    matrix_size: int = 200
    # self-check suites
    tol_quadrature: float = 1e-12
    tol_greens: float = 1e-8
    tol_recursion: float = 1e-8
    check_orders: tuple = (2, 5, 10)
    check_systems: int = 20
    seed: int = 20240816
    # execution
    precision: str = "double"
    jobs: int = 0
    figures: bool = True
    out_dir: str = "."

    def basis(self) -> BasisSpec:
        return BasisSpec(self.family, self.beta)

    def physical_params(self, k: float | None = None) -> PhysicalParams:
        return PhysicalParams(self.ell, self.strength, self.k if k is None else k, self.lam)

    def potential_model(self) -> PotentialModel | None:
        """None for the pure reference problem (kind = none)."""
        if self.potential_kind == "none":
            return None
        maker = getattr(PotentialModel, self.potential_kind)
        return maker(self.potential_v0, self.potential_range)

    def effective_jobs(self) -> int:
        if self.jobs > 0:
            return self.jobs
        return os.cpu_count() or 1

    def echo_items(self) -> list:
        """Canonical (key, value) pairs, sorted, for the output header.

        Worker count and figure rendering cannot influence computed values,
        so they are left out: two runs that differ only there must produce
        byte-identical data files.
        """
        pairs = []
        for f in fields(self):
            if f.name in ("command", "out_dir", "jobs", "figures"):
                continue
            key = _FIELD_TO_KEY[f.name]
            pairs.append((key, _format_value(getattr(self, f.name))))
        return sorted(pairs)


_KEY_TO_FIELD = {
    "family": "family",
    "beta": "beta",
    "ell": "ell",
    "strength": "strength",
    "lambda": "lam",
    "k": "k",
    "potential.kind": "potential_kind",
    "potential.v0": "potential_v0",
    "potential.range": "potential_range",
    "n_list": "n_list",
    "x_start": "x_start",
    "x_stop": "x_stop",
    "x_count": "x_count",
    "window.near": "window_near",
    "window.far": "window_far",
    "e_start": "e_start",
    "e_stop": "e_stop",
    "e_count": "e_count",
    "matrix.size": "matrix_size",
    "tol.quadrature": "tol_quadrature",
    "tol.greens": "tol_greens",
    "tol.recursion": "tol_recursion",
    "check.orders": "check_orders",
    "check.systems": "check_systems",
    "seed": "seed",
    "precision": "precision",
    "jobs": "jobs",
    "figures": "figures",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> dict:
    """Raw `key = value` lines to {key: (value_string, line_number)}."""
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)
    return entries


def _parse_int(key, value, lineno):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} (line {lineno}): expected an integer, got {value!r}") from None


def _parse_float(key, value, lineno):
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"{key} (line {lineno}): expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{key} (line {lineno}): value must be finite, got {value!r}")
    return out


def _parse_int_list(key, value, lineno):
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{key} (line {lineno}): expected a comma-separated integer list")
    return tuple(_parse_int(key, p, lineno) for p in parts)


def _parse_pair(key, value, lineno):
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if len(parts) != 2:
        raise ConfigError(f"{key} (line {lineno}): expected 'low, high'")
    return (_parse_float(key, parts[0], lineno), _parse_float(key, parts[1], lineno))


def _parse_choice(key, value, lineno, choices):
    if value not in choices:
        raise ConfigError(
            f"{key} (line {lineno}): must be one of {', '.join(choices)}; got {value!r}"
        )
    return value


def _parse_switch(key, value, lineno):
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"{key} (line {lineno}): expected on or off, got {value!r}")


_PARSERS = {
    "family": lambda k, v, n: _parse_choice(k, v, n, FAMILIES),
    "beta": _parse_float,
    "ell": _parse_int,
    "strength": _parse_float,
    "lambda": _parse_float,
    "k": _parse_float,
    "potential.kind": lambda k, v, n: _parse_choice(k, v, n, POTENTIAL_KINDS),
    "potential.v0": _parse_float,
    "potential.range": _parse_float,
    "n_list": _parse_int_list,
    "x_start": _parse_float,
    "x_stop": _parse_float,
    "x_count": _parse_int,
    "window.near": _parse_pair,
    "window.far": _parse_pair,
    "e_start": _parse_float,
    "e_stop": _parse_float,
    "e_count": _parse_int,
    "matrix.size": _parse_int,
    "tol.quadrature": _parse_float,
    "tol.greens": _parse_float,
    "tol.recursion": _parse_float,
    "check.orders": _parse_int_list,
    "check.systems": _parse_int,
    "seed": _parse_int,
    "precision": lambda k, v, n: _parse_choice(k, v, n, PRECISIONS),
    "jobs": _parse_int,
    "figures": _parse_switch,
}


def _validate(cfg: RunConfig) -> None:
    def fail(key, message):
        raise ConfigError(f"{key}: {message}")

    if cfg.command not in COMMANDS:
        fail("command", f"must be one of {', '.join(COMMANDS)}")
    if cfg.beta <= -1.0:
        fail("beta", f"must be > -1, got {cfg.beta}")
    if cfg.ell < 0:
        fail("ell", f"must be >= 0, got {cfg.ell}")
    critical = (cfg.ell + 0.5) ** 2
    if cfg.strength <= critical:
        fail(
            "strength",
            f"must exceed the critical coupling (ell + 1/2)^2 = {critical}, got {cfg.strength}",
        )
    if cfg.lam <= 0:
        fail("lambda", f"must be > 0, got {cfg.lam}")
    if cfg.k <= 0:
        fail("k", f"must be > 0, got {cfg.k}")
    if cfg.potential_range <= 0:
        fail("potential.range", f"must be > 0, got {cfg.potential_range}")
    if not all(n >= 1 for n in cfg.n_list):
        fail("n_list", f"sizes must be >= 1, got {cfg.n_list}")
    if len(set(cfg.n_list)) != len(cfg.n_list):
        fail("n_list", "sizes must be distinct")
    if cfg.x_start <= 0:
        fail("x_start", f"must be > 0, got {cfg.x_start}")
    if cfg.x_stop <= cfg.x_start:
        fail("x_stop", f"must exceed x_start = {cfg.x_start}, got {cfg.x_stop}")
    if cfg.x_count < 2:
        fail("x_count", f"must be >= 2, got {cfg.x_count}")
    for key, window in (("window.near", cfg.window_near), ("window.far", cfg.window_far)):
        lo, hi = window
        if not (0 < lo < hi):
            fail(key, f"needs 0 < low < high, got {window}")
    if cfg.e_start <= 0:
        fail("e_start", f"must be > 0, got {cfg.e_start}")
    if cfg.e_stop < cfg.e_start:
        fail("e_stop", f"must be >= e_start = {cfg.e_start}, got {cfg.e_stop}")
    if cfg.e_count < 1:
        fail("e_count", f"must be >= 1, got {cfg.e_count}")
    if cfg.e_count == 1 and cfg.e_stop != cfg.e_start:
        fail("e_count", "a single-point grid needs e_stop = e_start")
    if cfg.matrix_size < 8:
        fail("matrix.size", f"must be >= 8, got {cfg.matrix_size}")
    for key, tol in (
        ("tol.quadrature", cfg.tol_quadrature),
        ("tol.greens", cfg.tol_greens),
        ("tol.recursion", cfg.tol_recursion),
    ):
        if not (0 < tol < 1):
            fail(key, f"must be in (0, 1), got {tol}")
    if not all(n >= 1 for n in cfg.check_orders):
        fail("check.orders", f"orders must be >= 1, got {cfg.check_orders}")
    if cfg.check_systems < 1:
        fail("check.systems", f"must be >= 1, got {cfg.check_systems}")
    if cfg.seed < 0:
        fail("seed", f"must be >= 0, got {cfg.seed}")
    if cfg.jobs < 0:
        fail("jobs", f"must be >= 0 (0 means all processors), got {cfg.jobs}")
    # constructing the domain objects runs their own validation too
    try:
        cfg.basis()
        cfg.physical_params()
        cfg.potential_model()
    except Exception as exc:
        raise ConfigError(str(exc)) from None


def build_config(
    command: str,
    entries: dict,
    *,
    out_dir: str = ".",
    precision: str | None = None,
    jobs: int | None = None,
) -> RunConfig:
    """Assemble and validate a RunConfig from parsed entries plus overrides."""
    values = {"command": command, "out_dir": out_dir}
    for key, (text, lineno) in entries.items():
        parser = _PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        values[_KEY_TO_FIELD[key]] = parser(key, text, lineno)
    if precision is not None:
        values["precision"] = _parse_choice("precision", precision, 0, PRECISIONS)
    if jobs is not None:
        values["jobs"] = jobs
    try:
        cfg = RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def load_config(
    path: str,
    command: str,
    *,
    out_dir: str = ".",
    precision: str | None = None,
    jobs: int | None = None,
) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    entries = parse_config_text(text)
    return build_config(command, entries, out_dir=out_dir, precision=precision, jobs=jobs)
