"""Command-line batch driver.

Four subcommands, one validated config file each:

* ``reference-convergence`` tabulates the exact reference wave against
  truncated expansion partial sums on an x grid, one CSV per basis size
  plus a windowed-error summary.
* ``scatter`` sweeps an energy grid, evaluating the scattering matrix at
  a fixed inner-block size; per-point failures become flagged rows and
  the sweep continues.
* ``quadrature-check`` / ``greens-check`` run the numerical self-check
  suites and emit a pass/fail report with measured defects.

Output files are plain comma-separated text with a ``#`` header carrying
the full effective config, so a run is reproducible from its own output.
Identical config and precision give byte-identical files; worker count
never affects values, only wall time.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial
(flagged rows present).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, EngineError, PoleError, PrecisionLossWarning
from .greens import (
    FiniteGreen,
    eigenvector_products,
    green_element,
    green_element_eigenvalue_only,
)
from .linalg import solve_dense
from .potmat import (
    PotentialModel,
    alternative_weights,
    jacobi_matrix,
    nodes_and_weights,
    quadrature_integrate,
)
from .refsol import (
    BasisSpec,
    PhysicalParams,
    expand_coefficients,
    reconstruct_reference,
    recursion_bands,
)
from .smatrix import InnerSystem, s_matrix, unwrap_phase
from .specfun import chi_reference

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

SCATTER_COLUMNS = (
    "E",
    "k",
    "re_s",
    "im_s",
    "delta",
    "unitarity_defect",
    "n_used",
    "flag",
)
REFERENCE_COLUMNS = ("x", "re_exact", "im_exact", "re_series", "im_series", "abs_error")
CHECK_COLUMNS = ("check", "detail", "measured", "reference", "status")


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _write_rows(path, cfg: RunConfig, columns, rows, footer=()) -> None:
    lines = [f"# pentajm {cfg.command}"]
    for key, value in cfg.echo_items():
        lines.append(f"# config: {key} = {value}")
    lines.append("# columns: " + ", ".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    for note in footer:
        lines.append(f"# {note}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ----------------------------------------------------------------------
# reference-convergence


def run_reference_convergence(cfg: RunConfig) -> int:
    basis = cfg.basis()
    params = cfg.physical_params()
    # log spacing so the near-origin window (where the log-periodic wave is
    # hardest to expand) carries as many points as the asymptotic one
    grid = np.geomspace(cfg.x_start, cfg.x_stop, cfg.x_count)
    masks = {}
    for name, (lo, hi) in (("near", cfg.window_near), ("far", cfg.window_far)):
        mask = (grid >= lo) & (grid <= hi)
        if not mask.any():
            raise ConfigError(
                f"window.{name}: no grid points fall inside [{lo}, {hi}]; "
                f"grid covers [{cfg.x_start}, {cfg.x_stop}]"
            )
        masks[name] = mask

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionLossWarning)
        coeffs = expand_coefficients(basis, params, max(cfg.n_list), precision=cfg.precision)
    exact = np.array([chi_reference(+1, params.nu, params.mu * x) for x in grid])

    errors_by_n = {}
    written = []
    summary_rows = []
    magnitude = np.abs(exact)  # the reference wave has no real zeros
    for n in sorted(cfg.n_list):
        series = reconstruct_reference(basis, params, coeffs, grid, +1, n_terms=n)
        err = np.abs(exact - series)
        errors_by_n[n] = err
        rows = [
            (float(x), float(e.real), float(e.imag), float(s.real), float(s.imag), float(a))
            for x, e, s, a in zip(grid, exact, series, err)
        ]
        path = os.path.join(cfg.out_dir, f"reference_convergence_N{n}.csv")
        _write_rows(path, cfg, REFERENCE_COLUMNS, rows)
        written.append(path)
        rel = err / magnitude
        summary_rows.append(
            (
                n,
                float(err[masks["near"]].max()),
                float(err[masks["far"]].max()),
                float(rel[masks["near"]].max()),
                float(rel[masks["far"]].max()),
            )
        )

    summary_path = os.path.join(cfg.out_dir, "reference_convergence_summary.csv")
    _write_rows(
        summary_path,
        cfg,
        ("n_terms", "near_max_error", "far_max_error",
         "near_max_relative", "far_max_relative"),
        summary_rows,
    )
    written.append(summary_path)

    if cfg.figures:
        from . import figures

        png = os.path.join(cfg.out_dir, "reference_convergence.png")
        figures.render_reference_convergence(
            png, grid, errors_by_n, {"near": cfg.window_near, "far": cfg.window_far}
        )
        written.append(png)

    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ----------------------------------------------------------------------
# scatter

# Inner blocks are energy independent, so each worker process keeps the
# ones it has built and reuses them across sweep points.
_SYSTEM_CACHE: dict = {}


def _model_from(kind: str, v0: float, prange: float) -> PotentialModel:
    if kind == "none":
        return PotentialModel.exponential(0.0, 1.0)
    return getattr(PotentialModel, kind)(v0, prange)


def _system_for(key) -> InnerSystem:
    system = _SYSTEM_CACHE.get(key)
    if system is None:
        family, beta, ell, strength, lam, kind, v0, prange, size = key
        basis = BasisSpec(family, beta)
        params = PhysicalParams(ell, strength, 1.0, lam)  # block ignores k
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PrecisionLossWarning)
            system = InnerSystem(basis, params, _model_from(kind, v0, prange), size)
        _SYSTEM_CACHE[key] = system
    return system


def _scatter_point(task):
    """One sweep point -> primitive tuple; never raises."""
    (energy, family, beta, ell, strength, lam, kind, v0, prange, size, precision) = task
    k = math.sqrt(2.0 * energy)
    basis = BasisSpec(family, beta)
    model = _model_from(kind, v0, prange)
    reference_only = kind == "none" or v0 == 0.0
    last_size = size
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionLossWarning)
        for attempt in range(4):
            n_try = size + attempt
            last_size = n_try
            try:
                params = PhysicalParams(ell, strength, k, lam)
                system = _system_for(
                    (family, beta, ell, strength, lam, kind, v0, prange, n_try)
                )
                coeffs = expand_coefficients(basis, params, n_try + 1, precision=precision)
                res = s_matrix(basis, params, model, n_try, system=system, coeffs=coeffs)
            except PoleError:
                continue  # the inner spectrum moves with the block size
            except EngineError as exc:
                return (
                    energy, k, math.nan, math.nan, math.nan, math.nan,
                    n_try, f"error:{type(exc).__name__}", math.nan, math.nan,
                )
            if reference_only:
                flag = "reference-only"
            elif attempt == 0:
                flag = "ok"
            else:
                flag = "pole-shifted"
            return (
                energy, k, res.S.real, res.S.imag, res.delta,
                res.unitarity_defect, n_try, flag,
                res.matching_defect, res.tail_defect,
            )
    return (
        energy, k, math.nan, math.nan, math.nan, math.nan,
        last_size, "error:PoleError", math.nan, math.nan,
    )


def run_scatter(cfg: RunConfig) -> int:
    if cfg.e_count == 1:
        energies = [cfg.e_start]
    else:
        energies = [float(e) for e in np.linspace(cfg.e_start, cfg.e_stop, cfg.e_count)]
    tasks = [
        (
            energy, cfg.family, cfg.beta, cfg.ell, cfg.strength, cfg.lam,
            cfg.potential_kind, cfg.potential_v0, cfg.potential_range,
            cfg.matrix_size, cfg.precision,
        )
        for energy in energies
    ]
    jobs = min(cfg.effective_jobs(), len(tasks))
    if jobs <= 1:
        points = [_scatter_point(t) for t in tasks]
    else:
        # rows are assembled in grid order no matter which worker finishes first
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_scatter_point, tasks))

    deltas = [p[4] for p in points]
    finite = [i for i, d in enumerate(deltas) if math.isfinite(d)]
    if finite:
        unwrapped = unwrap_phase([deltas[i] for i in finite])
        for i, d in zip(finite, unwrapped):
            deltas[i] = float(d)

    rows = []
    flags = []
    for p, delta in zip(points, deltas):
        rows.append((p[0], p[1], p[2], p[3], delta, p[5], p[6], p[7]))
        flags.append(p[7])

    matching = [p[8] for p in points if math.isfinite(p[8])]
    tails = [p[9] for p in points if math.isfinite(p[9])]
    footer = []
    if matching:
        footer.append(f"note: max_matching_defect = {_fmt(max(matching))}")
    if tails:
        footer.append(f"note: max_tail_defect = {_fmt(max(tails))}")

    path = os.path.join(cfg.out_dir, "scatter.csv")
    _write_rows(path, cfg, SCATTER_COLUMNS, rows, footer)
    written = [path]

    if cfg.figures:
        from . import figures

        phase_png = os.path.join(cfg.out_dir, "scatter_phase.png")
        figures.render_scatter_phase(phase_png, energies, deltas, flags)
        unit_png = os.path.join(cfg.out_dir, "scatter_unitarity.png")
        figures.render_scatter_unitarity(unit_png, energies, [r[5] for r in rows])
        written.extend([phase_png, unit_png])

    for out in written:
        print(f"wrote {out}")
    failures = sum(1 for f in flags if f.startswith("error:"))
    flagged = sum(1 for f in flags if f != "ok")
    print(f"{len(rows)} points, {flagged} flagged, {failures} failed")
    if failures == len(rows):
        return EXIT_NUMERICAL
    if flagged:
        return EXIT_PARTIAL
    return EXIT_OK


# ----------------------------------------------------------------------
# self-check suites


def _rising(base: float, count: int) -> float:
    out = 1.0
    for j in range(count):
        out *= base + 1.0 + j
    return out


def _quadrature_check_rows(cfg: RunConfig):
    rows = []
    betas = []
    for beta in (0.0, cfg.beta):
        if beta not in betas:
            betas.append(beta)
    for beta in betas:
        basis = BasisSpec(cfg.family, beta)
        for order in cfg.check_orders:
            jac = jacobi_matrix(basis, order)
            rule = nodes_and_weights(jac)
            detail = f"family={cfg.family} beta={_fmt(beta)} order={order}"

            worst = 0.0
            for degree in range(2 * order):
                truth = _rising(rule.beta, degree)
                got = quadrature_integrate(rule, lambda u, d=degree: u**d)
                worst = max(worst, abs(got - truth) / truth)
            rows.append(
                ("quadrature-exactness", detail, worst, cfg.tol_quadrature,
                 worst <= cfg.tol_quadrature)
            )

            # degree 2N escapes the rule by an exactly known amount
            truth = _rising(rule.beta, 2 * order)
            got = quadrature_integrate(rule, lambda u, d=2 * order: u**d)
            predicted = math.factorial(order) * _rising(rule.beta, order)
            mismatch = abs((truth - got) - predicted) / predicted
            rows.append(
                ("quadrature-degree-2N-gap", detail, (truth - got) / truth,
                 predicted / truth, mismatch <= 1e-8)
            )

            alt = alternative_weights(jac)
            scale = float(rule.weights.max())
            diff = float(np.max(np.abs(alt - rule.weights)) / scale)
            rows.append(
                ("quadrature-product-weights", detail, diff, cfg.tol_quadrature,
                 diff <= cfg.tol_quadrature)
            )

            if rule.sub_nodes is not None and order > 1:
                gaps = np.minimum(
                    rule.sub_nodes - rule.nodes[:-1], rule.nodes[1:] - rule.sub_nodes
                )
                min_gap = float(gaps.min())
                rows.append(
                    ("quadrature-interlacing", detail, min_gap, 0.0, min_gap > 0.0)
                )

    basis = cfg.basis()
    params = cfg.physical_params()
    n_top = 2000
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionLossWarning)
        coeffs = expand_coefficients(basis, params, n_top, precision=cfg.precision)
    a, b, c = recursion_bands(basis, params, n_top + 1)
    f = coeffs.plus
    samples = sorted({int(round(v)) for v in np.geomspace(2, n_top - 10, 20)})
    worst = 0.0
    for n in samples:
        terms = np.array(
            [c[n - 2] * f[n - 2], b[n - 1] * f[n - 1], a[n] * f[n],
             b[n] * f[n + 1], c[n] * f[n + 2]]
        )
        worst = max(worst, float(np.abs(terms.sum()) / np.abs(terms).max()))
    rows.append(
        ("expansion-recursion-residual", f"n_max={n_top} samples={len(samples)}",
         worst, cfg.tol_recursion, worst <= cfg.tol_recursion)
    )
    return rows


def _random_green_system(rng, size: int, generalized: bool):
    h = rng.normal(size=(size, size))
    h = (h + h.T) / 2.0
    if not generalized:
        return FiniteGreen(h), h, None
    a = rng.normal(size=(size, size))
    omega = a @ a.T + size * np.eye(size)
    return FiniteGreen(h, omega), h, omega


def _probe_points(values: np.ndarray):
    pts = [float(values[0]) - 0.7, float(values[-1]) + 0.9]
    for lo, hi in zip(values[:-1], values[1:]):
        if hi - lo > 1e-6:
            pts.append(float((lo + hi) / 2.0))
    return pts


def _greens_check_rows(cfg: RunConfig):
    rng = np.random.default_rng(cfg.seed)
    worst_route = 0.0
    worst_sum = 0.0
    worst_complete = 0.0
    worst_defining = 0.0
    for index in range(cfg.check_systems):
        size = 2 + int(rng.integers(0, 7))
        fg, h, omega = _random_green_system(rng, size, generalized=index % 2 == 1)
        eps = fg.values
        omega_dense = np.eye(size) if omega is None else omega
        scale = float(np.abs(eps).max())
        for z in _probe_points(eps):
            full = np.empty((size, size))
            for n in range(size):
                for m in range(size):
                    direct = green_element(fg, n, m, z)
                    full[n, m] = direct
                    alt = green_element_eigenvalue_only(fg, n, m, z)
                    floor = max(abs(direct), 1e-3 / scale)
                    worst_route = max(worst_route, abs(alt - direct) / floor)
                    spectral = sum(
                        eigenvector_products(fg, n, m, j) / (eps[j] - z)
                        for j in range(size)
                    )
                    worst_sum = max(worst_sum, abs(spectral - direct) / floor)
            resid = full @ (h - z * omega_dense) - np.eye(size)
            worst_defining = max(worst_defining, float(np.abs(resid).max()))
        inverse = solve_dense(omega_dense, np.eye(size))
        for n in range(size):
            for m in range(size):
                total = sum(eigenvector_products(fg, n, m, j) for j in range(size))
                worst_complete = max(worst_complete, abs(total - inverse[n, m]))
    detail = f"systems={cfg.check_systems} seed={cfg.seed}"
    tol = cfg.tol_greens
    return [
        ("greens-eigenvalue-only-route", detail, worst_route, tol, worst_route <= tol),
        ("greens-spectral-sum", detail, worst_sum, tol, worst_sum <= tol),
        ("greens-completeness", detail, worst_complete, tol, worst_complete <= tol),
        ("greens-defining-relation", detail, worst_defining, tol, worst_defining <= tol),
    ]


def run_self_checks(cfg: RunConfig, suite: str) -> int:
    if suite == "quadrature":
        rows = _quadrature_check_rows(cfg)
        name = "quadrature_check.csv"
    else:
        rows = _greens_check_rows(cfg)
        name = "greens_check.csv"
    out_rows = []
    failed = 0
    for check, detail, measured, reference, passed in rows:
        status = "PASS" if passed else "FAIL"
        failed += 0 if passed else 1
        out_rows.append((check, detail.replace(",", ";"), float(measured),
                         float(reference), status))
        print(f"{status} {check} [{detail}] measured={_fmt(float(measured))} "
              f"reference={_fmt(float(reference))}")
    path = os.path.join(cfg.out_dir, name)
    _write_rows(path, cfg, CHECK_COLUMNS, out_rows)
    print(f"wrote {path}")
    if failed:
        print(f"{failed} of {len(out_rows)} checks failed")
        return EXIT_NUMERICAL
    print(f"all {len(out_rows)} checks passed")
    return EXIT_OK


# ----------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pentajm",
        description="Scattering engine batch driver for supercritical "
        "inverse-square cores with short-range potentials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "reference-convergence": "tabulate exact reference wave vs expansion partial sums",
        "scatter": "sweep an energy grid and tabulate the scattering matrix",
        "quadrature-check": "run the quadrature and recursion self-check suite",
        "greens-check": "run the finite Green's-function self-check suite",
    }
    for name, text in descriptions.items():
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="path to a key = value config file")
        cmd.add_argument("--out", default=".", help="output directory (default: current)")
        cmd.add_argument(
            "--precision", choices=("double", "extended"), default=None,
            help="override the config precision mode",
        )
        cmd.add_argument(
            "--jobs", type=int, default=None,
            help="worker processes; 0 means all processors (overrides config)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            args.config,
            args.command,
            out_dir=args.out,
            precision=args.precision,
            jobs=args.jobs,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        if cfg.command == "reference-convergence":
            return run_reference_convergence(cfg)
        if cfg.command == "scatter":
            return run_scatter(cfg)
        if cfg.command == "quadrature-check":
            return run_self_checks(cfg, "quadrature")
        return run_self_checks(cfg, "greens")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
