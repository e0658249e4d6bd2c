"""Command-line front end: build, verify, analyze and demo subcommands.

Configuration is a JSON file; functions are polynomials, piecewise-linear
specs or sampled CSVs, with subspace membership enforced at parse time by
solving for the value at 0.  Exit codes: 0 success, 2 configuration error,
3 pipeline stage error, 4 certificate failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import MarkovMimicError, StageError
from .grids import Grid, SampledFunction, dense_points, make_partition, modulus_delta
from .kernels import (
    MarkovKernel,
    apply,
    concentration_check,
    endpoint_measures,
    from_composition,
    from_weighted_compositions,
    induced_ratio,
    validate_kernel,
)
from .pipeline import DEFAULT_FAMILY_ROW_CAP, approximate
from .relations import (
    CellMasses,
    DEFAULT_N1_CAP,
    check_relations,
    feasibility,
)
from .subspace import SubspaceSpec, check_extendibility, extend_map, realize_integers
from . import certify as certify_mod
from . import report as report_mod

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_CERT = 4


class ConfigError(MarkovMimicError):
    """The configuration file or flags could not be turned into valid inputs."""


def _fraction(text, what: str) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: cannot parse {text!r} as p/q") from exc


def _function_from_spec(spec: dict, grid: Grid, alpha: Fraction, what: str) -> SampledFunction:
    """Build one probe function, forcing f(0) = alpha * f(1) analytically."""
    kind = spec.get("type")
    af = float(alpha)
    if kind == "polynomial":
        coeffs = [float(c) for c in spec.get("coefficients", [])]
        if not coeffs:
            raise ConfigError(f"{what}: polynomial needs coefficients")
        rest = sum(coeffs[1:])
        coeffs[0] = af * rest / (1 - af)
        xs = grid.points
        vals = np.zeros(grid.size)
        for p, c in enumerate(coeffs):
            vals += c * xs**p
        return SampledFunction(grid, vals)
    if kind == "piecewise":
        pts = spec.get("points", [])
        if len(pts) < 2 or pts[0][0] != 0 or pts[-1][0] != 1:
            raise ConfigError(f"{what}: piecewise points must run from x=0 to x=1")
        xs = [float(p[0]) for p in pts]
        ys = [float(p[1]) for p in pts]
        if sorted(xs) != xs:
            raise ConfigError(f"{what}: piecewise x values must be sorted")
        ys[0] = af * ys[-1]
        return SampledFunction(grid, np.interp(grid.points, xs, ys))
    if kind == "csv":
        f = SampledFunction.from_csv(spec["path"])
        if f.grid.m != grid.m:
            raise ConfigError(
                f"{what}: sampled grid M={f.grid.m} does not match run grid M={grid.m}"
            )
        if abs(f.values[0] - af * f.values[-1]) > 1e-9 * (1 + abs(f.values[-1])):
            raise ConfigError(f"{what}: sampled function violates f(0) = alpha f(1)")
        return f
    raise ConfigError(f"{what}: unknown function type {kind!r}")


def _map_from_spec(spec: dict, grid: Grid, what: str) -> SampledFunction:
    """An interval self-map for composition kernels (no membership constraint)."""
    kind = spec.get("type")
    if kind == "polynomial":
        coeffs = [float(c) for c in spec.get("coefficients", [])]
        xs = grid.points
        vals = np.zeros(grid.size)
        for p, c in enumerate(coeffs):
            vals += c * xs**p
    elif kind == "piecewise":
        pts = spec.get("points", [])
        vals = np.interp(grid.points, [p[0] for p in pts], [p[1] for p in pts])
    else:
        raise ConfigError(f"{what}: unknown map type {kind!r}")
    if np.min(vals) < -1e-12 or np.max(vals) > 1 + 1e-12:
        raise ConfigError(f"{what}: map leaves [0,1]")
    return SampledFunction(grid, np.clip(vals, 0.0, 1.0))


_IDENTITY = {"type": "polynomial", "coefficients": [0.0, 1.0]}
_REFLECTION = {"type": "polynomial", "coefficients": [1.0, -1.0]}


def _kernel_from_spec(spec: dict, grid: Grid, spec_in: SubspaceSpec) -> MarkovKernel:
    kind = spec.get("type")
    if kind == "csv":
        kernel = MarkovKernel.from_csv(spec["path"])
        if kernel.grid.m != grid.m:
            raise ConfigError(
                f"kernel: grid M={kernel.grid.m} does not match run grid M={grid.m}"
            )
        return kernel
    if kind == "example1":
        lam = _map_from_spec(spec.get("lam", _IDENTITY), grid, "kernel.lam")
        if abs(lam.values[0]) > 1e-12 or abs(lam.values[-1] - 1) > 1e-12:
            raise ConfigError("kernel: example1 map must fix 0 and 1")
        return from_composition(lam)
    if kind == "example2":
        k1 = float(spec.get("k1", 3))
        k2 = float(spec.get("k2", 1))
        if not k1 > k2 >= 0:
            raise ConfigError("kernel: example2 needs k1 > k2 >= 0")
        lam1 = _map_from_spec(spec.get("lam1", _IDENTITY), grid, "kernel.lam1")
        lam2 = _map_from_spec(spec.get("lam2", _REFLECTION), grid, "kernel.lam2")
        return from_weighted_compositions(
            [lam1, lam2],
            [SampledFunction.constant(grid, k1), SampledFunction.constant(grid, k2)],
        )
    if kind == "example3":
        k1 = float(spec.get("k1", 3))
        k2 = float(spec.get("k2", 1))
        a, k = spec_in.a, spec_in.k
        lam1 = _map_from_spec(_IDENTITY, grid, "kernel.lam1")
        lam2 = _map_from_spec(_REFLECTION, grid, "kernel.lam2")
        lam3 = SampledFunction.constant(grid, 0.5)
        s0 = k1 * a / (k + a) + k2
        s1 = k2 * a / (k + a) + k1
        s = SampledFunction(grid, s0 * (1 - grid.points) + s1 * grid.points)
        return from_weighted_compositions(
            [lam1, lam2, lam3],
            [SampledFunction.constant(grid, k1), SampledFunction.constant(grid, k2), s],
        )
    raise ConfigError(f"kernel: unknown type {kind!r}")


@dataclass
class RunConfig:
    """Parsed run configuration; every field is already validated."""

    grid: Grid
    alpha: Fraction
    beta: Fraction
    eps: float
    functions: list
    function_names: list
    kernel: MarkovKernel
    seed: int = 0
    n1_cap: int = DEFAULT_N1_CAP
    family_row_cap: int = DEFAULT_FAMILY_ROW_CAP

    @property
    def spec_in(self) -> SubspaceSpec:
        return SubspaceSpec.from_alpha(self.alpha)

    @property
    def spec_out(self) -> SubspaceSpec:
        return SubspaceSpec.from_alpha(self.beta)


def load_config(path, overrides: argparse.Namespace) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    m = int(getattr(overrides, "grid", None) or raw.get("grid_m", 400))
    if m < 4:
        raise ConfigError("grid_m must be at least 4")
    grid = Grid(m)
    alpha = _fraction(raw.get("alpha", "1/2"), "alpha")
    beta = _fraction(raw.get("beta", raw.get("alpha", "1/2")), "beta")
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ConfigError("alpha and beta must lie strictly between 0 and 1")
    eps = float(getattr(overrides, "eps", None) or raw.get("eps", 0.1))
    if eps <= 0:
        raise ConfigError("eps must be positive")
    fn_specs = raw.get("functions", [])
    if not fn_specs:
        raise ConfigError("at least one probe function is required")
    functions, names = [], []
    for i, spec in enumerate(fn_specs):
        functions.append(_function_from_spec(spec, grid, alpha, f"functions[{i}]"))
        names.append(spec.get("name", f"f{i}"))
    spec_in = SubspaceSpec.from_alpha(alpha)
    kernel = _kernel_from_spec(raw.get("kernel", {"type": "example1"}), grid, spec_in)
    seed = int(getattr(overrides, "seed", None) or raw.get("seed", 0))
    caps = raw.get("caps", {})
    n1_cap = int(os.environ.get("MARKOV_MIMIC_CAP_N1", caps.get("n1", DEFAULT_N1_CAP)))
    row_cap = int(caps.get("family_rows", DEFAULT_FAMILY_ROW_CAP))
    return RunConfig(
        grid, alpha, beta, eps, functions, names, kernel, seed, n1_cap, row_cap
    )


class MaterializedFamily:
    """A family loaded back from its CSV matrix and JSON metadata."""

    def __init__(self, maps: np.ndarray, meta: dict):
        self.maps = maps
        self.grid = Grid(maps.shape[1] - 1)
        self.n = maps.shape[0]
        self.n1 = int(meta["n1"])
        self.representatives = tuple(
            Fraction(s) for s in meta.get("representatives", [])
        )
        self.meta = meta
        if meta.get("count") not in (None, self.n):
            raise MarkovMimicError(
                f"metadata announces {meta['count']} maps, CSV holds {self.n}"
            )

    @classmethod
    def load(cls, csv_path, json_path) -> "MaterializedFamily":
        import csv as _csv

        rows = []
        with open(csv_path, newline="") as fh:
            for row in _csv.reader(fh):
                if row:
                    rows.append([float(v) for v in row])
        with open(json_path) as fh:
            meta = json.load(fh)
        return cls(np.asarray(rows), meta)

    def average(self, f: SampledFunction) -> SampledFunction:
        vals = np.interp(self.maps, self.grid.points, f.values)
        return SampledFunction(self.grid, vals.mean(axis=0))


def _write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out_dir", None) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_build(args) -> int:
    cfg = load_config(args.config, args)
    out = _out_dir(args)
    result = approximate(
        cfg.kernel,
        cfg.functions,
        cfg.eps,
        cfg.spec_in,
        cfg.spec_out,
        n1_cap=cfg.n1_cap,
    )
    if isinstance(result, certify_mod.Certificate):
        _write_json(out / "certificate.json", result.to_json())
        print(
            f"FAIL certificate: sup_error {result.sup_error:.6g} "
            f"(eps {result.eps}), boundary_ok {result.boundary_ok}"
        )
        return EXIT_CERT
    family = result
    cert = getattr(family, "certificate", None) or certify_mod.evaluate(
        cfg.kernel, family, cfg.functions, cfg.eps, cfg.alpha, cfg.beta
    )
    _write_json(out / "family.json", family.to_json_meta())
    _write_json(out / "certificate.json", cert.to_json())
    if family.n <= cfg.family_row_cap:
        family.to_csv(out / "family.csv", max_rows=cfg.family_row_cap)
    else:
        print(
            f"note: family CSV skipped ({family.n} maps above cap "
            f"{cfg.family_row_cap}); JSON metadata identifies the family exactly"
        )
    report_mod.emit_report(out, cfg.kernel, family, cfg.functions, cfg.function_names)
    print(
        f"built family: N = {family.n}, N1 = {family.n1}, delta = {family.delta}, "
        f"sup_error = {cert.sup_error:.6g} (eps {cfg.eps}), "
        f"boundary exact: {cert.boundary_ok}"
    )
    return EXIT_OK if cert.passed else EXIT_CERT


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args)
    out = _out_dir(args)
    family = MaterializedFamily.load(args.family_csv, args.family_json)
    if family.grid.m != cfg.grid.m:
        raise ConfigError("family grid does not match the configured grid")
    cert = certify_mod.evaluate(
        cfg.kernel, family, cfg.functions, cfg.eps, cfg.alpha, cfg.beta
    )
    _write_json(out / "certificate.json", cert.to_json())
    print(
        f"verified family: N = {family.n}, sup_error = {cert.sup_error:.6g} "
        f"(eps {cfg.eps}), boundary exact: {cert.boundary_ok}"
    )
    return EXIT_OK if cert.passed else EXIT_CERT


def cmd_analyze(args) -> int:
    alpha = _fraction(args.alpha, "--alpha") if args.alpha else None
    beta = _fraction(args.beta, "--beta") if args.beta else None
    if args.config is None:
        if alpha is None or beta is None:
            raise ConfigError("analyze without --config needs --alpha and --beta")
        verdict = feasibility(alpha, beta)
        if not verdict:
            print(f"infeasible: beta < alpha ({verdict.reason})")
            return EXIT_STAGE
        print(f"feasible: {verdict.reason}")
        return EXIT_OK
    cfg = load_config(args.config, args)
    if alpha is not None:
        cfg.alpha = alpha
    if beta is not None:
        cfg.beta = beta
    verdict = feasibility(cfg.alpha, cfg.beta)
    if not verdict:
        print(f"infeasible: beta < alpha ({verdict.reason})")
        return EXIT_STAGE
    kernel = cfg.kernel
    grid = cfg.grid
    report = validate_kernel(kernel)
    print(f"kernel: {report} -> {'ok' if report.passed else 'INVALID'}")
    mu0, mu1 = endpoint_measures(kernel)
    for name, mu in (("mu0", mu0), ("mu1", mu1)):
        atoms = [
            (i / grid.m, w) for i, w in enumerate(mu.weights) if abs(w) > 1e-12
        ]
        txt = ", ".join(f"{w:.6g}@{x:.6g}" for x, w in atoms[:12])
        print(f"{name}: {txt}" + (" ..." if len(atoms) > 12 else ""))
    beta_emp, defect = induced_ratio(kernel, cfg.spec_in)
    print(f"induced ratio: {beta_emp:.9g} (defect {defect:.3g}), target {cfg.beta}")
    delta0 = modulus_delta(cfg.functions, cfg.eps / 4)
    partition = make_partition(dense_points(delta0, grid), grid)
    n = partition.n_cells
    m0 = [float(mu0.weights[partition.cell_indices(c)].sum()) for c in range(n)]
    m1 = [float(mu1.weights[partition.cell_indices(c)].sum()) for c in range(n)]
    residuals = check_relations(CellMasses(tuple(m0), tuple(m1)), cfg.alpha, cfg.beta)
    worst = max(residuals.values())
    print(f"relation residuals over {n} cells: max {worst:.3g}")
    mass0, mass1, witness = concentration_check(kernel, cfg.spec_in)
    print(
        f"endpoint concentration: mu0({{0}}) = {mass0:.6g}, mu1({{1}}) = {mass1:.6g}"
        + ("" if witness is None else " (witness ramp found: subspace not preserved)")
    )
    verdict_ext, wit = check_extendibility(
        lambda g: apply(kernel, g), cfg.spec_in, grid
    )
    print(f"extendibility sweep: {'extendible' if verdict_ext else 'NOT extendible'}")
    return EXIT_OK


DEMO_SECTIONS = ("example1", "example2", "example3", "remark-extendibility", "infeasible")


def _demo_example1(out: Path) -> bool:
    """Equal-ratio run on a composition kernel, with every support stage shown."""
    from .pipeline import step_one_error  # noqa: F401  (exercised via approximate)
    from .subspace import decompose, test_function

    grid = Grid(100)
    alpha = Fraction(1, 2)
    spec = SubspaceSpec.from_alpha(alpha)
    lam = SampledFunction(grid, grid.points**2)
    kernel = from_composition(lam)
    f = SampledFunction(grid, (1 + grid.points) / 2)
    print(f"kernel check: {validate_kernel(kernel)}")
    mass0, mass1, _ = concentration_check(kernel, spec)
    print(f"endpoint masses at their endpoints: {mass0:.3g}, {mass1:.3g}")
    lam_part, g = decompose(f, spec)
    print(f"decomposition of f: constant part {lam_part:.6g}")
    e = test_function("lower", Fraction(1, 2), spec, grid)
    print(f"lower ramp at 1/2 maps to sup {apply(kernel, e).sup_norm:.6g}")
    result = approximate(kernel, [f], 0.4, spec, spec)
    if isinstance(result, certify_mod.Certificate):
        print("example1 FAILED its certificate")
        return False
    cert = certify_mod.evaluate(kernel, result, [f], 0.4, alpha, alpha)
    from .grids import sup_distance

    d01 = sup_distance(apply(kernel, f), result.average(f))
    print(
        f"example1: N = {result.n}, N1 = {result.n1}, sup_error = "
        f"{cert.sup_error:.6g} (= {d01:.6g}), boundary exact: {cert.boundary_ok}"
    )
    kernel.to_csv(out / "demo_kernel.csv")
    MarkovKernel.from_csv(out / "demo_kernel.csv")
    f.to_csv(out / "demo_f.csv")
    SampledFunction.from_csv(out / "demo_f.csv")
    result.to_csv(out / "demo_family.csv")
    _write_json(out / "demo_family.json", result.to_json_meta())
    MaterializedFamily.load(out / "demo_family.csv", out / "demo_family.json")
    report_mod.emit_report(out, kernel, result, [f], ["demo_f"])
    return cert.passed


def _demo_example2(out: Path) -> bool:
    """Unequal-ratio run on the two-map averaging kernel."""
    grid = Grid(100)
    alpha = Fraction(1, 2)
    spec_in = SubspaceSpec.from_alpha(alpha)
    kernel = _kernel_from_spec({"type": "example2", "k1": 3, "k2": 1}, grid, spec_in)
    beta_emp, defect = induced_ratio(kernel, spec_in)
    beta = Fraction(5, 7)
    print(f"induced ratio {beta_emp:.9g} (defect {defect:.3g}); target {beta}")
    a, k, b = realize_integers(alpha, beta)
    print(f"integer realization: a = {a}, k = {k}, b = {b}")
    f = SampledFunction(grid, (1 + grid.points) / 2)
    result = approximate(kernel, [f], 0.4, spec_in, SubspaceSpec.from_alpha(beta))
    if isinstance(result, certify_mod.Certificate):
        print("example2 FAILED its certificate")
        return False
    cert = certify_mod.evaluate(kernel, result, [f], 0.4, alpha, beta)
    tally = certify_mod.boundary_tally(result)
    ok = certify_mod.certify_boundary(tally, alpha, beta)
    print(
        f"example2: N = {result.n}, N1 = {result.n1}, case {result.selection.case}, "
        f"sup_error = {cert.sup_error:.6g}, boundary exact: {ok}"
    )
    return cert.passed and ok


def _demo_example3() -> bool:
    """Three-point averaging kernel: relations, snapshot and the oracle."""
    from .relations import (
        boundary_count_identity,
        rational_snapshot,
        select_modulus_N1,
        snapshot_oracle,
    )

    grid = Grid(100)
    alpha = Fraction(1, 2)
    spec_in = SubspaceSpec.from_alpha(alpha)
    kernel = _kernel_from_spec({"type": "example3", "k1": 3, "k2": 1}, grid, spec_in)
    beta_emp, defect = induced_ratio(kernel, spec_in)
    print(f"three-point kernel induced ratio {beta_emp:.9g} (defect {defect:.3g})")
    beta = Fraction(75, 91)
    verdict = feasibility(alpha, beta)
    print(f"feasibility({alpha}, {beta}): {verdict.reason}")
    mu0, mu1 = endpoint_measures(kernel)
    part = make_partition(
        [Fraction(0), Fraction(1, 2), Fraction(1)], grid
    )
    m0 = tuple(float(mu0.weights[part.cell_indices(c)].sum()) for c in range(3))
    m1 = tuple(float(mu1.weights[part.cell_indices(c)].sum()) for c in range(3))
    masses = CellMasses(m0, m1)
    res = check_relations(masses, alpha, beta)
    print(f"relation residuals: max {max(res.values()):.3g}")
    # small exact instance for the brute-force cross-check
    toy = CellMasses((29 / 40, 0.0, 11 / 40), (3 / 10, 0.0, 7 / 10))
    snap = rational_snapshot(toy, Fraction(1, 10), Fraction(1, 2), Fraction(3, 4))
    found = snapshot_oracle(toy, Fraction(1, 2), Fraction(3, 4), Fraction(1, 10), 40)
    contains = any(c.r == snap.r and c.s == snap.s for c in found)
    ident = boundary_count_identity(
        [0], 29, 11, [0], 12, 28, Fraction(1, 2), Fraction(3, 4)
    )
    n1 = select_modulus_N1(Fraction(1, 100), Fraction(1, 10), {4})
    print(
        f"snapshot r = {snap.r}, oracle found {len(found)} candidates "
        f"(contains ours: {contains}); count identity sample: {ident}; "
        f"sample modulus N1 = {n1}"
    )
    return contains and ident


def _demo_remark_extendibility() -> bool:
    """The norm-one map through x0 = 1/2 whose unital extension goes negative."""
    grid = Grid(100)
    spec = SubspaceSpec.from_alpha(Fraction(1, 2))  # a = k = 1
    a, k = spec.a, spec.k
    ray = SampledFunction(grid, (a + k * grid.points) / (a + k))

    def phi_sub(g: SampledFunction) -> SampledFunction:
        return ray * float(g(0.5))

    verdict, witness = check_extendibility(phi_sub, spec, grid)
    print(
        f"extendibility of the point-evaluation map: "
        f"{'extendible' if verdict else 'NOT extendible'}"
        + ("" if witness is None else f" (witness ramp, sup {witness.sup_norm:.4g})")
    )
    extended = extend_map(phi_sub, spec, grid)
    x0 = 0.5
    fv = np.where(grid.points <= x0, 0.0, k / (1 - x0) * (grid.points - 1) + k)
    f = SampledFunction(grid, fv)
    image = extended(f)
    print(
        f"extension applied to a nonnegative function attains minimum "
        f"{float(np.min(image.values)):.6g} (analytic value {-a * k / (a + k)})"
    )
    return (not verdict) and abs(float(np.min(image.values)) + a * k / (a + k)) < 1e-6


def _demo_infeasible() -> bool:
    verdict = feasibility(Fraction(1, 2), Fraction(1, 4))
    print(f"feasibility(1/2, 1/4): infeasible: beta < alpha ({verdict.reason})")
    return not verdict


def cmd_demo(args) -> int:
    out = _out_dir(args)
    sections = [args.section] if args.section else list(DEMO_SECTIONS)
    for s in sections:
        if s not in DEMO_SECTIONS:
            raise ConfigError(f"unknown demo section {s!r}; pick from {DEMO_SECTIONS}")
    ok = True
    for s in sections:
        print(f"--- {s} ---")
        if s == "example1":
            ok &= _demo_example1(out)
        elif s == "example2":
            ok &= _demo_example2(out)
        elif s == "example3":
            ok &= _demo_example3()
        elif s == "remark-extendibility":
            ok &= _demo_remark_extendibility()
        elif s == "infeasible":
            ok &= _demo_infeasible()
    return EXIT_OK if ok else EXIT_CERT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="markov-mimic",
        description="Approximate a Markov kernel by an average of composition maps.",
    )
    p.add_argument("--threads", type=int, default=1, help="reserved; runs single-threaded")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--grid", type=int, default=None, help="override grid M")
        sp.add_argument("--eps", type=float, default=None, help="override eps")

    b = sub.add_parser("build", help="run the pipeline and certify the result")
    common(b)
    v = sub.add_parser("verify", help="re-certify a stored family against a kernel")
    common(v)
    v.add_argument("--family-csv", required=True)
    v.add_argument("--family-json", required=True)
    an = sub.add_parser("analyze", help="inspect a kernel without building")
    common(an)
    an.add_argument("--alpha", default=None)
    an.add_argument("--beta", default=None)
    d = sub.add_parser("demo", help="run the worked examples")
    common(d)
    d.add_argument("section", nargs="?", default=None)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "build":
            if not args.config:
                raise ConfigError("build requires --config")
            return cmd_build(args)
        if args.command == "verify":
            if not args.config:
                raise ConfigError("verify requires --config")
            return cmd_verify(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        return cmd_demo(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage error {exc}", file=sys.stderr)
        return EXIT_STAGE
    except MarkovMimicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
