"""Command-line interface and grid serialization.

Exit codes: 0 on success, 1 for input errors (bad flags, malformed config,
unreadable files, refused workloads), 2 for internal-consistency failures
(cross-engine disagreement or violated invariants).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .circuits import build_alternating_circuit, draw_disorder
from .dense import MAX_DENSE_QUBITS, dense_evolve, dense_otoc, pauli_matrix
from .exact import ComplexityBudgetError, MAX_EXACT_GATES, exact_otoc
from .experiments import (
    DEFAULT_FIT_START,
    EnsembleSpec,
    LightconeGrid,
    asymptotic_value,
    optimize_epsilon,
    run_ensemble,
    svd_principal_vector,
)


class InputError(ValueError):
    """User-supplied parameters are invalid."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise InputError(message)


# ---------------------------------------------------------------------------
# Grid serialization

CSV_DIGITS = 9


def _fmt(x: float) -> str:
    return f"{x:.{CSV_DIGITS}g}"


def write_grid(grid: LightconeGrid, path: str | Path, fmt: str = "csv") -> None:
    """Write a grid as CSV (time column + one column per site), JSON, or PGM.

    CSV values carry 9 significant digits and round-trip losslessly through
    :func:`read_grid`.  PGM output is 8-bit binary grayscale with one image
    row per time sample (earliest at the top) and pixel value
    round(255 * magnitude).
    """
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time"] + [str(s) for s in range(1, grid.n_sites + 1)])
            for t, row in zip(grid.times, grid.values):
                writer.writerow([_fmt(t)] + [_fmt(v) for v in row])
    elif fmt == "json":
        doc = {
            "times": [float(t) for t in grid.times],
            "sites": list(range(1, grid.n_sites + 1)),
            "values": [[float(v) for v in row] for row in grid.values],
            "meta": grid.meta,
        }
        with path.open("w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "pgm":
        pixels = np.clip(np.rint(255.0 * grid.values), 0, 255).astype(np.uint8)
        header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n"
        with path.open("wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(pixels.tobytes())
    else:
        raise InputError(f"unknown output format {fmt!r}")


def read_grid(path: str | Path) -> LightconeGrid:
    """Read a grid previously written as CSV or JSON."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return LightconeGrid(
            times=np.array(doc["times"], dtype=float),
            values=np.array(doc["values"], dtype=float),
            meta=doc.get("meta", {}),
        )
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0][0] != "time":
        raise InputError(f"{path} is not a grid CSV (missing 'time' header)")
    times = [float(r[0]) for r in rows[1:]]
    values = [[float(v) for v in r[1:]] for r in rows[1:]]
    return LightconeGrid(times=np.array(times), values=np.array(values), meta={})


# ---------------------------------------------------------------------------
# Configuration handling


@dataclass(frozen=True)
class RunConfig:
    """Merged view of config-file values and command-line flags."""

    values: dict

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, *keys: str) -> list:
        missing = [k for k in keys if self.values.get(k) is None]
        if missing:
            raise InputError(f"missing required parameter(s): {', '.join(missing)}")
        return [self.values[k] for k in keys]


def load_config_schema() -> dict:
    with resources.files("otocsim").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def _load_config_file(path: str) -> dict:
    import jsonschema

    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, load_config_schema())
    except jsonschema.ValidationError as exc:
        raise InputError(f"invalid config {path}: {exc.message}") from exc
    return doc


def merge_config(args: argparse.Namespace, defaults: dict) -> RunConfig:
    """defaults < config file < explicit command-line flags."""
    merged = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        merged.update(_load_config_file(cfg_path))
    for key, val in vars(args).items():
        if key in ("config", "func") or val is None:
            continue
        merged[key] = val
    return RunConfig(values=merged)


def parse_gate_spec(text_items, dt: float, max_step: int) -> tuple[tuple[int, int], ...]:
    """Parse gate specifications of the form ``qubit@time``.

    Times are snapped to the nearest multiple of ``dt`` (the stroboscopic
    layer boundaries); a snap beyond 1e-9 relative tolerance emits a warning
    on stderr.
    """
    gates = []
    for item in text_items:
        try:
            qubit_text, time_text = item.split("@", 1)
            qubit, t = int(qubit_text), float(time_text)
        except ValueError as exc:
            raise InputError(f"bad gate spec {item!r} (expected 'qubit@time')") from exc
        step = int(round(t / dt))
        if abs(t - step * dt) > 1e-9 * max(1.0, abs(t)):
            print(
                f"warning: gate time {t} snapped to layer boundary {step * dt}",
                file=sys.stderr,
            )
        if not 1 <= step <= max_step:
            raise InputError(f"gate time {t} outside the circuit (steps 1..{max_step})")
        gates.append((qubit, step))
    return tuple(gates)


# ---------------------------------------------------------------------------
# Subcommands


_GRID_DEFAULTS = {
    "dt": math.pi / 4.0,
    "periods": 20,
    "epsilon": 0.2,
    "realizations": 1,
    "base_seed": 0,
    "a_site": None,
    "format": "csv",
    "threads": None,
    "gates": [],
}


def _grid_spec(cfg: RunConfig, engine: str) -> EnsembleSpec:
    n, nu = cfg.require("n", "nu")
    dt = float(cfg.get("dt"))
    periods = int(cfg.get("periods"))
    gates: tuple[tuple[int, int], ...] = ()
    if engine == "exact":
        gates = parse_gate_spec(cfg.get("gates", []), dt, 2 * periods)
    return EnsembleSpec(
        n=int(n),
        nu=float(nu),
        dt=dt,
        periods=periods,
        realizations=int(cfg.get("realizations")),
        epsilon=float(cfg.get("epsilon")),
        base_seed=int(cfg.get("base_seed")),
        a_site=cfg.get("a_site"),
        engine=engine,
        gates=gates,
    )


def _run_grid_command(args: argparse.Namespace, engine: str) -> int:
    cfg = merge_config(args, _GRID_DEFAULTS)
    if engine == "generic":
        engine = cfg.get("engine") or "approx"
    spec = _grid_spec(cfg, engine)
    grid = run_ensemble(spec, threads=cfg.get("threads"))
    out = cfg.get("out")
    if out:
        write_grid(grid, out, cfg.get("format"))
        print(f"wrote {out}")
    else:
        write_grid_stdout(grid)
    return 0


def write_grid_stdout(grid: LightconeGrid) -> None:
    writer = csv.writer(sys.stdout)
    writer.writerow(["time"] + [str(s) for s in range(1, grid.n_sites + 1)])
    for t, row in zip(grid.times, grid.values):
        writer.writerow([_fmt(t)] + [_fmt(v) for v in row])


def _cmd_optimize_eps(args: argparse.Namespace) -> int:
    defaults = dict(_GRID_DEFAULTS)
    defaults.update({"eps_min": 0.05, "eps_max": 0.95, "eps_step": 0.05, "realizations": 25})
    cfg = merge_config(args, defaults)
    n, nu = cfg.require("n", "nu")
    lo, hi, step = float(cfg.get("eps_min")), float(cfg.get("eps_max")), float(cfg.get("eps_step"))
    count = int(round((hi - lo) / step)) + 1
    eps_values = [lo + k * step for k in range(count) if lo + k * step <= hi + 1e-12]
    scan = optimize_epsilon(
        int(n),
        float(nu),
        float(cfg.get("dt")),
        int(cfg.get("periods")),
        eps_values,
        realizations=int(cfg.get("realizations")),
        base_seed=int(cfg.get("base_seed")),
        a_site=cfg.get("a_site"),
        threads=cfg.get("threads"),
    )
    doc = {
        "eps_values": [float(e) for e in scan.eps_values],
        "errors": [float(e) for e in scan.errors],
        "eps_star": scan.eps_star,
        "depth": scan.depth,
        "flat": scan.flat,
    }
    out = cfg.get("out")
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(payload)
        print(f"wrote {out}")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg = merge_config(args, {"fit_start": DEFAULT_FIT_START, "site": None})
    (grid_path,) = cfg.require("grid")
    grid = read_grid(grid_path)
    fit = svd_principal_vector(grid, fit_start=float(cfg.get("fit_start")))
    doc = {
        "sigma1": fit.sigma1,
        "degenerate": fit.degenerate,
        "fit_start": fit.fit_start,
        "slope_semilog": fit.slope_semilog,
        "intercept_semilog": fit.intercept_semilog,
        "r2_semilog": fit.r2_semilog,
        "slope_linear": fit.slope_linear,
        "intercept_linear": fit.intercept_linear,
        "r2_linear": fit.r2_linear,
        "u1": [float(v) for v in fit.u1],
        "v1": [float(v) for v in fit.v1],
    }
    site = cfg.get("site")
    if site is not None:
        doc["site"] = int(site)
        doc["asymptotic_value"] = asymptotic_value(grid, int(site))
    out = cfg.get("out")
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(payload)
        print(f"wrote {out}")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = merge_config(
        args,
        {"max_n": 6, "max_gates": 3, "circuits": 20, "base_seed": 0, "dt": math.pi / 4.0},
    )
    max_n = int(cfg.get("max_n"))
    max_gates = int(cfg.get("max_gates"))
    circuits = int(cfg.get("circuits"))
    if max_n > MAX_DENSE_QUBITS:
        raise InputError(f"validation needs n <= {MAX_DENSE_QUBITS}")
    if max_gates > MAX_EXACT_GATES:
        raise InputError(f"validation needs gate count <= {MAX_EXACT_GATES}")
    worst = 0.0
    rng = np.random.Generator(np.random.Philox(key=int(cfg.get("base_seed"))))
    for k in range(circuits):
        n = int(rng.integers(2, max_n + 1))
        g = int(rng.integers(0, max_gates + 1))
        nu = float(rng.uniform(0.0, 5.0))
        periods = int(rng.integers(1, 3))
        circuit = _random_gated_circuit(rng, n, g, nu, float(cfg.get("dt")), periods)
        u_total = dense_evolve(circuit)
        center = n // 2
        a_string = "I" * (center - 1) + "X" + "I" * (n - center)
        for s in range(1, n + 1):
            b_string = "I" * (s - 1) + "Z" + "I" * (n - s)
            got = exact_otoc(circuit, a_string, b_string)
            want = dense_otoc(u_total, pauli_matrix(a_string), pauli_matrix(b_string))
            worst = max(worst, abs(got - want))
    print(f"checked {circuits} circuits; max |exact - dense| = {worst:.3e}")
    if worst > 1e-8:
        raise ArithmeticError(f"cross-validation failed: deviation {worst:.3e}")
    return 0


def _random_gated_circuit(rng, n, g, nu, dt, periods):
    from .circuits import build_gated_circuit

    steps = 2 * periods
    nu_values = rng.uniform(-nu, nu, size=n)
    gates = []
    attempts = 0
    while len(gates) < g and attempts < 100:
        attempts += 1
        step = int(rng.integers(1, steps + 1))
        qubit = int(rng.integers(1, n))
        layer_mates = [q for q, st in gates if st == step]
        if any(abs(q - qubit) <= 1 for q in layer_mates):
            continue
        gates.append((qubit, step))
    return build_gated_circuit(n, nu_values, dt, steps, gates)


def _cmd_exact_point(args: argparse.Namespace) -> int:
    """The exact engine CLI: either a full grid or, with --site, one value."""
    cfg = merge_config(args, dict(_GRID_DEFAULTS))
    site = cfg.get("site")
    if site is None:
        return _run_grid_command(args, "exact")
    spec = _grid_spec(cfg, "exact")
    disorder = draw_disorder(spec.n, spec.nu, spec.base_seed, 0)
    from .circuits import build_gated_circuit

    circuit = build_gated_circuit(
        spec.n, disorder.nu_values, spec.dt, 2 * spec.periods, spec.gates
    )
    center = spec.center
    # Same convention as the grid output: X at the center evolves, the probe
    # is the Z at the requested site, so this prints one pixel of the grid.
    evolving = "I" * (center - 1) + "X" + "I" * (spec.n - center)
    probe = "I" * (int(site) - 1) + "Z" + "I" * (spec.n - int(site))
    value = exact_otoc(circuit, probe, evolving)
    print(_fmt(value))
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="otocsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser, with_eps: bool = True) -> None:
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--n", type=int, help="chain length (qubits)")
        p.add_argument("--nu", type=float, help="disorder strength")
        p.add_argument("--dt", type=float, help="Gaussian layer duration")
        p.add_argument("--periods", type=int, help="brickwork periods (2 layers each)")
        p.add_argument("--realizations", type=int, help="disorder realizations")
        p.add_argument("--base-seed", dest="base_seed", type=int, help="ensemble seed")
        p.add_argument("--a-site", dest="a_site", type=int, help="site of the evolving X")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json", "pgm"), help="output format")
        if with_eps:
            p.add_argument("--epsilon", type=float, help="replacement threshold")

    p_exact = sub.add_parser("exact", help="exact configuration-sum engine")
    add_common(p_exact, with_eps=False)
    p_exact.add_argument(
        "--gates",
        type=lambda s: s.split(","),
        help="comma-separated gate specs 'qubit@time'",
    )
    p_exact.add_argument("--site", type=int, help="probe site: print one value instead of a grid")
    p_exact.set_defaults(func=_cmd_exact_point)

    p_approx = sub.add_parser("approx", help="conditional-replacement engine")
    add_common(p_approx)
    p_approx.set_defaults(func=lambda a: _run_grid_command(a, "approx"))

    p_gauss = sub.add_parser("gaussian", help="free-fermion engine (gates dropped)")
    add_common(p_gauss, with_eps=False)
    p_gauss.set_defaults(func=lambda a: _run_grid_command(a, "gaussian"))

    p_oracle = sub.add_parser("oracle", help="dense reference engine (small n)")
    add_common(p_oracle, with_eps=False)
    p_oracle.set_defaults(func=lambda a: _run_grid_command(a, "oracle"))

    p_ens = sub.add_parser("ensemble", help="disorder ensemble with a chosen engine")
    add_common(p_ens)
    p_ens.add_argument("--engine", choices=("approx", "gaussian", "exact", "oracle"))
    p_ens.add_argument("--gates", type=lambda s: s.split(","), help="gate specs for engine=exact")
    p_ens.set_defaults(func=lambda a: _run_grid_command(a, "generic"))

    p_opt = sub.add_parser("optimize-eps", help="scan the replacement threshold")
    add_common(p_opt, with_eps=False)
    p_opt.add_argument("--eps-min", dest="eps_min", type=float)
    p_opt.add_argument("--eps-max", dest="eps_max", type=float)
    p_opt.add_argument("--eps-step", dest="eps_step", type=float)
    p_opt.set_defaults(func=_cmd_optimize_eps)

    p_ana = sub.add_parser("analyze", help="SVD profile and late-time fits of a grid")
    p_ana.add_argument("--config", help="JSON config file (flags override it)")
    p_ana.add_argument("--grid", help="grid file (CSV or JSON)")
    p_ana.add_argument("--fit-start", dest="fit_start", type=float)
    p_ana.add_argument("--site", type=int, help="also report the asymptotic value here")
    p_ana.add_argument("--out", help="output path (stdout if omitted)")
    p_ana.set_defaults(func=_cmd_analyze)

    p_val = sub.add_parser("validate", help="random-circuit cross-check vs the dense engine")
    p_val.add_argument("--config", help="JSON config file (flags override it)")
    p_val.add_argument("--max-n", dest="max_n", type=int)
    p_val.add_argument("--max-gates", dest="max_gates", type=int)
    p_val.add_argument("--circuits", type=int)
    p_val.add_argument("--base-seed", dest="base_seed", type=int)
    p_val.add_argument("--dt", type=float)
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ComplexityBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, AssertionError) as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
