"""Command-line front end.

Subcommands:
  estimate        prices CSV -> portfolio instance JSON (annualized mu/sigma)
  brute-force     exact feasible-set extrema and optimizer set
  sweep           mixer x depth angle optimization, metrics table
  noise-sweep     depolarizing-noise sweep at fixed noiseless-optimal angles
  dicke-noise     feasible-superposition preparation quality vs noise
  circuit-report  gate / CNOT / depth accounting table

Every emitted table opens with a comment line recording tool version and
the exact invocation, rows are sorted (never arrival-ordered), and each
file is re-read and schema-checked before the command returns.  Exit code
0 means every requested row was produced, 2 means the run finished with
some rows skipped (reasons on stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import (
    CONSTRAINED_MIXERS,
    MIXER_KINDS,
    MIXER_STANDARD,
    ConfigurationError,
    build_dicke_initial,
    build_uniform_initial,
    circuit_stats,
)
from .engine import (
    BackendSpec,
    GridSpec,
    QaoaParams,
    engine_for,
    optimize_depth_chain,
    refine_params,
)
from .finance import (
    DataError,
    ParameterError,
    PortfolioInstance,
    estimate_instance_from_csv,
    instance_from_json,
    instance_to_json,
    load_price_csv,
    random_instance,
)
from .problem import (
    decode_all_indices,
    enumerate_feasible,
)
from .sim import (
    CapacityError,
    MAX_DENSITY_QUBITS,
    NoiseModel,
    run_sequence,
    sample_shots,
)

DEFAULT_MASTER_SEED = 1234
DEFAULT_Q = 1.0 / 3.0

SWEEP_SCHEMA = {
    "instance": str, "mixer": str, "depth": int, "objective": float,
    "r_bar": float, "p_opt": float, "p_feasible": float, "n_evals": int,
    "method": str, "transfer": str, "gammas": str, "betas": str, "seed": int,
}
NOISE_SCHEMA = {
    "instance": str, "mixer": str, "depth": int, "eta": float,
    "objective": float, "r_bar": float, "p_opt": float, "p_feasible": float,
    "shots": int, "reoptimized": int, "seed": int,
}
DICKE_SCHEMA = {
    "n_assets": int, "budget": int, "eta": float, "p_feasible_exact": float,
    "p_feasible_sampled": float, "shots": int, "seed": int,
}
CIRCUIT_SCHEMA = {
    "mixer": str, "n_assets": int, "budget": int, "p": int,
    "total_gates": int, "cnot_count": int, "depth": int,
}


class CliError(Exception):
    pass


def _default_budget(n_assets: int) -> int:
    return n_assets // 2


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _parse_mixers(text: str) -> list[str]:
    mixers = [tok.strip() for tok in text.split(",") if tok.strip()]
    for m in mixers:
        if m not in MIXER_KINDS:
            raise CliError(f"unknown mixer {m!r}; choose from {', '.join(MIXER_KINDS)}")
    return mixers


def _derived_seed(master: int, *indices: int) -> int:
    """Stable per-row seed: one 32-bit word from the seed-sequence tree."""
    ss = np.random.SeedSequence([int(master), *[int(i) for i in indices]])
    return int(ss.generate_state(1)[0])


def _load_instances(args) -> list[tuple[str, PortfolioInstance]]:
    """Resolve the instance set: explicit JSON files, one seeded random
    instance, or the desk-scale default batch (five at N=5, three at N=8)."""
    if getattr(args, "instance", None):
        out = []
        for path in args.instance.split(","):
            path = path.strip()
            text = Path(path).read_text()
            out.append((Path(path).stem, instance_from_json(text)))
        return out
    if getattr(args, "seed", None) is not None:
        n = args.n_assets
        budget = args.budget if args.budget is not None else _default_budget(n)
        inst = random_instance(n, budget, q=DEFAULT_Q, seed=args.seed)
        return [(f"rand-n{n}-s{args.seed}", inst)]
    batch = []
    # noisy commands default to a single density-tractable instance
    sizes = [(5, 1)] if getattr(args, "noisy_defaults", False) else [(5, 5), (8, 3)]
    for n, count in sizes:
        for i in range(count):
            seed = _derived_seed(args.master_seed, 9000 + n, i)
            inst = random_instance(n, _default_budget(n), q=DEFAULT_Q, seed=seed)
            batch.append((f"rand-n{n}-s{seed}", inst))
    return batch


def _write_table(path: Path, argv: list[str], command: str,
                 schema: dict, rows: list[dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    flags = " ".join(argv) if argv else command
    with open(path, "w", newline="") as fh:
        fh.write(f"# ternary-qaoa {__version__} | {command} | {flags}\n")
        writer = csv.DictWriter(fh, fieldnames=list(schema))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    _validate_table(path, schema)


def _validate_table(path: Path, schema: dict):
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# ternary-qaoa "):
        raise CliError(f"{path}: missing provenance comment line")
    reader = csv.DictReader(lines[1:])
    if reader.fieldnames != list(schema):
        raise CliError(f"{path}: header {reader.fieldnames} != {list(schema)}")
    for k, row in enumerate(reader):
        for key, typ in schema.items():
            cell = row.get(key)
            if cell is None:
                raise CliError(f"{path}: row {k} missing column {key}")
            try:
                if typ is int:
                    int(cell)
                elif typ is float:
                    float(cell)
            except ValueError as exc:
                raise CliError(f"{path}: row {k} column {key}: {exc}") from exc


def _fmt_angles(values) -> str:
    return ";".join(f"{v:.10g}" for v in values)


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(args, argv) -> int:
    n = len(load_price_csv(args.prices))
    budget = args.budget if args.budget is not None else _default_budget(n)
    instance = estimate_instance_from_csv(args.prices, q=args.q, budget=budget)
    out = Path(args.out)
    out.write_text(instance_to_json(instance))
    instance_from_json(out.read_text())  # schema check by round trip
    print(f"estimate: {n} assets, budget {budget}, wrote {out}")
    for label, m, s2 in zip(instance.labels, instance.mu, np.diag(instance.sigma)):
        print(f"  {label}: mu={m:+.4f} var={s2:.4f}")
    return 0


# ---------------------------------------------------------------------------
# brute-force


def cmd_brute_force(args, argv) -> int:
    failures = []
    records = []
    for label, inst in _load_instances(args):
        try:
            summary = enumerate_feasible(inst)
        except (ParameterError, CapacityError) as exc:
            failures.append(f"{label}: {exc}")
            continue
        records.append((label, inst, summary))
    records.sort(key=lambda t: t[0])
    payload = {
        label: {
            "n_assets": inst.n_assets,
            "budget": inst.budget,
            **json.loads(summary.to_json()),
        }
        for label, inst, summary in records
    }
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=2))
    loaded = json.loads(out.read_text())
    for label, entry in loaded.items():
        for key in ("n_assets", "budget", "f_min", "f_max", "argmin_set",
                    "feasible_count", "degenerate"):
            if key not in entry:
                raise CliError(f"{out}: {label} missing {key}")
    for label, inst, summary in records:
        opt = " ".join(summary.argmin_set)
        print(f"{label}: F_min={summary.f_min:.6f} F_max={summary.f_max:.6f} "
              f"feasible={summary.feasible_count} argmin={{{opt}}}")
    print(f"brute-force: wrote {out}")
    return _finish(failures)


# ---------------------------------------------------------------------------
# sweep


def _sweep_unit(payload: dict) -> list[dict]:
    instance = instance_from_json(payload["instance_json"])
    engine = engine_for(instance, payload["mixer"])
    backend = BackendSpec(kind=payload["backend"], shots=payload["shots"],
                          seed=payload["unit_seed"])
    grid = GridSpec(
        gamma_range=tuple(payload["grid_range"]),
        beta_range=tuple(payload["grid_range"]),
        resolution=payload["grid_resolution"],
    )
    results = optimize_depth_chain(engine, payload["depths"], backend, grid)
    rows = []
    for depth in sorted(results):
        res = results[depth]
        row_seed = payload["row_seeds"][str(depth)]
        metrics = engine.metrics(res.params, backend,
                                 np.random.default_rng(row_seed))
        rows.append({
            "instance": payload["label"],
            "mixer": payload["mixer"],
            "depth": depth,
            "objective": f"{res.objective:.12g}",
            "r_bar": f"{metrics.r_bar:.12g}",
            "p_opt": f"{metrics.p_opt:.12g}",
            "p_feasible": f"{metrics.p_feasible:.12g}",
            "n_evals": res.n_evals,
            "method": res.method,
            "transfer": res.transfer or "",
            "gammas": _fmt_angles(res.params.gammas),
            "betas": _fmt_angles(res.params.betas),
            "seed": row_seed,
        })
    return rows


def _run_units(units: list[dict], worker, workers: int,
               failures: list[str]) -> list[dict]:
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(worker, u): u for u in units}
            for fut, unit in futures.items():
                try:
                    rows.extend(fut.result())
                except Exception as exc:
                    failures.append(f"{unit['label']}/{unit['mixer']}: {exc}")
    else:
        for unit in units:
            try:
                rows.extend(worker(unit))
            except Exception as exc:
                failures.append(f"{unit['label']}/{unit['mixer']}: {exc}")
    return rows


def cmd_sweep(args, argv) -> int:
    mixers = _parse_mixers(args.mixers)
    depths = _parse_int_list(args.depths)
    if any(d < 1 for d in depths):
        raise CliError("sweep depths must be >= 1")
    instances = _load_instances(args)
    failures: list[str] = []
    units = []
    for i, (label, inst) in enumerate(instances):
        for j, mixer in enumerate(mixers):
            units.append({
                "label": label,
                "instance_json": instance_to_json(inst),
                "mixer": mixer,
                "depths": depths,
                "backend": args.backend,
                "shots": args.shots,
                "grid_range": list(args.grid_range),
                "grid_resolution": args.grid_resolution,
                "unit_seed": _derived_seed(args.master_seed, i, j),
                "row_seeds": {str(d): _derived_seed(args.master_seed, i, j, k)
                              for k, d in enumerate(sorted(set(depths)))},
            })
    rows = _run_units(units, _sweep_unit, args.workers, failures)
    rows.sort(key=lambda r: (r["instance"], MIXER_KINDS.index(r["mixer"]),
                             int(r["depth"])))
    _write_table(Path(args.out), argv, "sweep", SWEEP_SCHEMA, rows)
    print(f"sweep: wrote {len(rows)} rows to {args.out}")
    return _finish(failures)


# ---------------------------------------------------------------------------
# noise-sweep


def _noise_unit(payload: dict) -> list[dict]:
    instance = instance_from_json(payload["instance_json"])
    if 2 * instance.n_assets > MAX_DENSITY_QUBITS:
        raise CapacityError(
            f"{2 * instance.n_assets} qubits exceed the density-matrix "
            f"limit of {MAX_DENSITY_QUBITS}; noisy runs need 2N <= {MAX_DENSITY_QUBITS}"
        )
    engine = engine_for(instance, payload["mixer"])
    noiseless = BackendSpec(kind="statevector")
    grid = GridSpec(
        gamma_range=tuple(payload["grid_range"]),
        beta_range=tuple(payload["grid_range"]),
        resolution=payload["grid_resolution"],
    )
    chain = optimize_depth_chain(engine, payload["depths"], noiseless, grid)
    rows = []
    for depth in sorted(chain):
        params = chain[depth].params
        for e_idx, eta in enumerate(payload["etas"]):
            row_seed = payload["row_seeds"][f"{depth}:{e_idx}"]
            dense = BackendSpec(kind="density", eta=eta)
            use_params = params
            reopt = 0
            if payload["reoptimize"]:
                use_params, _, _ = refine_params(
                    engine, dense, params, max_evals=25 * depth)
                reopt = 1
            objective = engine.evaluate_objective(use_params, dense)
            metrics = engine.sampled_metrics_from_density(
                use_params, eta, payload["shots"],
                np.random.default_rng(row_seed))
            rows.append({
                "instance": payload["label"],
                "mixer": payload["mixer"],
                "depth": depth,
                "eta": f"{eta:.10g}",
                "objective": f"{objective:.12g}",
                "r_bar": f"{metrics.r_bar:.12g}",
                "p_opt": f"{metrics.p_opt:.12g}",
                "p_feasible": f"{metrics.p_feasible:.12g}",
                "shots": payload["shots"],
                "reoptimized": reopt,
                "seed": row_seed,
            })
    return rows


def _report_crossovers(rows: list[dict]):
    """Smallest grid eta at which the full-space mixer matches or beats
    every constrained mixer, per instance, depth, and metric.  No
    interpolation between grid points."""
    by_key: dict[tuple, dict] = {}
    for row in rows:
        key = (row["instance"], int(row["depth"]), float(row["eta"]))
        by_key.setdefault(key, {})[row["mixer"]] = row
    pairs = sorted({(k[0], k[1]) for k in by_key})
    for instance, depth in pairs:
        etas = sorted({k[2] for k in by_key if k[0] == instance and k[1] == depth})
        for metric in ("p_opt", "r_bar"):
            crossover = None
            for eta in etas:
                cell = by_key[(instance, depth, eta)]
                if MIXER_STANDARD not in cell:
                    break
                rivals = [m for m in cell if m != MIXER_STANDARD]
                if not rivals:
                    break
                std = float(cell[MIXER_STANDARD][metric])
                if all(std >= float(cell[m][metric]) for m in rivals):
                    crossover = eta
                    break
            shown = f"{crossover:.10g}" if crossover is not None else "none"
            print(f"crossover instance={instance} depth={depth} "
                  f"metric={metric} eta={shown}")


def cmd_noise_sweep(args, argv) -> int:
    mixers = _parse_mixers(args.mixers)
    depths = _parse_int_list(args.depths)
    etas = _parse_float_list(args.eta)
    if any(d < 1 for d in depths):
        raise CliError("noise-sweep depths must be >= 1")
    if any(not 0 <= e <= 1 for e in etas):
        raise CliError("eta values must lie in [0, 1]")
    args.noisy_defaults = True
    instances = _load_instances(args)
    failures: list[str] = []
    units = []
    for i, (label, inst) in enumerate(instances):
        for j, mixer in enumerate(mixers):
            units.append({
                "label": label,
                "instance_json": instance_to_json(inst),
                "mixer": mixer,
                "depths": depths,
                "etas": etas,
                "shots": args.shots,
                "reoptimize": bool(args.reoptimize),
                "grid_range": list(args.grid_range),
                "grid_resolution": args.grid_resolution,
                "row_seeds": {
                    f"{d}:{e_idx}": _derived_seed(args.master_seed, i, j, k, e_idx)
                    for k, d in enumerate(sorted(set(depths)))
                    for e_idx in range(len(etas))
                },
            })
    rows = _run_units(units, _noise_unit, args.workers, failures)
    rows.sort(key=lambda r: (r["instance"], MIXER_KINDS.index(r["mixer"]),
                             int(r["depth"]), float(r["eta"])))
    _write_table(Path(args.out), argv, "noise-sweep", NOISE_SCHEMA, rows)
    print(f"noise-sweep: wrote {len(rows)} rows to {args.out}")
    _report_crossovers(rows)
    return _finish(failures)


# ---------------------------------------------------------------------------
# dicke-noise


def cmd_dicke_noise(args, argv) -> int:
    n = args.n_assets
    budget = args.budget if args.budget is not None else _default_budget(n)
    if 2 * n > MAX_DENSITY_QUBITS:
        raise CliError(f"{2 * n} qubits exceed the density-matrix limit "
                       f"of {MAX_DENSITY_QUBITS}")
    etas = _parse_float_list(args.eta)
    if any(not 0 <= e <= 1 for e in etas):
        raise CliError("eta values must lie in [0, 1]")
    prep = build_dicke_initial(n, budget)
    feasible = decode_all_indices(n).sum(axis=1) == budget
    rows = []
    for e_idx, eta in enumerate(sorted(set(etas))):
        state = run_sequence(prep, backend="density",
                             noise=NoiseModel(eta) if eta > 0 else None)
        probs = state.probabilities()
        exact = float(probs[feasible].sum())
        row_seed = _derived_seed(args.master_seed, e_idx)
        counts = sample_shots(probs, args.shots, np.random.default_rng(row_seed))
        hits = sum(c for bits, c in counts.items()
                   if feasible[int(bits[::-1], 2)])
        rows.append({
            "n_assets": n,
            "budget": budget,
            "eta": f"{eta:.10g}",
            "p_feasible_exact": f"{exact:.12g}",
            "p_feasible_sampled": f"{hits / args.shots:.12g}",
            "shots": args.shots,
            "seed": row_seed,
        })
    _write_table(Path(args.out), argv, "dicke-noise", DICKE_SCHEMA, rows)
    print(f"dicke-noise: wrote {len(rows)} rows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# circuit-report


def cmd_circuit_report(args, argv) -> int:
    mixers = _parse_mixers(args.mixers)
    sizes = _parse_int_list(args.n_assets)
    depths = _parse_int_list(args.depths)
    if any(d < 0 for d in depths):
        raise CliError("circuit-report depths must be >= 0")
    failures: list[str] = []
    rows = []
    for mixer in mixers:
        for n in sizes:
            budget = args.budget if args.budget is not None else _default_budget(n)
            for p in depths:
                try:
                    if p == 0:
                        seq = (build_uniform_initial(2 * n)
                               if mixer == MIXER_STANDARD
                               else build_dicke_initial(n, budget))
                    else:
                        inst = random_instance(
                            n, budget, q=DEFAULT_Q,
                            seed=_derived_seed(args.master_seed, n))
                        engine = engine_for(inst, mixer)
                        seq = engine.full_sequence(QaoaParams(
                            gammas=(1.0,) * p, betas=(1.0,) * p))
                    stats = circuit_stats(seq)
                except (ParameterError, ConfigurationError, CapacityError) as exc:
                    failures.append(f"{mixer}/n={n}/p={p}: {exc}")
                    continue
                rows.append({
                    "mixer": mixer, "n_assets": n, "budget": budget, "p": p,
                    "total_gates": stats.total_gates,
                    "cnot_count": stats.cnot_count,
                    "depth": stats.depth,
                })
    rows.sort(key=lambda r: (MIXER_KINDS.index(r["mixer"]),
                             int(r["n_assets"]), int(r["p"])))
    _write_table(Path(args.out), argv, "circuit-report", CIRCUIT_SCHEMA, rows)
    print(f"circuit-report: wrote {len(rows)} rows to {args.out}")
    return _finish(failures)


# ---------------------------------------------------------------------------
# wiring


def _finish(failures: list[str]) -> int:
    for message in failures:
        print(f"skipped: {message}", file=sys.stderr)
    return 2 if failures else 0


def _add_instance_flags(sub):
    sub.add_argument("--instance", help="comma-separated instance JSON paths")
    sub.add_argument("--seed", type=int, default=None,
                     help="generate one random instance with this seed")
    sub.add_argument("--n-assets", type=int, default=5,
                     help="asset count for --seed instances (default 5)")
    sub.add_argument("--budget", type=int, default=None,
                     help="net budget (default floor(N/2))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ternary-qaoa",
        description="long/none/short portfolio optimization with QAOA-style "
                    "variational circuits",
    )
    parser.add_argument("--version", action="version",
                        version=f"ternary-qaoa {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    est = subs.add_parser("estimate", help="prices CSV -> instance JSON")
    est.add_argument("--prices", required=True, help="price table CSV")
    est.add_argument("--q", type=float, default=DEFAULT_Q)
    est.add_argument("--budget", type=int, default=None)
    est.add_argument("--out", default="instance.json")
    est.set_defaults(func=cmd_estimate)

    brute = subs.add_parser("brute-force", help="exact feasible-set extrema")
    _add_instance_flags(brute)
    brute.add_argument("--master-seed", type=int, default=DEFAULT_MASTER_SEED)
    brute.add_argument("--out", default="brute_force.json")
    brute.set_defaults(func=cmd_brute_force)

    sweep = subs.add_parser("sweep", help="mixer x depth optimization table")
    _add_instance_flags(sweep)
    sweep.add_argument("--mixers", default=",".join(MIXER_KINDS))
    sweep.add_argument("--depths", default="1,3,5")
    sweep.add_argument("--backend", choices=("statevector", "sampled"),
                       default="statevector")
    sweep.add_argument("--shots", type=int, default=8192)
    sweep.add_argument("--grid-range", type=float, nargs=2,
                       default=(0.05, 2.0), metavar=("LO", "HI"),
                       help="depth-1 seed grid bounds for gamma and beta")
    sweep.add_argument("--grid-resolution", type=int, default=40)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--master-seed", type=int, default=DEFAULT_MASTER_SEED)
    sweep.add_argument("--out", default="sweep.csv")
    sweep.set_defaults(func=cmd_sweep)

    noise = subs.add_parser("noise-sweep",
                            help="noisy evaluation at noiseless-optimal angles")
    _add_instance_flags(noise)
    noise.add_argument("--mixers", default=",".join(MIXER_KINDS))
    noise.add_argument("--depths", default="1,3")
    noise.add_argument("--eta", default="0,0.002,0.005,0.01",
                       help="comma-separated depolarizing strengths")
    noise.add_argument("--shots", type=int, default=8192)
    noise.add_argument("--reoptimize", action="store_true",
                       help="lightly re-polish angles on the noisy backend")
    noise.add_argument("--grid-range", type=float, nargs=2,
                       default=(0.05, 2.0), metavar=("LO", "HI"))
    noise.add_argument("--grid-resolution", type=int, default=40)
    noise.add_argument("--workers", type=int, default=1)
    noise.add_argument("--master-seed", type=int, default=DEFAULT_MASTER_SEED)
    noise.add_argument("--out", default="noise_sweep.csv")
    noise.set_defaults(func=cmd_noise_sweep)

    dicke = subs.add_parser("dicke-noise",
                            help="feasible-superposition quality vs noise")
    dicke.add_argument("--n-assets", type=int, default=5)
    dicke.add_argument("--budget", type=int, default=None)
    dicke.add_argument("--eta",
                       default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    dicke.add_argument("--shots", type=int, default=20000)
    dicke.add_argument("--master-seed", type=int, default=DEFAULT_MASTER_SEED)
    dicke.add_argument("--out", default="dicke_noise.csv")
    dicke.set_defaults(func=cmd_dicke_noise)

    report = subs.add_parser("circuit-report", help="gate and depth accounting")
    report.add_argument("--mixers", default=",".join(MIXER_KINDS))
    report.add_argument("--n-assets", default="2,3,4,5,6,7,8",
                        help="comma-separated asset counts")
    report.add_argument("--budget", type=int, default=None)
    report.add_argument("--depths", default="0,1",
                        help="layer counts; 0 reports the bare state-prep circuit")
    report.add_argument("--master-seed", type=int, default=DEFAULT_MASTER_SEED)
    report.add_argument("--out", default="circuit_report.csv")
    report.set_defaults(func=cmd_circuit_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except (CliError, DataError, ParameterError, ConfigurationError,
            CapacityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
