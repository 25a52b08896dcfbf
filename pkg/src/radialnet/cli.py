"""Command-line entry point.

Subcommands:
    bench run <config.json>   one benchmark from a JSON config
    bench all                 the full benchmark table
    ablate <which>            K_sweep | range_sweep | log_primitive_toggle
    pinn run <config.json>    the point-charge Poisson experiment
    check grads               finite-difference gradient verification
    report <dir>              aggregate emitted CSVs into a summary table

Exit codes: 0 success, 1 check/acceptance failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import gradients, harness, poisson, sampling, targets
from .models import ModelKind
from .optimize import init_params


class ConfigError(Exception):
    """Malformed config; message names the offending key."""


# benchmarks included in `bench all`, with the method(s) run on each
BENCH_ALL = [
    ("log_2d", "direct"),
    ("sqrt_2d", "direct"),
    ("inv_2d", "direct"),
    ("multipower_2d", "direct"),
    ("coulomb_3d", "direct"),
    ("smooth_2d", "direct"),
    ("crack_2d", "angular"),
    ("crack_2d", "angular_half_integer"),
    ("two_source_2d", "multicenter"),
]

_METHODS = ("direct", "msn", "angular", "angular_half_integer", "multicenter")


def load_experiment_config(path) -> harness.ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    fields = {f.name for f in dataclasses.fields(harness.ExperimentConfig)}
    for key in doc:
        if key not in fields:
            raise ConfigError(f"config {path}: unknown key '{key}' "
                              f"(valid: {', '.join(sorted(fields))})")
    if "benchmark" not in doc:
        raise ConfigError(f"config {path}: missing required key 'benchmark'")
    try:
        targets.by_name(doc["benchmark"])
    except KeyError as exc:
        raise ConfigError(f"config {path}: key 'benchmark': {exc.args[0]}")
    if doc.get("method", "direct") not in _METHODS:
        raise ConfigError(f"config {path}: key 'method': must be one of "
                          f"{', '.join(_METHODS)}")
    if "seeds" in doc:
        doc["seeds"] = tuple(doc["seeds"])
    for sub in ("kind_overrides", "train_overrides"):
        if sub in doc and not isinstance(doc[sub], dict):
            raise ConfigError(f"config {path}: key '{sub}': must be an object")
    return harness.ExperimentConfig(**doc)


def load_pinn_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    valid = set(harness.PINN_DEFAULTS) | {"mode", "seeds"}
    for key in doc:
        if key not in valid:
            raise ConfigError(f"config {path}: unknown key '{key}' "
                              f"(valid: {', '.join(sorted(valid))})")
    mode = doc.pop("mode", "pinn")
    if mode not in ("pinn", "supervised"):
        raise ConfigError(f"config {path}: key 'mode': must be "
                          f"'pinn' or 'supervised'")
    seeds = tuple(doc.pop("seeds", (0, 1, 2, 3, 4)))
    p = dict(harness.PINN_DEFAULTS, **doc)
    return mode, seeds, p


def _run_seeds(cfg, seeds, threads):
    if threads <= 1:
        pairs = [harness.run_single(cfg, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(lambda s: harness.run_single(cfg, s), seeds))
    rows = [p[0] for p in pairs]
    reports = [p[1] for p in pairs]
    return rows, reports


def _emit(rows, reports, out_dir, tag):
    out_dir = Path(out_dir)
    harness.write_rows_csv(rows, out_dir / f"{tag}.csv")
    for row, report in zip(rows, reports):
        harness.write_report_json(report, out_dir / f"{tag}_seed{row.seed}.json")


def cmd_bench_run(args):
    cfg = load_experiment_config(args.config)
    seeds = args.seed_list or cfg.seeds
    rows, reports = _run_seeds(cfg, seeds, args.threads)
    tag = f"{cfg.benchmark}_{cfg.method}"
    _emit(rows, reports, args.out_dir, tag)
    for row in rows:
        print(f"{tag} seed {row.seed}: rmse {row.rmse:.3e}"
              + (" (failed)" if row.failed else ""))
    return 0


def cmd_bench_all(args):
    all_rows = []
    for benchmark, method in BENCH_ALL:
        cfg = harness.ExperimentConfig(benchmark, method)
        seeds = args.seed_list or cfg.seeds
        rows, reports = _run_seeds(cfg, seeds, args.threads)
        _emit(rows, reports, args.out_dir, f"{benchmark}_{method}")
        all_rows += rows
        mean = np.mean([r.rmse for r in rows if not r.failed])
        print(f"{benchmark:16s} {method:20s} mean rmse {mean:.3e}")
    summary = harness.summarize(all_rows)
    path = Path(args.out_dir) / "summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2))
    print(f"summary written to {path}")
    return 0


def cmd_ablate(args):
    seeds = args.seed_list or (0, 1, 2)
    rows = harness.ablation_suite(args.which, seeds=seeds)
    out = Path(args.out_dir) / f"ablation_{args.which}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("setting",) + harness.ResultRow.CSV_FIELDS)
        for setting, row in rows:
            rec = row.csv_record()
            writer.writerow([setting] + [rec[k] for k in harness.ResultRow.CSV_FIELDS])
    for setting, row in rows:
        print(f"{args.which} {setting!s:>6} seed {row.seed}: rmse {row.rmse:.3e}")
    return 0


def cmd_pinn_run(args):
    mode, seeds, p = load_pinn_config(args.config)
    if args.seed_list:
        seeds = args.seed_list
    cache = Path(args.out_dir) / "cache"
    rows, reports = harness.run_pinn_experiment(seeds=seeds, mode=mode,
                                                cache_dir=cache, p=p)
    _emit(rows, reports, args.out_dir, f"poisson_{mode}")
    for row in rows:
        print(f"poisson_{mode} seed {row.seed}: rel_l2 {row.rel_l2:.3f} "
              f"flux {row.flux_err:.2e}")
    print(f"mean rel_l2 {np.mean([r.rel_l2 for r in rows]):.3f} "
          f"mean flux {np.mean([r.flux_err for r in rows]):.2e}")
    return 0


def _grad_check_cases():
    rng = np.random.default_rng(7)
    kinds = [
        ("direct2d", ModelKind.direct(2, k=6)),
        ("direct3d", ModelKind.direct(3, k=6)),
        ("angular2d", ModelKind.angular2d(k_r=4, k_a=3, m_max=2,
                                          half_integer=True, n_max=1)),
        ("angular3d", ModelKind.angular3d(k_r=4, k_a=3, l_max=2)),
        ("multicenter", ModelKind.multicenter(2, 2, k=5)),
        ("msn3d", ModelKind.msn(3, k=5)),
    ]
    for name, kind in kinds:
        d = kind.dim
        x = sampling.sample_uniform(
            sampling.Annulus2D() if d == 2 else sampling.ShellBall3D(), 64,
            int(rng.integers(1 << 30)))
        y = np.sin(x.sum(axis=1))
        theta = init_params(kind, rng)
        yield name + "/mse", theta, (
            lambda t, k=kind, x=x, y=y: gradients.mse_loss_and_grad(k, t, x, y))


def cmd_check_grads(args):
    worst_overall = 0.0
    failed = False
    for name, theta, fn in _grad_check_cases():
        err, idx = gradients.fd_check(fn, theta)
        ok = err < 1e-4
        failed |= not ok
        worst_overall = max(worst_overall, err)
        print(f"{name:20s} max rel err {err:.2e} "
              f"{'ok' if ok else f'FAIL at index {idx}'}")
    # one PINN-loss check on the point-charge model
    kind = harness.pinn_model_kind()
    rng = np.random.default_rng(11)
    theta = harness.pinn_init(kind, np.zeros(3), rng)
    batch = harness.pinn_batch_fn(
        poisson.ChargeConfig(charges=(((0.0, 0.0, 0.0), 1.0),)))(rng)
    fn = lambda t: gradients.pinn_loss_and_grad(kind, t, batch,
                                                gradients.PinnWeights())[:2]
    err, idx = gradients.fd_check(fn, theta, rel_tol=1e-3)
    ok = err < 1e-3
    failed |= not ok
    print(f"{'pinn/point_charge':20s} max rel err {err:.2e} "
          f"{'ok' if ok else f'FAIL at index {idx}'}")
    return 1 if failed else 0


def cmd_report(args):
    root = Path(args.dir)
    if not root.is_dir():
        raise ConfigError(f"report: {root} is not a directory")
    rows = []
    for path in sorted(root.glob("*.csv")):
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                if "rmse" not in rec:
                    continue  # ablation CSVs have their own shape
                rows.append(harness.ResultRow(
                    benchmark=rec["benchmark"], method=rec["method"],
                    seed=int(rec["seed"]), rmse=float(rec["rmse"]),
                    param_count=int(rec["param_count"]),
                    rel_l2=float(rec["rel_l2"]) if rec["rel_l2"] else None,
                    flux_err=float(rec["flux_err"]) if rec["flux_err"] else None,
                    failed=rec["failed"] == "True"))
    if not rows:
        raise ConfigError(f"report: no result CSVs found under {root}")
    summary = harness.summarize(rows)
    hdr = (f"{'benchmark':16s} {'method':20s} {'seeds':>5s} "
           f"{'rmse mean':>10s} {'std':>9s} {'published':>10s}")
    print(hdr)
    print("-" * len(hdr))
    for entry in summary:
        pub = entry["published"].get(
            "radial_half_integer" if entry["method"] == "angular_half_integer"
            else "radial")
        pub_s = f"{pub:.2e}" if pub is not None else "-"
        print(f"{entry['benchmark']:16s} {entry['method']:20s} "
              f"{entry['n_ok']:>5d} {entry['rmse_mean']:>10.3e} "
              f"{entry['rmse_std']:>9.2e} {pub_s:>10s}")
        if entry["rel_l2_mean"] is not None:
            print(f"{'':37s} rel_l2 {entry['rel_l2_mean']:.3f} "
                  f"flux {entry['flux_err_mean']:.2e}")
    print("published column: paper-reported values, not reproduced here")
    return 0


def _seed_list(text):
    try:
        return tuple(int(s) for s in text.split(",") if s)
    except ValueError:
        raise argparse.ArgumentTypeError("seed list must be comma-separated ints")


def build_parser():
    parser = argparse.ArgumentParser(prog="radialnet")
    parser.add_argument("--seed-list", type=_seed_list, default=None,
                        help="comma-separated seeds, e.g. 0,1,2")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench").add_subparsers(dest="action", required=True)
    run = bench.add_parser("run")
    run.add_argument("config")
    run.set_defaults(func=cmd_bench_run)
    bench.add_parser("all").set_defaults(func=cmd_bench_all)

    ablate = sub.add_parser("ablate")
    ablate.add_argument("which", choices=("K_sweep", "range_sweep",
                                          "log_primitive_toggle"))
    ablate.set_defaults(func=cmd_ablate)

    pinn = sub.add_parser("pinn").add_subparsers(dest="action", required=True)
    prun = pinn.add_parser("run")
    prun.add_argument("config")
    prun.set_defaults(func=cmd_pinn_run)

    check = sub.add_parser("check").add_subparsers(dest="what", required=True)
    check.add_parser("grads").set_defaults(func=cmd_check_grads)

    report = sub.add_parser("report")
    report.add_argument("dir")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
