"""Command line entry point: ``dfp run | validate | sweep | oracle``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 connectivity
validation failed under ``--strict`` (or in ``validate``), 4 a runtime
contract violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, plots
from .config import (Scenario, build_scenario, config_echo, eta_report, load_config,
                     with_overrides)
from .consensus import (WeightScheme, iter_backward_products, lemma1_bound, run_tracking,
                        weight_matrix_from_edges)
from .engine import run, summary_metrics
from .errors import ConfigError, ContractViolation
from .network import GraphSequence, periodic_partition, validate_window_connectivity

log = logging.getLogger("dfp")

EXIT_OK, EXIT_CONFIG, EXIT_CONNECTIVITY, EXIT_CONTRACT = 0, 2, 3, 4
DEFAULT_OUT = "dfp_out"


@dataclass
class RunManifest:
    config_path: str
    resolved: dict
    out_dir: str
    files: list = field(default_factory=list)
    exit_status: int = EXIT_OK

    def to_dict(self) -> dict:
        return {"config_path": self.config_path, "out_dir": self.out_dir,
                "files": list(self.files), "exit_status": self.exit_status}


def output_root(out: str | None) -> Path:
    return Path(out or os.environ.get("DFP_OUT") or DEFAULT_OUT)


def connectivity_for(scenario: Scenario):
    horizon = scenario.sim.horizon
    T = scenario.window
    return validate_window_connectivity(scenario.sim.graph, T, 0, max(horizon, 1) + T - 2)


def execute(scenario: Scenario, out_dir: Path, config_path: str = "",
            strict: bool = False, svg: bool = False) -> RunManifest:
    """Run one scenario and write its artifacts into ``out_dir``."""
    manifest = RunManifest(config_path, config_echo(scenario.raw), str(out_dir))
    report = connectivity_for(scenario)
    if not report.connected:
        log.warning("window connectivity fails at t=%s (T=%s)", report.first_failure, report.window)
        if strict:
            manifest.exit_status = EXIT_CONNECTIVITY
            return manifest
    try:
        _, trace = run(scenario.sim, report, check_every=100)
    except ContractViolation as exc:
        log.error("contract violation: %s", exc)
        manifest.exit_status = EXIT_CONTRACT
        return manifest

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.csv").write_text(trace.to_csv())
    manifest.files.append("trace.csv")

    ne_set = scenario.sim.ne_set
    summary = {
        "config": manifest.resolved,
        "seed": scenario.sim.seed,
        "final": summary_metrics(trace, ne_set),
        "connectivity": report.to_dict(),
        "weights": eta_report(scenario),
        "ne_set_size": len(ne_set),
    }
    if scenario.world is not None:
        summary["world"] = scenario.world.to_dict()
    try:
        summary["estimate_rate"] = metrics.fit_rate(
            trace.series("estimate_error"), t_min=min(100, max(10, scenario.sim.horizon // 10))
        ).to_dict()
    except ContractViolation:
        summary["estimate_rate"] = None

    if svg:
        ts = [r.t for r in trace.records]
        plots.write_dat(out_dir / "panels.dat", ("t", "estimate_error", "ne_distance"),
                        [(r.t, r.estimate_error, r.ne_distance) for r in trace.records])
        plots.write_svg(out_dir / "estimates.svg",
                        {"estimate error": (ts, [r.estimate_error for r in trace.records])},
                        "Convergence of estimates", "sum_ij |v_ij - f_j|")
        plots.write_svg(out_dir / "ne_distance.svg",
                        {"NE distance": (ts, [r.ne_distance for r in trace.records])},
                        "Convergence of frequencies to NE", "sum_i |f_i - sigma*_i|")
        manifest.files += ["panels.dat", "estimates.svg", "ne_distance.svg"]

    manifest.files.append("summary.json")
    summary["manifest"] = manifest.to_dict()
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_run(config_path, out=None, strict=False, svg=False) -> RunManifest:
    scenario = build_scenario(load_config(config_path))
    return execute(scenario, output_root(out), str(config_path), strict, svg)


def cmd_validate(config_path) -> tuple[dict, int]:
    scenario = build_scenario(load_config(config_path))
    report = connectivity_for(scenario)
    weights = eta_report(scenario)
    result = {"connectivity": report.to_dict(), "weights": weights}
    ok = report.connected and weights["ok"]
    return result, EXIT_OK if ok else EXIT_CONNECTIVITY


def _sweep_child(args):
    cfg_json, seed, topology, out_dir, strict = args
    from .config import parse_config

    cfg = with_overrides(parse_config(cfg_json), seed=seed, topology=topology)
    manifest = execute(build_scenario(cfg), Path(out_dir), strict=strict)
    return seed, topology, out_dir, manifest.exit_status


def _median(xs):
    xs = [x for x in xs if x is not None]
    return statistics.median(xs) if xs else None


def aggregate_sweep(root: Path, runs: list[dict], topologies: list[str]) -> dict:
    """Medians per topology recomputed from the child summaries on disk."""
    per_topo = {}
    for topo in topologies:
        finals = []
        for r in runs:
            if r["topology"] != topo or r["exit_status"] != EXIT_OK:
                continue
            finals.append(json.loads((Path(r["dir"]) / "summary.json").read_text())["final"])
        hits = [f["ne_hit_time"] for f in finals]
        per_topo[topo] = {
            "runs": len(finals),
            "hits": sum(h is not None for h in hits),
            "median_ne_hit_time": _median(hits),
            "median_final_estimate_error": _median([f["estimate_error"] for f in finals]),
            "median_final_ne_distance": _median([f["ne_distance"] for f in finals]),
        }
    return per_topo


def comparison_table(runs: list[dict], topologies: list[str]) -> str:
    """Median error curves per topology, one row per recorded t."""
    curves = {}
    for topo in topologies:
        series = []
        for r in runs:
            if r["topology"] == topo and r["exit_status"] == EXIT_OK:
                with open(Path(r["dir"]) / "trace.csv") as fh:
                    rows = list(csv.DictReader(fh))
                series.append({int(x["t"]): (float(x["estimate_error"]),
                                             float(x["ne_distance"]) if x["ne_distance"] else None)
                               for x in rows})
        curves[topo] = series
    ts = sorted({t for s in curves.values() for run_ in s for t in run_})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t"]
    for topo in topologies:
        header += [f"{topo}_estimate_error", f"{topo}_ne_distance"]
    w.writerow(header)
    for t in ts:
        row = [t]
        for topo in topologies:
            vals = [run_[t] for run_ in curves[topo] if t in run_]
            e = _median([v[0] for v in vals])
            d = _median([v[1] for v in vals])
            row += ["" if e is None else repr(e), "" if d is None else repr(d)]
        w.writerow(row)
    return buf.getvalue()


def cmd_sweep(config_path, seeds: list[int], topologies: list[str], out=None,
              strict=False, jobs: int = 1) -> tuple[dict, int]:
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    if not topologies:
        raise ConfigError("sweep needs at least one topology")
    cfg = load_config(config_path)
    for topo in topologies:
        with_overrides(cfg, topology=topo)  # fail fast on bad labels
    root = output_root(out)
    root.mkdir(parents=True, exist_ok=True)
    cfg_json = cfg.model_dump_json()
    tasks = [(cfg_json, s, topo, str(root / f"{topo}_seed{s}"), strict)
             for topo in topologies for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_child, tasks))
    else:
        results = [_sweep_child(t) for t in tasks]
    runs = [{"seed": s, "topology": topo, "dir": d, "exit_status": code}
            for s, topo, d, code in results]
    summary = {"config": config_echo(cfg), "seeds": seeds, "topologies": topologies,
               "runs": runs, "aggregate": aggregate_sweep(root, runs, topologies)}
    (root / "sweep.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (root / "comparison.csv").write_text(comparison_table(runs, topologies))
    failed = [r["exit_status"] for r in runs if r["exit_status"] != EXIT_OK]
    return summary, (max(failed) if failed else EXIT_OK)


def lemma1_table(n: int, T: int, seed: int, horizon: int, eta: float | None = None) -> str:
    """CSV of ``max |Phi(t,s) - 1 e_n^T|`` against the geometric bound for all s <= t."""
    eta = 1.0 / n if eta is None else eta
    seq = periodic_partition(n, T, seed)
    scheme = WeightScheme(eta)
    mats = [weight_matrix_from_edges(scheme, n - 1, n, seq.edges_at(t)).entries
            for t in range(horizon + 1)]
    target = np.zeros((n, n))
    target[:, n - 1] = 1.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "s", "actual_maxdev", "kappa_rho_bound"])
    for t, stack in iter_backward_products(mats):
        dev = np.abs(stack - target).sum(axis=2).max(axis=1)
        for s in range(t + 1):
            w.writerow([t, s, repr(float(dev[s])), repr(lemma1_bound(n, eta, T, t, s)[2])])
    return buf.getvalue()


def tracking_table(n: int, horizon: int, seed: int, stride: int = 1) -> tuple[str, metrics.RateFit]:
    graph = GraphSequence(n=n, kind="edge-cycle", base="ring")
    err = run_tracking(graph, horizon, seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "error", "normalized_error"])
    for t in range(2, horizon + 2, stride):
        w.writerow([t, repr(float(err[t])), repr(metrics.normalized_error(t, float(err[t])))])
    fit = metrics.fit_rate(((t, err[t]) for t in range(2, horizon + 2)),
                           t_min=min(100, max(10, horizon // 10)))
    return buf.getvalue(), fit


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfp", description="Decentralized fictitious play")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configured simulation")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: $DFP_OUT or ./dfp_out)")
    p.add_argument("--strict", action="store_true", help="fail when windowed connectivity fails")
    p.add_argument("--svg", action="store_true", help="also write SVG panels and panels.dat")

    p = sub.add_parser("validate", help="check connectivity and weight bounds")
    p.add_argument("config")

    p = sub.add_parser("sweep", help="run seeds x topologies")
    p.add_argument("config")
    p.add_argument("--seeds", type=_int_list, required=True)
    p.add_argument("--topologies", type=_str_list, default=None,
                   help="comma list such as static-ring,cycle-star (default: config graph)")
    p.add_argument("--out")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("oracle", help="consensus bound tables as CSV")
    p.add_argument("which", choices=["lemma1", "tracking"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--stride", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            manifest = cmd_run(args.config, args.out, args.strict, args.svg)
            print(json.dumps(manifest.to_dict(), indent=2))
            return manifest.exit_status
        if args.command == "validate":
            result, code = cmd_validate(args.config)
            print(json.dumps(result, indent=2))
            return code
        if args.command == "sweep":
            topologies = args.topologies
            if topologies is None:
                topologies = [_current_topology(args.config)]
            summary, code = cmd_sweep(args.config, args.seeds, topologies, args.out,
                                      args.strict, args.jobs)
            print(json.dumps(summary["aggregate"], indent=2, sort_keys=True))
            return code
        if args.which == "lemma1":
            sys.stdout.write(lemma1_table(args.n, args.T, args.seed, args.horizon, args.eta))
        else:
            table, fit = tracking_table(args.n, args.horizon, args.seed, args.stride)
            sys.stdout.write(table)
            print(json.dumps(fit.to_dict()), file=sys.stderr)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


def _current_topology(config_path) -> str:
    g = load_config(config_path).graph
    prefix = {v: k for k, v in {"static": "static", "cycle": "edge-cycle",
                                "random": "seeded-random"}.items()}.get(g.kind)
    if prefix is None or not isinstance(g.base, str):
        raise ConfigError("config graph has no topology label; pass --topologies")
    return f"{prefix}-{g.base}"


if __name__ == "__main__":
    sys.exit(main())
