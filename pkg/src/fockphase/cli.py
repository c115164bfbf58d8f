"""Command-line entry point ``fockphase``.

Subcommands: ``simulate``, ``posterior``, ``oracle-compare``, ``wallis`` and
``sweep``.  Exit status is 0 on success, 2 when the configuration or input
is invalid and 3 when a run fails (impossible record, oracle cap, I/O).
Set ``FOCKPHASE_LOG`` to a logging level name (``INFO``, ``DEBUG``) for
progress messages on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import engine as eng
from . import oracle
from .config import ExperimentConfig, load_config, validate
from .errors import ConfigValidationError, FockPhaseError, InvalidSpecError
from .model import CondensateSpec, DetectionEvent, MeasurementRecord, PhaseDistribution
from .spin import predict_remote_orientation, run_region_experiment, wallis_reference

log = logging.getLogger("fockphase")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
MAX_WALLIS_P = 64


def fmt(v) -> str:
    return "%.17g" % v


def _clean(v):
    """JSON-safe float: NaN and infinities become null."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _stats_dict(s: eng.CircularStats) -> dict:
    return {"mean": _clean(s.mean), "resultant": _clean(s.resultant), "std": _clean(s.std)}


def _all_stats(dist: PhaseDistribution) -> dict:
    if dist.dim == 1:
        return _stats_dict(eng.circular_stats(dist))
    return {
        "phi": _stats_dict(eng.circular_stats(dist, (1, 0))),
        "phi2": _stats_dict(eng.circular_stats(dist, (0, 1))),
        "phi+phi2": _stats_dict(eng.circular_stats(dist, (1, 1))),
    }


@dataclass
class SimulationResult:
    config: ExperimentConfig
    record: MeasurementRecord
    predictions: dict

    def summary(self) -> dict:
        rec = self.record
        traj = [dict(step=0, **_flat(_all_stats(rec.prior)))]
        traj += [dict(step=i + 1, **_flat(_all_stats(s))) for i, s in enumerate(rec.snapshots)]
        return {
            "name": self.config.name,
            "seed": rec.seed,
            "P": len(rec),
            "kind": self.config.kind,
            "policy": rec.policy,
            "populations": list(self.config.spec.populations),
            "grid_M": rec.prior.M,
            "initial": _all_stats(rec.prior),
            "final": _all_stats(rec.final),
            "trajectory": traj,
            "predictions": {k: {"theta_star": _clean(p.theta_star),
                                "confidence": _clean(p.confidence),
                                "magnitude": _clean(p.magnitude)}
                            for k, p in self.predictions.items()},
        }


def _flat(stats: dict) -> dict:
    if "mean" in stats:
        return stats
    return {f"{k}.{f}": v for k, s in stats.items() for f, v in s.items()}


def simulate(cfg: ExperimentConfig, prior: Optional[PhaseDistribution] = None) -> SimulationResult:
    """Sample one record as configured; pure function of the config and seed."""
    prior = cfg.build_prior() if prior is None else prior
    spec = cfg.spec
    if cfg.layout is not None and cfg.kind == "spin":
        run = run_region_experiment(cfg.seed, cfg.P, cfg.policy, cfg.layout, spec,
                                    measure=cfg.region, targets=cfg.targets, prior=prior)
        return SimulationResult(cfg, run.record, run.predictions)
    model = eng.EventFactorModel.from_spec(spec)
    if cfg.layout is not None:
        cands = {"site": cfg.layout.sites(cfg.region)}
    else:
        cands = eng.candidate_events(model, spec, cfg.candidates)
    rec = eng.sample_record(cfg.seed, cfg.P, cfg.policy, prior, model, kind=cfg.kind,
                            candidates=cands, spec=spec)
    return SimulationResult(cfg, rec, {})


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else fmt(x) if isinstance(x, float) else x
                        for x in r])


def write_record(path: Path, events, layout_sites: bool = False, three: bool = False):
    header = ["index", "u", "theta", "eta"]
    if three:
        header.append("u_bc")
    if layout_sites:
        header.append("site")
    rows = []
    for i, e in enumerate(events):
        row = [i, float(e.u), float(e.theta), e.eta]
        if three:
            row.append(float(e.u_bc))
        if layout_sites:
            row.append(e.site)
        rows.append(row)
    _write_rows(path, header, rows)


def read_record(path, kind: str) -> list:
    """Events from a ``record.csv``; ``eta``/``theta`` are ignored for position records."""
    events = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"index", "u", "theta", "eta"} - set(reader.fieldnames or ())
        if missing:
            raise InvalidSpecError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            site = int(row["site"]) if row.get("site") not in (None, "") else None
            u_bc = float(row["u_bc"]) if row.get("u_bc") not in (None, "") else None
            if kind == "spin":
                events.append(DetectionEvent("spin", float(row["u"]), float(row["theta"]),
                                             int(row["eta"]), site=site, u_bc=u_bc))
            else:
                events.append(DetectionEvent("position", float(row["u"]), site=site, u_bc=u_bc))
    return events


def write_density(path: Path, dist: PhaseDistribution):
    g = dist.grid
    if dist.dim == 1:
        rows = ((float(p), float(v)) for p, v in zip(g, dist.values))
        _write_rows(path, ["phi", "density"], rows)
    else:
        rows = ((float(g[i]), float(g[j]), float(dist.values[i, j]))
                for i in range(dist.M) for j in range(dist.M))
        _write_rows(path, ["phi", "phi2", "density"], rows)


def write_outputs(result: SimulationResult, out_dir: Path, final_only: bool = False):
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    write_record(out_dir / "record.csv", result.record.events,
                 layout_sites=cfg.layout is not None, three=cfg.spec.modes == 3)
    write_density(out_dir / "posterior.csv", result.record.final)
    if not final_only:
        snap = out_dir / "snapshots"
        snap.mkdir(exist_ok=True)
        write_density(snap / "posterior_0000.csv", result.record.prior)
        for i, s in enumerate(result.record.snapshots, start=1):
            write_density(snap / f"posterior_{i:04d}.csv", s)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path, final_only: bool) -> SimulationResult:
    log.info("simulate %s: P=%d seed=%d", cfg.name, cfg.P, cfg.seed)
    res = simulate(cfg)
    write_outputs(res, out_dir, final_only)
    return res


def cmd_posterior(cfg: ExperimentConfig, record_path, out_dir: Path, final_only: bool):
    """Posterior of an externally supplied record under the configured prior."""
    events = read_record(record_path, cfg.kind)
    model = eng.EventFactorModel.from_spec(cfg.spec)
    dist = cfg.build_prior()
    if dist.dim == 1 and dist.M < len(events) + 1:
        raise InvalidSpecError(f"grid.M={dist.M} too coarse for {len(events)} events")
    prior = dist
    snaps = []
    for e in events:
        dist = eng.posterior_update(dist, e, model)
        snaps.append(dist)
    rec = MeasurementRecord(events, snaps, cfg.seed, "external", prior)
    preds = {}
    if cfg.layout is not None and cfg.spec.spinful:
        preds = {name: predict_remote_orientation(rec.final, int(cfg.layout.sites(name)[0]),
                                                  cfg.spec)
                 for name in cfg.targets}
    res = SimulationResult(cfg, rec, preds)
    write_outputs(res, out_dir, final_only)
    return res


def random_record(cfg: ExperimentConfig, P: int, rng: np.random.Generator) -> list:
    spec = cfg.spec
    if spec.modes == 3:
        return [DetectionEvent("position", rng.uniform(0, 2 * math.pi), u_bc=rng.uniform(0, 2 * math.pi))
                for _ in range(P)]
    sites = [None] * P
    if spec.pair is not None:
        sites = [int(s) for s in rng.choice(spec.pair.n_sites, size=P, replace=False)]
    us = np.zeros(P) if spec.pair is not None or spec.same_orbital else rng.uniform(0, 2 * math.pi, P)
    if cfg.kind == "spin":
        return [DetectionEvent("spin", u, rng.uniform(0, 2 * math.pi), int(rng.choice([-1, 1])), site=s)
                for u, s in zip(us, sites)]
    return [DetectionEvent("position", u, site=s) for u, s in zip(us, sites)]


def _split(spec: CondensateSpec, N: int) -> tuple:
    """Populations summing to ``N`` in the configured proportions."""
    fr = [p / spec.N for p in spec.populations]
    pops = [int(round(f * N)) for f in fr[:-1]]
    return tuple(pops) + (N - sum(pops),)


def oracle_rows(cfg: ExperimentConfig):
    """Engine-times-N^P against both oracle weight modes for each configured N."""
    P = int(cfg.oracle.get("P", cfg.P))
    N_values = cfg.oracle.get("N_values", [cfg.spec.N])
    if not N_values:
        raise InvalidSpecError("oracle.N_values is empty")
    events = random_record(cfg, P, np.random.default_rng(cfg.seed))
    M = eng.DEFAULT_M_2D if cfg.spec.modes == 3 else max(16, 2 * P + 2)
    rows = []
    for N in N_values:
        pops = _split(cfg.spec, int(N))
        spec = CondensateSpec(*pops[:2], n_c=pops[2] if len(pops) == 3 else None,
                              k_a=cfg.spec.k_a, k_b=cfg.spec.k_b, k_c=cfg.spec.k_c,
                              pair=cfg.spec.pair, spinful=cfg.spec.spinful)
        model = eng.EventFactorModel.from_spec(spec)
        prior = PhaseDistribution.uniform(M, spec.modes - 1)
        engine_val = math.exp(eng.log_sequence_probability(events, prior, model) + P * math.log(spec.N))
        pw = oracle.exact_sequence_probability(events, spec, oracle.POWER).value
        fa = oracle.exact_sequence_probability(events, spec, oracle.FALLING).value
        dev_ep = abs(engine_val - pw) / abs(pw) if pw else abs(engine_val)
        dev_fp = abs(fa - pw) / abs(pw) if pw else abs(fa)
        rows.append([int(N)] + [int(p) for p in pops[:2]] + [P, engine_val, pw, fa, dev_ep, dev_fp])
    return rows


ORACLE_HEADER = ["N", "n_a", "n_b", "P", "engine_times_NP", "oracle_power", "oracle_falling",
                 "rel_dev_engine_power", "rel_dev_falling_power"]


def cmd_oracle_compare(cfg: ExperimentConfig, out_dir: Path):
    rows = oracle_rows(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir / "oracle_compare.csv", ORACLE_HEADER, rows)
    return rows


def wallis_rows(max_p: int):
    """Closed-form Wallis values against engine quadrature for all ``p+ + p- <= max_p``."""
    if not 0 <= max_p <= MAX_WALLIS_P:
        raise InvalidSpecError(f"max P must lie in [0, {MAX_WALLIS_P}]")
    spec = CondensateSpec(1, 1, spinful=True)
    model = eng.EventFactorModel.from_spec(spec)
    rows = []
    for total in range(max_p + 1):
        prior = PhaseDistribution.uniform(max(16, 2 * total + 2))
        for n_plus in range(total + 1):
            n_minus = total - n_plus
            events = ([DetectionEvent("spin", eta=1)] * n_plus
                      + [DetectionEvent("spin", eta=-1)] * n_minus)
            quad = eng.pattern_probability(events, prior, model)
            closed = wallis_reference(n_plus, n_minus)
            rows.append([n_plus, n_minus, closed, quad, abs(closed - quad)])
    return rows


WALLIS_HEADER = ["p_plus", "p_minus", "closed_form", "quadrature", "abs_diff"]


def cmd_wallis(max_p: int, out_dir: Optional[Path]):
    rows = wallis_rows(max_p)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_rows(out_dir / "wallis.csv", WALLIS_HEADER, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(WALLIS_HEADER)
        for r in rows:
            w.writerow([r[0], r[1]] + [fmt(v) for v in r[2:]])
    return rows


def _sweep_task(args):
    raw, base_dir, P, modulus, seed = args
    cfg = validate(raw, base_dir)
    changes = {"seed": seed}
    if P is not None:
        changes["events.P"] = P
    if modulus is not None:
        changes["prior"] = {"kind": "coherent", "modulus": modulus,
                            "phase": cfg.prior.get("phase", 0.0)}
    cfg = cfg.with_overrides(**changes)
    final = simulate(cfg).record.final
    s = eng.circular_stats(final) if final.dim == 1 else eng.circular_stats(final, (1, 1))
    return s.std, s.mean, s.resultant


def sweep_rows(cfg: ExperimentConfig, jobs: int = 1):
    """One row per (P, modulus) cell, aggregated over seeds ``seed + i``."""
    Ps = cfg.sweep.get("P", [None])
    mods = cfg.sweep.get("modulus", [None])
    n_seeds = int(cfg.sweep.get("seeds", 1))
    tasks, cells = [], []
    for P in Ps:
        for mod in mods:
            cells.append((P, mod))
            tasks += [(cfg.raw, str(cfg.base_dir), P, mod, cfg.seed + i) for i in range(n_seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = []
    for c, (P, mod) in enumerate(cells):
        chunk = results[c * n_seeds:(c + 1) * n_seeds]
        stds = np.array([r[0] for r in chunk])
        means = np.array([r[1] for r in chunk])
        Ls = np.array([r[2] for r in chunk])
        defined = means[np.isfinite(means)]
        if defined.size:
            R = abs(np.mean(np.exp(1j * defined)))
            disp = math.sqrt(-2.0 * math.log(R)) if R > 0 else math.inf
        else:
            disp = math.nan
        rows.append([cfg.P if P is None else int(P),
                     "" if mod is None else float(mod), n_seeds,
                     float(np.median(stds)), float(np.mean(Ls)), float(disp)])
    return rows


SWEEP_HEADER = ["P", "modulus", "seeds", "median_std", "mean_resultant", "theta_dispersion"]


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, jobs: int):
    rows = sweep_rows(cfg, jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rows(out_dir / "sweep.csv", SWEEP_HEADER, rows)
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockphase", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, type=Path, help="JSON experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out-dir", type=Path, default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for ensembles")
        p.add_argument("--final-only", action="store_true", help="skip per-step snapshots")
        return p

    common(sub.add_parser("simulate", help="sample a record and its posterior"))
    p = common(sub.add_parser("posterior", help="posterior of an existing record.csv"))
    p.add_argument("--record", type=Path, required=True)
    common(sub.add_parser("oracle-compare", help="engine against exact Fock-state values"))
    p = common(sub.add_parser("wallis", help="closed-form vs quadrature spin table"),
               config_required=False)
    p.add_argument("--max-p", type=int, default=20)
    common(sub.add_parser("sweep", help="seed ensembles over parameter ranges"))
    return parser


def _setup_logging():
    level = os.environ.get("FOCKPHASE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    out_dir = args.out_dir
    try:
        if args.command == "wallis":
            cmd_wallis(args.max_p, out_dir)
            return EXIT_OK
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        if args.jobs < 1:
            raise InvalidSpecError("--jobs must be at least 1")
        out_dir = out_dir or Path("fockphase-out") / cfg.name
        if args.command == "simulate":
            cmd_simulate(cfg, out_dir, args.final_only)
        elif args.command == "posterior":
            cmd_posterior(cfg, args.record, out_dir, args.final_only)
        elif args.command == "oracle-compare":
            cmd_oracle_compare(cfg, out_dir)
        elif args.command == "sweep":
            cmd_sweep(cfg, out_dir, args.jobs)
    except ConfigValidationError as exc:
        print(f"fockphase: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidSpecError as exc:
        print(f"fockphase: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FockPhaseError, OSError) as exc:
        print(f"fockphase: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
