"""Batch driver: configuration, experiment sweeps, reports.

Usage::

    butterfly-qnc run --config cfg.json --out results/
    butterfly-qnc report results/results.csv
    butterfly-qnc rates

Exit codes: 0 success, 1 configuration error, 2 runtime or audit failure.
Situation ``i`` of a sweep draws all of its randomness from
``numpy.random.default_rng(seed + i)``, so equal (config, seed) pairs give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, network
from .analysis import CountRecord, Estimate, SituationResult
from .noise import NoiseModel, SourceParams, estimate_fourfold_rate
from .protocol import (
    BELL_ORDER,
    FRAME_OF,
    INPUT_LABELS,
    run_baseline_measure_resend,
    run_entanglement_mode,
    run_state_mode,
)
from .quantum import X, Y, Z, expectation, tensor

log = logging.getLogger(__name__)

MODES = ("state", "entanglement", "baseline", "classical", "rates")
RESULT_COLUMNS = ("mode", "phi1", "phi2", "m1n1", "m2n2", "weight", "fidelity", "sigma", "stream")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    pass


class AuditFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Thresholds:
    single: float = analysis.SINGLE_QUBIT_BOUND
    ent: float = analysis.ENTANGLEMENT_BOUND


@dataclass(frozen=True)
class RunConfig:
    mode: str = "state"
    noise: NoiseModel = field(default_factory=NoiseModel.experimental)
    source: SourceParams = field(default_factory=SourceParams)
    counts_per_situation: int = 720
    seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    out_dir: str = "results"
    bin_width: float = analysis.DEFAULT_BIN_WIDTH

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.counts_per_situation < 1:
            raise ConfigError("counts_per_situation must be at least 1")
        for name in ("single", "ent"):
            t = getattr(self.thresholds, name)
            if not 0 < t < 1:
                raise ConfigError(f"threshold {name}={t} outside (0, 1)")
        if self.bin_width <= 0:
            raise ConfigError("bin_width must be positive")


def _section(raw: dict, key: str, cls):
    data = raw.get(key, {})
    if not isinstance(data, dict):
        raise ConfigError(f"section {key!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
    return data


def config_from_dict(raw: dict, *, seed: int | None = None, mode: str | None = None, out_dir: str | None = None) -> RunConfig:
    """Build a validated RunConfig; keyword overrides win over file values."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {"mode", "noise", "source", "counts_per_situation", "seed", "thresholds", "output", "bin_width"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        seed = int(raw.get("seed", 0)) if seed is None else seed
        noise_kw = {"shared_pair_fidelity": 0.993, "source_pair_fidelity": 0.993}
        noise_kw.update({k: float(v) for k, v in _section(raw, "noise", NoiseModel).items()})
        noise_kw["seed"] = seed
        output = raw.get("output", {})
        if not isinstance(output, dict) or set(output) - {"dir"}:
            raise ConfigError("section 'output' accepts only 'dir'")
        return RunConfig(
            mode=mode or raw.get("mode", "state"),
            noise=NoiseModel(**noise_kw),
            source=SourceParams(**_section(raw, "source", SourceParams)),
            counts_per_situation=int(raw.get("counts_per_situation", 720)),
            seed=seed,
            thresholds=Thresholds(**_section(raw, "thresholds", Thresholds)),
            out_dir=out_dir or output.get("dir", "results"),
            bin_width=float(raw.get("bin_width", analysis.DEFAULT_BIN_WIDTH)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    if path is None:
        return config_from_dict({}, **overrides)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw, **overrides)


@dataclass
class SweepResult:
    mode: str
    rows: list[dict]
    results: list[SituationResult]
    transcript: list[network.Event]
    exact_mean: float
    threshold: float
    topology: network.Topology


def _counts(rng: np.random.Generator, prob: float, expected: int) -> CountRecord:
    # condition on a nonempty record; with the default 720 this never loops
    while True:
        c = analysis.simulate_counts(min(max(prob, 0.0), 1.0), expected, rng)
        if c.total:
            return c


def _restamp(events, round_index: int) -> list[network.Event]:
    return [dataclasses.replace(ev, round=round_index) for ev in events]


def _row(mode, labels, outcomes, weight, est: Estimate, stream: int) -> dict:
    phi1, phi2 = labels if labels else ("", "")
    m1n1, m2n2 = outcomes if outcomes else ("", "")
    return {
        "mode": mode, "phi1": phi1, "phi2": phi2, "m1n1": m1n1, "m2n2": m2n2,
        "weight": weight, "fidelity": est.value, "sigma": est.sigma, "stream": stream,
    }


def sweep_state(cfg: RunConfig) -> SweepResult:
    """36 input pairs x 16 post-selected BSM outcome pairs."""
    rows, results, transcript = [], [], []
    exact = 0.0
    situations = itertools.product(INPUT_LABELS, INPUT_LABELS, BELL_ORDER, BELL_ORDER)
    for idx, (phi1, phi2, o1, o2) in enumerate(situations):
        rng = np.random.default_rng(cfg.seed + idx)
        run = run_state_mode(phi1, phi2, cfg.noise, rng, forced_outcomes=(o1, o2))
        outcomes = (str(FRAME_OF[o1]), str(FRAME_OF[o2]))
        weight = run.outcome_probability / len(INPUT_LABELS) ** 2 / 2
        for stream, f in enumerate(run.fidelities(), start=1):
            est = analysis.fidelity_from_counts(_counts(rng, f, cfg.counts_per_situation))
            results.append(SituationResult((phi1, phi2), outcomes, weight, est, stream))
            rows.append(_row("state", (phi1, phi2), outcomes, weight, est, stream))
            exact += weight * f
        transcript += _restamp(run.transcript, idx)
    return SweepResult("state", rows, results, transcript, exact, cfg.thresholds.single, network.build_butterfly())


_CORRELATORS = (tensor(X, X), tensor(Y, Y), tensor(Z, Z))


def sweep_entanglement(cfg: RunConfig) -> SweepResult:
    """16 post-selected outcome pairs; each stream estimated from XX, YY, ZZ counts."""
    rows, results, transcript = [], [], []
    exact = 0.0
    for idx, (o1, o2) in enumerate(itertools.product(BELL_ORDER, BELL_ORDER)):
        rng = np.random.default_rng(cfg.seed + idx)
        run = run_entanglement_mode(cfg.noise, rng, forced_outcomes=(o1, o2))
        outcomes = (str(FRAME_OF[o1]), str(FRAME_OF[o2]))
        weight = run.outcome_probability / 2
        for stream, (rho, f) in enumerate(zip((run.received_1, run.received_2), run.fidelities()), start=1):
            corr = [
                analysis.expectation_from_counts(_counts(rng, (1 + expectation(rho, obs)) / 2, cfg.counts_per_situation))
                for obs in _CORRELATORS
            ]
            est, _ = analysis.witness_fidelity(*corr)
            results.append(SituationResult((), outcomes, weight, est, stream))
            rows.append(_row("entanglement", None, outcomes, weight, est, stream))
            exact += weight * f
        transcript += _restamp(run.transcript, idx)
    return SweepResult("entanglement", rows, results, transcript, exact, cfg.thresholds.ent, network.build_butterfly())


def sweep_baseline(cfg: RunConfig) -> SweepResult:
    """Measure-and-resend over the 36 input pairs, one trial per detected photon."""
    rows, results, transcript = [], [], []
    exact = 0.0
    n_trials = cfg.counts_per_situation
    weight = 1 / len(INPUT_LABELS) ** 2 / 2
    for idx, (phi1, phi2) in enumerate(itertools.product(INPUT_LABELS, INPUT_LABELS)):
        rng = np.random.default_rng(cfg.seed + idx)
        plus = [0, 0]
        mean_f = [0.0, 0.0]
        for t in range(n_trials):
            run = run_baseline_measure_resend(phi1, phi2, rng)
            for s, f in enumerate(run.fidelities()):
                mean_f[s] += f / n_trials
                plus[s] += int(rng.random() < f)
            transcript += _restamp(run.transcript, idx * n_trials + t)
        for s in range(2):
            est = analysis.fidelity_from_counts(CountRecord(plus[s], n_trials - plus[s]))
            results.append(SituationResult((phi1, phi2), ("", ""), weight, est, s + 1))
            rows.append(_row("baseline", (phi1, phi2), None, weight, est, s + 1))
            exact += weight * mean_f[s]
    topo = network.build_butterfly(direct_kind=network.EdgeKind.CLASSICAL)
    return SweepResult("baseline", rows, results, transcript, exact, cfg.thresholds.single, topo)


SWEEPS = {"state": sweep_state, "entanglement": sweep_entanglement, "baseline": sweep_baseline}


def summarize(sweep: SweepResult) -> dict:
    fbar = analysis.weighted_average(sweep.results)
    per_stream = {}
    for stream in (1, 2):
        sub = [r for r in sweep.results if r.stream == stream]
        scale = 1 / sum(r.probability_weight for r in sub)
        sub = [dataclasses.replace(r, probability_weight=r.probability_weight * scale) for r in sub]
        per_stream[str(stream)] = analysis.weighted_average(sub).value
    summary = {
        "mode": sweep.mode,
        "n_results": len(sweep.results),
        "mean_fidelity": fbar.value,
        "sigma": fbar.sigma,
        "exact_mean_fidelity": sweep.exact_mean,
        "stream_mean_fidelity": per_stream,
        "threshold": sweep.threshold,
        "deterministic": fbar.sigma == 0,
    }
    if fbar.sigma > 0:
        summary["significance"] = analysis.significance(fbar, sweep.threshold)
    else:
        # exact estimate: report the sign of the infinite significance
        summary["significance"] = None
        summary["above_threshold"] = fbar.value > sweep.threshold
    return summary


def write_results_csv(rows: Sequence[dict], path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_histogram_csv(bins, bin_width: float, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bin_left", "bin_right", "mass"))
        for left, mass in bins:
            writer.writerow((repr(left), repr(round(left + bin_width, 12)), repr(mass)))


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_transcript(events, path: Path) -> None:
    with path.open("w") as fh:
        network.write_transcript(events, fh)


def run(cfg: RunConfig) -> int:
    """Execute one configured experiment and write its artifacts to ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if cfg.mode == "rates":
        rate = estimate_fourfold_rate(cfg.source)
        print(f"estimated fourfold coincidence rate: {rate:.3f} counts/s")
        _write_json({"mode": "rates", "fourfold_rate": rate, "source": dataclasses.asdict(cfg.source)}, out / "summary.json")
        return EXIT_OK

    if cfg.mode == "classical":
        table, events, ok = [], [], True
        for idx, (b1, b2) in enumerate(itertools.product((0, 1), repeat=2)):
            at_r1, at_r2, ledger = network.classical_butterfly(b1, b2, round=idx)
            correct = (at_r1, at_r2) == (b1, b2)
            ok &= correct
            table.append({"b1": b1, "b2": b2, "at_R1": at_r1, "at_R2": at_r2, "correct": correct})
            events += ledger.events
        violations = network.audit(events, network.build_butterfly(direct_kind=network.EdgeKind.CLASSICAL))
        _write_transcript(events, out / "transcript.jsonl")
        _write_json({"mode": "classical", "cases": table, "all_correct": ok, "violations": len(violations)}, out / "summary.json")
        print(f"classical butterfly: {sum(r['correct'] for r in table)}/4 decoded, {len(violations)} violations")
        if violations or not ok:
            raise AuditFailure("classical butterfly failed")
        return EXIT_OK

    sweep = SWEEPS[cfg.mode](cfg)
    violations = network.audit(sweep.transcript, sweep.topology)
    summary = summarize(sweep)
    summary.update(seed=cfg.seed, counts_per_situation=cfg.counts_per_situation,
                   noise=dataclasses.asdict(cfg.noise), violations=len(violations))
    write_results_csv(sweep.rows, out / "results.csv")
    write_histogram_csv(analysis.histogram(sweep.results, cfg.bin_width), cfg.bin_width, out / "histogram.csv")
    _write_transcript(sweep.transcript, out / "transcript.jsonl")
    _write_json(summary, out / "summary.json")

    sig = summary["significance"]
    sig_text = f"{sig:.2f} sigma" if sig is not None else "deterministic"
    print(f"{cfg.mode}: mean fidelity {summary['mean_fidelity']:.4f} +/- {summary['sigma']:.4f} "
          f"(exact {summary['exact_mean_fidelity']:.4f}), threshold {sweep.threshold}: {sig_text}")
    if violations:
        for v in violations[:10]:
            log.error("audit violation %s at event %d: %s", v.kind, v.index, v.detail)
        raise AuditFailure(f"{len(violations)} network audit violations")
    return EXIT_OK


def read_results_csv(path: str | Path) -> list[dict]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
                raise ValueError(f"unexpected columns {reader.fieldnames}")
            rows = []
            for raw in reader:
                row = dict(raw)
                for key in ("weight", "fidelity", "sigma"):
                    row[key] = float(row[key])
                row["stream"] = int(row["stream"])
                if not (math.isfinite(row["fidelity"]) and row["stream"] in (1, 2)):
                    raise ValueError(f"invalid row {raw}")
                rows.append(row)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"cannot read results file {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"results file {path} has no rows")
    return rows


def bar_table(rows: Sequence[dict]) -> list[tuple[str, float, float]]:
    """Paired bars per situation: (key, stream-1 fidelity, stream-2 fidelity).

    State and baseline rows are grouped by input pair and averaged over BSM
    outcomes with their weights; entanglement rows are keyed by outcome pair.
    """
    groups: dict[str, list[list[float]]] = {}
    for r in rows:
        key = f"{r['phi1']}{r['phi2']}" if r["mode"] != "entanglement" else f"{r['m1n1']}|{r['m2n2']}"
        acc = groups.setdefault(key, [[0.0, 0.0], [0.0, 0.0]])
        acc[r["stream"] - 1][0] += r["weight"] * r["fidelity"]
        acc[r["stream"] - 1][1] += r["weight"]
    return [(k, a[0][0] / a[0][1], a[1][0] / a[1][1]) for k, a in groups.items()]


def report(results_path: str | Path, out_dir: str | Path | None = None,
           bin_width: float = analysis.DEFAULT_BIN_WIDTH) -> str:
    """Render the bar-pair table and write ``bars.csv`` and ``histogram.csv``."""
    rows = read_results_csv(results_path)
    out = Path(out_dir) if out_dir is not None else Path(results_path).parent
    out.mkdir(parents=True, exist_ok=True)
    bars = bar_table(rows)
    with (out / "bars.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("situation", "stream1", "stream2"))
        for key, f1, f2 in bars:
            writer.writerow((key, repr(f1), repr(f2)))
    results = [
        SituationResult((r["phi1"], r["phi2"]), (r["m1n1"], r["m2n2"]), r["weight"], Estimate(r["fidelity"], r["sigma"]), r["stream"])
        for r in rows
    ]
    write_histogram_csv(analysis.histogram(results, bin_width), bin_width, out / "histogram.csv")
    lines = [f"{'situation':<10} {'stream1':>8} {'stream2':>8}"]
    lines += [f"{key:<10} {f1:8.4f} {f2:8.4f}" for key, f1, f2 in bars]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="butterfly-qnc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep")
    p_run.add_argument("--config", help="JSON configuration file")
    p_run.add_argument("--seed", type=int, help="override the configured seed")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--mode", choices=MODES, help="override the configured mode")

    p_report = sub.add_parser("report", help="tabulate a results.csv file")
    p_report.add_argument("results", help="path to results.csv")
    p_report.add_argument("--out", help="output directory (default: alongside results)")
    p_report.add_argument("--bin-width", type=float, default=analysis.DEFAULT_BIN_WIDTH)

    p_rates = sub.add_parser("rates", help="print the estimated fourfold coincidence rate")
    p_rates.add_argument("--config", help="JSON configuration file")
    p_rates.add_argument("--out", help="output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            if args.bin_width <= 0:
                raise ConfigError("--bin-width must be positive")
            print(report(args.results, args.out, args.bin_width))
            return EXIT_OK
        mode = "rates" if args.command == "rates" else args.mode
        cfg = load_config(args.config, seed=getattr(args, "seed", None), mode=mode, out_dir=args.out)
        return run(cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (AuditFailure, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
