"""Experiment runner: configure, run, serialize, and compare simulations.

An experiment is (topology, rate, steps) x algorithms x seeds. Every
(algorithm, seed) run gets its own directory of CSV tables, rendered PNG
figures, and a summary.json; `compare` lines up summaries side by side.

Config files are flat key=value lines with `#` comments; command-line flags
override file values. All writes are atomic (temp file + rename) and a rerun
with the same spec and seed reproduces every output byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import metrics, plots
from .engine import DeliveryMode, SimConfig, run
from .metrics import RunReport
from .routing import Algorithm
from .topology import NetworkTopology, TopologyError, load_adjacency_matrix


class ConfigError(ValueError):
    """Base class for experiment-spec problems."""


class UnknownConfigKeyError(ConfigError):
    pass


class ConfigValueError(ConfigError):
    """A key's value failed to parse as its expected type."""


class ConfigConstraintError(ConfigError):
    """Parsed values violate a spec constraint (range, emptiness, ...)."""


@dataclass
class ExperimentSpec:
    algorithms: list[Algorithm] = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    nodes: int = 1000
    m: int = 2
    topology_file: str | None = None
    rate: float = 0.1
    steps: int = 100_000
    queue_cap: int = 1000
    delivery_mode: DeliveryMode = DeliveryMode.TOTAL
    jam_threshold: float = 0.25
    bootstrap: bool = True
    out: str = "runs"
    spectrum_segment: int = 4096
    learning_interval: int = 100
    sample_interval: int = 100
    window: int = 1000
    dt_bin_ratio: float = 1.4
    dt_fit_lo: float = 10.0
    dt_fit_hi: float | None = None  # default: steps / 100
    figures: bool = True

    def validate(self) -> "ExperimentSpec":
        if not self.algorithms:
            raise ConfigConstraintError("no algorithm given (key 'algorithm' or --algorithm)")
        if not self.seeds:
            raise ConfigConstraintError("no seeds given")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigConstraintError(f"duplicate seeds: {self.seeds}")
        if self.nodes < 2:
            raise ConfigConstraintError(f"nodes must be >= 2, got {self.nodes}")
        if self.m < 1:
            raise ConfigConstraintError(f"m must be >= 1, got {self.m}")
        if not 0 <= self.rate <= self.nodes:
            raise ConfigConstraintError(f"rate must lie in [0, nodes], got {self.rate}")
        if self.steps < 1:
            raise ConfigConstraintError(f"steps must be >= 1, got {self.steps}")
        if self.queue_cap < 1:
            raise ConfigConstraintError(f"queue_cap must be >= 1, got {self.queue_cap}")
        if not 0 < self.jam_threshold <= 1:
            raise ConfigConstraintError(f"jam_threshold must lie in (0, 1], got {self.jam_threshold}")
        if self.spectrum_segment < 8:
            raise ConfigConstraintError(f"spectrum_segment must be >= 8, got {self.spectrum_segment}")
        for name in ("learning_interval", "sample_interval", "window"):
            if getattr(self, name) < 1:
                raise ConfigConstraintError(f"{name} must be >= 1")
        if self.dt_bin_ratio <= 1:
            raise ConfigConstraintError(f"dt_bin_ratio must exceed 1, got {self.dt_bin_ratio}")
        if self.dt_fit_lo <= 0:
            raise ConfigConstraintError(f"dt_fit_lo must be positive, got {self.dt_fit_lo}")
        if self.dt_fit_hi is not None and self.dt_fit_hi <= self.dt_fit_lo:
            raise ConfigConstraintError("dt_fit_hi must exceed dt_fit_lo")
        return self


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def _parse_algorithms(value: str) -> list[Algorithm]:
    return [Algorithm.parse(tok) for tok in value.split(",") if tok.strip()]


def _parse_seeds(value: str) -> list[int]:
    return [int(tok) for tok in value.split(",") if tok.strip()]


_KEY_PARSERS = {
    "algorithm": _parse_algorithms,
    "seeds": _parse_seeds,
    "seed": lambda v: [int(v)],
    "nodes": int,
    "m": int,
    "topology_file": str,
    "rate": float,
    "steps": int,
    "queue_cap": int,
    "delivery_mode": DeliveryMode,
    "jam_threshold": float,
    "bootstrap": _parse_bool,
    "out": str,
    "spectrum_segment": int,
    "learning_interval": int,
    "sample_interval": int,
    "window": int,
    "dt_bin_ratio": float,
    "dt_fit_lo": float,
    "dt_fit_hi": lambda v: None if v.strip().lower() in ("", "auto", "none") else float(v),
    "figures": _parse_bool,
}

_KEY_TO_FIELD = {"seed": "seeds", "algorithm": "algorithms"}


def parse_config(text: str, overrides: dict | None = None) -> ExperimentSpec:
    """Build a validated ExperimentSpec from key=value text plus overrides.

    `overrides` carries already-typed values (normally from CLI flags) keyed
    by ExperimentSpec field name; they win over file values.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        parser = _KEY_PARSERS.get(key)
        if parser is None:
            raise UnknownConfigKeyError(f"line {lineno}: unknown key {key!r}")
        try:
            parsed = parser(val)
        except (ValueError, KeyError):
            raise ConfigValueError(f"line {lineno}: cannot parse {key}={val!r}") from None
        values[_KEY_TO_FIELD.get(key, key)] = parsed
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    spec = ExperimentSpec()
    valid_fields = {f.name for f in fields(ExperimentSpec)}
    for key, val in values.items():
        if key not in valid_fields:
            raise UnknownConfigKeyError(f"unknown key {key!r}")
        setattr(spec, key, val)
    return spec.validate()


def serialize_config(spec: ExperimentSpec) -> str:
    """Round-trippable key=value form: parse_config(serialize_config(s)) == s."""
    lines = [
        f"algorithm={','.join(a.value for a in spec.algorithms)}",
        f"seeds={','.join(str(s) for s in spec.seeds)}",
        f"nodes={spec.nodes}",
        f"m={spec.m}",
    ]
    if spec.topology_file is not None:
        lines.append(f"topology_file={spec.topology_file}")
    lines += [
        f"rate={spec.rate!r}",
        f"steps={spec.steps}",
        f"queue_cap={spec.queue_cap}",
        f"delivery_mode={spec.delivery_mode.value}",
        f"jam_threshold={spec.jam_threshold!r}",
        f"bootstrap={str(spec.bootstrap).lower()}",
        f"out={spec.out}",
        f"spectrum_segment={spec.spectrum_segment}",
        f"learning_interval={spec.learning_interval}",
        f"sample_interval={spec.sample_interval}",
        f"window={spec.window}",
        f"dt_bin_ratio={spec.dt_bin_ratio!r}",
        f"dt_fit_lo={spec.dt_fit_lo!r}",
        f"dt_fit_hi={'auto' if spec.dt_fit_hi is None else repr(spec.dt_fit_hi)}",
        f"figures={str(spec.figures).lower()}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- output


def _atomic_write(path: Path, text: str) -> Path:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def _atomic_csv(path: Path, header: str, rows) -> Path:
    lines = [header]
    lines.extend(rows)
    return _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    return repr(xf)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        xf = float(x)
        return None if math.isnan(xf) else xf
    return x


def _auto_segment(requested: int, length: int) -> int | None:
    """Largest power of two <= min(requested, length), or None if below 8."""
    cap = min(requested, length)
    if cap < 8:
        return None
    return 1 << (cap.bit_length() - 1)


@dataclass
class ExperimentOutputs:
    exit_code: int
    files: list[Path]
    summaries: list[dict]
    any_jammed: bool


def _load_topology_file(path: str) -> NetworkTopology:
    return load_adjacency_matrix(Path(path).read_text())


def run_experiment(spec: ExperimentSpec, fail_on_jam: bool = False, log=print) -> ExperimentOutputs:
    """Run every (algorithm, seed) pair and write its data, figures, summary."""
    spec.validate()
    topology = None
    if spec.topology_file is not None:
        topology = _load_topology_file(spec.topology_file)
        spec = replace(spec, nodes=topology.node_count)
    files: list[Path] = []
    summaries: list[dict] = []
    any_jammed = False
    for algo in spec.algorithms:
        for seed in spec.seeds:
            run_dir = Path(spec.out) / algo.value / f"seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            cfg = SimConfig(
                steps=spec.steps,
                algorithm=algo,
                n=spec.nodes,
                m=spec.m,
                rate=spec.rate,
                queue_cap=spec.queue_cap,
                seed=seed,
                delivery_mode=spec.delivery_mode,
                jam_threshold=spec.jam_threshold,
                bootstrap=spec.bootstrap,
                learning_interval=spec.learning_interval,
            )
            report = run(cfg, topology)
            files.extend(write_run_outputs(report, spec, run_dir))
            summaries.append(json.loads((run_dir / "summary.json").read_text()))
            any_jammed = any_jammed or report.jam.jammed
            log(f"{algo.value} seed={seed}: delivered {report.counters.delivered}/"
                f"{report.counters.created}, mean load {report.mean_load():.1f}, "
                f"jam={'yes' if report.jam.jammed else 'no'} -> {run_dir}")
    exit_code = 2 if (fail_on_jam and any_jammed) else 0
    return ExperimentOutputs(exit_code=exit_code, files=files, summaries=summaries, any_jammed=any_jammed)


def write_run_outputs(report: RunReport, spec: ExperimentSpec, run_dir: Path) -> list[Path]:
    """Write one run's CSV tables, summary.json, and (optionally) figures."""
    out: list[Path] = []
    algo_name = report.algorithm.name
    title = f"{algo_name} seed={report.seed}"

    out.append(_atomic_csv(
        run_dir / "load.csv", "step,load",
        (f"{t},{v}" for t, v in enumerate(report.load_series.tolist())),
    ))
    out.append(_atomic_csv(
        run_dir / "delivery_times.csv", "delivery_time",
        (str(v) for v in report.delivery_times.tolist()),
    ))

    segment = _auto_segment(spec.spectrum_segment, report.steps)
    spectrum = None
    if segment is not None:
        spectrum = metrics.power_spectrum(report.load_series, segment)
        rows = (f"{_fmt(f)},{_fmt(p)}" for f, p in zip(spectrum.frequencies, spectrum.power))
    else:
        rows = iter(())
    out.append(_atomic_csv(run_dir / "spectrum.csv", "frequency,power", rows))

    dt_fit_hi = spec.dt_fit_hi if spec.dt_fit_hi is not None else max(report.steps / 100, spec.dt_fit_lo * 10)
    positive = report.dt_values > 0
    dt_centers = dt_density = None
    dt_slope = float("nan")
    if positive.any():
        dt_centers, dt_density = metrics.histogram(
            report.dt_values[positive], ratio=spec.dt_bin_ratio, counts=report.dt_counts[positive]
        )
        try:
            dt_slope, _ = metrics.fit_loglog_slope(dt_centers, dt_density, spec.dt_fit_lo, dt_fit_hi)
        except ValueError:
            pass
        rows = (f"{_fmt(c)},{_fmt(d)}" for c, d in zip(dt_centers, dt_density))
    else:
        rows = iter(())
    out.append(_atomic_csv(run_dir / "dt_hist.csv", "interval,density", rows))

    out.append(_atomic_csv(
        run_dir / "learning.csv", "step,fraction",
        (f"{s},{_fmt(f)}" for s, f in zip(report.learning_steps.tolist(), report.learning_fractions.tolist())),
    ))

    ts, cum_mean, win_mean = metrics.delivery_time_series(
        report.delivery_completed, report.delivery_times, report.steps,
        window=spec.window, interval=spec.sample_interval,
    )
    out.append(_atomic_csv(
        run_dir / "mean_delivery.csv", "step,cumulative_mean,window_mean",
        (f"{t},{_fmt(c)},{_fmt(w)}" for t, c, w in zip(ts.tolist(), cum_mean.tolist(), win_mean.tolist())),
    ))

    deliveries = report.delivery_times
    summary = {
        "algorithm": report.algorithm.value,
        "seed": report.seed,
        "nodes": spec.nodes,
        "m": spec.m,
        "topology_file": spec.topology_file,
        "rate": spec.rate,
        "steps": report.steps,
        "queue_cap": spec.queue_cap,
        "delivery_mode": spec.delivery_mode.value,
        "bootstrap": spec.bootstrap,
        "created": report.counters.created,
        "delivered": report.counters.delivered,
        "forwarded": report.counters.forwarded,
        "blocked": report.counters.blocked,
        "suppressed": report.counters.suppressed,
        "mean_load_steady": _jsonable(report.mean_load(0.5)),
        "mean_load_overall": _jsonable(float(report.load_series.mean())),
        "mean_delivery_time": _jsonable(float(deliveries.mean()) if len(deliveries) else float("nan")),
        "learning_at_5000": _jsonable(report.learning_at(5000)) if report.steps >= 5000 else None,
        "learning_final": _jsonable(float(report.learning_fractions[-1])),
        "jam": {
            "jammed": report.jam.jammed,
            "threshold": _jsonable(report.jam.threshold),
            "threshold_crossed": report.jam.threshold_crossed,
            "first_crossing_step": report.jam.first_crossing_step,
            "sustained_growth": report.jam.sustained_growth,
            "growth_fraction": _jsonable(report.jam.growth_fraction),
        },
        "spectrum_slope": _jsonable(spectrum.slope) if spectrum else None,
        "spectrum_fit": [_jsonable(spectrum.fit_lo), _jsonable(spectrum.fit_hi)] if spectrum else None,
        "dt_tail_slope": _jsonable(dt_slope),
        "dt_fit": [_jsonable(spec.dt_fit_lo), _jsonable(dt_fit_hi)],
        "rng_seed": report.seed,
        "config": serialize_config(spec).strip().split("\n"),
    }
    out.append(_atomic_write(run_dir / "summary.json", json.dumps(summary, indent=2) + "\n"))

    if spec.figures:
        out.append(plots.plot_load(report.load_series, f"load, {title}", run_dir / "load.png"))
        if spectrum is not None:
            out.append(plots.plot_spectrum(
                spectrum.frequencies, spectrum.power, spectrum.slope,
                spectrum.fit_lo, spectrum.fit_hi,
                f"load power spectrum, {title}", run_dir / "spectrum.png"))
        if dt_centers is not None:
            out.append(plots.plot_loglog_density(
                dt_centers, dt_density, "transmission gap (steps)",
                f"waiting-interval distribution, {title}", run_dir / "dt_hist.png",
                slope=dt_slope, fit_lo=spec.dt_fit_lo, fit_hi=dt_fit_hi))
        if len(deliveries):
            hist_centers, hist_density = metrics.histogram(deliveries, ratio=spec.dt_bin_ratio)
            out.append(plots.plot_loglog_density(
                hist_centers, hist_density, "delivery time (steps)",
                f"delivery-time distribution, {title}", run_dir / "delivery_hist.png"))
        out.append(plots.plot_mean_delivery(
            ts, cum_mean, win_mean, spec.window, f"mean delivery time, {title}",
            run_dir / "mean_delivery.png"))
        out.append(plots.plot_learning(
            report.learning_steps, report.learning_fractions,
            f"learning, {title}", run_dir / "learning.png"))
    return out


# ---------------------------------------------------------------- compare


def _collect_summaries(directory: Path) -> list[dict]:
    direct = directory / "summary.json"
    paths = [direct] if direct.is_file() else sorted(directory.rglob("summary.json"))
    return [json.loads(p.read_text()) for p in paths]


def _mean_of(summaries: list[dict], key: str) -> float:
    vals = [s[key] for s in summaries if s.get(key) is not None]
    return float(np.mean(vals)) if vals else float("nan")


def compare(dirs: list[str | Path]) -> str:
    """Side-by-side table of run summaries, one column per directory.

    Numeric fields are averaged over all summaries found under a directory;
    the smallest steady-state mean load is flagged with '*'.
    """
    groups = []
    for d in dirs:
        path = Path(d)
        summaries = _collect_summaries(path)
        if not summaries:
            raise FileNotFoundError(f"no summary.json under {path}")
        algos = {s["algorithm"] for s in summaries}
        label = algos.pop() if len(algos) == 1 else path.name
        groups.append((label, summaries))
    if len(groups) < 2:
        raise ValueError("compare needs at least two run directories")

    mean_loads = [_mean_of(s, "mean_load_steady") for _, s in groups]
    best = int(np.nanargmin(mean_loads)) if not all(math.isnan(v) for v in mean_loads) else -1
    rows = [
        ("runs", [str(len(s)) for _, s in groups]),
        ("mean load (steady)", [
            f"{v:.2f}{' *' if i == best else ''}" for i, v in enumerate(mean_loads)
        ]),
        ("mean delivery time", [f"{_mean_of(s, 'mean_delivery_time'):.2f}" for _, s in groups]),
        ("learning @ 5000", [f"{_mean_of(s, 'learning_at_5000'):.3f}" for _, s in groups]),
        ("jammed", [
            f"{sum(1 for x in s if x['jam']['jammed'])}/{len(s)}" for _, s in groups
        ]),
        ("delivered", [f"{_mean_of(s, 'delivered'):.0f}" for _, s in groups]),
        ("spectrum slope", [f"{_mean_of(s, 'spectrum_slope'):.2f}" for _, s in groups]),
    ]
    labels = [label for label, _ in groups]
    name_w = max(len(r[0]) for r in rows)
    col_w = [max(len(lab), max(len(r[1][i]) for r in rows)) for i, lab in enumerate(labels)]
    lines = [
        " " * name_w + "  " + "  ".join(lab.rjust(col_w[i]) for i, lab in enumerate(labels)),
        "-" * (name_w + 2 + sum(col_w) + 2 * (len(labels) - 1)),
    ]
    for name, cells in rows:
        lines.append(name.ljust(name_w) + "  " + "  ".join(c.rjust(col_w[i]) for i, c in enumerate(cells)))
    lines.append("")
    lines.append("* smallest steady-state mean load")
    return "\n".join(lines)


# ---------------------------------------------------------------- main


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 on usage errors, not argparse's 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="routesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write data + figures")
    p_run.add_argument("--config", help="key=value config file (flags override it)")
    p_run.add_argument("--nodes", type=int)
    p_run.add_argument("--m", type=int)
    p_run.add_argument("--topology-file", dest="topology_file")
    p_run.add_argument("--rate", type=float)
    p_run.add_argument("--steps", type=int)
    p_run.add_argument("--algorithm", action="append", choices=[a.value for a in Algorithm],
                       help="repeatable: rw, st, std, cd, cdt")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--seeds", help="comma-separated seed list")
    p_run.add_argument("--queue-cap", dest="queue_cap", type=int)
    p_run.add_argument("--delivery-mode", dest="delivery_mode", choices=["total", "remaining"])
    p_run.add_argument("--out")
    p_run.add_argument("--jam-threshold", dest="jam_threshold", type=float)
    p_run.add_argument("--spectrum-segment", dest="spectrum_segment", type=int)
    p_run.add_argument("--learning-interval", dest="learning_interval", type=int)
    p_run.add_argument("--no-bootstrap", action="store_true",
                       help="disable the random-walk start for ST/STD")
    p_run.add_argument("--no-figures", action="store_true", help="write CSV/JSON only")
    p_run.add_argument("--fail-on-jam", action="store_true",
                       help="exit nonzero if any run jams")

    p_cmp = sub.add_parser("compare", help="tabulate summaries from run directories")
    p_cmp.add_argument("dirs", nargs="+", help="directories containing summary.json (searched recursively)")
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict[str, object] = {}
    for name in ("nodes", "m", "topology_file", "rate", "steps", "queue_cap", "out",
                 "jam_threshold", "spectrum_segment", "learning_interval"):
        overrides[name] = getattr(args, name)
    if args.algorithm:
        overrides["algorithms"] = [Algorithm.parse(a) for a in args.algorithm]
    if args.seeds is not None:
        overrides["seeds"] = _parse_seeds(args.seeds)
    elif args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.delivery_mode is not None:
        overrides["delivery_mode"] = DeliveryMode(args.delivery_mode)
    if args.no_bootstrap:
        overrides["bootstrap"] = False
    if args.no_figures:
        overrides["figures"] = False
    return overrides


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            text = ""
            if args.config:
                config_path = Path(args.config)
                if not config_path.is_file():
                    print(f"usage error: config file not found: {config_path}", file=sys.stderr)
                    return 1
                text = config_path.read_text()
            try:
                spec = parse_config(text, _overrides_from_args(args))
            except ConfigError as err:
                print(f"usage error: {err}", file=sys.stderr)
                return 1
            outputs = run_experiment(spec, fail_on_jam=args.fail_on_jam)
            if outputs.exit_code:
                print("jam detected (--fail-on-jam)", file=sys.stderr)
            return outputs.exit_code

        table = compare(args.dirs)
        print(table)
        return 0
    except (OSError, TopologyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
