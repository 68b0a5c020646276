"""``semiisac eval|sweep|validate`` command-line entry point."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytic as A
from . import montecarlo as M
from .checks import PROFILES, corrupt_constants, run_checks
from .scenario import (
    PRESETS,
    Scenario,
    average_received_snr_db,
    config_from_dict,
    config_to_dict,
    load_config,
)

log = logging.getLogger("semiisac")

SWEEP_HEADER = ["axis", "scenario", "user", "metric", "method", "value", "ci"]
EVAL_HEADER = SWEEP_HEADER[1:]
ALL_SCENARIOS = ("fd", "oma", "noma-i", "noma-ii")


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    return "" if x is None else format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Metric table
# ---------------------------------------------------------------------------

# kind: "user" rows per (scenario, user); "mode" rows per scenario; "global" one row
@dataclass(frozen=True)
class Metric:
    kind: str
    scenarios: tuple
    analytic: object
    mc: object = None


def _op(cfg, sc, user):
    return A.op_oma(cfg, user) if sc is Scenario.OMA_SEMI else A.op_noma(cfg, sc, user)


def _rate(cfg, sc, user):
    return A.rate_oma(cfg, user) if sc is Scenario.OMA_SEMI else A.rate_noma(cfg, sc, user)


def _diversity(cfg, sc, user):
    return A.MetricResult(float(A.diversity_order(cfg, sc, user)), "dimensionless", "analytic")


def _snr_db(cfg, sc, user):
    return A.MetricResult(average_received_snr_db(cfg, user), "dB", "analytic")


def _slope(cfg):
    return A.MetricResult(A.high_snr_slope(cfg.radar), "bits/s", "analytic")


_USER_SCEN = ("oma", "noma-i", "noma-ii")
_NOMA = ("noma-i", "noma-ii")

METRICS = {
    "op": Metric("user", _USER_SCEN, _op,
                 lambda cfg, sc, user, mc: M.mc_outage(cfg, sc, user, settings=mc)),
    "rate": Metric("user", _USER_SCEN, _rate,
                   lambda cfg, sc, user, mc: M.mc_rate(cfg, sc, user, settings=mc)),
    "op_asymptotic": Metric("user", _NOMA, lambda cfg, sc, user: A.asymptotic_op(cfg, sc, user)),
    "diversity": Metric("user", _NOMA, _diversity),
    "snr_db": Metric("user", ALL_SCENARIOS, _snr_db),
    "capacity": Metric("mode", ALL_SCENARIOS, lambda cfg, sc: A.aggregate_capacity(cfg, sc),
                       lambda cfg, sc, mc: M.mc_capacity(cfg, sc, mc)),
    "reir": Metric("global", (), lambda cfg: A.reir_general(cfg),
                   lambda cfg, mc: M.mc_reir(cfg, mc, "imperfect")),
    "reir_rayleigh": Metric("global", (), lambda cfg: A.reir_rayleigh(cfg)),
    "reir_asymptotic": Metric("global", (), lambda cfg: A.reir_asymptotic(cfg, fallback=True)),
    "slope": Metric("global", (), _slope),
}


def evaluate_rows(cfg, scenarios, users, metrics, mc=None):
    """Rows ``(scenario, user, metric, method, value, ci)`` in a fixed order.

    Metric-major; within a metric, scenarios then users in the order
    given. Combinations a metric does not define are skipped.
    """
    rows = []
    for name in metrics:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}; known: {sorted(METRICS)}")
        met = METRICS[name]
        if met.kind == "global":
            results = [met.analytic(cfg)]
            if mc is not None and met.mc is not None:
                results.append(met.mc(cfg, mc))
            rows += [("-", "-", name, r.method, r.value, r.ci_halfwidth) for r in results]
            continue
        for sc_name in scenarios:
            sc = Scenario.parse(sc_name)
            if sc.value not in met.scenarios:
                continue
            if met.kind == "mode":
                results = [met.analytic(cfg, sc)]
                if mc is not None and met.mc is not None:
                    results.append(met.mc(cfg, sc, mc))
                rows += [(sc.value, "-", name, r.method, r.value, r.ci_halfwidth) for r in results]
                continue
            for user in users:
                results = [met.analytic(cfg, sc, user)]
                if mc is not None and met.mc is not None:
                    results.append(met.mc(cfg, sc, user, mc))
                rows += [(sc.value, user, name, r.method, r.value, r.ci_halfwidth) for r in results]
    return rows


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) or x is None else x for x in row])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

class SweepError(RuntimeError):
    pass


@dataclass
class SweepSpec:
    base: dict
    axis: str
    start: float
    stop: float
    points: int
    scale: str = "linear"
    scenarios: list = field(default_factory=lambda: ["noma-i"])
    users: list = field(default_factory=lambda: ["c", "r"])
    metrics: list = field(default_factory=lambda: ["op"])
    mc: M.McSettings | None = None
    complement: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("a sweep needs at least 2 points")
        if self.scale not in ("linear", "log", "dB"):
            raise ValueError(f"scale must be linear, log or dB, got {self.scale!r}")
        _get_path(self.base, self.axis)
        if self.complement:
            _get_path(self.base, self.complement)

    def axis_values(self):
        if self.scale == "linear":
            return np.linspace(self.start, self.stop, self.points)
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        # evenly spaced in dB, applied as linear ratios
        return 10.0 ** (np.linspace(self.start, self.stop, self.points) / 10.0)

    def config_at(self, value):
        data = copy.deepcopy(self.base)
        _set_path(data, self.axis, float(value))
        if self.complement:
            # fill the named fraction so that the three bandwidth fractions sum to 1
            sec, name = self.complement.split(".", 1)
            others = [k for k in ("alpha_semi", "beta_semi", "epsilon_semi") if k != name]
            data[sec][name] = max(0.0, 1.0 - sum(data[sec][k] for k in others))
        return config_from_dict(data)


def _get_path(data, path):
    parts = path.split(".")
    node = data
    for p in parts:
        if not isinstance(node, dict) or p not in node:
            raise ValueError(f"axis {path!r} does not name a config field")
        node = node[p]
    if isinstance(node, (dict, list, bool)) or not isinstance(node, (int, float)):
        raise ValueError(f"axis {path!r} is not a scalar numeric field")
    return node


def _set_path(data, path, value):
    parts = path.split(".")
    node = data
    for p in parts[:-1]:
        node = node[p]
    if parts[-1] == "m":
        value = int(round(value))
    node[parts[-1]] = value


def _base_config_dict(spec_config, spec_dir):
    if spec_config is None:
        return config_to_dict(config_from_dict({"preset": "paper-sec6"}))
    if isinstance(spec_config, dict):
        return config_to_dict(config_from_dict(spec_config))
    if spec_config in PRESETS:
        return config_to_dict(config_from_dict({"preset": spec_config}))
    return config_to_dict(load_config(Path(spec_dir) / spec_config))


def load_sweep_spec(path, seed=None, samples=None):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    base = _base_config_dict(raw.get("config"), path.parent)
    for key, value in raw.get("overrides", {}).items():
        _set_path(base, key, value)
    rng = raw.get("range", {})
    mc_raw = raw.get("mc")
    if samples is not None:
        mc_raw = dict(mc_raw or {}, n_samples=samples)
    if seed is not None and mc_raw is not None:
        mc_raw = dict(mc_raw, seed=seed)
    try:
        return SweepSpec(
            base=base,
            axis=raw["axis"],
            start=float(rng["start"]),
            stop=float(rng["stop"]),
            points=int(rng["points"]),
            scale=rng.get("scale", "linear"),
            scenarios=list(raw.get("scenarios", ["noma-i"])),
            users=list(raw.get("users", ["c", "r"])),
            metrics=list(raw.get("metrics", ["op"])),
            mc=M.McSettings(**mc_raw) if mc_raw is not None else None,
            complement=raw.get("complement"),
            workers=int(raw.get("workers", 1)),
        )
    except KeyError as exc:
        raise ValueError(f"sweep spec is missing {exc}") from None


def run_sweep(spec):
    """All rows of a sweep, axis-major, identical regardless of ``workers``."""
    values = spec.axis_values()

    def point(v):
        try:
            cfg = spec.config_at(v)
            return [(v,) + row for row in evaluate_rows(cfg, spec.scenarios, spec.users, spec.metrics, spec.mc)]
        except Exception as exc:
            raise SweepError(f"sweep failed at {spec.axis}={fmt(v)}: {exc}") from exc

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(point, values))
    else:
        chunks = [point(v) for v in values]
    return [row for chunk in chunks for row in chunk]


def sweep_csv(spec):
    buf = io.StringIO()
    _write_rows(buf, SWEEP_HEADER, run_sweep(spec))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _mc_from_args(args):
    if args.samples is None:
        return None
    kw = {"n_samples": args.samples}
    if args.seed is not None:
        kw["seed"] = args.seed
    return M.McSettings(**kw)


def cmd_eval(args, out):
    cfg = load_config(args.config)
    rows = evaluate_rows(cfg, args.scenario or ["noma-i"], args.user or ["c", "r"],
                         args.metric or ["op", "rate"], _mc_from_args(args))
    _write_rows(out, EVAL_HEADER, rows)
    return 0


def cmd_sweep(args, out):
    spec = load_sweep_spec(args.spec, seed=args.seed, samples=args.samples)
    text = sweep_csv(spec)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_validate(args, out):
    cfg = load_config(args.config)
    constants = corrupt_constants(cfg, args.inject_fault) if args.inject_fault else None
    results = run_checks(cfg, args.profile, seed=args.seed, n_samples=args.samples, constants=constants)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["name", "expected", "got", "tolerance", "verdict"])
    for r in results:
        w.writerow([r.name, fmt(r.expected), fmt(r.got), fmt(r.tolerance), r.verdict])
    failed = [r.name for r in results if not r.passed]
    if failed:
        log.error("%d check(s) failed: %s", len(failed), ", ".join(failed))
        return 1
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="semiisac", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="Monte Carlo seed")
        sp.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")

    e = sub.add_parser("eval", help="evaluate metrics for one configuration")
    e.add_argument("--config", default="paper-sec6", help="JSON config path or preset name")
    e.add_argument("--scenario", action="append", choices=ALL_SCENARIOS)
    e.add_argument("--user", action="append", choices=("c", "r"))
    e.add_argument("--metric", action="append", choices=sorted(METRICS))
    common(e)

    s = sub.add_parser("sweep", help="run a parameter sweep to CSV")
    s.add_argument("--spec", required=True, help="JSON sweep spec")
    s.add_argument("--out", default=None, help="output CSV (default stdout)")
    common(s)

    v = sub.add_parser("validate", help="run the analytic-vs-simulation check suite")
    v.add_argument("--config", default="paper-sec6")
    v.add_argument("--profile", default="default", choices=sorted(PROFILES))
    v.add_argument("--inject-fault", default=None, metavar="CONSTANT",
                   help="scale one derived constant by 1%% before the consistency check")
    common(v)
    return p


def main(argv=None, out=None):
    logging.basicConfig(level=logging.WARNING, format="semiisac: %(message)s")
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    handlers = {"eval": cmd_eval, "sweep": cmd_sweep, "validate": cmd_validate}
    try:
        return handlers[args.command](args, out)
    except (ValueError, OSError, SweepError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
