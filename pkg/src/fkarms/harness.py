"""Command-line runner: experiment configs, replica fan-out, run records and output files.

Each run splits its sample budget over a fixed number of replicas; replica g
draws from the stream ``SeedSequence(seed).spawn(replicas)[g]``, so tallies
depend only on (config, seed, replica count) and not on the worker count.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (ArmTable, arm_table, inequality_report, predicted_exponents,
                       proportion)
from .connectivity import arm_flags, detect_crossing
from .errors import ParameterError
from .lattice import box, rectangle
from .rcmodel import FREE, WIRED, EdgeConfig, ModelParams, Schedule, equilibrium_stream

TASKS = ("oracle", "sample", "arms", "exponents", "flower", "goodscales", "couple", "report")
CSV_FIELDS = ("q", "r", "R", "event", "n", "hits", "phat", "stderr", "ci_lo", "ci_hi", "seed")
WORKERS_ENV = "FKARMS_WORKERS"


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run."""

    task: str = "arms"
    q: float = 1.0
    p: float | None = None
    r: int = 4
    R: int = 32
    m: int = 4
    n: int = 7
    margin: int = 4
    sampler: str = "cluster"
    samples: int = 1000
    burnin: int | None = None
    seed: int = 0
    replicas: int = 10
    workers: int = 1
    bc: str = "free"
    correction: float | None = 1.0
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}; choose from {TASKS}")
        if not (1.0 <= self.q <= 4.0):
            raise ParameterError(f"q must lie in [1, 4], got {self.q}")
        if self.p is not None and not (0.0 < self.p < 1.0):
            raise ParameterError(f"p must lie in (0, 1), got {self.p}")
        if self.margin < 2:
            raise ParameterError(f"margin must be >= 2, got {self.margin}")
        if self.sampler not in ("cluster", "heatbath"):
            raise ParameterError(f"unknown sampler {self.sampler!r}")
        if self.samples < 0 or self.replicas < 1 or self.workers < 1:
            raise ParameterError("samples, replicas and workers must be positive")
        if self.bc not in ("free", "wired"):
            raise ParameterError(f"unknown boundary condition {self.bc!r}")
        if self.format not in ("csv", "json"):
            raise ParameterError(f"unknown format {self.format!r}")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.q, self.p)

    @property
    def schedule(self) -> Schedule:
        return Schedule(sampler=self.sampler, burnin=self.burnin)

    @property
    def boundary(self):
        return WIRED if self.bc == "wired" else FREE

    # plain-text "key = value" form
    def to_text(self) -> str:
        return "".join(f"{k} = {'' if v is None else v}\n"
                       for k, v in dataclasses.asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"config line without '=': {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ParameterError(f"unknown config key {key!r}")
            kw[key] = _parse_value(types[key], val)
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _parse_value(tp: str, val: str):
    if val == "" or val.lower() == "none":
        return None
    base = tp.split("|")[0].strip()
    if base == "int":
        return int(val)
    if base == "float":
        return float(val)
    return val


@dataclass
class RunRecord:
    """Config snapshot, provenance, tallies, derived estimates and in-task assertions."""

    config: dict
    version: str
    started: float
    finished: float
    seeds: list
    tallies: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.assertions.values())

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# fkarms {self.version} seed={self.config.get('seed')} "
                  f"config={json.dumps(self.config, sort_keys=True)}\n")
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.tallies:
            w.writerow({k: row.get(k, "") for k in CSV_FIELDS})
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialise {type(x)}")


def tally_row(cfg: ExperimentConfig, r, R, event: str, hits: int, n: int) -> dict:
    """One CSV row with Wilson CI columns."""
    if n == 0:
        ph = se = lo = hi = float("nan")
    else:
        est = proportion(int(hits), int(n))
        ph, se, (lo, hi) = est.value, est.stderr, est.ci
    return {"q": cfg.q, "r": r, "R": R, "event": event, "n": int(n), "hits": int(hits),
            "phat": ph, "stderr": se, "ci_lo": lo, "ci_hi": hi, "seed": cfg.seed}


def emit(record: RunRecord, fmt: str = "csv", path: str | None = None) -> str:
    """Serialise a record; write it to ``path`` if given.  Returns the text."""
    if fmt not in ("csv", "json"):
        raise ParameterError(f"unknown format {fmt!r}")
    text = record.to_csv() if fmt == "csv" else record.to_json()
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# --- replica workers ----------------------------------------------------------------------------


def _replica_rng(cfg: ExperimentConfig, g: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(cfg.replicas)[g])


def _sizes(cfg: ExperimentConfig) -> list:
    return [len(c) for c in np.array_split(np.arange(cfg.samples), cfg.replicas)]


def _replica_sample(cfg: ExperimentConfig, g: int, size: int) -> dict:
    rng = _replica_rng(cfg, g)
    reg = rectangle(cfg.R + 1, cfg.R)
    stream = equilibrium_stream(reg, cfg.boundary, cfg.params, cfg.schedule, rng)
    hits = 0
    density = 0.0
    for _ in range(size):
        c = next(stream)
        hits += detect_crossing(c, reg)
        density += c.bits.mean()
    return {"lr_crossing": (hits, size), "density_sum": density}


def _replica_flower(cfg: ExperimentConfig, g: int, size: int) -> dict:
    from .interfaces import find_double_four_petal, flower_domain, is_well_separated
    rng = _replica_rng(cfg, g)
    reg = box(cfg.margin * cfg.R)
    stream = equilibrium_stream(reg, cfg.boundary, cfg.params, cfg.schedule, rng)
    counts = {"four_petals": 0, "four_well_separated": 0, "double_four_petal": 0,
              "parity_ok": 0}
    for _ in range(size):
        c = next(stream)
        fd = flower_domain(c, cfg.r, cfg.R, "inner")
        k = fd.n_petals
        par = fd.petal_parities()
        alt = k == 1 or (k % 2 == 0 and all(par[i] != par[(i + 1) % k] for i in range(k)))
        counts["parity_ok"] += int(alt)
        counts["four_petals"] += int(k == 4)
        counts["four_well_separated"] += int(k == 4 and is_well_separated(fd))
        counts["double_four_petal"] += int(find_double_four_petal(c, cfg.r, cfg.R) is not None)
    return {e: (h, size) for e, h in counts.items()}


def _replica_goodscales(cfg: ExperimentConfig, g: int, size: int) -> dict:
    from .goodscales import good_scale_count
    rng = _replica_rng(cfg, g)
    R = 2 ** cfg.n
    reg = box(R)
    stream = None if cfg.q == 1.0 else equilibrium_stream(
        box(cfg.margin * R), cfg.boundary, cfg.params, cfg.schedule, rng)
    accepted = tried = atleast1 = total = 0
    while accepted < size:
        tried += 1
        if stream is None:
            c = EdgeConfig(reg, (rng.random(reg.n_edges) < cfg.params.p).astype(np.uint8))
        else:
            c = next(stream)
        img = c.to_pixels(R)
        a0, a1 = arm_flags(img, 2 ** cfg.m, R)
        if not (a0 and a1):
            continue
        accepted += 1
        _, rec = good_scale_count(img, cfg.m, cfg.n)
        atleast1 += int(rec.count >= 1)
        total += rec.count
    return {"good_scale": (atleast1, size), "a01_accept": (size, tried), "count_sum": total}


def _replica_couple(cfg: ExperimentConfig, g: int, size: int) -> dict:
    from .coupling import analyse_pair, has_dual_arm, pair_stream
    rng = _replica_rng(cfg, g)
    gen = pair_stream(cfg.m, cfg.n, cfg.params, cfg.schedule, rng)
    records, violations = [], 0
    for i in range(size):
        lo, up = next(gen)
        if not (np.all(lo.bits <= up.bits) and has_dual_arm(lo, 2 ** cfg.m, 2 ** cfg.n)):
            violations += 1
        records.append(analyse_pair(lo, up, cfg.m, cfg.n, i))
    return {"records": records, "violations": violations}


def _run_replicas(cfg: ExperimentConfig, fn) -> list:
    sizes = _sizes(cfg)
    workers = int(os.environ.get(WORKERS_ENV, cfg.workers))
    jobs = [(cfg, g, s) for g, s in enumerate(sizes)]
    if workers <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _merge_counts(parts: list) -> dict:
    out = {}
    for part in parts:
        for k, v in part.items():
            if isinstance(v, tuple):
                h, n = out.get(k, (0, 0))
                out[k] = (h + v[0], n + v[1])
            elif isinstance(v, (int, float)):
                out[k] = out.get(k, 0) + v
    return out


# --- tasks ------------------------------------------------------------------------------------


def _task_oracle(cfg, rec):
    from .oracle import run_oracle
    summary = run_oracle()
    rec.derived["oracle"] = summary.to_record()
    rec.derived["lines"] = summary.lines()
    for c in summary.checks:
        rec.assertions[c.name] = c.passed


def _task_sample(cfg, rec):
    tot = _merge_counts(_run_replicas(cfg, _replica_sample))
    h, n = tot["lr_crossing"]
    rec.tallies.append(tally_row(cfg, None, cfg.R, "lr_crossing", h, n))
    rec.derived["mean_density"] = tot["density_sum"] / max(n, 1)


def _arm_rows(cfg, rec, table: ArmTable):
    for j, R in enumerate(table.Rs):
        for e in ("0", "1", "01"):
            h, n = table.total(e, j)
            rec.tallies.append(tally_row(cfg, table.r, R, f"A{e}", h, n))
    rec.derived["replica_hits"] = {e: table.hits[e].tolist() for e in table.hits}


def _task_arms(cfg, rec):
    table = arm_table(cfg.q, cfg.r, [cfg.R], cfg.samples, cfg.seed, cfg.replicas,
                      cfg.boundary, cfg.schedule)
    _arm_rows(cfg, rec, table)


def _geometric(r, R):
    out, x = [], 2 * r
    while x <= R:
        out.append(x)
        x *= 2
    if len(out) < 3:
        raise ParameterError(f"need at least three scales between 2r={2 * r} and R={R}")
    return out


def _task_exponents(cfg, rec, full_report=False):
    Rs = _geometric(cfg.r, cfg.R)
    table = arm_table(cfg.q, cfg.r, Rs, cfg.samples, cfg.seed, cfg.replicas,
                      cfg.boundary, cfg.schedule)
    _arm_rows(cfg, rec, table)
    rep = inequality_report(cfg.q, cfg.r, Rs, cfg.samples, cfg.seed, cfg.replicas,
                            cfg.correction, table=table)
    pred = predicted_exponents(cfg.q)
    rec.derived["alpha"] = {e: f.alpha.to_record() for e, f in rep.fits.items()}
    rec.derived["gap"] = rep.gap.to_record()
    rec.derived["prediction"] = {"alpha1": pred.alpha1, "alpha01": pred.alpha01,
                                 "gap": pred.gap, "kappa": pred.kappa}
    rec.derived["fitted_Rs"] = list(rep.fitted_Rs)
    rec.assertions["product_inequality"] = all(rep.eq1_holds())
    if full_report:
        rec.derived["report"] = json.loads(rep.to_json())


def _task_flower(cfg, rec):
    tot = _merge_counts(_run_replicas(cfg, _replica_flower))
    for e, (h, n) in tot.items():
        rec.tallies.append(tally_row(cfg, cfg.r, cfg.R, e, h, n))
    h, n = tot["parity_ok"]
    rec.assertions["petal_parity"] = h == n


def _task_goodscales(cfg, rec):
    tot = _merge_counts(_run_replicas(cfg, _replica_goodscales))
    h, n = tot["good_scale"]
    rec.tallies.append(tally_row(cfg, 2 ** cfg.m, 2 ** cfg.n, "good_scale>=1", h, n))
    a, t = tot["a01_accept"]
    rec.tallies.append(tally_row(cfg, 2 ** cfg.m, 2 ** cfg.n, "A01", a, t))
    rec.derived["mean_good_scales"] = tot["count_sum"] / max(n, 1)


def _task_couple(cfg, rec):
    from .coupling import coupled_statistics
    parts = _run_replicas(cfg, _replica_couple)
    records = [r for p in parts for r in p["records"]]
    violations = sum(p["violations"] for p in parts)
    rep = coupled_statistics(records)
    r, R = 2 ** cfg.m, 2 ** cfg.n
    rec.tallies.append(tally_row(cfg, r, R, "A1_lower", sum(x.a1_lower for x in records), len(records)))
    rec.tallies.append(tally_row(cfg, r, R, "A1_upper", sum(x.a1_upper for x in records), len(records)))
    rec.tallies.append(tally_row(cfg, r, R, "discordant", rep.discordant, rep.total))
    for s in rep.strata:
        rec.tallies.append(tally_row(cfg, r, R, f"A1_lower|D({s.K})", s.hits_lower, s.n))
        rec.tallies.append(tally_row(cfg, r, R, f"A1_upper|D({s.K})", s.hits_upper, s.n))
    rec.derived["strata"] = [{"K": s.K, "n": s.n, "ratio": s.ratio} for s in rep.strata]
    rec.derived["crossing_pairs"] = {f"{a}{b}": v for (a, b), v in rep.crossing_pairs.items()}
    rec.derived["audit"] = [x.to_row() for x in records]
    rec.assertions["ordered_and_conditioned"] = violations == 0
    rec.assertions["crossing_constraint"] = rep.constraint_ok


DISPATCH = {
    "oracle": _task_oracle,
    "sample": _task_sample,
    "arms": _task_arms,
    "exponents": _task_exponents,
    "flower": _task_flower,
    "goodscales": _task_goodscales,
    "couple": _task_couple,
    "report": lambda cfg, rec: _task_exponents(cfg, rec, full_report=True),
}


def run(cfg: ExperimentConfig) -> RunRecord:
    """Run the task, merge replicas and persist the record if ``cfg.out`` is set."""
    cfg.validate()
    rec = RunRecord(dataclasses.asdict(cfg), __version__, time.time(), math.nan,
                    [[cfg.seed, g] for g in range(cfg.replicas)])
    DISPATCH[cfg.task](cfg, rec)
    rec.finished = time.time()
    if cfg.out:
        emit(rec, cfg.format, cfg.out)
    return rec


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fkarms", description="FK-percolation arm-event experiments")
    ap.add_argument("task", nargs="?", choices=TASKS, help="experiment to run")
    ap.add_argument("--config", help="key = value config file (flags override it)")
    ap.add_argument("--q", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--r", type=int)
    ap.add_argument("--R", type=int)
    ap.add_argument("--m", type=int)
    ap.add_argument("--n", type=int)
    ap.add_argument("--margin", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--burnin", type=int)
    ap.add_argument("--sampler", choices=("cluster", "heatbath"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--bc", choices=("free", "wired"))
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("csv", "json"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    base = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    kw = dataclasses.asdict(base)
    for k, v in vars(args).items():
        if k != "config" and v is not None:
            kw[k] = v
    try:
        cfg = ExperimentConfig(**kw)
        rec = run(cfg)
    except ParameterError as exc:
        print(f"fkarms: {exc}", file=sys.stderr)
        return 2
    if not cfg.out:
        sys.stdout.write(emit(rec, cfg.format))
    for line in rec.derived.get("lines", []):
        print(line, file=sys.stderr)
    for name, ok in rec.assertions.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return 0 if rec.ok else 1


if __name__ == "__main__":
    sys.exit(main())
