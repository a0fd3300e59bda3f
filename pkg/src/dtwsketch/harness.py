"""Experiment runner: instance distributions, trial execution, CSV and summaries.

Every trial derives its own seed from the master seed, so any CSV row can
be replayed alone.  Summaries are computed from :class:`TrialRecord` values
only, and :func:`read_csv` rebuilds those from a written file.
"""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gadgets
from .docexchange import FAIL, SCHEMES as DE_SCHEMES, ResourceExceeded
from .dtw import Sequence, dtw
from .io import FormatError, parse_metric_spec, read_metric
from .metric import MetricSpace
from .protocols import SCHEMES, Estimate, GapBit, ProtocolConfig, alice, bob
from .randomness import derive_seed

CSV_COLUMNS = ["seed", "n", "alpha", "protocol", "dtw_true", "outcome", "estimate", "ratio",
               "bits", "ms"]
ORACLE_MAX = 4096
SEED_ENV = "DTWSKETCH_SEED"
DISTRIBUTIONS = ("identical", "random", "planted-near", "planted-far", "gadget-index",
                 "gadget-int", "gadget-set", "gadget-linear")
REL_SLACK = 1e-9


class ConfigError(ValueError):
    pass


def _int_list(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(v) for v in str(value).replace(" ", "").split(",") if v)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass
class ExperimentConfig:
    protocol: str
    metric: str = "line 256"
    n: tuple = (256,)
    alpha: tuple = (32,)
    delta: float = 0.1
    trials: int = 10
    seed: int = 0
    seed_source: str = "default"
    distribution: str = "planted-near"
    edits: int | None = None
    run_length: float = 2.0
    r: float | None = None
    forced: bool = False
    search: str | None = None
    de_scheme: str = "chunked"
    bits_only: bool = False
    min_success: float | None = None
    output: str | None = None
    workers: int = 1

    KEYS = ("protocol", "metric", "n", "alpha", "delta", "trials", "seed", "distribution", "edits",
            "run_length", "r", "forced", "search", "de_scheme", "bits_only", "min_success",
            "output", "workers")

    @classmethod
    def from_mapping(cls, d: dict, env=None) -> "ExperimentConfig":
        env = os.environ if env is None else env
        unknown = set(d) - set(cls.KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "protocol" not in d:
            raise ConfigError("config needs a 'protocol' key")
        kw: dict = {"protocol": d["protocol"]}
        try:
            if "seed" in d:
                kw["seed"], kw["seed_source"] = int(d["seed"]), "config"
            elif env.get(SEED_ENV):
                kw["seed"], kw["seed_source"] = int(env[SEED_ENV]), "env"
            for key in ("n", "alpha"):
                if key in d:
                    kw[key] = _int_list(d[key])
            for key in ("delta", "run_length"):
                if key in d:
                    kw[key] = float(d[key])
            for key in ("trials", "workers"):
                if key in d:
                    kw[key] = int(d[key])
            for key in ("forced", "bits_only"):
                if key in d:
                    kw[key] = _bool(d[key])
            if d.get("edits") not in (None, ""):
                kw["edits"] = int(d["edits"])
            if d.get("r") not in (None, ""):
                kw["r"] = float(d["r"])
            if d.get("min_success") not in (None, ""):
                kw["min_success"] = float(d["min_success"])
            for key in ("metric", "distribution", "search", "de_scheme", "output"):
                if d.get(key):
                    kw[key] = d[key]
        except ValueError as e:
            raise ConfigError(str(e)) from None
        cfg = cls(**kw)
        cfg.check()
        return cfg

    def check(self):
        if self.protocol not in SCHEMES:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {sorted(SCHEMES)}")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.n or min(self.n) < 1:
            raise ConfigError("n must list positive lengths")
        if not self.alpha or min(self.alpha) < 1:
            raise ConfigError("alpha must list positive integers")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.protocol.startswith("gap_") and (self.r is None or self.r < 1):
            raise ConfigError("gap protocols need r >= 1")
        if self.de_scheme not in DE_SCHEMES:
            raise ConfigError(f"unknown de_scheme {self.de_scheme!r}")
        if self.search not in (None, "linear", "binary"):
            raise ConfigError("search must be 'linear' or 'binary'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def protocol_config(self) -> ProtocolConfig:
        base = ProtocolConfig.forced() if self.forced else ProtocolConfig()
        return base.with_(de_scheme=DE_SCHEMES[self.de_scheme], search=self.search)

    def space(self) -> MetricSpace:
        if Path(self.metric).is_file():
            return read_metric(self.metric)
        return parse_metric_spec(self.metric)


@dataclass
class TrialRecord:
    seed: int
    n: int
    alpha: int
    protocol: str
    dtw_true: float | None
    outcome: str
    estimate: float | None
    ratio: float | str | None
    bits: int
    ms: float

    @property
    def oracle(self) -> str:
        return "absent" if self.dtw_true is None else "exact"

    @property
    def success(self) -> bool | None:
        """None when the trial cannot be judged (no oracle, or bits only)."""
        if self.dtw_true is None or self.outcome == "unevaluated":
            return None
        if self.outcome in ("fail", "exceeded"):
            return False
        if self.outcome in ("gap0", "gap1"):
            # ratio holds dtw / (n r): at most 1/alpha demands 0, above 1 demands 1
            rho = float(self.ratio)
            if rho <= 1.0 / self.alpha:
                return self.outcome == "gap0"
            if rho > 1.0:
                return self.outcome == "gap1"
            return True
        if self.ratio == "zero":
            return True
        if self.ratio == "inf":
            return False
        rho = float(self.ratio)
        return 1.0 - REL_SLACK <= rho <= self.alpha * (1.0 + REL_SLACK)

    def row(self) -> list:
        def num(v):
            if v is None:
                return ""
            if isinstance(v, float) and v.is_integer():
                return str(int(v))
            return repr(v) if isinstance(v, float) else str(v)

        dtw_cell = "absent" if self.dtw_true is None else num(self.dtw_true)
        ratio_cell = "absent" if self.dtw_true is None and self.outcome != "unevaluated" else num(self.ratio)
        return [self.seed, self.n, self.alpha, self.protocol, dtw_cell, self.outcome,
                num(self.estimate), ratio_cell, self.bits, f"{self.ms:.3f}"]


# ---------------------------------------------------------------------------
# instances


def random_sequence(space: MetricSpace, n: int, rng: np.random.Generator,
                    run_length: float = 1.0) -> Sequence:
    """Runs of geometric length (mean ``run_length``) with distinct neighbouring letters."""
    out = np.empty(n, dtype=np.int64)
    p = 1.0 / max(run_length, 1.0)
    i, prev = 0, -1
    while i < n:
        c = int(rng.integers(0, space.size))
        if space.size > 1:
            while c == prev:
                c = int(rng.integers(0, space.size))
        k = min(int(rng.geometric(p)), n - i)
        out[i:i + k] = c
        i, prev = i + k, c
    return Sequence(out, space, check=False)


def planted_near(x: Sequence, k: int, rng: np.random.Generator) -> Sequence:
    """``k`` run extensions then ``k`` substitutions."""
    y = x.letters.tolist()
    for _ in range(k):
        i = int(rng.integers(0, len(y)))
        y.insert(i, y[i])
    for _ in range(k):
        i = int(rng.integers(0, len(y)))
        y[i] = int(rng.integers(0, x.space.size))
    return x.with_letters(y)


def farthest(space: MetricSpace) -> np.ndarray:
    ids = np.arange(space.size)
    if space.size <= 4096:
        return np.argmax(space.pairwise(ids, ids), axis=1)
    # large spaces: the farther of the two extreme ids is good enough for a planted instance
    ends = np.array([0, space.size - 1])
    d = space.pairwise(ids, ends)
    return ends[np.argmax(d, axis=1)]


def planted_far(x: Sequence, rng: np.random.Generator) -> Sequence:
    """Every other letter replaced by a point at maximum distance from it."""
    far = farthest(x.space)
    y = x.letters.copy()
    start = int(rng.integers(0, 2))
    y[start::2] = far[y[start::2]]
    return x.with_letters(y)


def gadget_instance(family: str, n: int, alpha: int, rng: np.random.Generator):
    if family == "index":
        t = max(1, n // (2 * alpha + 1))
        bits = rng.integers(0, 2, t)
        return gadgets.gen_index_gadget(bits, int(rng.integers(1, t + 1)), alpha)
    if family == "linear":
        t = max(1, n // 4)
        return gadgets.gen_linear_gadget(rng.integers(0, 2, t), int(rng.integers(1, t + 1)))
    if family == "int":
        m = max(2, min(alpha, 4))
        k = max(1, n // (3 * alpha + m))
        xs = rng.integers(1, m, k)
        return gadgets.gen_int_gadget(xs, int(rng.integers(1, k + 1)), int(rng.integers(1, m)),
                                      alpha, m)
    if family == "set":
        a = alpha if n % alpha == 0 else 1
        size = max(4 * n // a, 8)
        S = rng.choice(size, n // a, replace=False)
        pick = int(S[0]) if rng.random() < 0.5 else int(rng.integers(0, size))
        return gadgets.gen_set_gadget(S, pick, a, n, size=size)
    raise ConfigError(f"unknown gadget family {family!r}")


def make_instance(cfg: ExperimentConfig, space: MetricSpace, n: int, alpha: int,
                  rng: np.random.Generator) -> tuple[Sequence, Sequence]:
    dist = cfg.distribution
    if dist.startswith("gadget-"):
        g = gadget_instance(dist.split("-", 1)[1], n, alpha, rng)
        return g.x, g.y
    x = random_sequence(space, n, rng, cfg.run_length)
    if dist == "identical":
        return x, x
    if dist == "random":
        return x, random_sequence(space, n, rng, cfg.run_length)
    if dist == "planted-far":
        return x, planted_far(x, rng)
    k = cfg.edits if cfg.edits is not None else max(1, n // (4 * alpha))
    return x, planted_near(x, k, rng)


# ---------------------------------------------------------------------------
# trials


def trial_seed(master: int, n: int, alpha: int, j: int) -> int:
    return derive_seed(master, f"trial:{n}:{alpha}:{j}")


def _outcome_fields(out):
    if out is None:
        return "exceeded", None
    if out is FAIL:
        return "fail", None
    if isinstance(out, GapBit):
        return f"gap{out.b}", out.b
    if isinstance(out, Estimate):
        return "estimate", out.t
    raise TypeError(f"unexpected outcome {out!r}")


def run_trial(cfg: ExperimentConfig, space: MetricSpace, n: int, alpha: int, seed: int) -> TrialRecord:
    rng = np.random.default_rng(derive_seed(seed, "instance"))
    x, y = make_instance(cfg, space, n, alpha, rng)
    pcfg = cfg.protocol_config()
    t0 = time.perf_counter()
    msg = alice(cfg.protocol, x.space, x, alpha, cfg.delta, seed, pcfg, r=cfg.r)
    if cfg.bits_only:
        ms = (time.perf_counter() - t0) * 1e3
        return TrialRecord(seed, n, alpha, cfg.protocol, None, "unevaluated", None, None,
                           msg.total_bits, ms)
    try:
        out = bob(msg, y.space, y, pcfg)
    except ResourceExceeded:
        # one decoder blow-up should not abort a sweep; the row records it as a miss
        out = None
    ms = (time.perf_counter() - t0) * 1e3
    outcome, est = _outcome_fields(out)
    truth = dtw(x, y) if max(len(x), len(y)) <= ORACLE_MAX else None
    ratio = None
    if truth is not None:
        if outcome.startswith("gap"):
            ratio = float(truth) / (len(x) * cfg.r)
        elif outcome == "estimate":
            ratio = ("zero" if est == 0 else "inf") if truth == 0 else float(est) / float(truth)
    return TrialRecord(seed, n, alpha, cfg.protocol, truth, outcome, est, ratio, msg.total_bits, ms)


def _job(args):
    cfg, space, n, alpha, seed = args
    return run_trial(cfg, space, n, alpha, seed)


def run_experiment(cfg: ExperimentConfig, space: MetricSpace | None = None):
    """Run every (n, alpha, trial) cell; returns ``(records, summary)`` and writes the CSV if asked."""
    space = cfg.space() if space is None else space
    jobs = [(cfg, space, n, a, trial_seed(cfg.seed, n, a, j))
            for n in cfg.n for a in cfg.alpha for j in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_job, jobs))  # map keeps submission order
    else:
        records = [_job(j) for j in jobs]
    if cfg.output:
        write_csv(cfg.output, records, cfg)
    return records, summarize(records)


# ---------------------------------------------------------------------------
# CSV and summaries


def csv_preamble(cfg: ExperimentConfig) -> str:
    return (f"# dtwsketch experiment seed={cfg.seed} seed_source={cfg.seed_source} "
            f"protocol={cfg.protocol} metric={cfg.metric!r} distribution={cfg.distribution} "
            f"delta={cfg.delta} forced={int(cfg.forced)} de_scheme={cfg.de_scheme}")


def write_csv(path, records, cfg: ExperimentConfig | None = None):
    with open(path, "w", newline="") as fh:
        if cfg is not None:
            fh.write(csv_preamble(cfg) + "\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


def read_csv(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if rows and list(rows[0].keys()) != CSV_COLUMNS:
        raise FormatError(f"{path}: unexpected CSV columns")
    out = []
    for r in rows:
        def num(v):
            if v in ("", "absent"):
                return None
            return float(v)

        ratio = r["ratio"]
        if ratio not in ("zero", "inf", "absent", ""):
            ratio = float(ratio)
        elif ratio in ("absent", ""):
            ratio = None
        out.append(TrialRecord(int(r["seed"]), int(r["n"]), int(r["alpha"]), r["protocol"],
                               num(r["dtw_true"]), r["outcome"], num(r["estimate"]), ratio,
                               int(r["bits"]), float(r["ms"])))
    return out


def loglog_slope(xs, ys) -> float | None:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(set(xs.tolist())) < 2:
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def summarize(records) -> dict:
    judged = [r for r in records if r.success is not None]
    ratios = [float(r.ratio) for r in judged
              if r.outcome == "estimate" and r.ratio not in ("zero", "inf") and r.ratio is not None]
    cells: dict[tuple[int, int], list[int]] = {}
    for r in records:
        cells.setdefault((r.n, r.alpha), []).append(r.bits)
    keys = sorted(cells)
    mean_bits = {k: float(np.mean(v)) for k, v in cells.items()}
    summary = {
        "trials": len(records),
        "judged": len(judged),
        "skipped": len(records) - len(judged),
        "success_rate": (sum(r.success for r in judged) / len(judged)) if judged else None,
        "mean_ratio": float(np.mean(ratios)) if ratios else None,
        "max_ratio": float(np.max(ratios)) if ratios else None,
        "mean_bits": float(np.mean([r.bits for r in records])) if records else None,
        "mean_ms": float(np.mean([r.ms for r in records])) if records else None,
        "bits_by_cell": {f"{n}/{a}": mean_bits[(n, a)] for n, a in keys},
        "slope_bits_vs_n_over_alpha": loglog_slope([n / a for n, a in keys],
                                                   [mean_bits[k] for k in keys]),
    }
    alphas = {a for _, a in keys}
    ns = {n for n, _ in keys}
    if len(alphas) == 1 and len(ns) > 1:
        summary["slope_bits_vs_n"] = loglog_slope([n for n, _ in keys], [mean_bits[k] for k in keys])
    if len(ns) == 1 and len(alphas) > 1:
        summary["slope_bits_vs_inv_alpha"] = loglog_slope([1 / a for _, a in keys],
                                                          [mean_bits[k] for k in keys])
    return summary


def format_summary(summary: dict) -> str:
    lines = []
    for k, v in summary.items():
        if isinstance(v, dict):
            v = ", ".join(f"{kk}={vv:.0f}" for kk, vv in v.items())
        elif isinstance(v, float):
            v = f"{v:.4g}"
        lines.append(f"{k}: {v}")
    return "\n".join(lines)
