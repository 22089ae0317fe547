"""Seeded Monte-Carlo harness shared by the CLI and the acceptance tests."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines
from .attribution import ConversionStream
from .mechanism import AdsBpcConfig, run_adsbpc
from .scales import init_privacy_constrained, init_utility_constrained
from .svt import SvtConfig
from .synth import GLOBAL_CAP, Family, SynthSpec, generate
from .workload import AnswerSet, QueryWorkload, prefix_sum_workload, sliding_window_workload, weighted_last_gamma, wrmse

METHODS = ("adsbpc", "ipa", "bin", "stream", "umm", "mmbpc")
SCENARIOS = ("prefix_wrmse", "window_maxvar")
RESULT_FIELDS = ("method", "dataset", "scenario", "rho", "n", "trial", "error")


@dataclass
class ExperimentConfig:
    """Run parameters.  Every field is a JSON key of the same name."""

    rho_total: float = 1.0
    split: tuple = (0.7, 0.15, 0.15)
    l: int = 7
    p: float = 0.99
    lambda_cap: int | None = None  # None: per-family default
    svt: dict = field(default_factory=lambda: {"T_up": 50.0, "T_down": 50.0, "s_up": 1.3, "s_down": 0.8, "k_max": 7})
    window_K: int = 7
    gamma_last: float = 7.0
    seed: int = 0
    stream_svt_share: float = 0.15
    stream_threshold: float = 50.0
    stream_k_max: int = 10

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in raw.items() if k != "svt"})
        if "svt" in raw:
            bad = set(raw["svt"]) - set(cfg.svt)
            if bad:
                raise ValueError(f"unknown svt keys: {sorted(bad)}")
            cfg.svt = {**cfg.svt, **raw["svt"]}
        return cfg

    def to_json(self) -> str:
        d = asdict(self)
        d["split"] = list(self.split)
        return json.dumps(d, indent=2)

    def adsbpc(self, lambda_cap: int, seed: int) -> AdsBpcConfig:
        return AdsBpcConfig(
            rho_total=self.rho_total,
            split=tuple(self.split),
            l=self.l,
            p=self.p,
            lambda_cap=lambda_cap,
            svt=SvtConfig(epsilon=1.0, l=self.l, **self.svt),
            seed=seed,
        )


def default_lambda(family: Family | None) -> int:
    # wider cap for families whose per-day counts run higher
    if family in (Family.NORMAL, Family.UNIFORM):
        return 20
    return 10


@dataclass
class Dataset:
    name: str
    stream: ConversionStream
    gs: int
    family: Family | None = None

    def warm(self) -> "Dataset":
        # fill the lazily computed columns once, before worker threads share the stream
        s = self.stream
        s.day_rank, s.user_rank, s.entry_conv, s._day_counts
        return self


def synthetic_dataset(family, n_users: int, n_publishers: int, n_days: int, seed: int) -> Dataset:
    family = Family(family)
    stream = generate(SynthSpec(family, n_users, n_publishers, n_days, seed))
    return Dataset(family.value, stream, GLOBAL_CAP[family], family).warm()


def scenario_workload(scenario: str, n: int, cfg: ExperimentConfig) -> QueryWorkload:
    if scenario == "prefix_wrmse":
        return prefix_sum_workload(n, weighted_last_gamma(n, cfg.gamma_last))
    if scenario == "window_maxvar":
        return sliding_window_workload(n, cfg.window_K)
    raise ValueError(f"unknown scenario {scenario!r}")


def scale_plan(scenario: str, workload: QueryWorkload, rho1: float):
    if scenario == "prefix_wrmse":
        return init_privacy_constrained(workload, rho1=rho1)
    # unit variance caps, then one common factor to spend rho1
    return init_utility_constrained(workload, v=np.ones(workload.m), rho1=rho1)


def run_method(method: str, data: Dataset, workload: QueryWorkload, scenario: str, cfg: ExperimentConfig, seed: int, plan=None):
    """Noisy workload answers of one method on one dataset, shape (m, publishers)."""
    s = data.stream
    lam = cfg.lambda_cap if cfg.lambda_cap is not None else default_lambda(data.family)
    gs_cfg = baselines.GlobalSensitivityConfig(data.gs, cfg.rho_total)
    if method == "adsbpc":
        ads = cfg.adsbpc(lam, seed)
        plan = plan if plan is not None else scale_plan(scenario, workload, ads.rho1)
        return run_adsbpc(s, workload, ads, plan=plan).answers
    if method == "mmbpc":
        return baselines.mmbpc(s, workload, cfg.adsbpc(lam, seed)).answers
    if method == "stream":
        scfg = baselines.StreamConfig(cfg.rho_total, cfg.stream_svt_share, cfg.stream_threshold, cfg.stream_k_max)
        return baselines.stream_mech(s, workload, scfg, seed=seed, gs=data.gs).answers
    X = s.globally_clipped_matrix(np.full(s.n_days, data.gs))
    if method == "ipa":
        return baselines.ipa(X, workload, gs_cfg, seed=seed).answers
    if method == "bin":
        return baselines.bin_tree(X, workload, gs_cfg, seed=seed).answers
    if method == "umm":
        return baselines.umm(X, workload, gs_cfg, seed=seed).answers
    raise ValueError(f"unknown method {method!r}")


def trial_error(scenario: str, ans: AnswerSet, workload: QueryWorkload) -> float:
    if scenario == "prefix_wrmse":
        return wrmse(ans, workload.gamma)
    # publisher columns are replicates; worst query of their mean squared error
    err2 = ans.errors**2
    return float(np.max(err2.reshape(err2.shape[0], -1).mean(axis=1)))


def worker_count() -> int:
    raw = os.environ.get("ADSDP_THREADS")
    if raw:
        return max(1, int(raw))
    return max(1, min(8, os.cpu_count() or 1))


@dataclass
class TrialResult:
    method: str
    dataset: str
    scenario: str
    rho: float
    n: int
    trial: int
    error: float
    sq_errors: np.ndarray = field(repr=False, default=None)

    def row(self) -> list:
        return [self.method, self.dataset, self.scenario, repr(float(self.rho)), self.n, self.trial, repr(self.error)]


def run_trials(methods, data: Dataset, scenario: str, cfg: ExperimentConfig, trials: int, threads: int | None = None):
    """All (method, trial) pairs; results come back ordered by method then trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = data.stream.n_days
    workload = scenario_workload(scenario, n, cfg)
    truth = workload.answer(data.stream.matrix())
    ads_plan = None
    if "adsbpc" in methods:
        ads_plan = scale_plan(scenario, workload, cfg.rho_total * cfg.split[0])

    def one(job):
        method, t = job
        seed = cfg.seed ^ t
        est = run_method(method, data, workload, scenario, cfg, seed, plan=ads_plan if method == "adsbpc" else None)
        ans = AnswerSet(est, truth)
        sq = (ans.errors**2).mean(axis=1)
        return TrialResult(method, data.name, scenario, cfg.rho_total, n, t, trial_error(scenario, ans, workload), sq)

    jobs = [(m, t) for m in methods for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads or worker_count()) as ex:
        return list(ex.map(one, jobs))


def summary_table(results) -> dict:
    """{method: summary error}; for window_maxvar, MSE is pooled over trials before the max."""
    out: dict = {}
    by_method: dict = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    for m, rs in by_method.items():
        if rs[0].scenario == "prefix_wrmse":
            out[m] = float(np.mean([r.error for r in rs]))
        else:
            out[m] = float(np.max(np.mean([r.sq_errors for r in rs], axis=0)))
    return out


def write_results(path, results) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in results:
            w.writerow(r.row())


def write_summary(path, results) -> dict:
    table = summary_table(results)
    first = {}
    for r in results:
        first.setdefault(r.method, r)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "dataset", "scenario", "rho", "n", "trials", "error"])
        for m, err in table.items():
            r = first[m]
            trials = sum(1 for x in results if x.method == m)
            w.writerow([m, r.dataset, r.scenario, repr(float(r.rho)), r.n, trials, repr(err)])
    return table
