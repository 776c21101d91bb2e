"""Benchmark harness: reconstruct sparse inputs, score synthesized views only, emit CSV."""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .lightfield import Epi, LightField4D, reconstruct_4d
from .metrics import SSIM_WINDOW, MetricReport, psnr, ssim
from .recon import ReconConfig, reconstruct_multi
from .suites import EpiCase, synthesized_rows

CSV_COLUMNS = ("case", "pipeline", "alpha_s", "psnr_mean", "ssim_mean", "runtime_ms")
PIPELINES = ("classical", "danet", "both", "oracle")


@dataclass
class BenchmarkCase:
    """A dense ground-truth light field; the sparse input is every ``alpha_s``-th view."""

    name: str
    dense: LightField4D
    alpha_s: int

    def sparse(self) -> LightField4D:
        a = self.alpha_s
        for n in (self.dense.views_s, self.dense.views_t):
            if n > 1 and (n - 1) % a:
                raise ValueError(f"case {self.name}: {n} views cannot be subsampled by {a}")
        return LightField4D(self.dense.samples[::a, ::a].copy(), self.dense.disparity_hint)

    def synthesized(self):
        """``(t, s)`` indices of views absent from the sparse input."""
        a = self.alpha_s
        T, S = self.dense.views_t, self.dense.views_s
        return [(t, s) for t in range(T) for s in range(S) if t % a or s % a]


@dataclass
class BenchmarkRow:
    case: str
    pipeline: str
    alpha_s: int
    report: MetricReport


def _epi_fn(pipeline: str, recon_cfg: ReconConfig, params) -> Callable[[Epi], Epi]:
    if pipeline == "classical":
        return lambda e: reconstruct_multi(e, recon_cfg)
    if pipeline == "danet":
        if params is None:
            raise ValueError("the danet pipeline needs trained parameters")
        from .danet import forward

        return lambda e: forward(params, e)
    raise ValueError(f"unknown pipeline {pipeline!r}")


def score_light_field(pred: LightField4D, case: BenchmarkCase) -> MetricReport:
    ps, ss = [], []
    for t, s in case.synthesized():
        p, g = pred.samples[t, s], case.dense.samples[t, s]
        ps.append(psnr(p, g))
        if min(g.shape) >= SSIM_WINDOW:
            ss.append(ssim(p, g))
    a = case.alpha_s
    excluded = [t * case.dense.views_s + s for t in range(0, case.dense.views_t, a)
                for s in range(0, case.dense.views_s, a)]
    return MetricReport(ps, ss, excluded)


def run_case(case: BenchmarkCase, pipeline: str, recon_cfg: ReconConfig, params=None,
             reconstruct: Optional[Callable[[LightField4D], LightField4D]] = None) -> MetricReport:
    """Reconstruct one case and score it. The ``oracle`` pipeline returns the ground truth."""
    t0 = time.perf_counter()
    sparse = case.sparse()
    if reconstruct is None and pipeline == "oracle":
        pred = case.dense.copy()
    elif reconstruct is None:
        fn = _epi_fn(pipeline, recon_cfg, params)
        pred = reconstruct_4d(sparse, fn, case.alpha_s)
    else:
        pred = reconstruct(sparse)
    if pred.samples.shape != case.dense.samples.shape:
        raise ValueError(f"case {case.name}: reconstruction shape {pred.samples.shape} "
                         f"differs from ground truth {case.dense.samples.shape}")
    report = score_light_field(pred, case)
    report.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return report


def benchmark(cases: Sequence[BenchmarkCase], pipeline: str = "classical", recon_cfg: Optional[ReconConfig] = None,
              params=None, threads: int = 1) -> List[BenchmarkRow]:
    """Score each case with one or both pipelines; rows come back in case order."""
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
    which = ["classical", "danet"] if pipeline == "both" else [pipeline]
    jobs = [(c, p) for c in cases for p in which]

    def one(job):
        c, p = job
        cfg = recon_cfg or ReconConfig(alpha_s=c.alpha_s)
        if cfg.alpha_s != c.alpha_s:
            cfg = ReconConfig(**{**cfg.__dict__, "alpha_s": c.alpha_s})
        return BenchmarkRow(c.name, p, c.alpha_s, run_case(c, p, cfg, params))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]


def score_epi_case(pred: np.ndarray, case: EpiCase) -> MetricReport:
    """Metrics on the synthesized rows of an EPI case, inside its scoring margin."""
    rows = synthesized_rows(case.dense.angular, case.alpha_s)
    U = case.dense.spatial
    sl = slice(case.margin, U - case.margin)
    p, g = pred[rows][:, sl], case.dense.samples[rows][:, sl]
    ss = [ssim(p, g)] if min(g.shape) >= SSIM_WINDOW else []
    return MetricReport([psnr(p, g)], ss, [int(i) for i in np.flatnonzero(~rows)])


def benchmark_epi_suite(cases: Sequence[EpiCase], recon_cfg: Optional[ReconConfig] = None,
                        pipeline: str = "classical", params=None, threads: int = 1) -> List[BenchmarkRow]:
    """Score EPI suite cases; rows come back in case order."""
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
    which = ["classical", "danet"] if pipeline == "both" else [pipeline]
    jobs = [(c, p) for c in cases for p in which]

    def one(job):
        case, p = job
        t0 = time.perf_counter()
        if p == "oracle":
            out = case.dense.samples
        else:
            base = recon_cfg or ReconConfig(alpha_s=case.alpha_s)
            cfg = ReconConfig(**{**base.__dict__, "alpha_s": case.alpha_s})
            out = _epi_fn(p, cfg, params)(case.sparse).samples
        rep = score_epi_case(out, case)
        rep.runtime_ms = 1000.0 * (time.perf_counter() - t0)
        return BenchmarkRow(case.name, p, case.alpha_s, rep)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]


def rows_csv(rows: Sequence[BenchmarkRow], timing: bool = False) -> str:
    """CSV with a fixed column order. ``runtime_ms`` stays empty unless ``timing`` is set,
    so repeated runs produce identical bytes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.case, r.pipeline, r.alpha_s, f"{r.report.psnr_mean:.6f}", f"{r.report.ssim_mean:.6f}",
                    f"{r.report.runtime_ms:.1f}" if timing else ""])
    return buf.getvalue()
