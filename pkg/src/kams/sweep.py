"""
Grid sweep: packet reference, fitted burst law, fluid model, comparison.

Each grid point draws its seeds from ``(master seed, buffer index, rtt
index, replication)`` alone, so results do not depend on execution order
or on the number of worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    REPORT_COLUMNS,
    ComparisonReport,
    EmpiricalCdf,
    correction_factor,
    corrected_error,
    full_buffer_probability,
    loss_overflow_ratio,
    multiplicative_error,
    nrmse,
    spikiness,
    trace_cdf,
)
from .config import provenance_header
from .distributions import Constant, ExponentialLaw, fit_truncated_normal
from .errors import FitDiverged, KamsError, NoQualifyingPoints, TooFewBins
from .fluid import run_kams
from .packet import run_packet_sim

log = logging.getLogger(__name__)

CONTOUR_METRICS = (
    "nrmse", "nrmse_exponential", "p_full_model", "p_full_ref", "mult_err",
    "corrected_mult_err", "spikiness", "loss_overflow_ratio",
)


def point_seeds(master, i_buffer, i_rtt, rep=0):
    """Packet, fluid and exponential-fluid seeds of one grid point."""
    ss = np.random.SeedSequence([int(master), int(i_buffer), int(i_rtt), int(rep)])
    return [int(s) for s in ss.generate_state(3, dtype=np.uint32)]


@dataclass
class PointResult:
    i_buffer: int
    i_rtt: int
    rep: int
    report: ComparisonReport
    cdf_model: EmpiricalCdf = None
    cdf_ref: EmpiricalCdf = None
    cdf_exponential: EmpiricalCdf = None
    extras: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.i_buffer, self.i_rtt, self.rep)


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw), None
    except (KamsError, ZeroDivisionError, FloatingPointError) as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"


def _nrmse(model, ref):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = nrmse(model, ref)
    # an all-zero reference above the cut makes the statistic 0/0
    return v if math.isfinite(v) else math.nan


def compare_point(spec, buffer_size, rtt, seeds, keep_runs=False):
    """Run both engines at one grid point and build its report.

    Returns ``(report, cdfs, runs)``; ``cdfs`` maps ``model``, ``ref`` and
    ``exponential`` to their :class:`EmpiricalCdf`, and ``runs`` holds the
    raw engine outputs when ``keep_runs`` is set.
    """
    wf = spec.base.warmup_fraction
    pk = run_packet_sim(spec.packet_config(buffer_size, rtt, seeds[0]))
    notes = []
    law = spec.fixed_law()
    if law is None:
        try:
            law = fit_truncated_normal(pk.cwnd_pmf)
        except (TooFewBins, FitDiverged) as exc:
            # e.g. an uncongested link where every window sits at the cap
            law = Constant(max(pk.mean_cwnd, 1.0))
            notes.append(f"{type(exc).__name__}: {exc}; constant bursts of {law.value:.6g} used")
    fl = run_kams(spec.kams_config(buffer_size, rtt, law, seeds[1]))
    fl_exp = run_kams(spec.kams_config(buffer_size, rtt, ExponentialLaw(law.mean()), seeds[2]))

    ref = trace_cdf(pk.trace, wf)
    model = trace_cdf(fl, wf)
    model_exp = trace_cdf(fl_exp, wf)
    p_model = full_buffer_probability(fl, warmup_fraction=wf)
    p_ref = full_buffer_probability(pk.trace, warmup_fraction=wf)

    spk, err = _safe(spikiness, pk.losses)
    if err:
        notes.append(err)
    if pk.dropped_window == 0 and p_ref > 0:
        ratio = 0.0
    else:
        ratio, err = _safe(loss_overflow_ratio, pk.loss_rate, p_ref)
        if err:
            notes.append(err)

    report = ComparisonReport(
        rtt_s=float(rtt),
        buffer_pkts=int(buffer_size),
        nrmse=_nrmse(model, ref),
        p_full_model=p_model,
        p_full_ref=p_ref,
        mult_err=multiplicative_error(p_model, p_ref),
        corrected_mult_err=math.nan,
        spikiness=spk,
        loss_overflow_ratio=ratio,
        loss_rate=pk.loss_rate,
        fitted_mu=getattr(law, "mu", math.nan),
        fitted_sigma=getattr(law, "sigma", math.nan),
        nrmse_exponential=_nrmse(model_exp, ref),
        degenerate=bool(notes) or p_ref == 0 or math.isnan(spk),
        error="; ".join(notes),
    )
    cdfs = {"model": model, "ref": ref, "exponential": model_exp}
    runs = {"packet": pk, "fluid": fl, "fluid_exponential": fl_exp, "law": law} if keep_runs else None
    return report, cdfs, runs


def _run_one(args):
    spec, ib, ir, rep = args
    b = spec.buffer_values[ib]
    r = spec.rtt_values[ir]
    try:
        report, cdfs, _ = compare_point(spec, b, r, point_seeds(spec.seed, ib, ir, rep))
    except (KamsError, ValueError, ArithmeticError) as exc:
        # a failed point is recorded and the sweep carries on
        report = ComparisonReport(float(r), int(b), *([math.nan] * 7), degenerate=True,
                                  error=f"{type(exc).__name__}: {exc}")
        return PointResult(ib, ir, rep, report)
    return PointResult(ib, ir, rep, report, cdfs["model"], cdfs["ref"], cdfs["exponential"])


def apply_correction(reports, rtt_threshold=0.1):
    """Fill ``corrected_mult_err`` from the sweep-wide correction factor.

    Points with a zero reference probability cannot enter the average and
    are skipped.  Returns the factor (NaN if no point qualifies).
    """
    usable = [r for r in reports if r.p_full_ref > 0 and np.isfinite(r.p_full_model)]
    try:
        factor = correction_factor([(r.p_full_model, r.p_full_ref) for r in usable],
                                   [r.rtt_s for r in usable], rtt_threshold)
    except NoQualifyingPoints:
        log.warning("no point with rtt >= %s and a nonzero reference; no correction", rtt_threshold)
        return math.nan
    for r in reports:
        r.corrected_mult_err = corrected_error(r.p_full_model, r.p_full_ref, factor)
    return factor


@dataclass
class SweepResult:
    spec: object
    points: list
    reports: list
    factor: float

    def report_at(self, buffer_size, rtt):
        for r in self.reports:
            if r.buffer_pkts == buffer_size and abs(r.rtt_s - rtt) < 1e-12:
                return r
        raise KeyError((buffer_size, rtt))


def _average(reports):
    """Mean of the numeric fields of replicated reports of one grid point."""
    if len(reports) == 1:
        return replace(reports[0])
    out = replace(reports[0])
    for name in ComparisonReport.field_names():
        vals = [getattr(r, name) for r in reports]
        if isinstance(vals[0], bool):
            setattr(out, name, any(vals))
        elif isinstance(vals[0], str):
            setattr(out, name, "; ".join(v for v in vals if v))
        elif name not in ("rtt_s", "buffer_pkts"):
            setattr(out, name, float(np.mean(vals)))
    return out


def run_sweep(spec, workers=None, progress=None):
    """Run every grid point (and replication) of ``spec``.

    Replications of a point are averaged into one report; the correction
    factor is then computed over the averaged reports.
    """
    workers = spec.workers if workers is None else workers
    jobs = [(spec, ib, ir, rep) for ib, ir, _, _ in spec.grid() for rep in range(spec.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = []
            for p in pool.map(_run_one, jobs):
                points.append(p)
                if progress:
                    progress(p)
    else:
        points = []
        for job in jobs:
            p = _run_one(job)
            points.append(p)
            if progress:
                progress(p)
    points.sort(key=lambda p: p.key)

    reports = []
    for ib, ir, _, _ in spec.grid():
        reps = [p.report for p in points if p.i_buffer == ib and p.i_rtt == ir]
        reports.append(_average(reps))
    factor = apply_correction(reports)
    return SweepResult(spec, points, reports, factor)


# -- output -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "nan"
    return str(v)


def write_report_csv(reports, path, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for r in reports:
            fh.write(",".join(_fmt(v) for v in r.row()) + "\n")
    return Path(path)


def write_details_csv(reports, path, header=None):
    names = ComparisonReport.field_names()
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write(",".join(names) + "\n")
        for r in reports:
            d = r.as_dict()
            fh.write(",".join(_fmt(d[n]).replace(",", ";") for n in names) + "\n")
    return Path(path)


def write_contour_csv(reports, path, header=None):
    """Long format ``rtt_s,buffer_pkts,metric,value``, ready for contouring."""
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("rtt_s,buffer_pkts,metric,value\n")
        for metric in CONTOUR_METRICS:
            for r in reports:
                fh.write(f"{_fmt(r.rtt_s)},{r.buffer_pkts},{metric},{_fmt(getattr(r, metric))}\n")
    return Path(path)


def write_cdf_csv(cdfs, path, header=None):
    names = list(cdfs)
    first = cdfs[names[0]]
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        fh.write("queue_pkts," + ",".join(f"cdf_{n}" for n in names) + "\n")
        for i, b in enumerate(first.bins.tolist()):
            fh.write(f"{b}," + ",".join(_fmt(float(cdfs[n].values[i])) for n in names) + "\n")
    return Path(path)


def write_sweep(result, out_dir):
    """Report, per-point detail and contour files; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = provenance_header(result.spec, correction_factor=_fmt(result.factor))
    return {
        "report": write_report_csv(result.reports, out / "report.csv", header),
        "details": write_details_csv(result.reports, out / "details.csv", header),
        "contour": write_contour_csv(result.reports, out / "contour.csv", header),
    }
