"""
Command-line entry point.

    kams kams run     one fluid run at a grid point
    kams packet run   one packet-level reference run
    kams ams curve    exact overflow curve for exponential sources
    kams compare      both engines at one point plus the comparison report
    kams sweep        the whole grid

Every command accepts ``--config``, ``--seed``, ``--out-dir`` and
``--preset``.  Exit status: 0 success, 1 usage or parse error, 2 invalid
configuration, 3 failure while running.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sweep as sw
from .ams import ExpOnOffSystem, ams_overflow_probability
from .analysis import time_weighted_cdf, trace_cdf
from .config import PRESETS, parse_config, preset, provenance_header
from .distributions import fit_truncated_normal
from .errors import InvalidParameter, KamsError, ParseError, ValidationError
from .fluid import run_kams
from .packet import run_packet_sim

log = logging.getLogger("kams")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for invalid configs
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _common(p, point=False):
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
    p.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--preset", choices=PRESETS, help="base scale; a preset named in --config wins")
    p.add_argument("--duration", type=float, help="simulated seconds (overrides the configuration)")
    p.add_argument("-v", "--verbose", action="store_true")
    if point:
        p.add_argument("--buffer", type=int, help="buffer size in packets (default: first grid value)")
        p.add_argument("--rtt", type=float, help="round-trip time in seconds (default: first grid value)")


def build_parser():
    parser = _Parser(prog="kams", description="Fluid on-off queue model versus a packet-level AIMD reference.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    kams = sub.add_parser("kams", help="fluid model").add_subparsers(dest="action", required=True,
                                                                     parser_class=_Parser)
    _common(kams.add_parser("run", help="simulate the fluid model at one point"), point=True)

    packet = sub.add_parser("packet", help="packet-level reference").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    _common(packet.add_parser("run", help="simulate the packet reference at one point"), point=True)

    ams = sub.add_parser("ams", help="exponential on-off analytics").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    _common(ams.add_parser("curve", help="write x,overflow_prob"))

    _common(sub.add_parser("compare", help="both engines and the report at one point"), point=True)

    p = sub.add_parser("sweep", help="run the whole grid")
    _common(p)
    p.add_argument("--workers", type=int, help="worker processes (overrides the configuration)")
    return parser


def resolve_spec(args):
    if args.config is not None:
        if not args.config.exists():
            raise _UsageError(f"config file not found: {args.config}")
        spec = parse_config(args.config, args.preset)
    else:
        spec = preset(args.preset or "desk")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError([f"seed must lie in [0, 2^64), got {args.seed}"])
        spec = replace(spec, seed=args.seed)
    if args.duration is not None:
        if not args.duration > 0:
            raise ValidationError([f"duration must be > 0, got {args.duration}"])
        spec = replace(spec, base=replace(spec.base, sim_duration=args.duration))
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ValidationError([f"workers must be >= 1, got {args.workers}"])
        spec = replace(spec, workers=args.workers)
    return spec


def _point(spec, args):
    b = spec.buffer_values[0] if args.buffer is None else args.buffer
    r = spec.rtt_values[0] if args.rtt is None else args.rtt
    if b < 1 or not r > 0:
        raise ValidationError([f"buffer must be >= 1 and rtt > 0, got {b}, {r}"])
    # points on the grid reuse the sweep's seeds
    ib = spec.buffer_values.index(b) if b in spec.buffer_values else 10_000 + b
    ir = next((i for i, v in enumerate(spec.rtt_values) if abs(v - r) < 1e-12),
              10_000 + int(round(r * 1e6)))
    return b, r, sw.point_seeds(spec.seed, ib, ir)


def cmd_kams_run(spec, args, out):
    b, r, seeds = _point(spec, args)
    law = spec.fixed_law()
    if law is None:
        log.info("fitting the burst-size law to a packet run at B=%s rtt=%s", b, r)
        law = fit_truncated_normal(run_packet_sim(spec.packet_config(b, r, seeds[0])).cwnd_pmf)
    cfg = spec.kams_config(b, r, law, seeds[1])
    trace = run_kams(cfg)
    header = provenance_header(spec, command="kams run", buffer_pkts=b, rtt_s=r, cwnd_law=repr(law))
    trace.to_csv(out / "kams_trace.csv", out / "kams_overflow.csv", header=header)
    sw.write_cdf_csv({"samples": trace_cdf(trace, cfg.warmup_fraction),
                      "time_weighted": time_weighted_cdf(trace, cfg.warmup_fraction)},
                     out / "kams_cdf.csv", header)
    print(f"kams run: B={b} rtt={r} law={law!r} samples={len(trace)} "
          f"discarded={trace.discarded_fluid:.6g} pkts")


def cmd_packet_run(spec, args, out):
    b, r, seeds = _point(spec, args)
    res = run_packet_sim(spec.packet_config(b, r, seeds[0]))
    header = provenance_header(spec, command="packet run", buffer_pkts=b, rtt_s=r)
    res.trace.to_csv(out / "packet_trace.csv", header=header)
    res.losses.to_csv(out / "packet_losses.csv", header=header)
    with open(out / "packet_cwnd.csv", "w") as fh:
        fh.write(f"# {header}\ncwnd_pkts,count\n")
        for k, c in sorted(res.cwnd_pmf.counts.items()):
            fh.write(f"{k},{c}\n")
    print(f"packet run: B={b} rtt={r} sent={res.sent} dropped={res.dropped} "
          f"loss_rate={res.loss_rate:.4g} mean_cwnd={res.mean_cwnd:.3f}")


def cmd_ams_curve(spec, args, out):
    a = spec.ams
    sys_ = ExpOnOffSystem(a.n_sources, a.peak_rate, a.service_rate, a.mean_on, a.mean_off)
    x = np.linspace(0.0, a.x_max, a.n_points)
    p = ams_overflow_probability(sys_, x)
    header = provenance_header(spec, command="ams curve")
    with open(out / "ams_curve.csv", "w") as fh:
        fh.write(f"# {header}\nx,overflow_prob\n")
        for xi, pi in zip(x.tolist(), np.atleast_1d(p).tolist()):
            fh.write(f"{xi!r},{pi!r}\n")
    print(f"ams curve: P(Q>0)={float(np.atleast_1d(p)[0]):.6g} over {a.n_points} points")


def cmd_compare(spec, args, out):
    b, r, seeds = _point(spec, args)
    report, cdfs, _ = sw.compare_point(spec, b, r, seeds)
    factor = sw.apply_correction([report])
    header = provenance_header(spec, command="compare", buffer_pkts=b, rtt_s=r,
                               correction_factor=sw._fmt(factor))
    sw.write_report_csv([report], out / "report.csv", header)
    sw.write_details_csv([report], out / "details.csv", header)
    sw.write_cdf_csv(cdfs, out / "cdf.csv", header)
    print(f"compare: B={b} rtt={r} nrmse={report.nrmse:.4g} "
          f"p_full model/ref={report.p_full_model:.4g}/{report.p_full_ref:.4g} "
          f"spikiness={report.spikiness:.4g}")


def cmd_sweep(spec, args, out):
    t0 = time.perf_counter()
    n = spec.grid_size * spec.replications

    def progress(p):
        r = p.report
        log.info("B=%s rtt=%s rep=%s nrmse=%.4g %s", r.buffer_pkts, r.rtt_s, p.rep, r.nrmse, r.error)

    result = sw.run_sweep(spec, progress=progress)
    paths = sw.write_sweep(result, out)
    failed = sum(1 for r in result.reports if r.error and np.isnan(r.nrmse))
    print(f"sweep: {n} runs in {time.perf_counter() - t0:.1f} s, correction factor "
          f"{result.factor:.4g}, {failed} failed; wrote {', '.join(str(p) for p in paths.values())}")


COMMANDS = {
    ("kams", "run"): cmd_kams_run,
    ("packet", "run"): cmd_packet_run,
    ("ams", "curve"): cmd_ams_curve,
    ("compare", None): cmd_compare,
    ("sweep", None): cmd_sweep,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = resolve_spec(args)
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[(args.command, getattr(args, "action", None))](spec, args, out)
    except _UsageError as exc:
        print(f"kams: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"kams: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print("kams: invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidParameter as exc:
        print(f"kams: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (KamsError, ArithmeticError, OSError, RuntimeError) as exc:
        print(f"kams: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
