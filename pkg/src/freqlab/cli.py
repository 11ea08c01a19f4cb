"""Command-line interface: run, sweep, report, plot, selftest."""

import argparse
import os
import sys

from . import harness
from .figures import render_figure


def _add_common(p):
    p.add_argument("--grid-n", type=int, default=None, help="spatial dimension (1 or 2)")
    p.add_argument("--grid-size", type=int, default=None, help="grid points per axis")
    p.add_argument("--k0", type=float, default=None, help="epsilon rule constant K0")
    p.add_argument("--out", default=None, help="output directory (or FREQLAB_OUT)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="consistency tolerance")


def _scenario(args):
    overrides = dict(grid_n=args.grid_n, grid_size=args.grid_size, k0=args.k0,
                     seed=args.seed, tol=args.tol)
    return harness.scenario_from_config(args.config, **overrides)


def cmd_run(args):
    s = _scenario(args)
    out = harness.output_dir(args.out)
    rec = harness.run_scenario(s, keep_arrays=True)
    harness.write_records(os.path.join(out, f"record_{s.hash}.csv"), [rec])
    print(f"scenario {s.hash}: status={rec.status} consistent={int(rec.consistent)}")
    print(f"  epsilon={rec.epsilon:.6g} q0={rec.q0:.6g} x_eps={rec.x_eps}")
    print(f"  d_cylinder={rec.d_cylinder:.4g} m_gaussian={rec.m_gaussian:.4g} "
          f"m_qbar={rec.m_qbar} dist_sp={rec.dist_sp}")
    if rec.trace is not None:
        harness.write_trace_csv(os.path.join(out, f"trace_{s.hash}.csv"), rec.trace)
        for kind in ("qbar_vs_tau", "phi_loglog"):
            text = harness.emit_plot_data(rec.trace, kind)
            base = os.path.join(out, f"{kind}_{s.hash}")
            with open(base + ".txt", "w") as fh:
                fh.write(text)
            render_figure(text, kind, base + ".png")
    return 0 if rec.status.startswith(("ok", "partial")) else 1


def cmd_sweep(args):
    s = _scenario(args)
    out = harness.output_dir(args.out)
    path = os.path.join(out, "records.csv")
    m0s = [float(v) for v in args.m0.split(",")] if args.m0 else [s.m0]
    m1s = [float(v) for v in args.m1.split(",")] if args.m1 else [s.m1]
    recs = harness.sweep(s, m0s, m1s, replicates=args.replicates, out_path=path)
    done = harness.read_records(path) if os.path.exists(path) else []
    print(f"sweep complete: {len(recs)} new runs, {len(done)} records in {path}")
    return 0


def cmd_report(args):
    records = harness.read_records(args.records)
    report = harness.fit_bound_exponents(records)
    text = harness.format_exponent_report(report)
    print(text, end="")
    out = harness.output_dir(args.out)
    with open(os.path.join(out, "exponent_report.txt"), "w") as fh:
        fh.write(text)
    series = harness.emit_plot_data(records, "order_vs_bound")
    base = os.path.join(out, "order_vs_bound")
    with open(base + ".txt", "w") as fh:
        fh.write(series)
    render_figure(series, "order_vs_bound", base + ".png")
    return 0


def cmd_plot(args):
    out = harness.output_dir(args.out)
    if args.kind == "order_vs_bound":
        source = harness.read_records(args.input)
    else:
        source = harness.read_trace_csv(args.input)
    text = harness.emit_plot_data(source, args.kind)
    base = os.path.join(out, args.kind)
    with open(base + ".txt", "w") as fh:
        fh.write(text)
    render_figure(text, args.kind, base + ".png")
    print(f"wrote {base}.txt and {base}.png")
    return 0


def cmd_selftest(args):
    """Caloric calibration: known-order data must be recovered by all estimators."""
    from dataclasses import replace

    base = harness.Scenario(grid_n=args.grid_n or 1, grid_size=args.grid_size or 512,
                            k0=args.k0 or 1.0)
    failures = 0
    for d in range(5):
        s = replace(base, initial=f"caloric:{d}")
        rec = harness.run_scenario(s)
        ok = (rec.status == "ok" and rec.consistent
              and abs(rec.d_cylinder - d) < 0.1 and abs(rec.m_gaussian - d) < 0.1
              and rec.m_qbar == d)
        print(f"caloric:{d} -> d_cyl={rec.d_cylinder:.3f} m_phi={rec.m_gaussian:.3f} "
              f"m_qbar={rec.m_qbar} [{'PASS' if ok else 'FAIL'}]")
        failures += 0 if ok else 1
    return 1 if failures else 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="freqlab",
                                 description="Frequency-function laboratory for parabolic equations")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario from a config file")
    p.add_argument("config")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep a scenario over M0/M1 grids")
    p.add_argument("config")
    p.add_argument("--m0", default=None, help="comma-separated M0 values")
    p.add_argument("--m1", default=None, help="comma-separated M1 values")
    p.add_argument("--replicates", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="fit bound exponents from a records CSV")
    p.add_argument("records")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="emit plot data and render a figure")
    p.add_argument("input", help="records.csv or trace.csv")
    p.add_argument("--kind", required=True, choices=harness.PLOT_KINDS)
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the caloric calibration suite")
    _add_common(p)
    p.set_defaults(func=cmd_selftest)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
