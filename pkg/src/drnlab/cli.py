"""drn-lab command-line interface.

Subcommands:
  compile         ReLU weight file -> circuit netlist
  verify          measure compiled-circuit deviations over a gamma sweep
  solve           compute steady states of a netlist for CSV inputs
  train           equilibrium-propagation training on an IDX dataset
  demo-universal  the |x| constructive-approximation demo
  stats           conductance summary of a netlist

The dataset root for `train` comes from --data-dir or the DRN_DATA_DIR
environment variable.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .compiler import CompileConfig, compile_relu_net, verify_compilation
from .data import DATA_DIR_ENV
from .errors import DrnError
from .experiment import ARCHS, ExperimentConfig, run_experiment
from .model import encode_input, load_netlist, save_netlist
from .relu import load_relu_net
from .solver import SolverConfig, solve_steady_state
from .universal import demo_universal
from .ep import conductance_stats


def _cmd_compile(args):
    net = load_relu_net(args.nn)
    params = compile_relu_net(net, CompileConfig(gamma=args.gamma))
    save_netlist(params, args.out)
    print(f"compiled {args.nn} (dims {net.dims}) at gamma={args.gamma} -> {args.out}")
    return 0


def _cmd_verify(args):
    net = load_relu_net(args.nn)
    gammas = [float(g) for g in args.gamma.split(",")]
    rng = np.random.default_rng(args.seed)
    xs = rng.uniform(-1.0, 1.0, size=(args.samples, net.dims[0]))
    rows = []
    for gamma in gammas:
        params = compile_relu_net(net, CompileConfig(gamma=gamma))
        report = verify_compilation(net, params, xs)
        for layer, (dev, defect) in enumerate(
                zip(report.hidden_dev, report.antisym_defect), start=1):
            rows.append((gamma, layer, dev, defect))
        rows.append((gamma, net.num_layers, report.output_dev, report.max_antisym_defect))
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["gamma", "layer", "max_dev", "antisym_defect"])
        for row in rows:
            writer.writerow([repr(row[0]), row[1], repr(row[2]), repr(row[3])])
    print(f"wrote {len(rows)} verification rows to {args.out}")
    return 0


def _cmd_solve(args):
    params = load_netlist(args.netlist)
    xs = np.loadtxt(args.input, delimiter=",", ndmin=2)
    if xs.shape[1] != params.num_inputs:
        print(f"error: input rows have {xs.shape[1]} values, "
              f"netlist expects {params.num_inputs}", file=sys.stderr)
        return 2
    config = SolverConfig(num_iterations=args.iters, certify=args.cert)
    result = solve_steady_state(params, encode_input(xs, params.gains[0]), config)
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        out_cols = [f"v_out_{k}" for k in range(params.widths[-1])]
        if args.cert:
            writer.writerow(out_cols + ["kcl_residual_max", "diode_feasible", "energy"])
            for b in range(xs.shape[0]):
                writer.writerow([repr(v) for v in result.state.output[b]]
                                + [repr(result.cert.kcl_residual_max),
                                   result.cert.diode_feasible,
                                   repr(float(result.cert.energy_value[b]))])
        else:
            writer.writerow(out_cols)
            for b in range(xs.shape[0]):
                writer.writerow([repr(v) for v in result.state.output[b]])
    print(f"solved {xs.shape[0]} inputs in {result.iterations} iterations "
          f"(last delta {result.last_delta:.3e}) -> {args.out}")
    return 0


def _cmd_train(args):
    lr = tuple(float(v) for v in args.lr.split(",")) if args.lr else None
    cfg = ExperimentConfig(
        dataset=args.dataset,
        arch=args.arch,
        epochs=args.epochs,
        seed=args.seed,
        out_dir=args.out,
        data_dir=args.data_dir,
        beta=args.beta,
        lr=lr,
        a0=args.a0,
        t_inference=args.iters,
        batch_size=args.batch_size,
        momentum=args.momentum,
        lr_decay=args.lr_decay,
    )
    metrics = run_experiment(cfg)
    if metrics.rows:
        last = metrics.rows[-1]
        print(f"epoch {last['epoch']}: train_err={last['train_err']:.4f} "
              f"test_err={last['test_err']:.4f}")
    print(f"artifacts in {cfg.out_dir}")
    return 0


def _cmd_demo_universal(args):
    rows = demo_universal(args.out, grid_points=args.grid)
    print(f"{'gamma':>10} {'max_dev':>12} {'antisym':>12} {'dev@0':>12}")
    for row in rows:
        print(f"{row.gamma:>10.0e} {row.max_output_dev:>12.3e} "
              f"{row.antisym_defect:>12.3e} {row.dev_at_zero:>12.3e}")
    return 0


def _cmd_stats(args):
    params = load_netlist(args.netlist)
    stats = conductance_stats(params)
    lines = [(s.layer, s.mean, s.std, s.max) for s in stats]
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["layer", "mean", "std", "max"])
            for row in lines:
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
    print(f"{'layer':>5} {'mean':>12} {'std':>12} {'max':>12}")
    for layer, mean, std, mx in lines:
        print(f"{layer:>5} {mean:>12.6f} {std:>12.6f} {mx:>12.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drn-lab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="translate a ReLU weight file into a netlist")
    p.add_argument("--nn", required=True, help="binary weight file (RNN1 format)")
    p.add_argument("--gamma", type=float, default=1e-2)
    p.add_argument("--out", required=True, help="netlist output path")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("verify", help="deviation report for compiled circuits")
    p.add_argument("--nn", required=True)
    p.add_argument("--gamma", default="1e-1,1e-2,1e-3", help="comma-separated sweep")
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV report path")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("solve", help="steady states of a netlist on CSV inputs")
    p.add_argument("--netlist", required=True)
    p.add_argument("--input", required=True, help="CSV, one raw input vector per row")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--cert", action="store_true", help="append certificate columns")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("train", help="equilibrium-propagation training")
    p.add_argument("--dataset", required=True,
                   help=f"dataset id under the data root (${DATA_DIR_ENV}) or a directory")
    p.add_argument("--arch", choices=sorted(ARCHS), default="drn-1h")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lr", default=None, help="comma-separated per-layer rates")
    p.add_argument("--a0", type=float, default=None, help="input amplification")
    p.add_argument("--iters", type=int, default=None, help="solver iterations per phase")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lr-decay", type=float, default=0.99)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("demo-universal", help="|x| approximation sweep")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--grid", type=int, default=41)
    p.set_defaults(func=_cmd_demo_universal)

    p = sub.add_parser("stats", help="conductance summary of a netlist")
    p.add_argument("--netlist", required=True)
    p.add_argument("--out", default=None, help="optional CSV path")
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DrnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
