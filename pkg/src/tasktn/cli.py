"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 resource abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .circuits import GbsConfig, generate_gbs, random_fock_basis, random_qudit_circuit
from .executor import ExecConfig, MemoryLimitExceeded, default_workers, run
from .formats import NetworkFile, ParseError, dumps_circuit, dumps_network, read_network
from .network import close_amplitude, from_circuit
from .pathtree import SliceSet, build_tree, cost_report, greedy_path, greedy_shared_slices
from .taskgraph import compile_sliced

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg: str, code: int = EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _fmt_complex(z: complex, precision: str) -> str:
    digits = 8 if precision == "single" else 16
    return f"{z.real:.{digits}e}{z.imag:+.{digits}e}j"


def _fmt_fraction(x: Fraction) -> str:
    return f"{float(x):.12g}"


def _emit(pairs, as_json: bool, out=None):
    out = out or sys.stdout
    if as_json:
        out.write(json.dumps({k: (str(v) if isinstance(v, (complex, Fraction)) else v) for k, v in pairs}) + "\n")
    else:
        for k, v in pairs:
            out.write(f"{k}={v}\n")


def _load(path: str) -> NetworkFile:
    try:
        return read_network(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None


def _tree_and_slices(nf: NetworkFile, need_path: bool = True):
    path = nf.path
    if path is None:
        if need_path:
            raise CliError("network file has no contraction path")
        path = greedy_path(nf.network, join_components=True)
    tree = build_tree(nf.network, path)
    slices = SliceSet.of(tree, nf.slices) if nf.slices else SliceSet()
    return tree, slices


def _report_pairs(rep):
    return [
        ("flop_sl", rep.flop_sl),
        ("n_sl", rep.n_sl),
        ("f_sl", _fmt_fraction(rep.f_sl)),
        ("f_sl_exact", str(rep.f_sl)),
        ("flop_amp_unshared", rep.flop_amp_unshared),
        ("flop_amp_shared", rep.flop_amp_shared),
        ("max_rank", rep.max_rank),
        ("max_size", rep.max_size),
    ]


def cmd_contract(args) -> int:
    nf = _load(args.file)
    if not nf.network.is_closed:
        raise CliError(f"network has open labels {list(nf.network.open_labels)}; close it first")
    precision = args.precision or nf.precision
    tree, slices = _tree_and_slices(nf, need_path=False)
    g = compile_sliced(tree, slices, dedup=args.share)
    cfg = ExecConfig(
        workers=args.workers,
        enable_deletion=args.delete,
        memory_limit=args.memory_limit,
        precision=precision,
    )
    rep = run(g, nf.network.nodes, cfg)
    cost = cost_report(tree, slices, sharing=args.share)
    pairs = [
        ("amplitude", _fmt_complex(rep.amplitude, precision)),
        ("n_sl", cost.n_sl),
        ("f_sl", _fmt_fraction(cost.f_sl)),
        ("share", "on" if args.share else "off"),
        ("delete", "on" if args.delete else "off"),
        ("workers", cfg.workers),
        ("tasks", rep.executed),
        ("flop", rep.flop),
        ("peak_bytes", rep.peak_bytes),
        ("seconds", f"{rep.wall_time:.6f}"),
    ]
    _emit(pairs, args.json)
    return EXIT_OK


def cmd_estimate(args) -> int:
    rate = Fraction(args.rate)
    if rate <= 0:
        raise CliError("rate must be positive", EXIT_USAGE)
    if args.flop is not None:
        flop = int(Fraction(args.flop))
        seconds = Fraction(flop) / rate
        _emit([("flop_amp", flop), ("rate", args.rate), ("seconds", repr(float(seconds))),
               ("seconds_exact", str(seconds))], args.json)
        return EXIT_OK
    if args.file is None:
        raise CliError("estimate needs a network file or --flop", EXIT_USAGE)
    nf = _load(args.file)
    tree, slices = _tree_and_slices(nf)
    rep = cost_report(tree, slices, sharing=args.share)
    seconds = rep.est_seconds(rate)
    pairs = _report_pairs(rep) + [
        ("flop_amp", rep.flop_amp),
        ("rate", args.rate),
        ("seconds", repr(float(seconds))),
        ("seconds_exact", str(seconds)),
    ]
    _emit(pairs, args.json)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.random:
        if args.wires is None or args.qudit_dim is None or args.depth is None:
            raise CliError("--random needs --wires, --qudit-dim and --depth", EXIT_USAGE)
        circ = random_qudit_circuit(args.wires, args.qudit_dim, args.depth, seed=args.seed)
    else:
        if args.dim is None or args.width is None:
            raise CliError("GBS generation needs --dim and --width", EXIT_USAGE)
        cfg = GbsConfig(dim=args.dim, width=args.width, cycles=args.cycles, r=args.r,
                        cutoff=args.cutoff, seed=args.seed, modes=args.modes)
        circ = generate_gbs(cfg)
    Path(args.out).write_text(dumps_circuit(circ))
    pairs = [("circuit", args.out), ("wires", circ.n_wires), ("gates", len(circ.gates))]
    for name in sorted({g.name for g in circ.gates}):
        pairs.append((f"gates_{name}", circ.count(name)))
    if args.emit_network:
        if args.basis is None or args.basis == "random":
            basis = random_fock_basis(circ.n_wires, circ.dim, args.basis_seed)
            values = basis.values
        else:
            try:
                values = tuple(int(x) for x in args.basis.split(","))
            except ValueError:
                raise CliError(f"bad --basis {args.basis!r}", EXIT_USAGE) from None
        net = close_amplitude(from_circuit(circ), values)
        net.name = circ.name
        nf = NetworkFile(net, greedy_path(net, join_components=True), (), args.precision, circ.name,
                         {"basis": ",".join(map(str, values))})
        Path(args.emit_network).write_text(dumps_network(nf))
        pairs += [("network", args.emit_network), ("basis", ",".join(map(str, values)))]
    _emit(pairs, args.json)
    return EXIT_OK


def cmd_slice(args) -> int:
    nf = _load(args.file)
    tree, _ = _tree_and_slices(nf)
    if args.labels:
        slices = SliceSet.of(tree, args.labels)
    else:
        slices = greedy_shared_slices(tree, args.max_rank, args.k)
        if cost_report(tree, slices).max_rank > args.max_rank:
            raise CliError(f"max rank {args.max_rank} unreachable with at most {args.k} slices")
    rep = cost_report(tree, slices, sharing=True)
    pairs = [("slices", " ".join(slices.labels))] + _report_pairs(rep)
    if args.out:
        out = NetworkFile(nf.network, nf.path, slices.labels, nf.precision, nf.name, nf.meta)
        Path(args.out).write_text(dumps_network(out))
        pairs.append(("out", args.out))
    _emit(pairs, args.json)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    nf = _load(args.file)
    tree, slices = _tree_and_slices(nf, need_path=False)
    g = compile_sliced(tree, slices, dedup=args.share)
    text = g.to_dot(nf.name.replace(" ", "_"))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    from .plotting import plot_flop, plot_peak_memory

    nf = _load(args.file)
    precision = args.precision or nf.precision
    tree, slices = _tree_and_slices(nf, need_path=False)
    configs = [("full", SliceSet(), True)]
    if slices:
        configs += [("sliced", slices, False), ("sliced+shared", slices, True)]
    rows = []
    for label, sl, share in configs:
        g = compile_sliced(tree, sl, dedup=share)
        for deletion in (False, True):
            cfg = ExecConfig(workers=args.workers, enable_deletion=deletion, precision=precision)
            rep = run(g, nf.network.nodes, cfg)
            rows.append({
                "config": label,
                "deletion": deletion,
                "n_sl": sl.n_slices,
                "tasks": rep.executed,
                "flop": rep.flop,
                "peak_bytes": rep.peak_bytes,
                "seconds": round(rep.wall_time, 6),
                "amplitude": _fmt_complex(rep.amplitude, precision),
            })
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    mem = plot_peak_memory(rows, outdir / "peak_memory.png")
    flop = plot_flop(rows, outdir / "flop.png")
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    sys.stderr.write(f"wrote {csv_path}, {mem}, {flop}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tasktn", description="Task-based tensor-network contraction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("contract", help="contract a closed network file")
    c.add_argument("file")
    c.add_argument("--workers", type=int, default=default_workers())
    c.add_argument("--precision", choices=["single", "double"])
    c.add_argument("--delete", type=_on_off, default=True, metavar="on|off")
    c.add_argument("--share", type=_on_off, default=True, metavar="on|off")
    c.add_argument("--memory-limit", type=int, metavar="BYTES")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_contract)

    e = sub.add_parser("estimate", help="FLOP and runtime estimate")
    e.add_argument("file", nargs="?")
    e.add_argument("--rate", required=True, help="device FLOP/s, e.g. 442e15")
    e.add_argument("--flop", help="use this FLOP total instead of a network file")
    e.add_argument("--share", type=_on_off, default=True, metavar="on|off")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_estimate)

    g = sub.add_parser("generate", help="generate a GBS or random qudit circuit")
    g.add_argument("--out", required=True)
    g.add_argument("--dim", type=int)
    g.add_argument("--width", type=int)
    g.add_argument("--modes", type=int)
    g.add_argument("--cycles", type=int, default=1)
    g.add_argument("--r", type=float, default=0.5)
    g.add_argument("--cutoff", type=int, default=4)
    g.add_argument("--random", action="store_true", help="random qudit circuit instead of GBS")
    g.add_argument("--wires", type=int)
    g.add_argument("--qudit-dim", type=int)
    g.add_argument("--depth", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--emit-network", metavar="PATH")
    g.add_argument("--basis", help="comma-separated output basis values, or 'random'")
    g.add_argument("--basis-seed", type=int, default=0)
    g.add_argument("--precision", choices=["single", "double"], default="single")
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("slice", help="choose a slice set")
    s.add_argument("file")
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--max-rank", type=int)
    grp.add_argument("--labels", nargs="+")
    s.add_argument("--k", type=int, help="at most this many sliced labels")
    s.add_argument("--out")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_slice)

    d = sub.add_parser("export-dot", help="DOT text of the task graph")
    d.add_argument("file")
    d.add_argument("--share", type=_on_off, default=True, metavar="on|off")
    d.add_argument("--out")
    d.set_defaults(func=cmd_export_dot)

    r = sub.add_parser("report", help="run full/sliced/shared variants, write CSV and figures")
    r.add_argument("file")
    r.add_argument("--outdir", default="report")
    r.add_argument("--workers", type=int, default=default_workers())
    r.add_argument("--precision", choices=["single", "double"])
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except MemoryLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParseError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
