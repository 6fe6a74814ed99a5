"""
Command-line front end.

    mrdmd generate SPEC -o data.snp
    mrdmd dmd --input data.snp -o dmd_out [--rank K] [--rho R]
    mrdmd mrdmd --input data.snp -o mr_out --levels 3 [--rho 1]
    mrdmd compare --truth data.snp.truth.json --tree mr_out --dmd dmd_out

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
Every run writes ``manifest.json`` next to its artifacts with the flags, input
digests, artifact digests and scenario seeds.
"""
from __future__ import annotations

import argparse
import ast
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, metrics, multires, scenarios
from .dmd import background_foreground_split, fit, reconstruct
from .errors import FormatError, InvalidInputError, MrdmdError, NumericalError, ParameterError

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(MrdmdError):
    """Bad command-line usage detected after argument parsing."""


def parse_config(path) -> dict:
    """
    Read a ``key = value`` file. ``#`` starts a comment; values are Python
    literals (numbers, tuples such as ``64, 64``, complex numbers) or bare strings.
    """
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ParameterError(f"{path}: line {lineno}: expected key = value")
        if key in out:
            raise ParameterError(f"{path}: line {lineno}: duplicate key {key!r}")
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def spec_from_config(cfg: dict) -> scenarios.ScenarioSpec:
    cfg = dict(cfg)
    if "kind" not in cfg:
        raise ParameterError("scenario config is missing key 'kind'")
    kind = cfg.pop("kind")
    if kind not in scenarios.KINDS:
        raise ParameterError(f"unknown scenario kind={kind!r}; expected one of {scenarios.KINDS}")
    seed = cfg.pop("seed", 0)
    return scenarios.ScenarioSpec.default(kind, seed=seed, **cfg)


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, args, inputs, artifacts, seeds=()):
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "tool": "mrdmd",
        "version": __version__,
        "command": args.command,
        "flags": {k: (v if isinstance(v, (int, float, str, bool, type(None))) else str(v)) for k, v in flags.items()},
        "inputs": {str(p): _digest(p) for p in inputs},
        "artifacts": {str(p): _digest(p) for p in artifacts},
        "seeds": list(seeds),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# argument types: validated at parse time so bad values exit with status 2


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonnegative_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not (np.isfinite(value) and value >= 0):
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _int_at_least(lo):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
        if value < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {value}")
        return value

    return parse


def _rank(text):
    if text in ("full", "hard_threshold"):
        return text
    return _int_at_least(1)(text)


def _rank_list(text):
    parts = [_rank(p.strip()) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _sampling(text):
    if text == "keep_all":
        return None
    return _int_at_least(2)(text)


def _load_input(args):
    """Snapshots and grid from --input (binary or .csv) or --scenario."""
    seeds, inputs = [], []
    if args.scenario is not None:
        spec = spec_from_config(parse_config(args.scenario))
        x, truth = scenarios.generate(spec)
        seeds.append(spec.seed)
        inputs.append(args.scenario)
        return x, truth.grid, inputs, seeds
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input {path} not found")
    inputs.append(path)
    if path.suffix.lower() == ".csv":
        x, mask = io.read_csv_snapshots(path, dt=args.dt, t0=args.t0)
        if mask.any():
            print(f"note: {int(mask.sum())} missing cell(s) zero-filled", file=sys.stderr)
        grid = tuple(args.grid) if args.grid else None
        return x, grid, inputs, seeds
    x, grid = io.read_snapshots(path, with_grid=True)
    if args.grid:
        grid = tuple(args.grid)
    return x, grid, inputs, seeds


def cmd_generate(args) -> int:
    spec = spec_from_config(parse_config(args.spec))
    x, truth = scenarios.generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_grid = truth.grid if truth.grid is not None else None
    io.write_snapshots(x, out, grid=write_grid)
    truth_path = Path(args.truth) if args.truth else out.with_name(out.name + ".truth.json")
    io.write_ground_truth(truth, truth_path)
    manifest = Path(args.manifest) if args.manifest else out.with_name(out.name + ".manifest.json")
    _write_manifest(manifest, args, [args.spec], [out, truth_path], seeds=[spec.seed])
    print(f"wrote {out} ({x.n_space} x {x.n_time}) and {truth_path}")
    return EXIT_OK


def cmd_dmd(args) -> int:
    x, grid, inputs, seeds = _load_input(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        r = fit(x, args.rank)
    except NumericalError as exc:
        print(f"error: window [{x.t0}, {x.t0 + x.n_time * x.dt}) fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    artifacts = [out / name for name in io.write_dmd_result(r, out)]
    err = metrics.reconstruction_error(x.data, reconstruct(r, x.times, real=True))
    for k in range(r.rank):
        lam, w = r.lambdas[k], r.omegas[k]
        print(f"mode {k + 1} lambda {lam.real:.15g} {lam.imag:+.15g}j omega {w.real:.15g} {w.imag:+.15g}j")
    summary = [f"rank {r.rank}", f"dropped {r.n_dropped}", f"reconstruction_error {err!r}"]
    if args.rho is not None:
        bg, fg = background_foreground_split(r, x, args.rho)
        for name, part in (("background.snp", bg), ("foreground.snp", fg)):
            io.write_snapshots(type(x)(part, x.dt, x.t0), out / name, grid=grid)
            artifacts.append(out / name)
        summary.append(f"background_fraction {np.linalg.norm(bg) / max(np.linalg.norm(x.data), 1e-300)!r}")
    if grid is not None:
        images = out / "images"
        images.mkdir(exist_ok=True)
        for k in range(r.rank):
            path = images / f"mode_{k + 1:03d}.pgm"
            io.export_mode_image(r.modes[:, k], grid, path)
            artifacts.append(path)
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    artifacts.append(out / "summary.txt")
    _write_manifest(out / "manifest.json", args, inputs, artifacts, seeds)
    print(f"reconstruction_error {err:.6g}")
    return EXIT_OK


def cmd_mrdmd(args) -> int:
    x, grid, inputs, seeds = _load_input(args)
    config = multires.MrdmdConfig(
        max_levels=args.levels,
        rho=args.rho,
        rank_policy=args.rank_policy,
        sampling=args.sampling,
        min_bin_snapshots=args.min_bin_snapshots,
        slow_criterion=args.slow_criterion,
    )
    tree = multires.decompose(x, config)
    for node in tree.nodes():
        for d in node.diagnostics:
            print(f"node ({node.level},{node.bin}): {d}", file=sys.stderr)
    if tree.root.fit is None and tree.root.diagnostics and np.any(x.data):
        print(f"error: node (1,1) failed: {tree.root.diagnostics[0]}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = [out / "tree" / name for name in io.export_tree(tree, out / "tree", grid=grid)]

    rows = ["level\tbin\tt_start\tt_end\tk\tomega_re\tomega_im\tretained"]
    for rec in multires.spectrum_map(tree):
        for k, (w, kept) in enumerate(zip(rec.omegas, rec.retained), start=1):
            rows.append(
                f"{rec.level}\t{rec.bin}\t{rec.t_start!r}\t{rec.t_end!r}\t{k}\t{w.real!r}\t{w.imag!r}\t{int(kept)}"
            )
    (out / "spectrum_map.tsv").write_text("\n".join(rows) + "\n")
    artifacts.append(out / "spectrum_map.tsv")

    if grid is not None:
        images = out / "images"
        images.mkdir(exist_ok=True)
        for node in tree.nodes():
            for k in range(node.retained_count):
                path = images / f"node_{node.level:02d}_{node.bin:05d}_{k + 1:02d}.pgm"
                io.export_mode_image(node.slow_modes.modes[:, k], grid, path)
                artifacts.append(path)

    summary = []
    err = metrics.reconstruction_error(x.data, multires.evaluate(tree, x.times))
    summary.append(f"reconstruction_error {err!r}")
    for level in range(1, tree.depth + 1):
        partial = metrics.reconstruction_error(x.data, multires.evaluate(tree, x.times, max_level=level))
        summary.append(f"level {level} cumulative_error {partial!r}")
    summary.append(f"nodes {sum(1 for _ in tree.nodes())}")
    summary.append(f"retained_modes {sum(n.retained_count for n in tree.nodes())}")
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    artifacts.append(out / "summary.txt")
    _write_manifest(out / "manifest.json", args, inputs, artifacts, seeds)
    print("\n".join(summary))
    return EXIT_OK


def _summary_error(directory) -> float:
    path = Path(directory) / "summary.txt"
    if not path.is_file():
        raise UsageError(f"{directory}: no summary.txt")
    for line in path.read_text().splitlines():
        key, _, value = line.partition(" ")
        if key == "reconstruction_error":
            return float(value)
    raise FormatError(f"{path}: no reconstruction_error entry")


def cmd_compare(args) -> int:
    truth = io.read_ground_truth(args.truth)
    records = io.read_tree_export(Path(args.tree) / "tree")
    if not records:
        raise UsageError(f"{args.tree}: tree export lists no nodes")
    tree_cands = []
    for rec in records:
        omegas = rec.omegas[rec.retained]
        for k in range(rec.modes.shape[1]):
            tree_cands.append(((rec.level, rec.bin, k + 1), rec.modes[:, k], complex(omegas[k])))
    mr_report = metrics.match_candidates(truth, tree_cands)
    dmd_report = metrics.match_modes(truth, io.read_dmd_result(args.dmd))
    mr_rows = {m.true_index: m for m in mr_report}
    dmd_rows = {m.true_index: m for m in dmd_report}

    lines = ["mode\tname\tmrdmd_node\tmrdmd_error\tdmd_index\tdmd_error"]
    for j, name in enumerate(truth.names):
        a, b = mr_rows.get(j), dmd_rows.get(j)
        lines.append(
            "\t".join(
                [
                    str(j + 1),
                    name,
                    "-" if a is None else ",".join(map(str, a.source)),
                    "-" if a is None else f"{a.error:.6g}",
                    "-" if b is None else str(b.source[0] + 1),
                    "-" if b is None else f"{b.error:.6g}",
                ]
            )
        )
    lines.append(f"reconstruction_error mrdmd {_summary_error(args.tree)!r}")
    lines.append(f"reconstruction_error dmd {_summary_error(args.dmd)!r}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        _write_manifest(
            out.with_name(out.name + ".manifest.json"),
            args,
            [args.truth, Path(args.tree) / "tree" / "manifest.txt", Path(args.dmd) / "spectrum.txt"],
            [out],
        )
    return EXIT_OK


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="snapshot file (.snp binary or .csv)")
    src.add_argument("--scenario", help="scenario config file to generate the input from")
    p.add_argument("--dt", type=_positive_float, default=1.0, help="snapshot spacing for CSV input")
    p.add_argument("--t0", type=float, default=0.0, help="start time for CSV input")
    p.add_argument("--grid", type=_int_at_least(1), nargs=2, metavar=("NY", "NX"), help="image grid for mode output")
    p.add_argument("-o", "--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrdmd", description="Exact and multi-resolution DMD.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic scenario to a snapshot file")
    p.add_argument("spec", help="scenario config (key = value lines)")
    p.add_argument("-o", "--out", required=True, help="snapshot file to write")
    p.add_argument("--truth", help="ground truth sidecar path (default: OUT.truth.json)")
    p.add_argument("--manifest", help="run manifest path (default: OUT.manifest.json)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("dmd", help="single-window exact DMD")
    _add_input(p)
    p.add_argument("--rank", type=_rank, default="hard_threshold", help="integer, full or hard_threshold")
    p.add_argument("--rho", type=_nonnegative_float, help="background cutoff on |omega| (1/time)")
    p.set_defaults(func=cmd_dmd)

    p = sub.add_parser("mrdmd", help="multi-resolution DMD")
    _add_input(p)
    p.add_argument("--levels", type=_int_at_least(1), default=3)
    p.add_argument("--rho", type=_nonnegative_float, default=1.0, help="slow cutoff in cycles per bin")
    p.add_argument("--rank-policy", type=_rank_list, default="hard_threshold", help="policy or comma list per level")
    p.add_argument("--sampling", type=_sampling, default=None, help="keep_all or snapshots per bin")
    p.add_argument("--min-bin-snapshots", type=_int_at_least(2), default=2)
    p.add_argument("--slow-criterion", choices=multires.SLOW_CRITERIA, default="abs")
    p.set_defaults(func=cmd_mrdmd)

    p = sub.add_parser("compare", help="match recovered modes against ground truth")
    p.add_argument("--truth", required=True, help="ground truth sidecar")
    p.add_argument("--tree", required=True, help="output directory of the mrdmd command")
    p.add_argument("--dmd", required=True, help="output directory of the dmd command")
    p.add_argument("-o", "--out", help="also write the table here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ParameterError, InvalidInputError, FormatError, MrdmdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
