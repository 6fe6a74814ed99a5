"""
File formats: binary snapshot matrices, CSV ingestion, tree exports, PGM images.

Snapshot file layout (all little-endian)::

    offset  size  field
    0       8     magic b"MRDMDSNP"
    8       2     version, u16 = 1
    10      8     n_space, u64
    18      8     m_time, u64
    26      8     dt, f64
    34      8     t0, f64
    42      8     grid_ny, u64 (0 for non-grid data)
    50      8     grid_nx, u64
    58      ...   payload: n_space * m_time f64, column-major

Tree exports are a directory holding ``manifest.txt`` plus, per node,
``node_<level>_<bin>.txt`` (line-oriented ``key value`` records) and, when the
node retains modes, ``node_<level>_<bin>.modes`` (a snapshot file whose columns
are the real parts of the retained modes followed by their imaginary parts).
"""
from __future__ import annotations

import csv
import json
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dmd import DmdResult, SnapshotMatrix
from .errors import (
    BadMagicError,
    CsvParseError,
    FormatError,
    ParameterError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .multires import MrdmdTree
from .scenarios import GroundTruth

MAGIC = b"MRDMDSNP"
VERSION = 1
HEADER = struct.Struct("<8sHQQddQQ")
RECORD_VERSION = "mrdmd-node 1"


def _grid(grid, n_space):
    if grid is None:
        return 0, 0
    ny, nx = (int(g) for g in grid)
    if ny < 1 or nx < 1 or ny * nx != n_space:
        raise ParameterError(f"grid {ny}x{nx} does not match {n_space} spatial points")
    return ny, nx


def _pack(data, dt, t0, grid):
    data = np.asarray(data, dtype=np.float64)
    ny, nx = _grid(grid, data.shape[0])
    header = HEADER.pack(MAGIC, VERSION, data.shape[0], data.shape[1], dt, t0, ny, nx)
    return header + np.asarray(data.T, dtype="<f8").tobytes()


def write_snapshots(x: SnapshotMatrix, path, grid=None) -> None:
    """Write `x` with an optional ``(ny, nx)`` grid; one snapshot is contiguous on disk."""
    Path(path).write_bytes(_pack(x.data, x.dt, x.t0, grid))


def _unpack(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        if not MAGIC.startswith(raw[:8]):
            raise BadMagicError(f"{path}: not a snapshot file")
        raise TruncatedPayloadError(f"{path}: header is {len(raw)} bytes, expected {HEADER.size}")
    magic, version, n, m, dt, t0, ny, nx = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: version {version}, this reader handles {VERSION}")
    if (ny or nx) and ny * nx != n:
        raise FormatError(f"{path}: grid {ny}x{nx} does not match n_space={n}")
    expected = n * m * 8
    payload = raw[HEADER.size :]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload) // 8} values, header promises {n * m}"
        )
    if len(payload) > expected:
        raise FormatError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f8").reshape(m, n).T.astype(np.float64)
    return data, dt, t0, ((ny, nx) if ny else None)


def read_snapshots(path, with_grid: bool = False):
    """
    Read a snapshot file. Returns the SnapshotMatrix, or ``(matrix, grid)``
    with `with_grid` where grid is ``(ny, nx)`` or None.
    """
    data, dt, t0, grid = _unpack(path)
    x = SnapshotMatrix(data, dt, t0)
    return (x, grid) if with_grid else x


def read_csv_snapshots(path, dt: float = 1.0, t0: float = 0.0):
    """
    Read a CSV with one row per spatial point and one column per snapshot.

    Cells reading ``nan`` (any case) or left empty are missing values: they are
    zero-filled and flagged in the returned boolean mask. Returns
    ``(SnapshotMatrix, mask)``.
    """
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvParseError(f"{path}: line {lineno} has {len(row)} columns, expected {width}")
            values = []
            for col, cell in enumerate(row, start=1):
                text = cell.strip()
                if not text or text.lower() == "nan":
                    values.append(math.nan)
                    continue
                try:
                    value = float(text)
                except ValueError:
                    raise CsvParseError(f"{path}: line {lineno}, column {col}: {cell!r} is not numeric") from None
                if not math.isfinite(value):
                    raise CsvParseError(f"{path}: line {lineno}, column {col}: infinite value")
                values.append(value)
            rows.append(values)
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    mask = np.isnan(data)
    data[mask] = 0.0
    return SnapshotMatrix(data, dt, t0), mask


def _fmt(value: float) -> str:
    return repr(float(value))


def _node_stem(level, bin):
    return f"node_{level:02d}_{bin:05d}"


def export_tree(tree: MrdmdTree, directory, grid=None) -> list:
    """
    Write the tree to `directory` and return the written file names in order.

    Node record lines::

        format mrdmd-node 1
        level <l>
        bin <j>
        t_start <float>
        t_end <float>
        snapshots <start> <stop>
        truncated <0|1>
        n_modes <count of fitted modes>
        diagnostic <text>                  (zero or more)
        mode <i> <omega re> <omega im> <b re> <b im> <retained 0|1>

    The manifest lists the configuration and one ``node <l> <j> <file>`` line
    per node, level-major.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create {directory}: {exc}") from exc
    if not os.access(directory, os.W_OK):
        raise FormatError(f"{directory} is not writable")

    cfg = tree.config
    manifest = [
        "format mrdmd-tree 1",
        f"n_space {tree.n_space}",
        f"n_time {tree.n_time}",
        f"t0 {_fmt(tree.global_t0)}",
        f"t1 {_fmt(tree.global_t1)}",
        f"dt {_fmt(tree.dt_original)}",
        f"max_levels {cfg.max_levels}",
        f"rho {_fmt(cfg.rho)}",
        f"rank_policy {','.join(map(str, cfg.rank_policy)) if isinstance(cfg.rank_policy, tuple) else cfg.rank_policy}",
        f"sampling {cfg.sampling if cfg.sampling is not None else 'keep_all'}",
        f"min_bin_snapshots {cfg.min_bin_snapshots}",
        f"slow_criterion {cfg.slow_criterion}",
    ]
    if grid is not None:
        ny, nx = _grid(grid, tree.n_space)
        manifest.append(f"grid {ny} {nx}")
    written = []
    for node in tree.nodes():
        stem = _node_stem(node.level, node.bin)
        fit = node.fit
        n_modes = fit.rank if fit is not None else 0
        lines = [
            f"format {RECORD_VERSION}",
            f"level {node.level}",
            f"bin {node.bin}",
            f"t_start {_fmt(node.t_start)}",
            f"t_end {_fmt(node.t_end)}",
            f"snapshots {node.start} {node.stop}",
            f"truncated {int(node.truncated)}",
            f"n_modes {n_modes}",
        ]
        lines += [f"diagnostic {d}" for d in node.diagnostics]
        kept = set(node.retained)
        for i in range(n_modes):
            w, b = fit.omegas[i], fit.amplitudes[i]
            lines.append(
                f"mode {i + 1} {_fmt(w.real)} {_fmt(w.imag)} {_fmt(b.real)} {_fmt(b.imag)} {int(i in kept)}"
            )
        (directory / f"{stem}.txt").write_text("\n".join(lines) + "\n")
        written.append(f"{stem}.txt")
        entry = f"node {node.level} {node.bin} {stem}.txt"
        if node.retained_count:
            modes = node.slow_modes.modes
            payload = np.hstack([modes.real, modes.imag])
            (directory / f"{stem}.modes").write_bytes(_pack(payload, 1.0, 0.0, None))
            written.append(f"{stem}.modes")
            entry += f" {stem}.modes"
        manifest.append(entry)
    (directory / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return ["manifest.txt"] + written


@dataclass(frozen=True)
class NodeRecord:
    """A node read back from a tree export; ``modes`` holds retained modes only."""

    level: int
    bin: int
    t_start: float
    t_end: float
    omegas: np.ndarray
    amplitudes: np.ndarray
    retained: np.ndarray
    modes: np.ndarray
    truncated: bool
    diagnostics: tuple


def _parse_node(path):
    fields, modes, diags = {}, [], []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        key, _, rest = line.partition(" ")
        if key == "mode":
            parts = rest.split()
            if len(parts) != 6:
                raise FormatError(f"{path}: line {lineno}: malformed mode record")
            modes.append(parts)
        elif key == "diagnostic":
            diags.append(rest)
        else:
            fields[key] = rest
    if fields.get("format") != RECORD_VERSION:
        raise FormatError(f"{path}: not a {RECORD_VERSION} record")
    omegas = _complex([float(p[1]) for p in modes], [float(p[2]) for p in modes])
    amps = _complex([float(p[3]) for p in modes], [float(p[4]) for p in modes])
    flags = np.array([p[5] == "1" for p in modes], dtype=bool)
    return fields, omegas, amps, flags, tuple(diags)


def read_tree_export(directory) -> list:
    """Node records of an :func:`export_tree` directory, in manifest order."""
    directory = Path(directory)
    manifest = directory / "manifest.txt"
    if not manifest.is_file():
        raise FormatError(f"{directory}: no manifest.txt")
    records = []
    for line in manifest.read_text().splitlines():
        parts = line.split()
        if not parts or parts[0] != "node":
            continue
        fields, omegas, amps, flags, diags = _parse_node(directory / parts[3])
        if len(parts) > 4:
            payload, *_ = _unpack(directory / parts[4])
            k = payload.shape[1] // 2
            modes = _complex(payload[:, :k], payload[:, k:])
        else:
            modes = np.zeros((0, 0), dtype=np.complex128)
        records.append(
            NodeRecord(
                level=int(fields["level"]),
                bin=int(fields["bin"]),
                t_start=float(fields["t_start"]),
                t_end=float(fields["t_end"]),
                omegas=omegas,
                amplitudes=amps,
                retained=flags,
                modes=modes,
                truncated=fields.get("truncated") == "1",
                diagnostics=diags,
            )
        )
    return records


def write_dmd_result(r: DmdResult, directory) -> list:
    """
    Write a single-window fit: ``spectrum.txt`` with one line per mode
    (``k omega_re omega_im lambda_re lambda_im b_re b_im``) and ``modes.bin``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"# dt {_fmt(r.dt)} t0 {_fmt(r.t0)} window_len {r.window_len}"]
    for k in range(r.rank):
        w, lam, b = r.omegas[k], r.lambdas[k], r.amplitudes[k]
        lines.append(
            " ".join([str(k + 1)] + [_fmt(v) for v in (w.real, w.imag, lam.real, lam.imag, b.real, b.imag)])
        )
    (directory / "spectrum.txt").write_text("\n".join(lines) + "\n")
    (directory / "modes.bin").write_bytes(_pack(np.hstack([r.modes.real, r.modes.imag]), 1.0, 0.0, None))
    return ["spectrum.txt", "modes.bin"]


def read_dmd_result(directory) -> DmdResult:
    directory = Path(directory)
    spectrum = directory / "spectrum.txt"
    if not spectrum.is_file():
        raise FormatError(f"{directory}: no spectrum.txt")
    header, *rows = spectrum.read_text().splitlines()
    meta = header.split()
    dt, t0, window = float(meta[2]), float(meta[4]), int(meta[6])
    vals = np.array([[float(v) for v in row.split()[1:]] for row in rows]).reshape(-1, 6)
    payload, *_ = _unpack(directory / "modes.bin")
    k = payload.shape[1] // 2
    return DmdResult(
        modes=_complex(payload[:, :k], payload[:, k:]),
        lambdas=_complex(vals[:, 2], vals[:, 3]),
        omegas=_complex(vals[:, 0], vals[:, 1]),
        amplitudes=_complex(vals[:, 4], vals[:, 5]),
        dt=dt,
        t0=t0,
        window_len=window,
    )


def export_mode_image(mode, grid, path) -> None:
    """
    Write the real part of `mode` as a binary PGM of shape ``grid = (ny, nx)``.

    Values map linearly from [min, max] to [0, 255]; a constant field is
    written as mid-gray 128. Row 0 of the grid is the first image row.
    """
    field = np.real(np.asarray(mode)).ravel()
    ny, nx = _grid(grid, field.size)
    lo, hi = field.min(), field.max()
    if hi > lo:
        pixels = np.rint((field - lo) / (hi - lo) * 255.0)
    else:
        pixels = np.full(field.shape, 128.0)
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Pixel array of a binary PGM written by :func:`export_mode_image`."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM")
    nx, ny = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != nx * ny:
        raise TruncatedPayloadError(f"{path}: {pixels.size} pixels, expected {nx * ny}")
    return pixels.reshape(ny, nx)


def _complex_pairs(a):
    a = np.asarray(a, dtype=np.complex128)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def write_ground_truth(truth: GroundTruth, path) -> None:
    """JSON sidecar; complex arrays are stored as nested ``[re, im]`` pairs."""
    doc = {
        "format": "mrdmd-truth 1",
        "names": list(truth.names),
        "grid": list(truth.grid) if truth.grid is not None else None,
        "modes": _complex_pairs(truth.modes.T),
        "time_series": _complex_pairs(truth.time_series),
        "tracks": {k: np.asarray(v, dtype=np.float64).tolist() for k, v in sorted(truth.tracks.items())},
        "eigenvalues": _complex_pairs(truth.eigenvalues) if truth.eigenvalues is not None else None,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def _complex(re, im):
    # assembled in place: re + 1j * im would not preserve the sign of zero parts
    out = np.empty(np.shape(re), dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


def _from_pairs(a):
    a = np.asarray(a, dtype=np.float64)
    return _complex(a[..., 0], a[..., 1])


def read_ground_truth(path) -> GroundTruth:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"ground truth sidecar {path} not found")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if doc.get("format") != "mrdmd-truth 1":
        raise FormatError(f"{path}: not a ground truth sidecar")
    return GroundTruth(
        names=tuple(doc["names"]),
        modes=_from_pairs(doc["modes"]).T,
        time_series=_from_pairs(doc["time_series"]),
        tracks={k: np.asarray(v) for k, v in doc["tracks"].items()},
        eigenvalues=_from_pairs(doc["eigenvalues"]) if doc["eigenvalues"] is not None else None,
        grid=tuple(doc["grid"]) if doc["grid"] is not None else None,
    )
