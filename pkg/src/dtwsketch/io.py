"""Text formats: metric files, sequence files and flat key=value configs.

Metric file: a header line ``<kind> <params...>`` followed by a body for
the kinds that need one.

    line <size>
    hamming <size>
    grid <side> <dim> <p>
    matrix <size> [nonmetric]      then the lower triangle, row i holding i+1 numbers
    tree <size>                    then one "parent weight" line per node (root: -1 0)

Sequence file: one sequence per line, whitespace-separated point ids.
Lines starting with ``#`` are comments everywhere.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .decompositions import TreeMetric
from .dtw import Sequence
from .metric import FiniteMatrix, GeneralizedHamming, IntegerLine, LpGrid, MetricError, MetricSpace


class FormatError(ValueError):
    """A file does not follow its declared format."""


def _content_lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _numbers(line: str, lineno: int) -> list[float]:
    try:
        return [float(tok) for tok in line.split()]
    except ValueError as e:
        raise FormatError(f"line {lineno}: {e}") from None


def parse_metric_spec(header: str, body: list[str] = ()) -> MetricSpace:
    """Build a space from a header line (and body lines for matrix / tree)."""
    parts = header.split()
    if not parts:
        raise FormatError("empty metric header")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind in ("line", "hamming"):
            if len(args) != 1:
                raise FormatError(f"'{kind}' takes exactly one size argument")
            cls = IntegerLine if kind == "line" else GeneralizedHamming
            return cls(int(args[0]))
        if kind == "grid":
            if len(args) != 3:
                raise FormatError("'grid' takes side, dim and p")
            return LpGrid(int(args[0]), int(args[1]), float(args[2]))
        if kind == "matrix":
            if not 1 <= len(args) <= 2 or (len(args) == 2 and args[1] != "nonmetric"):
                raise FormatError("'matrix' takes a size and an optional 'nonmetric' flag")
            size = int(args[0])
            if len(body) != size:
                raise FormatError(f"matrix declares {size} rows, found {len(body)}")
            rows = [_numbers(ln, i + 2) for i, ln in enumerate(body)]
            return FiniteMatrix.from_lower_triangle(rows, metric=len(args) == 1)
        if kind == "tree":
            if len(args) != 1:
                raise FormatError("'tree' takes exactly one size argument")
            size = int(args[0])
            if len(body) != size:
                raise FormatError(f"tree declares {size} nodes, found {len(body)}")
            rows = [_numbers(ln, i + 2) for i, ln in enumerate(body)]
            if any(len(r) != 2 for r in rows):
                raise FormatError("tree rows must be 'parent weight'")
            return TreeMetric([int(r[0]) for r in rows], [r[1] for r in rows])
    except (MetricError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(str(e)) from None
    raise FormatError(f"unknown metric kind {kind!r}")


def read_metric(path) -> MetricSpace:
    lines = _content_lines(Path(path).read_text())
    if not lines:
        raise FormatError(f"{path}: empty metric file")
    return parse_metric_spec(lines[0], lines[1:])


def format_metric(space: MetricSpace) -> str:
    out = [space.header()]
    if isinstance(space, FiniteMatrix):
        m = space.matrix()
        for i in range(space.size):
            out.append(" ".join(_fmt(v) for v in m[i, : i + 1]))
    elif isinstance(space, TreeMetric):
        for v in range(space.size):
            out.append(f"{int(space.parent[v])} {_fmt(space.weight[v])}")
    return "\n".join(out) + "\n"


def write_metric(path, space: MetricSpace):
    Path(path).write_text(format_metric(space))


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v == int(v) else repr(v)


def parse_sequences(text: str, space: MetricSpace) -> list[Sequence]:
    seqs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            ids = [int(tok) for tok in line.split()]
            seqs.append(Sequence(ids, space))
        except ValueError as e:
            raise FormatError(f"line {lineno}: {e}") from None
    return seqs


def read_sequences(path, space: MetricSpace) -> list[Sequence]:
    return parse_sequences(Path(path).read_text(), space)


def read_sequence(path, space: MetricSpace) -> Sequence:
    seqs = read_sequences(path, space)
    if len(seqs) != 1:
        raise FormatError(f"{path}: expected one sequence, found {len(seqs)}")
    return seqs[0]


def format_sequences(seqs, comments=()) -> str:
    head = [f"# {c}" for c in comments]
    return "\n".join(head + [" ".join(map(str, np.asarray(s.letters).tolist())) for s in seqs]) + "\n"


def write_sequences(path, seqs, comments=()):
    Path(path).write_text(format_sequences(seqs, comments))


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` pairs; later keys win, ``#`` starts a comment line."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FormatError(f"line {lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def read_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())
