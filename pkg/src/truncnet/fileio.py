"""File formats: edge maps, round streams, CSV/JSONL tables.

Column layouts are documented in FORMATS.md; parsers are strict and report
offending line numbers.
"""

from __future__ import annotations

import json

from .errors import ParameterError
from .netgen import EdgeCounts


def write_edges(path, edges):
    """Header line 'd N', then one line per key: components then count."""
    with open(path, "w") as fh:
        fh.write(f"{edges.d} {edges.rounds}\n")
        for key in sorted(edges.counts):
            comps = " ".join(str(c) for c in key)
            fh.write(f"{comps} {edges.counts[key]}\n")


def read_edges(path):
    with open(path) as fh:
        lines = fh.readlines()
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines)
            if ln.strip() and not ln.strip().startswith("#")]
    if not body:
        raise ParameterError(f"{path}: empty edge file")
    try:
        d, rounds = (int(x) for x in body[0][1].split())
    except ValueError as exc:
        raise ParameterError(f"{path}:{body[0][0]}: bad header, need 'd N'") from exc
    counts = {}
    for lineno, ln in body[1:]:
        parts = ln.split()
        if len(parts) != d + 1:
            raise ParameterError(f"{path}:{lineno}: expected {d} components and a count")
        try:
            key = tuple(int(x) for x in parts[:d])
            c = int(parts[d])
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: non-integer field") from exc
        counts[key] = counts.get(key, 0) + c
    return EdgeCounts(d=d, rounds=rounds, counts=counts)


def write_rounds(path, round_edges, n_rounds):
    """Header 'rounds N', then one line per edge: 'round src dst'
    (multi-edges repeated). Round indices are 0-based."""
    with open(path, "w") as fh:
        fh.write(f"rounds {n_rounds}\n")
        for rnd, src, dst in round_edges:
            fh.write(f"{rnd} {src} {dst}\n")


def read_rounds(path):
    """Returns (EdgeCounts aggregated over rounds with d=2, n_rounds,
    per-round edge list)."""
    with open(path) as fh:
        lines = fh.readlines()
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines)
            if ln.strip() and not ln.strip().startswith("#")]
    if not body:
        raise ParameterError(f"{path}: empty rounds file")
    head = body[0][1].split()
    if len(head) != 2 or head[0] != "rounds":
        raise ParameterError(f"{path}:{body[0][0]}: bad header, need 'rounds N'")
    n_rounds = int(head[1])
    counts = {}
    triples = []
    for lineno, ln in body[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ParameterError(f"{path}:{lineno}: expected 'round src dst'")
        try:
            rnd, src, dst = (int(x) for x in parts)
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: non-integer field") from exc
        if not (0 <= rnd < n_rounds):
            raise ParameterError(f"{path}:{lineno}: round {rnd} outside [0, {n_rounds})")
        triples.append((rnd, src, dst))
        key = (src, dst)
        counts[key] = counts.get(key, 0) + 1
    return EdgeCounts(d=2, rounds=n_rounds, counts=counts), n_rounds, triples


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def read_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ParameterError(f"{path}: empty CSV")
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path):
    out = []
    with open(path) as fh:
        for i, ln in enumerate(fh):
            ln = ln.strip()
            if not ln:
                continue
            try:
                out.append(json.loads(ln))
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}:{i + 1}: bad JSON record") from exc
    return out


# ---------------------------------------------------------------------------
# edge-stream ingestion
# ---------------------------------------------------------------------------

def parse_edge_stream(path):
    """Whitespace-separated 'timestamp src dst [weight]' lines; '#' comments
    skipped; weights ignored. Returns list of (t, src, dst) sorted by time
    (stable in input order)."""
    records = []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, start=1):
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) not in (3, 4):
                raise ParameterError(
                    f"{path}:{lineno}: expected 'timestamp src dst [weight]'")
            try:
                t = float(parts[0])
                src, dst = parts[1], parts[2]
            except ValueError as exc:
                raise ParameterError(f"{path}:{lineno}: bad timestamp") from exc
            records.append((t, src, dst))
    if not records:
        raise ParameterError(f"{path}: empty edge stream")
    records.sort(key=lambda r: r[0])
    return records


def bin_edge_stream(records, bin_minutes=30, transient_rounds_to_drop=0,
                    dedup_within_round=True, drop_self_loops=True):
    """Bin a sorted stream into half-open rounds of fixed width.

    The transient is measured in rounds of the same width from the first
    timestamp; surviving edges are re-anchored at their first timestamp and
    re-binned, vertices re-indexed densely (1-based) by first appearance.
    Returns (round_edges, n_rounds, n_vertices, n_edges).
    """
    width = float(bin_minutes) * 60.0
    if width <= 0:
        raise ParameterError("bin_minutes must be positive")
    t0 = records[0][0]
    cut = t0 + transient_rounds_to_drop * width
    kept = [r for r in records if r[0] >= cut]
    if not kept:
        raise ParameterError("transient cutoff removed every edge")
    anchor = kept[0][0]
    vmap = {}
    out = []
    seen_in_round = set()
    for t, src, dst in kept:
        rnd = int((t - anchor) // width)
        if drop_self_loops and src == dst:
            continue
        if src not in vmap:
            vmap[src] = len(vmap) + 1
        if dst not in vmap:
            vmap[dst] = len(vmap) + 1
        a, b = vmap[src], vmap[dst]
        if dedup_within_round:
            sig = (rnd, a, b)
            if sig in seen_in_round:
                continue
            seen_in_round.add(sig)
        out.append((rnd, a, b))
    if not out:
        raise ParameterError("no edges survived ingestion filters")
    n_rounds = out[-1][0] + 1
    return out, n_rounds, len(vmap), len(out)
