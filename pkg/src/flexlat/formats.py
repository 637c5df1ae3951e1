"""File formats: deterministic JSON, surface files, path CSVs, manifests and SVG plots."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .lattice_complex import Edge, PeriodicComplex
from .realization import Realization

PATH_COLUMNS = ["t", "g11", "g12", "g22", "residual_norm"]


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _is_scalar(x) -> bool:
    return x is None or isinstance(x, (bool, int, float, str, np.integer, np.floating, np.bool_))


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits and a fixed layout.

    Lists of scalars go on one line; everything else is indented.
    """
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(_is_scalar(v) for v in o):
                return "[" + ", ".join(_scalar(v) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        return _scalar(o)

    return enc(obj, 0) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# surfaces


def surface_to_dict(c: PeriodicComplex, r: Realization | None = None, meta=None,
                    lengths=None) -> dict:
    d = {"complex": c.to_dict()}
    if r is not None:
        d.update(r.to_dict())
    if lengths is not None:
        d["lengths"] = [[*e.as_row(), float(lengths[e])] for e in c.constraint_edges]
    if meta:
        d["meta"] = meta
    return d


def surface_from_dict(d: dict):
    """Inverse of :func:`surface_to_dict`: ``(complex, realization|None, meta, lengths|None)``."""
    if not isinstance(d, dict) or "complex" not in d:
        raise ValueError("surface file has no 'complex' block")
    c = PeriodicComplex.from_dict(d["complex"])
    r = None
    if "positions" in d:
        r = Realization.from_dict(d)
        if r.n != c.n_orbits:
            raise ValueError(f"{r.n} positions for {c.n_orbits} orbits")
    lengths = None
    if "lengths" in d:
        try:
            lengths = {Edge.make(u, v, (m, k)): float(x) for u, v, m, k, x in d["lengths"]}
        except (TypeError, ValueError) as exc:
            raise ValueError(f"malformed lengths block: {exc}") from exc
    return c, r, d.get("meta", {}), lengths


def write_surface(path, c, r=None, meta=None, lengths=None) -> None:
    atomic_write(path, dumps(surface_to_dict(c, r, meta, lengths)))


def read_surface(path):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return surface_from_dict(d)


# ---------------------------------------------------------------------------
# flex paths


def path_csv(path, coords: bool = False, n_coords: int = 0) -> str:
    """CSV text for a traced path; ``coords`` appends the chart coordinates."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    samples = getattr(path, "samples", [])
    if coords and samples:
        n_coords = len(samples[0].q.coords)
    w.writerow(PATH_COLUMNS + ([f"x{i}" for i in range(n_coords)] if coords else []))
    for s in samples:
        row = [s.t, *s.gram, s.residual_norm]
        if coords:
            row += list(s.q.coords)
        w.writerow([fmt_float(x) for x in row])
    return buf.getvalue()


def read_path_csv(path):
    """``(t, grams)`` arrays from a path CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:len(PATH_COLUMNS)] != PATH_COLUMNS:
        raise ValueError(f"{path}: missing header {','.join(PATH_COLUMNS)}")
    try:
        data = np.array([[float(x) for x in r[:5]] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
    data = data.reshape(-1, 5)
    return data[:, 0], data[:, 1:4]


# ---------------------------------------------------------------------------
# manifests and plots


def manifest(command: str, inputs=(), outputs=(), settings=None, results=None) -> dict:
    return {
        "command": command,
        "version": __version__,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "outputs": sorted(str(o) for o in outputs),
        "settings": settings or {},
        "results": results or {},
    }


def write_manifest(out_dir, command: str, **kw) -> Path:
    path = Path(out_dir) / f"manifest_{command}.json"
    atomic_write(path, dumps(manifest(command, **kw)))
    return path


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b",
            "#e377c2"]


def scatter_svg(series, width: int = 480, height: int = 360, xlabel="g11", ylabel="g22") -> str:
    """Static SVG scatter; ``series`` is a list of ``(label, xs, ys)``."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series]) if series else np.zeros(0)
    ys = np.concatenate([np.asarray(s[2], float) for s in series]) if series else np.zeros(0)
    m = 40
    if xs.size:
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return m + (x - x0) / (x1 - x0) * (width - 2 * m)

    def py(y):
        return height - m - (y - y0) / (y1 - y0) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
           'fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" '
           f'font-size="12">{xlabel} [{x0:.4g}, {x1:.4g}]</text>',
           f'<text x="12" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 12 {height / 2:.1f})">{ylabel} [{y0:.4g}, {y1:.4g}]</text>']
    for k, (label, sx, sy) in enumerate(series):
        colour = _PALETTE[k % len(_PALETTE)]
        out.append(f'<g fill="{colour}"><title>{label}</title>')
        for x, y in zip(sx, sy):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2"/>')
        out.append("</g>")
        out.append(f'<text x="{width - m + 4}" y="{m + 14 * (k + 1)}" font-size="10" '
                   f'fill="{colour}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
