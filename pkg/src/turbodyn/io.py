"""CSV, SVG and config-file plumbing.

CSV files start with ``# key=value`` comment lines describing the run, then a
header row.  Floats are written with ``repr`` so a read-back is exact; lines
end with LF.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Mapping[str, object], columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# tool=turbodyn {__version__}\n")
    for key, val in header.items():
        buf.write(f"# {key}={fmt(val)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Mapping[str, object], columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(csv_text(header, columns, rows))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    header: dict[str, str] = {}
    body = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key.strip()] = val
            else:
                body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        out[key.strip()] = val.strip()
    return out


def load_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return parse_config_text(text)


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def svg_plot(
    path: str | Path,
    series: Sequence[tuple[Sequence[float], Sequence[float]]],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    scatter: bool = False,
    width: int = 640,
    height: int = 400,
) -> Path:
    """Minimal line/scatter plot with autoscaled axes."""
    pad = 50
    xs = [x for s in series for x in s[0]]
    ys = [y for s in series for y in s[1]]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})">{ylabel}</text>',
        f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0:.4g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{pad - 4}" y="{pad + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>',
    ]
    for i, (sx, sy) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        if scatter:
            parts += [f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="1.2" fill="{color}"/>' for x, y in zip(sx, sy)]
        else:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
