"""Readers and writers for the on-disk formats.

Key-value files are UTF-8 ``key = value`` lines; ``#`` starts a comment.
CSV outputs start with ``#`` comment lines that echo the resolved
parameters, followed by a header row. Floats are written with ``repr`` so
that files reload bit-identically and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from uwnetloc import __version__
from uwnetloc.channel_model import ChannelModel, GainSample
from uwnetloc.errors import DataError
from uwnetloc.network import Scenario

MODEL_KEYS = ("slope_a_db_per_m", "intercept_b_db", "noise_var_db2")
SCENARIO_HEADER = ["id", "x_m", "y_m", "is_anchor"]


class ParseError(DataError):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def header_lines(params: Mapping[str, object]) -> list[str]:
    lines = [f"# uwnetloc {__version__}"]
    lines += [f"# {k} = {fmt(v) if v is not None else 'none'}" for k, v in params.items()]
    return lines


# --- key-value files -------------------------------------------------------

def read_kv(path) -> dict[str, str]:
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ParseError(f"{path}:{lineno}: empty key")
        out[k] = v
    return out


def write_kv(path, values: Mapping[str, object], comments: Sequence[str] = ()) -> None:
    lines = list(comments) + [f"{k} = {fmt(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{where}: not a number: {value!r}") from None


def save_channel_model(path, model: ChannelModel) -> None:
    write_kv(
        path,
        dict(zip(MODEL_KEYS, (model.slope_a, model.intercept_b, model.noise_var))),
        comments=[f"# uwnetloc {__version__} channel model"],
    )


def load_channel_model(path) -> ChannelModel:
    kv = read_kv(path)
    missing = [k for k in MODEL_KEYS if k not in kv]
    if missing:
        raise ParseError(f"{path}: missing keys {missing}")
    vals = [_float(kv[k], f"{path}: {k}") for k in MODEL_KEYS]
    try:
        return ChannelModel(*vals)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# --- CSV -------------------------------------------------------------------

def _data_rows(path) -> Iterable[tuple[int, list[str]]]:
    """(line number, fields) for non-comment, non-blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def read_table(path, columns: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    rows = _data_rows(path)
    try:
        lineno, head = next(rows)
    except StopIteration:
        raise ParseError(f"{path}: empty file") from None
    head = [h.strip() for h in head]
    if head != list(columns):
        raise ParseError(f"{path}:{lineno}: expected header {','.join(columns)}, got {','.join(head)}")
    out = []
    for lineno, fields in rows:
        if len(fields) != len(columns):
            raise ParseError(f"{path}: row {lineno}: expected {len(columns)} fields, got {len(fields)}")
        out.append((lineno, dict(zip(columns, (f.strip() for f in fields)))))
    return out


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], params=None) -> None:
    buf = _io.StringIO()
    if params is not None:
        for line in header_lines(params):
            buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_gain_samples(path) -> list[GainSample]:
    out = []
    for lineno, row in read_table(path, ["distance_m", "gain_db"]):
        d = _float(row["distance_m"], f"{path}: row {lineno}")
        g = _float(row["gain_db"], f"{path}: row {lineno}")
        try:
            out.append(GainSample(d, g))
        except DataError as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from None
    return out


def write_gain_samples(path, samples: Sequence[GainSample]) -> None:
    write_table(path, ["distance_m", "gain_db"], [(s.distance, s.gain) for s in samples])


def radii_path(path) -> Path:
    return Path(path).with_suffix(".radii")


def write_scenario(path, scenario: Scenario, params=None) -> None:
    rows = [
        (i, x, y, i in scenario.anchors)
        for i, (x, y) in enumerate(scenario.positions)
    ]
    write_table(path, SCENARIO_HEADER, rows, params)
    write_kv(
        radii_path(path),
        {"comm_radius_m": scenario.comm_radius, "sense_radius_m": scenario.sense_radius},
    )


def read_scenario(path) -> Scenario:
    rows = read_table(path, SCENARIO_HEADER)
    ids, pos, anchors = [], [], set()
    for lineno, row in rows:
        where = f"{path}: row {lineno}"
        try:
            i = int(row["id"])
        except ValueError:
            raise ParseError(f"{where}: bad id {row['id']!r}") from None
        if row["is_anchor"] not in ("0", "1"):
            raise ParseError(f"{where}: is_anchor must be 0 or 1")
        ids.append(i)
        pos.append((_float(row["x_m"], where), _float(row["y_m"], where)))
        if row["is_anchor"] == "1":
            anchors.add(i)
    if ids != list(range(len(ids))):
        raise ParseError(f"{path}: node ids must be 0..N-1 in order")
    side = radii_path(path)
    if not side.exists():
        raise ParseError(f"{path}: missing radii sidecar {side}")
    kv = read_kv(side)
    try:
        comm = _float(kv["comm_radius_m"], str(side))
        sense = _float(kv["sense_radius_m"], str(side))
    except KeyError as exc:
        raise ParseError(f"{side}: missing key {exc}") from None
    try:
        return Scenario(np.array(pos, dtype=float).reshape(-1, 2), frozenset(anchors), comm, sense)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def read_points(path) -> np.ndarray:
    rows = read_table(path, ["x_m", "y_m"])
    pts = [(_float(r["x_m"], f"{path}: row {n}"), _float(r["y_m"], f"{path}: row {n}")) for n, r in rows]
    return np.array(pts, dtype=float).reshape(-1, 2)


def write_points(path, points) -> None:
    write_table(path, ["x_m", "y_m"], [tuple(p) for p in np.asarray(points).reshape(-1, 2)])


def read_srls_instance(path) -> tuple[np.ndarray, np.ndarray]:
    rows = read_table(path, ["x_m", "y_m", "range_m"])
    data = [
        [_float(r[k], f"{path}: row {n}") for k in ("x_m", "y_m", "range_m")]
        for n, r in rows
    ]
    arr = np.array(data, dtype=float).reshape(-1, 3)
    return arr[:, :2], arr[:, 2]


def write_trace(out_dir, trace, params: Optional[Mapping] = None) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.csv"
    summary_path = out_dir / "summary.csv"
    est = trace.estimates
    rows = (
        (k, i, est[k, i, 0], est[k, i, 1])
        for k in range(est.shape[0])
        for i in range(est.shape[1])
    )
    write_table(trace_path, ["iteration", "node_id", "x_est_m", "y_est_m"], rows, params)
    write_table(
        summary_path,
        ["iteration", "mae_m", "objective"],
        ((k, m, o) for k, (m, o) in enumerate(zip(trace.mae, trace.objective))),
        params,
    )
    return trace_path, summary_path


def write_curves(path, curves: Mapping[float, np.ndarray], params=None) -> None:
    rows = ((p, k, v) for p, curve in curves.items() for k, v in enumerate(curve))
    write_table(path, ["loss_prob", "iteration", "mae_m"], rows, params)


def write_tracking(path, run, params=None) -> None:
    rows = (
        (k, t[0], t[1], e[0], e[1], n, f)
        for k, (t, e, n, f) in enumerate(zip(run.truth, run.estimates, run.n_inrange, run.flagged))
    )
    write_table(path, ["sample", "true_x", "true_y", "est_x", "est_y", "n_inrange", "flagged"], rows, params)
