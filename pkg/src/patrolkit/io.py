"""CSV and JSON artifact formats.

All files are plain CSV with fixed headers. Floats are written with
``repr`` so values round-trip bit-exactly and re-running a command with
the same inputs produces byte-identical artifacts.

Formats:
    cells.csv         cell_id,x,y,mask,is_post,f_1,...,f_k
    waypoints.csv     patrol_id,x_km,y_km,timestamp_iso8601
    observations.csv  x_km,y_km,timestamp_iso8601,category
    dataset.csv       t,cell_id,effort_km,label,prev_effort_km,f_1..f_k
    riskmap.csv       cell_id,effort_level,prob,var
    fieldtest.csv     group,obs_cells,patrolled_cells,effort_km
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .grid import GridError, ObservationLog, ParkGrid, PatrolDataset, WaypointTrack, assemble_dataset


def parse_timestamp(text: str) -> float:
    """ISO-8601 timestamp to epoch seconds; naive times are taken as UTC."""
    dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(t_seconds: float) -> str:
    return datetime.fromtimestamp(t_seconds, tz=timezone.utc).isoformat()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_cells_csv(path, grid: ParkGrid) -> None:
    header = ["cell_id", "x", "y", "mask", "is_post"] + list(grid.feature_names)
    posts = set(grid.patrol_posts)
    rows = []
    for cid in range(grid.n_cells):
        ix, iy = grid.cell_xy(cid)
        rows.append([cid, ix, iy, int(grid.mask[cid]), int(cid in posts)]
                    + list(grid.features[cid]))
    _write_rows(path, header, rows)


def read_cells_csv(path, cell_size_km: float = 1.0) -> ParkGrid:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["cell_id", "x", "y", "mask", "is_post"]
        if header[: len(expected)] != expected:
            raise GridError(f"bad cells.csv header: {header[:5]}")
        feature_names = header[len(expected):]
        rows = [row for row in reader if row]
    if not rows:
        raise GridError("cells.csv contains no cells")
    width = max(int(r[1]) for r in rows) + 1
    height = max(int(r[2]) for r in rows) + 1
    n = width * height
    if len(rows) != n:
        raise GridError(f"cells.csv must list all {n} cells of the bounding rectangle")
    feats = np.zeros((n, len(feature_names)))
    mask = np.zeros(n, dtype=bool)
    posts = []
    for r in rows:
        cid = int(r[0])
        if cid != int(r[2]) * width + int(r[1]):
            raise GridError(f"cell_id {cid} inconsistent with (x={r[1]}, y={r[2]})")
        mask[cid] = bool(int(r[3]))
        if int(r[4]):
            posts.append(cid)
        feats[cid] = [float(v) for v in r[5:]]
    return ParkGrid(width=width, height=height, features=feats,
                    feature_names=tuple(feature_names), patrol_posts=tuple(sorted(posts)),
                    mask=mask, cell_size_km=cell_size_km)


def write_waypoints_csv(path, tracks: list[WaypointTrack]) -> None:
    rows = []
    for tr in tracks:
        for x, y, t in tr.points:
            rows.append([tr.patrol_id, x, y, format_timestamp(t)])
    _write_rows(path, ["patrol_id", "x_km", "y_km", "timestamp_iso8601"], rows)


def read_waypoints_csv(path) -> list[WaypointTrack]:
    by_patrol: dict[str, list[tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            by_patrol.setdefault(row["patrol_id"], []).append(
                (float(row["x_km"]), float(row["y_km"]), parse_timestamp(row["timestamp_iso8601"]))
            )
    return [WaypointTrack(patrol_id=pid, points=tuple(pts)) for pid, pts in by_patrol.items()]


def write_observations_csv(path, log: ObservationLog) -> None:
    rows = [[x, y, format_timestamp(t), cat] for x, y, t, cat in log.records]
    _write_rows(path, ["x_km", "y_km", "timestamp_iso8601", "category"], rows)


def read_observations_csv(path) -> ObservationLog:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append((float(row["x_km"]), float(row["y_km"]),
                            parse_timestamp(row["timestamp_iso8601"]), row["category"]))
    return ObservationLog(records=tuple(records))


def write_dataset_csv(path, ds: PatrolDataset) -> None:
    header = ["t", "cell_id", "effort_km", "label", "prev_effort_km"] + list(ds.grid.feature_names)
    rows = []
    for t in range(ds.num_timesteps):
        for cid in range(ds.grid.n_cells):
            rows.append([t, cid, ds.effort[t, cid], int(ds.labels[t, cid]),
                         ds.design_matrix[t, cid, -1]] + list(ds.grid.features[cid]))
    _write_rows(path, header, rows)


def read_dataset_csv(path, grid: ParkGrid) -> PatrolDataset:
    """Rebuild a dataset from dataset.csv; features come from the grid."""
    cells = {}
    max_t = -1
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t, cid = int(row["t"]), int(row["cell_id"])
            cells[(t, cid)] = (float(row["effort_km"]), int(row["label"]))
            max_t = max(max_t, t)
    if max_t < 0:
        raise GridError("dataset.csv contains no rows")
    effort = np.zeros((max_t + 1, grid.n_cells))
    labels = np.zeros((max_t + 1, grid.n_cells), dtype=np.int8)
    for (t, cid), (e, y) in cells.items():
        effort[t, cid] = e
        labels[t, cid] = y
    return assemble_dataset(grid, effort, labels)


def write_riskmap_csv(path, riskmap) -> None:
    rows = []
    for j, level in enumerate(riskmap.effort_levels):
        for cid in riskmap.grid.masked_ids():
            rows.append([int(cid), level, riskmap.prob[j, cid], riskmap.var[j, cid]])
    _write_rows(path, ["cell_id", "effort_level", "prob", "var"], rows)


def read_fieldtest_csv(path) -> list[tuple[str, int, int, float]]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((row["group"], int(row["obs_cells"]),
                         int(row["patrolled_cells"]), float(row["effort_km"])))
    return rows


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
