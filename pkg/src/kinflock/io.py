"""CSV/JSON serialization.  All floating point numbers are written with 17
significant digits so outputs round-trip and byte-compare across runs."""

from __future__ import annotations

import json
import os

import numpy as np


def fmt(x):
    """17-significant-digit decimal rendering of a float."""
    return f"{float(x):.17g}"


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_particle_snapshots(path, snapshots, steps):
    """Snapshot CSV: step,t,id,x0..,v0..,mass,density_value,phase_volume."""
    dim = snapshots[0].dim if snapshots else 1
    header = (["step", "t", "id"]
              + [f"x{k}" for k in range(dim)]
              + [f"v{k}" for k in range(dim)]
              + ["mass", "density_value", "phase_volume"])

    def rows():
        for step, ens in zip(steps, snapshots):
            for i in range(ens.n):
                yield ([str(step), fmt(ens.t), str(i)]
                       + [fmt(c) for c in ens.x[i]]
                       + [fmt(c) for c in ens.v[i]]
                       + [fmt(ens.mass[i]), fmt(ens.density_value[i]),
                          fmt(ens.phase_volume[i])])

    _write_rows(path, header, rows())


def write_agent_snapshots(path, snapshots, steps):
    dim = snapshots[0].dim if snapshots else 1
    header = (["step", "t", "id"]
              + [f"x{k}" for k in range(dim)]
              + [f"v{k}" for k in range(dim)])

    def rows():
        for step, st in zip(steps, snapshots):
            for i in range(st.n):
                yield ([str(step), fmt(st.t), str(i)]
                       + [fmt(c) for c in st.positions[i]]
                       + [fmt(c) for c in st.velocities[i]])

    _write_rows(path, header, rows())


def write_heading_snapshots(path, snapshots, steps):
    header = ["step", "t", "id", "x0", "x1", "heading"]

    def rows():
        for step, st in zip(steps, snapshots):
            for i in range(st.n):
                yield ([str(step), fmt(st.t), str(i),
                        fmt(st.positions[i][0]), fmt(st.positions[i][1]),
                        fmt(st.headings[i])])

    _write_rows(path, header, rows())


def write_grid_snapshots(path, snapshots, steps):
    """Grid snapshot CSV: t,x,v,f — one row per cell, x-major then v."""
    header = ["t", "x", "v", "f"]

    def rows():
        for _, grid in zip(steps, snapshots):
            for ix, x in enumerate(grid.x_nodes):
                for iv, v in enumerate(grid.v_nodes):
                    yield [fmt(grid.t), fmt(x), fmt(v), fmt(grid.values[ix, iv])]

    _write_rows(path, header, rows())


def write_field_csv(path, grid):
    """Field CSV: time node, spatial node coordinates, field components."""
    dim = grid.dim
    header = (["time"] + [f"x{k}" for k in range(dim)]
              + [f"E{k}" for k in range(dim)])
    nodes = grid.node_points
    flat = grid.values.reshape(len(grid.times), len(nodes), dim)

    def rows():
        for k, t in enumerate(grid.times):
            for m, pt in enumerate(nodes):
                yield ([fmt(t)] + [fmt(c) for c in pt]
                       + [fmt(c) for c in flat[k, m]])

    _write_rows(path, header, rows())


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def write_report(out_dir, report):
    """diagnostics.json plus a flat diagnostics.csv of the time series."""
    doc = _jsonify(report.to_dict())
    with open(os.path.join(out_dir, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    records = report.records
    if records:
        keys = sorted({k for rec in records for k in rec})
        rows = ([fmt(rec[k]) if isinstance(rec.get(k), (int, float, np.floating))
                 else str(rec.get(k, "")) for k in keys] for rec in records)
        _write_rows(os.path.join(out_dir, "diagnostics.csv"), keys, rows)
