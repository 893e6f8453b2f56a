"""CSV/JSON artifacts and the increment replay format.

Increment files are raw little-endian float64 (``<f8``), C order: the
``(steps, n)`` array of W^v increments followed by the ``(steps, n)`` array of
W^w increments. A JSON sidecar (``<file>.json``) records dt, steps, n, seed and
the byte offsets, so other implementations can replay the exact noise.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .galerkin import Geometry, TrajectoryRecord
from .noise import WienerIncrements

INCREMENT_FORMAT = "stochbidomain-increments/1"

ENERGY_COLUMNS = (
    ("t", "time"),
    ("v_sq", "||v||^2"),
    ("w_sq", "||w||^2"),
    ("eps_ui_sq", "eps ||u_i||^2"),
    ("eps_ue_sq", "eps ||u_e||^2"),
    ("grad_ui_sq", "||grad u_i||^2"),
    ("grad_ue_sq", "||grad u_e||^2"),
    ("v4", "int v^4 dx"),
    ("energy", "|C|^2 = ||v||^2 + eps||u_i||^2 + eps||u_e||^2 + ||w||^2"),
    ("consistency", "max |c - (ci_s - ce_s)/sqrt(eps)|"),
)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """RFC-4180 CSV (CRLF line ends, dot decimal, header row)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def energy_table(record: TrajectoryRecord, geometry: Geometry) -> tuple[list[str], np.ndarray]:
    f = record.functionals(geometry)
    cols = [record.times] + [f[k] for k, _ in ENERGY_COLUMNS[1:-1]] + [record.consistency_defect()]
    return [k for k, _ in ENERGY_COLUMNS], np.column_stack(cols)


def write_energy_csv(path, record: TrajectoryRecord, geometry: Geometry) -> None:
    header, table = energy_table(record, geometry)
    write_csv(path, header, table.tolist())


def write_states_csv(path, record: TrajectoryRecord) -> None:
    n = record.n
    header = ["t"] + [f"{b}_{l + 1}" for b in ("c", "ci_s", "ce_s", "a") for l in range(n)]
    write_csv(path, header, np.column_stack([record.times, record.states]).tolist())


def write_increments(path, inc: WienerIncrements) -> Path:
    """Write the binary dump and its sidecar; returns the sidecar path."""
    path = Path(path)
    dv = np.ascontiguousarray(inc.dW_v, dtype="<f8")
    dw = np.ascontiguousarray(inc.dW_w, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(dv.tobytes(order="C"))
        fh.write(dw.tobytes(order="C"))
    meta = {"format": INCREMENT_FORMAT, "dtype": "<f8", "order": "C", "dt": inc.dt, "steps": inc.steps,
            "n": inc.n, "seed": inc.seed,
            "arrays": [{"name": "dW_v", "shape": [inc.steps, inc.n], "offset": 0},
                       {"name": "dW_w", "shape": [inc.steps, inc.n], "offset": dv.nbytes}]}
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2))
    return side


def read_increments(path) -> WienerIncrements:
    path = Path(path)
    side = path.with_name(path.name + ".json")
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar {side}")
    meta = json.loads(side.read_text())
    if meta.get("format") != INCREMENT_FORMAT:
        raise ValueError(f"unknown increment format {meta.get('format')!r}")
    steps, n = int(meta["steps"]), int(meta["n"])
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != 2 * steps * n:
        raise ValueError(f"increment file holds {raw.size} values, sidecar promises {2 * steps * n}")
    dv = raw[: steps * n].reshape(steps, n).astype(float)
    dw = raw[steps * n:].reshape(steps, n).astype(float)
    return WienerIncrements(float(meta["dt"]), dv, dw, meta.get("seed"))


def provenance(config_dump: dict, master_seed: int | None, **extra) -> dict:
    from . import __version__
    out = {"package": "stochbidomain", "version": __version__, "master_seed": master_seed,
           "config": config_dump}
    out.update(extra)
    return out


def write_json(path, payload: dict) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not serializable: {type(o)}")

    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=default)
    os.replace(tmp, path)
