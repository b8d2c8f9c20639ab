"""Turn a fractional LP point into a feasible assignment and a full model point."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..costs import CostTables
from ..milp import BuildMaps, MilpModel, values_for_assignment


def round_assignment(values: dict[int, float], maps: BuildMaps,
                     tables: CostTables) -> Optional[np.ndarray]:
    """Largest x per node (lowest unit index on ties), then evict the
    lowest-valued nodes from over-full dataflow units."""
    n = tables.n
    score = np.full((n, len(tables.units)), -math.inf)
    for (nid, uid), vid in maps.x.items():
        score[tables.pos[nid], tables.upos[uid]] = values.get(vid, 0.0)
    row = np.argmax(score, axis=1)
    for u in np.flatnonzero(np.isfinite(tables.capacity)):
        members = [k for k in range(n) if row[k] == u and tables.area[k] > 0]
        members.sort(key=lambda k: (score[k, u], -k))
        used = sum(tables.area[k] for k in members)
        for k in members:
            if used <= tables.capacity[u] + 1e-9:
                break
            alt = [v for v in tables.choices[k] if not math.isfinite(tables.capacity[v])]
            if not alt:
                return None
            row[k] = max(alt, key=lambda v: (score[k, v], -v))
            used -= tables.area[k]
    return row


def make_repair(model: MilpModel, maps: BuildMaps, tables: CostTables):
    """Incumbent callback for :func:`solve_bnb`."""
    order_pos = tables.order_positions(maps.order) if maps.kind == "time" else None

    def repair(values: dict[int, float]):
        row = round_assignment(values, maps, tables)
        if row is None:
            return None
        A = row[None, :]
        if maps.kind == "device":
            obj, y0, y1 = float(tables.device_objective(A)[0]), None, None
        else:
            z, Y0, Y1 = tables.schedule(A, order_pos, maps.streaming)
            obj, y0, y1 = float(z[0]), Y0[0], Y1[0]
        if not math.isfinite(obj):
            return None
        return obj, values_for_assignment(model, maps, tables, row, obj, y0, y1)

    return repair
