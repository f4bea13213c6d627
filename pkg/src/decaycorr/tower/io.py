"""
Versioned tower files.

The header is JSON (kind, parameters, cutoff, remainder and truncation mass,
counts). The cell table and, for induced towers, the node table live either
inline in the same JSON document or in a sibling ``.npz`` file named by the
header's ``"tables"`` entry.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .. import systems as sysm
from ..errors import UsageError
from .laws import law_from_dict, law_to_dict
from .model import InducedStructure, TowerModel

FORMAT = "decaycorr-tower"
VERSION = 1

_CELL_KEYS = ("lo", "hi", "width", "R", "weight", "node", "symbol")
_NODE_KEYS = ("node_lo", "node_hi", "node_width", "node_m", "node_branch", "node_parent",
              "run_lo", "run_width")


def tower_header(tower: TowerModel) -> dict:
    head = {
        "format": FORMAT,
        "version": VERSION,
        "kind": tower.kind,
        "cutoff": int(tower.cutoff),
        "remainder_mass": float(tower.remainder),
        "truncation_mass": float(tower.meta.get("truncation", 0.0)),
        "n_cells": tower.n_cells,
        "kac_mass": float(tower.kac_mass),
    }
    if tower.kind == "induced":
        head["system"] = sysm.system_to_dict(tower.system)
        head["min_width"] = float(tower.meta.get("min_width", 0.0))
    else:
        head["law"] = law_to_dict(tower.law)
        head["branching"] = int(tower.branching)
    return head


def _tables(tower: TowerModel) -> dict:
    t = {"R": tower.R, "weight": tower.weights}
    if tower.kind == "induced":
        st = tower.structure
        t.update(lo=tower.lo, hi=tower.hi, width=tower.width, node=tower.cell_node,
                 node_lo=st.node_lo, node_hi=st.node_hi, node_width=st.node_width,
                 node_m=st.node_m, node_branch=st.node_branch, node_parent=st.node_parent,
                 run_lo=st.run_lo, run_width=st.run_width)
    else:
        t["symbol"] = tower.symbol
    return t


def _to_list(a):
    a = np.asarray(a)
    if a.dtype.kind in "iu":
        return [int(v) for v in a]
    return [float(v) for v in a]  # repr of a Python float round-trips exactly


def write_tower(tower: TowerModel, path, binary: bool = False) -> None:
    """Write ``tower`` to ``path`` (JSON); with ``binary`` the tables go to ``path`` + ``.npz``."""
    path = os.fspath(path)
    head = tower_header(tower)
    tables = _tables(tower)
    if binary:
        npz = path + ".npz"
        with open(npz, "wb") as fh:
            np.savez(fh, **{k: np.asarray(v) for k, v in tables.items()})
        head["tables"] = os.path.basename(npz)
    else:
        head["tables"] = {k: _to_list(v) for k, v in tables.items()}
    with open(path, "w") as fh:
        json.dump(head, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_tower(path) -> TowerModel:
    path = os.fspath(path)
    with open(path) as fh:
        head = json.load(fh)
    if head.get("format") != FORMAT:
        raise UsageError(f"{path} is not a tower file")
    if head.get("version") != VERSION:
        raise UsageError(f"unsupported tower file version {head.get('version')}")
    tables = head["tables"]
    if isinstance(tables, str):
        with np.load(os.path.join(os.path.dirname(path), tables)) as z:
            tables = {k: z[k] for k in z.files}
    tables = {k: np.asarray(v) for k, v in tables.items()}
    if head["kind"] == "induced":
        system = sysm.system_from_dict(head["system"])
        st = InducedStructure(
            d=system.d,
            node_lo=tables["node_lo"].astype(float), node_hi=tables["node_hi"].astype(float),
            node_width=tables["node_width"].astype(float),
            node_m=tables["node_m"].astype(np.int64), node_branch=tables["node_branch"].astype(np.int64),
            node_parent=tables["node_parent"].astype(np.int64),
            run_lo=tables["run_lo"].astype(float), run_width=tables["run_width"].astype(float),
        )
        return TowerModel(
            kind="induced", R=tables["R"], weights=tables["weight"].astype(float),
            remainder=float(head["remainder_mass"]), system=system, cutoff=int(head["cutoff"]),
            lo=tables["lo"].astype(float), hi=tables["hi"].astype(float),
            width=tables["width"].astype(float), cell_node=tables["node"].astype(np.int64),
            structure=st,
            meta={"depth": int(head["cutoff"]), "min_width": head.get("min_width", 0.0),
                  "n_nodes": len(st.node_m)},
        )
    return TowerModel(
        kind="synthetic", R=tables["R"], weights=tables["weight"].astype(float),
        remainder=float(head["remainder_mass"]), law=law_from_dict(head["law"]),
        branching=int(head["branching"]), cutoff=int(head["cutoff"]),
        symbol=tables["symbol"].astype(np.int64),
        meta={"truncation": float(head["truncation_mass"])},
    )
