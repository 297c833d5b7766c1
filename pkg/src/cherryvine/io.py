"""
File formats.

Structure files (JSON)::

    {"vertices": [1, 2, 3], "clusters": [[1, 2], [2, 3]], "edges": [[0, 1]]}

``edges`` index into ``clusters`` (0-based) and may be omitted, in which case
they are derived by :func:`graph_core.build_junction_tree`.

Model files (JSON) hold one structure entry per tree level (level 1 uses
singleton clusters) and the pair copulas::

    {"kind": "vine", "vertices": [...], "structure": [{...}, ...],
     "pair_copulas": [{"a": 1, "b": 3, "S": [2], "family": "gaussian",
                       "parameter": 0.4}, ...]}

A cherry-tree copula derived from a vine is stored as
``{"kind": "cherry_tree_copula", "level": k, "tree": {...}, "vine": {...}}``.

Data files are CSV with a header row; numbers are written with 17
significant digits.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .bicop import BivariateCopula
from .errors import InputFormatError, StructureError
from .graph_core import JunctionTree, build_junction_tree
from .vine_model import (JunctionTreeCopulaModel, VineModel, build_cherry_vine,
                         link_key, to_cherry_tree_copula, truncate)


def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None


def _field(obj, name, path):
    if not isinstance(obj, dict) or name not in obj:
        raise InputFormatError(f"{path}: missing field {name!r}")
    return obj[name]


def parse_structure(obj, path="<structure>") -> tuple:
    """Return ``(vertices, clusters, edges or None)`` from a structure object."""
    verts = _field(obj, "vertices", path)
    clusters = _field(obj, "clusters", path)
    edges = obj.get("edges")
    try:
        verts = [int(v) for v in verts]
        clusters = [[int(v) for v in c] for c in clusters]
        if edges is not None:
            edges = [(int(e[0]), int(e[1])) for e in edges]
    except (TypeError, ValueError, IndexError) as exc:
        raise InputFormatError(f"{path}: bad structure entry ({exc})") from None
    return verts, clusters, edges


def junction_tree_from_dict(obj, path="<structure>") -> JunctionTree:
    verts, clusters, edges = parse_structure(obj, path)
    if edges is None:
        return build_junction_tree(verts, clusters)
    return JunctionTree(verts, clusters, edges)


def model_to_dict(m: VineModel) -> dict:
    cops = []
    for link in m.structure.links:
        c = m.copula(link)
        cops.append({"a": link.a, "b": link.b, "S": sorted(link.given),
                     "family": c.family.value, "parameter": c.parameter})
    return {
        "kind": "vine",
        "vertices": list(m.structure.vertices),
        "structure": [t.base.to_dict() for t in m.structure.trees],
        "pair_copulas": cops,
    }


def model_from_dict(obj, path="<model>") -> VineModel:
    levels = _field(obj, "structure", path)
    trees = [junction_tree_from_dict(level, f"{path} level {i + 1}")
             for i, level in enumerate(levels)]
    structure = build_cherry_vine(trees)
    cops = {}
    for entry in _field(obj, "pair_copulas", path):
        try:
            key = link_key(entry["a"], entry["b"], entry.get("S", []))
            family = entry["family"]
            param = entry.get("parameter")
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}: bad pair copula entry {entry!r} ({exc})") from None
        if key in cops:
            raise StructureError(f"{path}: duplicate pair copula for {entry!r}")
        cops[key] = BivariateCopula(family, param)
    return VineModel(structure, cops)


def cherry_form_to_dict(m: VineModel, k: int) -> dict:
    jm = to_cherry_tree_copula(m, k)
    return {"kind": "cherry_tree_copula", "level": k,
            "tree": jm.tree.to_dict(), "vine": model_to_dict(m)}


def load_model(path):
    """Load a vine model or a cherry-tree copula file.

    Returns ``(vine, cherry)``: ``cherry`` is a
    :class:`JunctionTreeCopulaModel` for cherry-tree files, else ``None``.
    For cherry-tree files ``vine`` is the truncated source vine.
    """
    obj = read_json(path)
    kind = obj.get("kind", "vine") if isinstance(obj, dict) else None
    if kind == "vine":
        return model_from_dict(obj, str(path)), None
    if kind == "cherry_tree_copula":
        vine = model_from_dict(_field(obj, "vine", path), str(path))
        k = int(_field(obj, "level", path))
        jm = to_cherry_tree_copula(vine, k)
        stored = junction_tree_from_dict(_field(obj, "tree", path), str(path))
        if set(stored.clusters) != set(jm.tree.clusters):
            raise StructureError(f"{path}: stored tree does not match the vine at level {k}")
        return truncate(vine, k), jm
    raise InputFormatError(f"{path}: unknown model kind {kind!r}")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def read_csv(path) -> tuple:
    """Read a numeric CSV with a header row.  Returns ``(header, array)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    data = []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise InputFormatError(
                f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        vals = []
        for c, cell in enumerate(row, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise InputFormatError(
                    f"{path}: non-numeric value {cell!r} at row {r}, column {c}") from None
        data.append(vals)
    if not data:
        raise InputFormatError(f"{path}: no data rows")
    return header, np.array(data, dtype=float)


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.atleast_2d(rows):
        buf.write(",".join(format(float(x), ".17g") for x in row) + "\n")
    return buf.getvalue()
