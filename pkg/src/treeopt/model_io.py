"""Reading and writing ensemble documents.

The native format is one JSON document::

    {
      "format": "tree-ensemble",
      "version": 1,
      "variables": [
        {"name": "x1", "kind": "numeric", "split_points": [0.5, 2.0]},
        {"name": "c1", "kind": "categorical", "n_levels": 3}
      ],
      "weights": [1.0],
      "trees": [{"nodes": [
        {"id": 0, "kind": "split", "var": 0, "threshold": 0.5, "left": 1, "right": 2},
        {"id": 1, "kind": "leaf", "value": 0.25},
        {"id": 2, "kind": "leaf", "value": -1.0}
      ]}]
    }

"variables" may be omitted when every variable is numeric; declarations
are then inferred from the thresholds actually used. A line-oriented
text dump (one node per line, 0-based variable indices, 1-based levels)
converts into the same document shape.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import LoadError
from .trees import CATEGORICAL, NUMERIC, Ensemble, Variable, assemble

FORMAT_NAME = "tree-ensemble"
FORMAT_VERSION = 1


def ensemble_to_dict(ensemble: Ensemble) -> dict:
    schema = ensemble.schema
    variables = []
    for v in schema.variables:
        if v.kind == NUMERIC:
            variables.append(
                {"name": v.name, "kind": v.kind, "split_points": list(v.split_points)}
            )
        else:
            variables.append({"name": v.name, "kind": v.kind, "n_levels": v.n_levels})
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "variables": variables,
        "weights": [float(w) for w in ensemble.weights],
        "trees": [{"nodes": t.to_raw(schema)} for t in ensemble.trees],
    }


def save_ensemble(ensemble: Ensemble, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(ensemble_to_dict(ensemble), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _variables_from(doc) -> list[Variable] | None:
    if "variables" not in doc or doc["variables"] is None:
        return None
    raw = doc["variables"]
    if not isinstance(raw, list):
        raise LoadError("bad-variable", "variables must be a list")
    out = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or "name" not in item or "kind" not in item:
            raise LoadError("bad-variable", f"variable {k}: needs name and kind")
        kind = item["kind"]
        if kind == NUMERIC:
            pts = item.get("split_points", [])
            try:
                pts = tuple(float(a) for a in pts)
            except (TypeError, ValueError):
                raise LoadError("bad-variable", f"variable {k}: bad split points") from None
            out.append(Variable(str(item["name"]), NUMERIC, split_points=pts))
        elif kind == CATEGORICAL:
            levels = item.get("n_levels")
            if not isinstance(levels, int) or isinstance(levels, bool):
                raise LoadError("bad-variable", f"variable {k}: bad level count")
            out.append(Variable(str(item["name"]), CATEGORICAL, n_levels=levels))
        else:
            raise LoadError("bad-variable", f"variable {k}: unknown kind {kind!r}")
    return out


def ensemble_from_dict(doc) -> Ensemble:
    if not isinstance(doc, dict):
        raise LoadError("bad-document", "top level must be an object")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise LoadError("bad-format", f"unknown format {doc.get('format')!r}")
    version = doc.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise LoadError("bad-version", f"unsupported version {version!r}")
    trees = doc.get("trees")
    if not isinstance(trees, list) or not trees:
        raise LoadError("bad-document", "trees must be a nonempty list")
    raw_trees = []
    for k, t in enumerate(trees):
        if not isinstance(t, dict) or not isinstance(t.get("nodes"), list):
            raise LoadError("bad-document", f"tree {k}: needs a node list")
        raw_trees.append(t["nodes"])
    weights = doc.get("weights")
    if not isinstance(weights, list):
        raise LoadError("bad-document", "weights must be a list")
    return assemble(raw_trees, weights, _variables_from(doc))


def load_ensemble(path) -> Ensemble:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise LoadError("unreadable", f"{path}: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise LoadError("bad-json", f"{path}: {e}") from None
    return ensemble_from_dict(doc)


def load_points(path) -> np.ndarray:
    """Delimited rows of raw input vectors (comma or whitespace separated)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise LoadError("unreadable", f"{path}: {e}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.replace(",", " ").split()
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise LoadError("bad-points", f"{path}:{lineno}: {line!r}") from None
    if not rows:
        raise LoadError("bad-points", f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LoadError("bad-points", f"{path}: ragged rows")
    return np.array(rows, dtype=float)


# -- text dump conversion ------------------------------------------------
#
# tree [weight]
# <id> split <var> <= <threshold> -> <left> <right>
# <id> split <var> in <l1,l2,...> -> <left> <right>
# <id> leaf <value>
# categorical <var> <n_levels>

_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RE_TREE = re.compile(rf"^tree(?:\s+({_FLOAT}))?$")
_RE_CAT = re.compile(r"^categorical\s+(\d+)\s+(\d+)$")
_RE_NUM_SPLIT = re.compile(rf"^(\d+)\s+split\s+(\d+)\s*<=\s*({_FLOAT})\s*->\s*(\d+)\s+(\d+)$")
_RE_CAT_SPLIT = re.compile(r"^(\d+)\s+split\s+(\d+)\s+in\s+(\d+(?:\s*,\s*\d+)*)\s*->\s*(\d+)\s+(\d+)$")
_RE_LEAF = re.compile(rf"^(\d+)\s+leaf\s+({_FLOAT})$")


def parse_text_dump(text: str) -> dict:
    trees: list[list[dict]] = []
    weights: list[float] = []
    cat_levels: dict[int, int] = {}
    cat_used: set[int] = set()
    num_points: dict[int, set] = {}

    def need_tree(lineno):
        if not trees:
            raise LoadError("bad-dump-structure", f"line {lineno}: node before any tree line")

    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        m = _RE_TREE.match(body)
        if m:
            trees.append([])
            weights.append(float(m.group(1)) if m.group(1) else 1.0)
            continue
        m = _RE_CAT.match(body)
        if m:
            cat_levels[int(m.group(1))] = int(m.group(2))
            continue
        m = _RE_NUM_SPLIT.match(body)
        if m:
            need_tree(lineno)
            nid, var, thr, left, right = m.groups()
            num_points.setdefault(int(var), set()).add(float(thr))
            trees[-1].append(
                {"id": int(nid), "kind": "split", "var": int(var),
                 "threshold": float(thr), "left": int(left), "right": int(right)}
            )
            continue
        m = _RE_CAT_SPLIT.match(body)
        if m:
            need_tree(lineno)
            nid, var, levels, left, right = m.groups()
            cat_used.add(int(var))
            trees[-1].append(
                {"id": int(nid), "kind": "split", "var": int(var),
                 "level_set": [int(l) for l in levels.replace(",", " ").split()],
                 "left": int(left), "right": int(right)}
            )
            continue
        m = _RE_LEAF.match(body)
        if m:
            need_tree(lineno)
            trees[-1].append({"id": int(m.group(1)), "kind": "leaf",
                              "value": float(m.group(2))})
            continue
        raise LoadError("bad-dump-line", f"line {lineno}: {line!r}")

    if not trees:
        raise LoadError("bad-dump-structure", "no tree lines")
    missing = sorted(cat_used - set(cat_levels))
    if missing:
        raise LoadError(
            "bad-dump-structure",
            f"variables {missing} split on level sets but have no categorical line",
        )
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
           "weights": weights, "trees": [{"nodes": nodes} for nodes in trees]}
    if cat_levels:
        n_vars = max(list(cat_levels) + list(num_points)) + 1
        variables = []
        for i in range(n_vars):
            if i in cat_levels:
                variables.append({"name": f"v{i + 1}", "kind": CATEGORICAL,
                                  "n_levels": cat_levels[i]})
            else:
                variables.append({"name": f"v{i + 1}", "kind": NUMERIC,
                                  "split_points": sorted(num_points.get(i, ()))})
        doc["variables"] = variables
    return doc


def convert_text_dump(in_path, out_path) -> Ensemble:
    in_path = Path(in_path)
    try:
        text = in_path.read_text()
    except OSError as e:
        raise LoadError("unreadable", f"{in_path}: {e}") from None
    doc = parse_text_dump(text)
    ens = ensemble_from_dict(doc)  # full validation before writing anything
    with Path(out_path).open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ens
