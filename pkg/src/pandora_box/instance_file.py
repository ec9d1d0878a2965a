"""JSON instance files.

::

    {"version": 1,
     "boxes": [{"cost": 0.25, "dist": {"type": "discrete", "atoms": [[0, 0.5], [1, 0.5]]}},
               {"cost": 0.1, "dist": {"type": "pwl_cdf", "knots": [[0, 0], [1, 1]]}}]}

Unknown keys are rejected at every level so files cannot drift silently.
"""

from __future__ import annotations

import json
from pathlib import Path

from .distribution import Discrete, Distribution, PiecewiseLinearCdf
from .errors import InstanceFormatError, PandoraError
from .reservation import Box, Instance

FORMAT_VERSION = 1


def _require_keys(obj, where: str, required: set[str]) -> None:
    if not isinstance(obj, dict):
        raise InstanceFormatError(f"{where}: expected an object")
    unknown = set(obj) - required
    if unknown:
        raise InstanceFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise InstanceFormatError(f"{where}: missing field(s) {sorted(missing)}")


def dist_from_dict(obj, where: str = "dist") -> Distribution:
    if not isinstance(obj, dict) or "type" not in obj:
        raise InstanceFormatError(f"{where}.type: missing distribution type")
    kind = obj["type"]
    if kind == "discrete":
        _require_keys(obj, where, {"type", "atoms"})
        key, cls = "atoms", Discrete
    elif kind == "pwl_cdf":
        _require_keys(obj, where, {"type", "knots"})
        key, cls = "knots", PiecewiseLinearCdf
    else:
        raise InstanceFormatError(f"{where}.type: unknown distribution type {kind!r}")
    raw = obj[key]
    if not isinstance(raw, list) or not all(isinstance(p, list) and len(p) == 2 for p in raw):
        raise InstanceFormatError(f"{where}.{key}: expected a list of [value, number] pairs")
    try:
        return cls(tuple(tuple(p) for p in raw))
    except PandoraError as exc:
        raise InstanceFormatError(f"{where}.{key}: {exc}") from None


def dist_to_dict(d: Distribution) -> dict:
    if isinstance(d, Discrete):
        return {"type": "discrete", "atoms": [list(a) for a in d.atoms]}
    return {"type": "pwl_cdf", "knots": [list(k) for k in d.knots]}


def instance_from_dict(obj) -> Instance:
    _require_keys(obj, "instance", {"version", "boxes"})
    if obj["version"] != FORMAT_VERSION:
        raise InstanceFormatError(f"version: unsupported version {obj['version']!r}")
    boxes = obj["boxes"]
    if not isinstance(boxes, list) or not boxes:
        raise InstanceFormatError("boxes: expected a non-empty list")
    out = []
    for i, b in enumerate(boxes):
        where = f"boxes[{i}]"
        _require_keys(b, where, {"cost", "dist"})
        cost = b["cost"]
        if isinstance(cost, bool) or not isinstance(cost, (int, float)) or cost < 0:
            raise InstanceFormatError(f"{where}.cost: expected a number >= 0, got {cost!r}")
        out.append(Box(float(cost), dist_from_dict(b["dist"], f"{where}.dist")))
    return Instance(tuple(out))


def instance_to_dict(inst: Instance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "boxes": [{"cost": b.cost, "dist": dist_to_dict(b.dist)} for b in inst.boxes],
    }


def loads(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc}") from None
    return instance_from_dict(obj)


def dumps(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def load(path) -> Instance:
    return loads(Path(path).read_text(encoding="utf-8"))


def dump(inst: Instance, path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")
