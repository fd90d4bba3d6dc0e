"""Category groups and per-category parameter lookup."""
from __future__ import annotations

from typing import Mapping, TypeVar

T = TypeVar("T")

VEHICLE = ("car", "truck", "bus", "trailer", "van", "construction_vehicle")
VULNERABLE = ("pedestrian", "bicycle", "motorcycle", "cyclist")
GROUPS = {"vehicle": VEHICLE, "vulnerable": VULNERABLE}
DEFAULT_KEY = "default"


def group_of(category: str) -> str:
    for name, members in GROUPS.items():
        if category in members:
            return name
    return DEFAULT_KEY


def lookup(table: Mapping[str, T], category: str) -> T:
    """Resolve ``category`` in ``table``: exact key, then its group, then ``"default"``."""
    if category in table:
        return table[category]
    group = group_of(category)
    if group in table:
        return table[group]
    if DEFAULT_KEY in table:
        return table[DEFAULT_KEY]
    raise KeyError(f"no entry for category {category!r} and no 'default' fallback")
