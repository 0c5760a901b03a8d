"""CSV and problem-file readers.

Schemas (written by `dtcbf verify --dump-subdomains/--dump-policy`):

    subdomains: id,parent,case,x1_lb,x1_ub,...,xn_lb,xn_ub,bound
    policy:     id,x1_lb,x1_ub,...,xn_lb,xn_ub,u1,...,um
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass


class PlotviewError(Exception):
    pass


CASES = ("A", "B", "C1", "C2", "terminal")


@dataclass(frozen=True)
class SubdomainRecord:
    id: int
    parent: int | None
    case: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    bound: float | None


@dataclass(frozen=True)
class PolicyRecord:
    id: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    u: tuple[float, ...]


def _box_dim(fieldnames: list[str]) -> int:
    n = 0
    while f"x{n + 1}_lb" in fieldnames and f"x{n + 1}_ub" in fieldnames:
        n += 1
    if n == 0:
        raise PlotviewError("no x<i>_lb/x<i>_ub columns found")
    return n


def _box(row: dict, n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    lower = tuple(float(row[f"x{i}_lb"]) for i in range(1, n + 1))
    upper = tuple(float(row[f"x{i}_ub"]) for i in range(1, n + 1))
    return lower, upper


def read_subdomains(path) -> list[SubdomainRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotviewError(f"{path}: no records")
        n = _box_dim(reader.fieldnames)
        records = []
        for row in reader:
            if row["case"] not in CASES:
                raise PlotviewError(f"{path}: unknown case label {row['case']!r}")
            lower, upper = _box(row, n)
            records.append(
                SubdomainRecord(
                    id=int(row["id"]),
                    parent=None if row["parent"] in ("", "None") else int(row["parent"]),
                    case=row["case"],
                    lower=lower,
                    upper=upper,
                    bound=float(row["bound"]) if row.get("bound") else None,
                )
            )
    if not records:
        raise PlotviewError(f"{path}: no records")
    return records


def read_policy(path) -> list[PolicyRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotviewError(f"{path}: no records")
        n = _box_dim(reader.fieldnames)
        m = sum(1 for name in reader.fieldnames if re.fullmatch(r"u\d+", name))
        if m == 0:
            raise PlotviewError(f"{path}: no u<j> columns found")
        records = []
        for row in reader:
            lower, upper = _box(row, n)
            u = tuple(float(row[f"u{j}"]) for j in range(1, m + 1))
            records.append(PolicyRecord(id=int(row["id"]), lower=lower, upper=upper, u=u))
    if not records:
        raise PlotviewError(f"{path}: no records")
    return records


def read_problem(path) -> dict:
    """The slice of a problem file the renderers need: n, m, h, U, X."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlotviewError(f"cannot read problem file {path}: {exc}") from exc
    try:
        return {
            "n": int(doc["n"]),
            "m": int(doc["m"]),
            "h": str(doc["h"]),
            "U": (list(map(float, doc["U"]["lower"])), list(map(float, doc["U"]["upper"]))),
            "X": (list(map(float, doc["X"]["lower"])), list(map(float, doc["X"]["upper"]))),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise PlotviewError(f"problem file {path} is missing field {exc}") from exc
