"""City data: TSPLIB ingestion, circular-permutation instances, distances."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ENDOWMENT_RULE = "round-robin: city j -> salesman (j-1) mod m"


class TSPLIBParseError(ValueError):
    """Raised on malformed TSPLIB input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class City:
    id: int
    x: float
    y: float


def _check_city_list(cities: Sequence[City]) -> None:
    if len(cities) < 2:
        raise ValueError("a city list needs at least 2 entries")
    for expected, c in enumerate(cities):
        if c.id != expected:
            raise ValueError(f"city ids must be consecutive from 0, got {c.id} at {expected}")
        if not (math.isfinite(c.x) and math.isfinite(c.y)):
            raise ValueError(f"city {c.id} has a non-finite coordinate")


def parse_tsplib(text: str | Iterable[str]) -> tuple[City, ...]:
    """Parse an EUC_2D ``NODE_COORD_SECTION`` file into 0-based cities.

    ``text`` may be the whole file or an iterable of lines.  A bare body of
    ``id x y`` lines (no header) is accepted too.  Cities are returned in
    file order; TSPLIB id ``k`` becomes ``k - 1``.
    """
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]

    in_coords = False
    saw_header = False
    dimension = None
    seen: dict[int, int] = {}
    rows: list[tuple[int, float, float]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "EOF":
            break
        if not in_coords:
            if upper.startswith("NODE_COORD_SECTION"):
                in_coords = True
                continue
            if ":" in line:
                saw_header = True
                key, _, value = line.partition(":")
                key = key.strip().upper()
                value = value.strip()
                if key == "DIMENSION":
                    try:
                        dimension = int(value)
                    except ValueError:
                        raise TSPLIBParseError(f"bad DIMENSION {value!r}", lineno) from None
                elif key == "EDGE_WEIGHT_TYPE" and value.upper() != "EUC_2D":
                    raise TSPLIBParseError(f"unsupported EDGE_WEIGHT_TYPE {value!r}", lineno)
                elif key == "TYPE" and value.upper() != "TSP":
                    raise TSPLIBParseError(f"unsupported TYPE {value!r}", lineno)
                continue
            if saw_header:
                raise TSPLIBParseError(f"unexpected header line {line!r}", lineno)
            # headerless body
            in_coords = True
        if upper.endswith("_SECTION"):
            break
        parts = line.split()
        if len(parts) != 3:
            raise TSPLIBParseError(f"expected 'id x y', got {line!r}", lineno)
        try:
            node = int(parts[0])
        except ValueError:
            raise TSPLIBParseError(f"non-integer node id {parts[0]!r}", lineno) from None
        try:
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise TSPLIBParseError(f"non-numeric coordinate in {line!r}", lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise TSPLIBParseError(f"non-finite coordinate in {line!r}", lineno)
        if node in seen:
            raise TSPLIBParseError(f"duplicate node id {node} (first at line {seen[node]})", lineno)
        seen[node] = lineno
        rows.append((node, x, y))

    if saw_header and not in_coords:
        raise TSPLIBParseError("missing NODE_COORD_SECTION")
    if dimension is not None and dimension != len(rows):
        raise TSPLIBParseError(f"DIMENSION {dimension} but {len(rows)} coordinates")
    if len(rows) < 2:
        raise TSPLIBParseError("fewer than 2 cities")
    return tuple(City(i, x, y) for i, (_, x, y) in enumerate(rows))


def load_tsplib(path: str | Path) -> tuple[City, ...]:
    return parse_tsplib(Path(path).read_text())


def load_ch130() -> tuple[City, ...]:
    """The bundled TSPLIB ``ch130`` instance."""
    text = resources.files("mtsplab").joinpath("data/ch130.tsp").read_text()
    return parse_tsplib(text)


@dataclass(frozen=True)
class Instance:
    n: int
    m: int
    shift: int
    cities: tuple[City, ...]
    endowment: tuple[frozenset[int], ...] = field(repr=False)

    def __post_init__(self):
        if len(self.cities) != self.n:
            raise ValueError("cities must hold exactly n entries")
        _check_city_list(self.cities)
        if not 1 <= self.m <= self.n - 1:
            raise ValueError(f"need 1 <= m <= n-1, got m={self.m}, n={self.n}")
        if len(self.endowment) != self.m:
            raise ValueError("one endowment set per salesman")
        union: set[int] = set()
        for k, owned in enumerate(self.endowment):
            if not owned:
                raise ValueError(f"salesman {k} owns no city")
            if 0 in owned:
                raise ValueError("the depot cannot be owned")
            if union & owned:
                raise ValueError("endowments overlap")
            union |= owned
        if union != set(range(1, self.n)):
            raise ValueError("endowments must cover cities 1..n-1")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(e) for e in self.endowment)

    def coords(self) -> np.ndarray:
        return np.array([(c.x, c.y) for c in self.cities], dtype=float)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "shift": self.shift,
            "cities": [[c.x, c.y] for c in self.cities],
            "endowment": [sorted(e) for e in self.endowment],
        }

    @classmethod
    def from_json(cls, record: dict) -> "Instance":
        cities = tuple(City(i, float(x), float(y)) for i, (x, y) in enumerate(record["cities"]))
        return cls(
            n=int(record["n"]),
            m=int(record["m"]),
            shift=int(record["shift"]),
            cities=cities,
            endowment=tuple(frozenset(int(c) for c in e) for e in record["endowment"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def round_robin_endowment(n: int, m: int) -> tuple[frozenset[int], ...]:
    owned: list[set[int]] = [set() for _ in range(m)]
    for j in range(1, n):
        owned[(j - 1) % m].add(j)
    return tuple(frozenset(s) for s in owned)


def generate_instance(source: Sequence[City], n: int, m: int, shift: int) -> Instance:
    """Instance ``shift`` over the first ``n`` source cities.

    x stays with the city, y is rotated: ``y_i = Y[(i + shift) % len(source)]``.
    ``shift`` is taken modulo the source size, so ``s`` and ``s + len(source)``
    produce the same instance.
    """
    size = len(source)
    if n > size:
        raise ValueError(f"n={n} exceeds source size {size}")
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 1 <= m <= n - 1:
        raise ValueError(f"need 1 <= m <= n-1, got m={m}, n={n}")
    shift %= size
    cities = tuple(City(i, source[i].x, source[(i + shift) % size].y) for i in range(n))
    return Instance(n=n, m=m, shift=shift, cities=cities, endowment=round_robin_endowment(n, m))


def distance_matrix(inst: Instance | Sequence[City] | np.ndarray, *, tsplib_round: bool = False) -> np.ndarray:
    """Euclidean distances, full double precision.

    ``tsplib_round`` applies TSPLIB's nearest-integer EUC_2D convention.
    """
    if isinstance(inst, Instance):
        xy = inst.coords()
    elif isinstance(inst, np.ndarray):
        xy = np.asarray(inst, dtype=float)
    else:
        xy = np.array([(c.x, c.y) for c in inst], dtype=float)
    diff = xy[:, None, :] - xy[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    if tsplib_round:
        d = np.floor(d + 0.5)
    np.fill_diagonal(d, 0.0)
    return d
