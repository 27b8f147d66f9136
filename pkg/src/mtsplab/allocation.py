from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class Allocation:
    """Partition of the non-depot cities; ``groups[k]`` is salesman k's set."""

    groups: tuple[frozenset[int], ...]

    @classmethod
    def of(cls, groups: Iterable[Iterable[int]]) -> "Allocation":
        return cls(tuple(frozenset(g) for g in groups))

    @classmethod
    def from_owner(cls, owner: Mapping[int, int], m: int) -> "Allocation":
        groups: list[set[int]] = [set() for _ in range(m)]
        for city, k in owner.items():
            groups[k].add(city)
        return cls.of(groups)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def owner(self) -> dict[int, int]:
        return {c: k for k, g in enumerate(self.groups) for c in g}

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def __getitem__(self, k: int) -> frozenset[int]:
        return self.groups[k]

    def moved(self, transfers: Iterable[tuple[int, int, int]]) -> "Allocation":
        """Apply (city, from_k, to_k) transfers simultaneously."""
        groups = [set(g) for g in self.groups]
        transfers = list(transfers)
        for city, src, _ in transfers:
            if city not in groups[src]:
                raise ValueError(f"salesman {src} does not hold city {city}")
            groups[src].discard(city)
        for city, _, dst in transfers:
            groups[dst].add(city)
        return Allocation.of(groups)

    def is_partition_of(self, n: int) -> bool:
        seen: set[int] = set()
        for g in self.groups:
            if seen & g:
                return False
            seen |= g
        return seen == set(range(1, n))

    def to_json(self) -> list[list[int]]:
        return [sorted(g) for g in self.groups]

    @classmethod
    def from_json(cls, groups: Sequence[Sequence[int]]) -> "Allocation":
        return cls.of(groups)
