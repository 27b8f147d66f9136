from __future__ import annotations

import math
import time

# Power of two so that step counts convert to dyadic milliseconds: sums of
# such durations are exact in binary floating point.
STEPS_PER_MS = 1024


class Budget:
    """Deadline and work meter for one solver call.

    In wall-clock mode the call's duration is measured with ``perf_counter``.
    In deterministic mode it is ``steps / STEPS_PER_MS`` where ``steps`` counts
    elementary DP relaxations / search nodes, so durations are reproducible
    across machines.

    Solvers ask ``afford(work)`` before each chunk; a ``False`` answer means the
    chunk would run past the deadline and the solver must return its incumbent.
    """

    def __init__(self, deadline_ms: float | None = None, *, deterministic: bool = False):
        if deadline_ms is not None:
            if math.isnan(deadline_ms) or deadline_ms < 0:
                raise ValueError(f"deadline must be non-negative, got {deadline_ms}")
            if math.isinf(deadline_ms):
                deadline_ms = None
        self.deadline_ms = deadline_ms
        self.deterministic = deterministic
        self.steps = 0
        self.exhausted = False
        self._t0 = time.perf_counter()

    @classmethod
    def unbounded(cls, *, deterministic: bool = False) -> "Budget":
        return cls(None, deterministic=deterministic)

    def restart(self) -> "Budget":
        self.steps = 0
        self.exhausted = False
        self._t0 = time.perf_counter()
        return self

    def elapsed_ms(self) -> float:
        if self.deterministic:
            return self.steps / STEPS_PER_MS
        return (time.perf_counter() - self._t0) * 1000.0

    def remaining_ms(self) -> float:
        if self.deadline_ms is None:
            return math.inf
        return max(0.0, self.deadline_ms - self.elapsed_ms())

    def fits(self, steps: int) -> bool:
        """Would ``steps`` more work end before the deadline?  No side effects."""
        if self.exhausted:
            return False
        if self.deadline_ms is None:
            return True
        if self.deterministic:
            return (self.steps + steps) / STEPS_PER_MS <= self.deadline_ms
        elapsed = self.elapsed_ms()
        # predict the chunk from this call's observed rate
        rate = elapsed / self.steps if self.steps else 0.0
        return elapsed + rate * steps < self.deadline_ms

    def afford(self, steps: int) -> bool:
        """Charge ``steps`` of work if it fits; otherwise the budget is spent."""
        if not self.fits(steps):
            self.exhausted = True
            return False
        self.steps += steps
        return True

    def __repr__(self) -> str:
        mode = "deterministic" if self.deterministic else "wall"
        return f"Budget(deadline_ms={self.deadline_ms}, {mode}, steps={self.steps})"
