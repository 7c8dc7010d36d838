"""Four-objective Pareto archive over feasible trials.

Objectives: accuracy (maximized), inference time, training time and energy
(minimized).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def objectives(trial) -> np.ndarray:
    m = trial.metrics
    return np.array([-m.accuracy, m.inference_time_ms, m.train_time_s, m.energy_J])


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


@dataclass
class ParetoFront:
    members: list = field(default_factory=list)  # TrialRecords, in insertion order

    @property
    def indices(self) -> list[int]:
        return [t.index for t in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, trial) -> bool:
        return trial.index in self.indices


def pareto_insert(front: ParetoFront, trial) -> ParetoFront:
    """Return the front after offering ``trial``; infeasible trials never enter.

    A trial tied with a member on all four objectives is rejected, so the
    earlier trial is kept.
    """
    if not trial.feasible:
        return front
    f = objectives(trial)
    kept = []
    for member in front.members:
        g = objectives(member)
        if dominates(g, f) or np.array_equal(g, f):
            return front
        if not dominates(f, g):
            kept.append(member)
    return ParetoFront(kept + [trial])


def brute_force_front(trials) -> list[int]:
    """O(n^2) reference: indices of feasible trials no other feasible trial dominates."""
    feasible = [t for t in trials if t.feasible]
    out = []
    for t in feasible:
        f = objectives(t)
        beaten = False
        for o in feasible:
            g = objectives(o)
            if dominates(g, f) or (o.index < t.index and np.array_equal(g, f)):
                beaten = True
                break
        if not beaten:
            out.append(t.index)
    return sorted(out)
