"""Discrete fading-gain distributions.

Marginal distributions live on a strictly positive, strictly increasing
support (so E[1/H] is always finite), and joint distributions are kept as an
explicit list of states.  The `discretize_exponential` constructor reproduces
the usual discretized-Rayleigh setup: bins of a fixed width whose mass is
assigned to the right endpoint, with the last point absorbing the tail.

All objects are immutable after construction and safe to share between
threads or processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameterError

PROB_TOL_MARGINAL = 1e-12
PROB_TOL_JOINT = 1e-10


@dataclass(frozen=True)
class MarginalFading:
    """Per-user discrete fading distribution.

    Attributes:
        user: index of the receiver this marginal belongs to.
        support: gain values, strictly positive and strictly increasing.
        probs: probability of each gain, summing to one.
        coherence_slots: slots per coherence block; 1 means i.i.d. per slot.
            Only the simulator consumes values larger than 1.
    """

    user: int
    support: np.ndarray
    probs: np.ndarray
    coherence_slots: int = 1

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        support.setflags(write=False)
        probs.setflags(write=False)
        if support.ndim != 1 or probs.shape != support.shape or support.size == 0:
            raise InvalidParameterError("support and probs must be equal-length 1-D arrays")
        if np.any(support <= 0.0):
            raise InvalidParameterError("all support gains must be strictly positive")
        if np.any(np.diff(support) <= 0.0):
            raise InvalidParameterError("support must be strictly increasing")
        if np.any(probs < 0.0):
            raise InvalidParameterError("probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > PROB_TOL_MARGINAL:
            raise InvalidParameterError(
                f"probabilities must sum to 1 within {PROB_TOL_MARGINAL}, got {probs.sum()!r}"
            )
        if int(self.coherence_slots) < 1:
            raise InvalidParameterError("coherence_slots must be a positive integer")
        object.__setattr__(self, "coherence_slots", int(self.coherence_slots))

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "support": self.support.tolist(),
            "probs": self.probs.tolist(),
            "coherence_slots": self.coherence_slots,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalFading":
        return cls(
            user=int(d["user"]),
            support=np.asarray(d["support"], dtype=float),
            probs=np.asarray(d["probs"], dtype=float),
            coherence_slots=int(d.get("coherence_slots", 1)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MarginalFading":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class JointFadingDistribution:
    """Joint channel-gain distribution over an explicit state list.

    `gains` has shape (num_states, num_users); `probs` has shape
    (num_states,).  When built by `joint_product` the originating marginals
    are retained so a simulator can redraw per-user gain sequences with their
    own coherence blocks; `state_index` then recovers the row of a joint
    state from per-user support indices (row-major, user 0 slowest).
    """

    num_users: int
    gains: np.ndarray
    probs: np.ndarray
    marginals: tuple[MarginalFading, ...] | None = field(default=None)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if gains.ndim != 2 or gains.shape[1] != self.num_users:
            raise InvalidParameterError("gains must have shape (num_states, num_users)")
        if probs.shape != (gains.shape[0],):
            raise InvalidParameterError("probs must have one entry per state")
        if np.any(gains <= 0.0):
            raise InvalidParameterError("all gains must be strictly positive")
        if np.any(probs < 0.0):
            raise InvalidParameterError("state probabilities must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > PROB_TOL_JOINT:
            raise InvalidParameterError(
                f"state probabilities must sum to 1 within {PROB_TOL_JOINT}"
            )
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "probs", probs)
        gains.setflags(write=False)
        probs.setflags(write=False)

    @property
    def num_states(self) -> int:
        return self.gains.shape[0]

    @property
    def states(self):
        """Iterate (gain vector, probability) pairs."""
        for k in range(self.num_states):
            yield self.gains[k], float(self.probs[k])

    @classmethod
    def from_states(cls, states: Sequence[tuple[Sequence[float], float]]) -> "JointFadingDistribution":
        if not states:
            raise InvalidParameterError("at least one state is required")
        gains = np.asarray([list(g) for g, _ in states], dtype=float)
        probs = np.asarray([p for _, p in states], dtype=float)
        return cls(num_users=gains.shape[1], gains=gains, probs=probs)

    def state_index(self, support_indices: np.ndarray) -> np.ndarray:
        """Map per-user support indices (..., num_users) to joint state rows."""
        if self.marginals is None:
            raise InvalidParameterError("state_index requires a product-built distribution")
        sizes = [m.support.size for m in self.marginals]
        idx = np.asarray(support_indices)
        return np.ravel_multi_index(tuple(idx[..., u] for u in range(self.num_users)), sizes)

    def to_dict(self) -> dict:
        d = {
            "num_users": self.num_users,
            "gains": self.gains.tolist(),
            "probs": self.probs.tolist(),
        }
        if self.marginals is not None:
            d["marginals"] = [m.to_dict() for m in self.marginals]
        return d


def discretize_exponential(mean_gain: float, step: float, cap: float, user: int = 0,
                           coherence_slots: int = 1) -> MarginalFading:
    """Discretize an exponential gain law onto the grid {step, 2*step, ..., cap}.

    The mass of bin (h-step, h] goes to its right endpoint h; the zero bin
    [0, step) is merged into the first point so the support stays positive;
    everything above cap-step is absorbed by the last point.

    Args:
        mean_gain: mean of the underlying exponential distribution.
        step: bin width.
        cap: largest support point; must be a positive multiple of step.
        user: receiver index stored on the marginal.
        coherence_slots: coherence-block length in slots.

    Returns:
        MarginalFading with probabilities that sum to one by construction.
    """
    if mean_gain <= 0.0 or step <= 0.0 or cap <= 0.0:
        raise InvalidParameterError("mean_gain, step and cap must be positive")
    n = int(round(cap / step))
    if n < 1 or abs(n * step - cap) > 1e-9 * max(1.0, cap):
        raise InvalidParameterError("cap must be a positive multiple of step")
    support = np.arange(1, n + 1, dtype=float) * step
    # survival at the left edge of each bin, with 0 appended past the cap,
    # so probabilities telescope to exactly 1
    edges = np.arange(0, n, dtype=float) * step
    survival = np.exp(-edges / mean_gain)
    survival = np.append(survival, 0.0)
    probs = survival[:-1] - survival[1:]
    return MarginalFading(user=user, support=support, probs=probs,
                          coherence_slots=coherence_slots)


def joint_product(marginals: Sequence[MarginalFading]) -> JointFadingDistribution:
    """Cartesian product of independent marginals.

    State ordering is row-major with the first marginal varying slowest,
    matching `JointFadingDistribution.state_index`.
    """
    if not marginals:
        raise InvalidParameterError("at least one marginal is required")
    supports = [m.support for m in marginals]
    grids = np.meshgrid(*supports, indexing="ij")
    gains = np.stack([g.reshape(-1) for g in grids], axis=-1)
    prob = marginals[0].probs
    for m in marginals[1:]:
        prob = np.multiply.outer(prob, m.probs)
    probs = prob.reshape(-1)
    return JointFadingDistribution(
        num_users=len(marginals), gains=gains, probs=probs, marginals=tuple(marginals)
    )


def expectation(dist: JointFadingDistribution, f: Callable[[np.ndarray], float]) -> float:
    """Expectation of a per-state function f(gain vector) under the joint law."""
    total = 0.0
    for gains, p in dist.states:
        total += p * float(f(gains))
    return total
