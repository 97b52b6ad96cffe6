"""Node automata for the election protocols, looked up by string key."""
from __future__ import annotations

from ..simcore import Protocol
from .deterministic import Deterministic, deterministic_le, phase_count
from .randomized import (
    KnownNRandomized,
    RandomizedLocal,
    accepts,
    candidate_probability,
    known_n_probability,
    known_n_randomized_le,
    randomized_local_le,
    referee_choice,
    referee_outcome,
)
from .reduction import Reduction, sparsify_and_elect, surviving_graph

BASE_KEYS = ("rand-local", "rand-known-n", "det")


def get_protocol(key: str) -> Protocol:
    """``rand-local``, ``rand-known-n``, ``det`` or ``reduce+<one of those>``."""
    if key.startswith("reduce+"):
        inner = key[len("reduce+") :]
        if inner.startswith("reduce+"):
            raise KeyError(f"nested reduction is not supported: {key!r}")
        return sparsify_and_elect(get_protocol(inner))
    if key == "rand-local":
        return randomized_local_le()
    if key == "rand-known-n":
        return known_n_randomized_le()
    if key == "det":
        return deterministic_le()
    raise KeyError(f"unknown protocol key {key!r}")


__all__ = [
    "Deterministic",
    "KnownNRandomized",
    "RandomizedLocal",
    "Reduction",
    "accepts",
    "candidate_probability",
    "deterministic_le",
    "get_protocol",
    "known_n_probability",
    "known_n_randomized_le",
    "phase_count",
    "randomized_local_le",
    "referee_choice",
    "referee_outcome",
    "sparsify_and_elect",
    "surviving_graph",
]
