"""Stateless seed derivation for independent, reproducible random streams."""

from __future__ import annotations

_MASK = (1 << 64) - 1

# role indices reserved by the sweep harness and samplers
ROLE_DATA = 0
ROLE_MAP = 1
ROLE_TEST = 2
ROLE_MASK = 3
ROLE_GAMMA = 4
ROLE_TEACHER = 5
ROLE_QUERY = 6


def _splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer (a 64-bit bijection)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, indices: list[int] | tuple[int, ...]) -> int:
    """Mix a master seed with an index tuple into an independent 64-bit seed.

    Each absorbed index passes through a fresh splitmix64 round, so tuples of
    equal length that differ anywhere yield distinct outputs.
    """
    state = _splitmix64(master & _MASK)
    for index in indices:
        state = _splitmix64(state ^ ((index + 1) & _MASK))
    return state
