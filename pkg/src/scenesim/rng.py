"""Seeded PRNG streams with bit-exact, language-portable output.

Every source of randomness in the simulator is a SplitMix64 stream.  Streams
are derived from one master seed so that adding or reordering consumers of
one stream never perturbs another (per-rail train timers, per-machine ball
timers, crowd spawning, ...).

Derivation rule (documented so other tools can reproduce it):

    stream_seed = master_seed XOR fnv1a64("<name>#<load_index>")

where ``name`` is the subsystem label (e.g. ``"train.2"``) and
``load_index`` counts scene loads within one server session (0 for the
first load).
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def splitmix64_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (new_state, output)."""
    state = (state + _GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return state, z ^ (z >> 31)


class Stream:
    """A single SplitMix64 stream."""

    __slots__ = ("state", "draws")

    def __init__(self, seed: int):
        self.state = seed & MASK64
        self.draws = 0

    def next_u64(self) -> int:
        self.state, out = splitmix64_next(self.state)
        self.draws += 1
        return out

    def next_float(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform double in [lo, hi)."""
        return lo + (hi - lo) * self.next_float()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n).  n must be small (no rejection needed
        for the simulator's n <= a few dozen; bias is < 2**-59)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return int(self.next_float() * n) if n > 1 else 0

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def clone(self) -> "Stream":
        s = Stream(0)
        s.state = self.state
        s.draws = self.draws
        return s


def derive_stream(master_seed: int, name: str, load_index: int = 0) -> Stream:
    """Derive the named subsystem stream from the master seed."""
    tag = fnv1a64(f"{name}#{load_index}".encode("utf-8"))
    return Stream((master_seed ^ tag) & MASK64)
