"""Compound multiband channel model.

A channel of total bandwidth W is split into n equal subbands of width
W/n, of which an unknown subset of k is active per transmission block.
Gain magnitudes are tabulated on a uniform q-point midpoint grid across
each subband, which is all the capacity integrals need.  Noise is fixed
at unit power spectral density (a whitening front end absorbs anything
else), so squared gains are directly SNR densities up to the P/(beta W)
power normalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .numerics import NumericalError

__all__ = [
    "ChannelState",
    "CompoundChannel",
    "EnumeratedStates",
    "SnrSummary",
    "enumerate_states",
    "load_channel",
    "snr_summary",
]

NOISE_PSD = 1.0

# Fixed key for the dedicated state-sampling stream (Floyd's algorithm);
# partial enumerations must not depend on any user-facing seed.
_STATE_SAMPLING_KEY = 0x5EB4_51D0


@dataclass(frozen=True, order=True)
class ChannelState:
    """A sorted k-subset of subband indices (1-based)."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise ValueError("a state needs at least one active subband")
        if any(i < 1 for i in idx):
            raise ValueError(f"subband indices are 1-based, got {idx}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing, got {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int) - 1

    def colex_key(self) -> tuple[int, ...]:
        """Sort key realizing colexicographic order (compare largest first)."""
        return tuple(reversed(self.indices))


def _frozen_array(values, shape_hint: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{shape_hint} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CompoundChannel:
    """Compound multiband Gaussian channel.

    Attributes:
        bandwidth: total bandwidth W in Hz.
        n_subbands: number n of equal-width subbands (>= 2).
        k_active: number k of simultaneously active subbands, 1 <= k < n.
        power: transmit power constraint P in watts.
        gain_grid: (n, q) array of gain magnitudes |H|, one row per subband,
            sampled at q midpoints across the subband; strictly positive.
        state_gains: optional map from state index tuples to (n, q) grids for
            channels whose gain profile depends on the realized state.
    """

    bandwidth: float
    n_subbands: int
    k_active: int
    power: float
    gain_grid: np.ndarray
    state_gains: Mapping[tuple[int, ...], np.ndarray] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if int(self.n_subbands) != self.n_subbands or self.n_subbands < 2:
            raise ValueError(f"n_subbands must be an integer >= 2, got {self.n_subbands}")
        n = int(self.n_subbands)
        k = int(self.k_active)
        if k != self.k_active or not 1 <= k < n:
            raise ValueError(f"need 1 <= k < n, got k={self.k_active}, n={n}")
        if self.power <= 0:
            raise ValueError(f"power must be positive, got {self.power}")
        grid = _frozen_array(self.gain_grid, "gain grid")
        if grid.ndim != 2 or grid.shape[0] != n or grid.shape[1] < 1:
            raise ValueError(f"gain grid must have shape (n, q) with q >= 1, got {grid.shape}")
        if np.min(grid) <= 0:
            raise ValueError("every gain value must be strictly positive")
        object.__setattr__(self, "n_subbands", n)
        object.__setattr__(self, "k_active", k)
        object.__setattr__(self, "gain_grid", grid)
        if self.state_gains is not None:
            frozen: dict[tuple[int, ...], np.ndarray] = {}
            for key, value in self.state_gains.items():
                state = ChannelState(tuple(key))
                if state.k != k or state.indices[-1] > n:
                    raise ValueError(f"state {key} incompatible with (n={n}, k={k})")
                arr = _frozen_array(value, f"gain grid for state {key}")
                if arr.shape != grid.shape:
                    raise ValueError(
                        f"per-state grid for {key} has shape {arr.shape}, expected {grid.shape}"
                    )
                if np.min(arr) <= 0:
                    raise ValueError(f"per-state grid for {key} has nonpositive gains")
                frozen[state.indices] = arr
            object.__setattr__(self, "state_gains", frozen)

    @property
    def beta(self) -> float:
        """Sparsity ratio k/n."""
        return self.k_active / self.n_subbands

    @property
    def q(self) -> int:
        """Grid points per subband."""
        return self.gain_grid.shape[1]

    @property
    def grid_df(self) -> float:
        """Width of one quadrature cell, (W/n)/q."""
        return self.bandwidth / (self.n_subbands * self.q)

    def gains_for(self, state: ChannelState) -> np.ndarray:
        """The (n, q) gain grid in effect at `state`."""
        if self.state_gains is not None:
            hit = self.state_gains.get(state.indices)
            if hit is not None:
                return hit
        return self.gain_grid

    def _all_grids(self) -> list[np.ndarray]:
        grids = [self.gain_grid]
        if self.state_gains is not None:
            grids.extend(self.state_gains.values())
        return grids

    def to_dict(self) -> dict:
        doc = {
            "W": self.bandwidth,
            "n": self.n_subbands,
            "k": self.k_active,
            "P": self.power,
            "q": self.q,
            "gains": self.gain_grid.tolist(),
        }
        if self.state_gains:
            doc["state_gains"] = {
                ",".join(map(str, key)): grid.tolist()
                for key, grid in sorted(self.state_gains.items())
            }
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CompoundChannel":
        required = {"W", "n", "k", "P", "gains"}
        missing = required - set(doc)
        if missing:
            raise ValueError(f"channel document missing keys: {sorted(missing)}")
        gains = np.array(doc["gains"], dtype=float)
        if "q" in doc and gains.ndim == 2 and gains.shape[1] != int(doc["q"]):
            raise ValueError(
                f"declared q={doc['q']} does not match gains shape {gains.shape}"
            )
        state_gains = None
        if "state_gains" in doc and doc["state_gains"]:
            state_gains = {
                tuple(int(t) for t in key.split(",")): np.array(val, dtype=float)
                for key, val in doc["state_gains"].items()
            }
        return cls(
            bandwidth=float(doc["W"]),
            n_subbands=int(doc["n"]),
            k_active=int(doc["k"]),
            power=float(doc["P"]),
            gain_grid=gains,
            state_gains=state_gains,
        )


def load_channel(path: str | Path) -> CompoundChannel:
    """Load a channel description from a JSON document ({W, n, k, P, q, gains})."""
    with open(path, "r", encoding="utf-8") as handle:
        return CompoundChannel.from_dict(json.load(handle))


@dataclass(frozen=True)
class SnrSummary:
    """SNR extremes of a channel.

    snr_avg_max is the truncated average-to-minimum constant
    min{ max_s integral |H|^2 df / (beta W min|H|^2),  max|H|^2 / min|H|^2 },
    the constant entering the water-filling gap bound; it equals 1 for a
    flat gain profile.
    """

    snr_min: float
    snr_max: float
    snr_avg_max: float

    def __post_init__(self) -> None:
        if not 0 < self.snr_min <= self.snr_max:
            raise ValueError(
                f"need 0 < snr_min <= snr_max, got {self.snr_min}, {self.snr_max}"
            )

    @property
    def high_snr_ok(self) -> bool:
        """Whether snr_max >= 1; the capacity-loss bounds assume it (flag only)."""
        return self.snr_max >= 1.0


def snr_summary(channel: CompoundChannel) -> SnrSummary:
    """SNR extremes over the whole band and all supplied gain profiles."""
    grids = channel._all_grids()
    gmin = min(float(np.min(g)) for g in grids)
    gmax = max(float(np.max(g)) for g in grids)
    if gmin <= 0:
        raise ValueError("zero gain encountered; SNR summary undefined")
    scale = channel.power / (channel.beta * channel.bandwidth)
    snr_min = scale * gmin**2
    snr_max = scale * gmax**2
    # integral of |H|^2 over the full band, maximized over gain profiles
    int_max = max(float(np.sum(g**2)) * channel.grid_df for g in grids)
    form_avg = int_max / (channel.beta * channel.bandwidth * gmin**2)
    form_ratio = gmax**2 / gmin**2
    return SnrSummary(
        snr_min=snr_min,
        snr_max=snr_max,
        snr_avg_max=min(form_avg, form_ratio),
    )


@dataclass(frozen=True)
class EnumeratedStates:
    """Sequence of channel states, flagged when it is a sample, not a census."""

    states: tuple[ChannelState, ...]
    sampled: bool

    def __iter__(self) -> Iterator[ChannelState]:
        return iter(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, item):
        return self.states[item]


def _colex_combinations(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All k-subsets of {1..n} in colexicographic order."""
    s = list(range(1, k + 1))
    while True:
        yield tuple(s)
        i = 0
        while i < k - 1 and s[i] + 1 == s[i + 1]:
            i += 1
        if i == k - 1 and s[i] + 1 > n:
            return
        s[i] += 1
        for j in range(i):
            s[j] = j + 1


def _floyd_sample(n: int, k: int, gen: np.random.Generator) -> tuple[int, ...]:
    """One uniformly random k-subset of {1..n} (Floyd's algorithm)."""
    chosen: set[int] = set()
    for j in range(n - k + 1, n + 1):
        t = int(gen.integers(1, j + 1))
        chosen.add(j if t in chosen else t)
    return tuple(sorted(chosen))


def enumerate_states(n: int, k: int, cap: int) -> EnumeratedStates:
    """All states of a (n, k) compound channel, or a deterministic sample.

    If C(n, k) <= cap, yields every state in colexicographic order and the
    result is exhaustive.  Otherwise draws `cap` distinct states from a
    dedicated fixed-seed stream (independent of any user seed), returns
    them in colexicographic order and flags the result as sampled.
    """
    if int(n) != n or int(k) != k or not 1 <= k < n:
        raise ValueError(f"need integers 1 <= k < n, got k={k}, n={n}")
    if int(cap) != cap or cap < 1:
        raise ValueError(f"cap must be a positive integer, got {cap}")
    n, k, cap = int(n), int(k), int(cap)
    total = math.comb(n, k)
    if total <= cap:
        states = tuple(ChannelState(s) for s in _colex_combinations(n, k))
        return EnumeratedStates(states=states, sampled=False)
    gen = np.random.Generator(np.random.Philox(key=_STATE_SAMPLING_KEY))
    picked: set[tuple[int, ...]] = set()
    attempts = 0
    while len(picked) < cap:
        picked.add(_floyd_sample(n, k, gen))
        attempts += 1
        if attempts > 100 * cap:  # pragma: no cover - cap is well below C(n, k) here
            raise NumericalError("state sampling failed to collect distinct subsets")
    states = tuple(
        ChannelState(s) for s in sorted(picked, key=lambda t: tuple(reversed(t)))
    )
    return EnumeratedStates(states=states, sampled=True)
