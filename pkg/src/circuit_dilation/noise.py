"""Counter-addressable Wiener increments.

Every increment is a pure function of (seed, path, channel, step): path
streams are Philox keyed by (seed, path) and the normal deviate for
(channel, step) is the inverse normal CDF of 64-bit word number
``step * n_channels + channel``.  One word per deviate is what makes any
single increment reachable by jumping the counter.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_WORDS_PER_BLOCK = 4  # Philox4x64 emits 4 words per counter increment


def _uniform(words: np.ndarray) -> np.ndarray:
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _stream(seed: int, path: int, start_word: int = 0) -> np.random.Philox:
    bg = np.random.Philox(key=np.array([seed, path], dtype=np.uint64))
    if start_word:
        bg.advance(start_word // _WORDS_PER_BLOCK)
        skip = start_word % _WORDS_PER_BLOCK
        if skip:
            bg.random_raw(skip)
    return bg


def standard_normals(seed: int, path: int, n: int, start: int = 0) -> np.ndarray:
    """Words start .. start+n-1 of the (seed, path) stream as N(0, 1) deviates."""
    return ndtri(_uniform(_stream(seed, path, start).random_raw(n)))


@dataclass(frozen=True)
class ChannelSpec:
    """Channel labels; ``pairs`` lists (Q index, P index) of symplectic pairs."""

    labels: tuple[str, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    gamma: float | None = None  # structural bracket {Q(t), P(s)} = gamma min(t, s)

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def plain(cls, n: int, prefix: str = "B") -> "ChannelSpec":
        return cls(tuple(f"{prefix}{k + 1}" for k in range(n)))


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Increments dW[k, alpha] of one path on a uniform grid."""

    dt: float
    increments: np.ndarray  # (n_steps, n_channels)
    channels: ChannelSpec
    seed: int = 0
    path_index: int = 0

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    def brownian(self) -> np.ndarray:
        """W(k dt), k = 0..n_steps, shape (n_steps + 1, n_channels)."""
        w = np.zeros((self.n_steps + 1, self.increments.shape[1]))
        np.cumsum(self.increments, axis=0, out=w[1:])
        return w

    def coarsen(self, factor: int) -> "NoisePath":
        """Same Brownian path sampled on a grid ``factor`` times coarser."""
        if self.n_steps % factor:
            raise ValueError("step count not divisible by factor")
        inc = self.increments.reshape(-1, factor, self.increments.shape[1]).sum(axis=1)
        return NoisePath(self.dt * factor, inc, self.channels, self.seed, self.path_index)


@dataclass(frozen=True)
class CounterNoise:
    """Source of reproducible increments for an ensemble."""

    seed: int
    channels: ChannelSpec
    dt: float
    _scale: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "_scale", float(np.sqrt(self.dt)))

    def path(self, index: int, n_steps: int, start_step: int = 0) -> NoisePath:
        nc = self.channels.n
        z = standard_normals(self.seed, index, n_steps * nc, start_step * nc)
        return NoisePath(self.dt, self._scale * z.reshape(n_steps, nc), self.channels,
                         self.seed, index)

    def increment(self, path: int, channel: int, step: int) -> float:
        nc = self.channels.n
        return float(self._scale * standard_normals(self.seed, path, 1, step * nc + channel)[0])

    def block(self, paths, n_steps: int, start_step: int = 0) -> np.ndarray:
        """Increments for many paths, shape (n_steps, n_channels, n_paths)."""
        paths = list(paths)
        nc = self.channels.n
        out = np.empty((n_steps, nc, len(paths)))
        for j, idx in enumerate(paths):
            z = standard_normals(self.seed, idx, n_steps * nc, start_step * nc)
            out[:, :, j] = z.reshape(n_steps, nc)
        out *= self._scale
        return out
