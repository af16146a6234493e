"""Counter-based Gaussian streams, one per (seed, noise channel, path).

Each path owns a Philox stream keyed by ``SeedSequence(seed, spawn_key=(channel, path))``
and reads its draws step by step, so a grid with fewer steps sees a prefix of
the draws of a longer one and the result never depends on how paths are
scheduled across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

SLOW_CHANNEL = 0
FAST_CHANNEL = 1
FROZEN_CHANNEL = 2


def path_generator(seed: int, channel: int, path: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(seed, spawn_key=(channel, path))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class NoiseStreams:
    seed: int
    workers: int = 1

    def _fill(self, out: np.ndarray, channel: int, first_path: int, start: int, stop: int) -> None:
        n_steps, dim = out.shape[1], out.shape[2]
        for local in range(start, stop):
            generator = path_generator(self.seed, channel, first_path + local)
            out[local] = generator.standard_normal((n_steps, dim))

    def draws(
        self,
        channel: int,
        n_paths: int,
        n_steps: int,
        dim: int,
        first_path: int = 0,
    ) -> np.ndarray:
        """Standard normal draws of shape [n_paths, n_steps, dim]."""
        out = np.empty((n_paths, n_steps, dim))
        if dim == 0 or n_steps == 0:
            return out
        if self.workers <= 1 or n_paths < 2 * self.workers:
            self._fill(out, channel, first_path, 0, n_paths)
            return out
        bounds = np.linspace(0, n_paths, self.workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [
                pool.submit(self._fill, out, channel, first_path, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for future in futures:
                future.result()
        return out
