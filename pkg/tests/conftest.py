"""Shared fixtures: one tower per base for the whole session, backed by a temporary cache."""

from __future__ import annotations

import math
import time

import pytest

from hyperop.tower import Tower, TowerConfig

SQRT2 = math.sqrt(2.0)
BASES = (1.2, SQRT2, 1.44)


class TowerPool:
    """Session-wide towers; records how long each level took to build."""

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        self.config = TowerConfig(cache_path=cache_dir)
        self._towers: dict[float, Tower] = {}
        self.build_seconds: dict[tuple[float, int], float] = {}

    def tower(self, alpha: float) -> Tower:
        if alpha not in self._towers:
            self._towers[alpha] = Tower(alpha, self.config)
        return self._towers[alpha]

    def level(self, alpha: float, n: int):
        tower = self.tower(alpha)
        for k in range(2, n + 1):
            if (alpha, k) not in self.build_seconds:
                t0 = time.perf_counter()
                tower.level(k)
                self.build_seconds[(alpha, k)] = time.perf_counter() - t0
        return tower.level(n)

    def built(self):
        return [(a, n, t.level(n)) for a, t in self._towers.items() for n in sorted(t._levels)]


@pytest.fixture(scope="session")
def pool(tmp_path_factory) -> TowerPool:
    return TowerPool(str(tmp_path_factory.mktemp("level-cache")))


@pytest.fixture(scope="session")
def sqrt2_l2(pool):
    return pool.level(SQRT2, 2)


@pytest.fixture(scope="session")
def sqrt2_l3(pool):
    return pool.level(SQRT2, 3)
