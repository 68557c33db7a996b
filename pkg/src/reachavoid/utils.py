from __future__ import annotations

import logging
import os
import typing as t
from functools import lru_cache

import numpy as np
import numpy.typing as npt

DEBUG_ENV_VAR = "REACHAVOID_DEBUG"
FULL_SUITE_ENV_VAR = "REACHAVOID_FULL_SUITE"


@lru_cache(maxsize=1)
def get_debug_mode() -> bool:
    if os.environ.get(DEBUG_ENV_VAR, str(False)).lower() == "true":
        return True
    else:
        return False


def get_full_suite_mode() -> bool:
    return os.environ.get(FULL_SUITE_ENV_VAR, str(False)).lower() == "true"


def patch_logger(module: str, level: int):
    # enable debug logging
    patched_logger = logging.getLogger(module)
    patched_logger.setLevel(level=level)
    handler = logging.StreamHandler()
    handler.setLevel(logging.DEBUG)
    formatter = logging.Formatter("[%(name)s.%(levelname)s] %(message)s")
    handler.setFormatter(formatter)
    patched_logger.addHandler(handler)
    # don't log twice through the root logger
    patched_logger.propagate = False


def normalize(v: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """
    Unit vector in the direction of `v`; the zero vector maps to itself.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(v)
    return v / norm


def clip_to_arrival(
    velocity: npt.NDArray[np.float64],
    position: npt.NDArray[np.float64],
    waypoint: npt.NDArray[np.float64],
    dt: float,
) -> npt.NDArray[np.float64]:
    """
    Shrink a velocity pointing at `waypoint` so a forward-Euler step of length `dt`
    lands on the waypoint instead of overshooting it.
    """
    remaining = float(np.linalg.norm(waypoint - position))
    speed = float(np.linalg.norm(velocity))
    if speed * dt <= remaining or speed == 0.0:
        return velocity
    return velocity * (remaining / (speed * dt))


def stable_seed(*parts: int) -> int:
    "derive a child seed from integer parts, independent of platform hashing"
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def as_float_tuple(v: t.Iterable[float], ndigits: int = 9) -> t.Tuple[float, ...]:
    return tuple(round(float(c), ndigits) for c in v)
