"""Deterministic RNG derivation and parameter initialization.

Every random draw in the package goes through ``rng_from`` so that a run is
a pure function of its seeds. String components are hashed with SHA-256
(Python's builtin ``hash`` is salted per process and must not be used here).
"""

import hashlib

import numpy as np


def _component(part) -> int:
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little")
    return int(part) & 0xFFFFFFFF


def rng_from(*parts) -> np.random.Generator:
    """Build a Generator from a tuple of ints/strings, stably across runs."""
    if not parts:
        raise ValueError("rng_from needs at least one seed component")
    return np.random.default_rng([_component(p) for p in parts])


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) truncated to [-2*std, 2*std], redrawing outliers."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out
