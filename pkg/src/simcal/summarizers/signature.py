"""Truncated path signatures computed with Chen's identity.

A signature is stored as a list of levels; level ``k`` is the flattened
(row-major) tensor of shape ``(c,) * k`` for a path with ``c`` channels.
"""

from __future__ import annotations

import numpy as np

from simcal.core import SummaryVector, Trajectory

from .spec import MAX_SIGNATURE_DEPTH, SummarizerSpec

Signature = list[np.ndarray]


def segment_signature(increment: np.ndarray, depth: int) -> Signature:
    """Signature of one straight segment: increment^(k) / k! at level k."""
    increment = np.asarray(increment, dtype=float).reshape(-1)
    levels = [increment.copy()]
    for level in range(2, depth + 1):
        levels.append(np.multiply.outer(levels[-1], increment).reshape(-1) / level)
    return levels


def chen_product(left: Signature, right: Signature, depth: int) -> Signature:
    """Truncated tensor-algebra product: signature of the concatenated path."""
    product: Signature = []
    for level in range(1, depth + 1):
        term = left[level - 1] + right[level - 1]
        for split in range(1, level):
            term = term + np.multiply.outer(left[split - 1], right[level - split - 1]).reshape(-1)
        product.append(term)
    return product


def signature_levels(path: np.ndarray, depth: int) -> Signature:
    points = np.asarray(path, dtype=float)
    if points.ndim != 2:
        raise ValueError(f"path must be a (T, c) array, got shape {points.shape}")
    if points.shape[0] < 2:
        raise ValueError("A signature needs a path with at least two points.")
    if not 1 <= depth <= MAX_SIGNATURE_DEPTH:
        raise ValueError(f"signature depth must be in [1, {MAX_SIGNATURE_DEPTH}], got {depth}")

    increments = np.diff(points, axis=0)
    result = segment_signature(increments[0], depth)
    for increment in increments[1:]:
        result = chen_product(result, segment_signature(increment, depth), depth)
    result[0] = points[-1] - points[0]
    return result


def flatten_signature(levels: Signature) -> np.ndarray:
    return np.concatenate(levels)


def signature_path(traj: Trajectory, time_augment: bool) -> np.ndarray:
    if not time_augment:
        return np.asarray(traj.states, dtype=float)
    times = np.arange(traj.T, dtype=float)[:, None] * traj.dt
    return np.concatenate([times, traj.states], axis=1)


def summarize_signature(traj: Trajectory, depth: int, time_augment: bool = True) -> SummaryVector:
    spec = SummarizerSpec(kind="signature", depth=depth, time_augment=time_augment)
    levels = signature_levels(signature_path(traj, time_augment), depth)
    return SummaryVector(values=flatten_signature(levels), summarizer_id=spec.summarizer_id)
