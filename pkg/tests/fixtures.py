"""Synthetic shape fixtures shared by several test files."""

from __future__ import annotations

import numpy as np


def square(size=64, side=20, top=None, left=None) -> np.ndarray:
    top = (size - side) // 2 if top is None else top
    left = (size - side) // 2 if left is None else left
    m = np.zeros((size, size), dtype=bool)
    m[top:top + side, left:left + side] = True
    return m


def rectangle(size=64, h=14, w=30, top=10, left=20) -> np.ndarray:
    m = np.zeros((size, size), dtype=bool)
    m[top:top + h, left:left + w] = True
    return m


def disk(size=64, r=10.0, cy=None, cx=None) -> np.ndarray:
    cy = (size - 1) / 2 if cy is None else cy
    cx = (size - 1) / 2 if cx is None else cx
    yy, xx = np.mgrid[:size, :size]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def shape_fixtures() -> list[tuple[str, np.ndarray]]:
    """Five squares and five disks of varying size and position in 64x64."""
    return [
        ("square20", square(64, 20)),
        ("square12_offset", square(64, 12, 8, 30)),
        ("square30", square(64, 30, 5, 20)),
        ("square8", square(64, 8, 40, 10)),
        ("square24_corner", square(64, 24, 2, 2)),
        ("disk10", disk(64, 10)),
        ("disk6_offset", disk(64, 6, 18, 44)),
        ("disk15", disk(64, 15, 30, 33)),
        ("disk4", disk(64, 4, 50, 12)),
        ("disk12_edge", disk(64, 12, 14, 14)),
    ]
