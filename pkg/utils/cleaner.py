"""
Tiepoint hygiene: duplicate removal and out-of-grid rejection
"""
from typing import Optional, Tuple

import numpy as np


class TiePointCleaner:
    """Masks over raw correspondence arrays: repeated base points and points off the grid"""

    @staticmethod
    def unique_mask(base: np.ndarray, tol: float = 1e-6) -> np.ndarray:
        """
        Mask keeping the first occurrence of every base coordinate

        Two points are the same when both axes differ by at most tol.
        """
        base = np.asarray(base, dtype=np.float64).reshape(-1, 2)
        keep = np.ones(len(base), dtype=bool)
        order = np.argsort(base[:, 0], kind="stable")
        for pos, i in enumerate(order):
            nxt = pos + 1
            while nxt < len(order) and base[order[nxt], 0] - base[i, 0] <= tol:
                j = order[nxt]
                if abs(base[j, 1] - base[i, 1]) <= tol:
                    keep[max(i, j)] = False
                nxt += 1
        return keep

    @staticmethod
    def in_grid_mask(base: np.ndarray, warp: np.ndarray, base_size: Tuple[int, int],
                     warp_size: Optional[Tuple[int, int]] = None) -> np.ndarray:
        """Mask of finite correspondences inside [0, width] x [0, height] of both grids"""
        base = np.asarray(base, dtype=np.float64).reshape(-1, 2)
        warp = np.asarray(warp, dtype=np.float64).reshape(-1, 2)
        warp_size = warp_size or base_size
        keep = np.all(np.isfinite(base), axis=1) & np.all(np.isfinite(warp), axis=1)
        for points, (width, height) in ((base, base_size), (warp, warp_size)):
            keep &= (points[:, 0] >= 0) & (points[:, 1] >= 0)
            keep &= (points[:, 0] <= width) & (points[:, 1] <= height)
        return keep

    @staticmethod
    def clean_mask(base: np.ndarray, warp: np.ndarray, base_size: Tuple[int, int],
                   warp_size: Optional[Tuple[int, int]] = None, tol: float = 1e-6) -> np.ndarray:
        """Out-of-grid rejection followed by de-duplication, as one mask"""
        keep = TiePointCleaner.in_grid_mask(base, warp, base_size, warp_size)
        idx = np.flatnonzero(keep)
        unique = TiePointCleaner.unique_mask(np.asarray(base).reshape(-1, 2)[idx], tol)
        keep[idx[~unique]] = False
        return keep
