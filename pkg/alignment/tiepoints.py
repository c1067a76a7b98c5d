"""
Tiepoints between a base and a warp image at working resolution

Built-in source: FAST-9 segment-test corners matched by normalized
cross-correlation of intensity patches. External matchers plug in through
the text interchange format (import_tiepoints / export_tiepoints).
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from errors import OutOfGrid, ParseError
from geo.raster import RasterBand
from geo.transform import PixelPoint
from utils.cleaner import TiePointCleaner

logger = logging.getLogger(__name__)

HEADER_MAGIC = "murat-tiepoints"
HEADER_VERSION = "v1"

# NCC at or above this is a perfect match; no subpixel refinement
PERFECT_NCC = 1.0 - 1e-9

BandLike = Union[RasterBand, np.ndarray]


@dataclass(frozen=True)
class TiePoint:
    """One base <-> warp correspondence"""
    base: PixelPoint
    warp: PixelPoint
    score: float


@dataclass(frozen=True)
class TiePointSet:
    """
    Correspondences stored column-wise

    base, warp: (N, 2) arrays of continuous pixel coordinates (x, y)
    scores: (N,) match confidence in [0, 1]
    base_size, warp_size: (width, height) of the working grids
    """
    base: np.ndarray
    warp: np.ndarray
    scores: np.ndarray
    provenance: str = "builtin"
    working_gsd: float = 0.0
    base_size: Tuple[int, int] = (0, 0)
    warp_size: Tuple[int, int] = (0, 0)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        base = np.asarray(self.base, dtype=np.float64).reshape(-1, 2)
        warp = np.asarray(self.warp, dtype=np.float64).reshape(-1, 2)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if not (len(base) == len(warp) == len(scores)):
            raise ValueError(f"Mismatched tiepoint arrays: {len(base)}, {len(warp)}, {len(scores)}")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(warp)) and np.all(np.isfinite(scores))):
            raise ValueError("Tiepoint coordinates and scores must be finite")
        for name, points, size in (("base", base, self.base_size), ("warp", warp, self.warp_size)):
            bad = out_of_grid(points, size)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise OutOfGrid(f"{name} point {points[i].tolist()} outside {size[0]}x{size[1]} grid")
        if not TiePointCleaner.unique_mask(base).all():
            raise ValueError("Duplicate base coordinates in tiepoint set")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "warp", warp)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return len(self.base)

    @property
    def points(self) -> List[TiePoint]:
        return [
            TiePoint(PixelPoint(float(b[0]), float(b[1])), PixelPoint(float(w[0]), float(w[1])), float(s))
            for b, w, s in zip(self.base, self.warp, self.scores)
        ]

    def subset(self, mask: np.ndarray) -> "TiePointSet":
        return TiePointSet(self.base[mask], self.warp[mask], self.scores[mask], self.provenance,
                           self.working_gsd, self.base_size, self.warp_size, dict(self.meta))

    def sorted(self) -> "TiePointSet":
        """Canonical order: base x, then base y"""
        order = np.lexsort((self.base[:, 1], self.base[:, 0]))
        return self.subset(order)


def out_of_grid(points: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Mask of points outside [0, width] x [0, height]; unchecked when size is (0, 0)"""
    width, height = size
    if width <= 0 or height <= 0:
        return np.zeros(len(points), dtype=bool)
    return (points[:, 0] < 0) | (points[:, 1] < 0) | (points[:, 0] > width) | (points[:, 1] > height)


def _as_array(band: BandLike) -> np.ndarray:
    data = band.data if isinstance(band, RasterBand) else band
    return np.asarray(data, dtype=np.float64)


# ---------------------------------------------------------------------------
# FAST corner detection
# ---------------------------------------------------------------------------

def _as_uint8(band: BandLike) -> np.ndarray:
    data = band.data if isinstance(band, RasterBand) else np.asarray(band)
    if data.dtype == np.uint8:
        return np.ascontiguousarray(data)
    data = np.nan_to_num(np.asarray(data, dtype=np.float64), nan=0.0, posinf=255.0, neginf=0.0)
    return np.clip(np.rint(data), 0, 255).astype(np.uint8)


def detect_corners(band: BandLike, max_count: int, threshold: int,
                   nonmax: bool = True) -> List[PixelPoint]:
    """
    Detect FAST-9 corners

    Args:
        band: single-band 8-bit grid (RasterBand or 2D array); other
            dtypes are rounded and clipped to 0..255
        max_count: keep at most this many corners
        threshold: brightness difference for the segment test (> 0)
        nonmax: apply 3x3 non-maximum suppression on the corner score

    Returns:
        Corner pixel centers sorted by response, strongest first
        (ties by row, then column)
    """
    if threshold <= 0:
        raise ValueError(f"FAST threshold must be > 0, got {threshold}")
    img = _as_uint8(band)
    if img.ndim != 2 or min(img.shape) < 7:
        return []
    detector = cv2.FastFeatureDetector_create(
        threshold=int(threshold), nonmaxSuppression=bool(nonmax),
        type=cv2.FAST_FEATURE_DETECTOR_TYPE_9_16,
    )
    keypoints = detector.detect(img, None)
    if not keypoints:
        return []
    cols = np.array([kp.pt[0] for kp in keypoints])
    rows = np.array([kp.pt[1] for kp in keypoints])
    response = np.array([kp.response for kp in keypoints])
    order = np.lexsort((cols, rows, -response))[:max(0, max_count)]
    return [PixelPoint(float(cols[i]) + 0.5, float(rows[i]) + 0.5) for i in order]


# ---------------------------------------------------------------------------
# NCC description and matching
# ---------------------------------------------------------------------------

def _patch_vector(img: np.ndarray, col: int, row: int, radius: int) -> Optional[np.ndarray]:
    """Zero-mean, unit-norm patch centered on pixel (col, row); None if it does not fit or is flat"""
    h, w = img.shape
    if col - radius < 0 or row - radius < 0 or col + radius >= w or row + radius >= h:
        return None
    patch = img[row - radius:row + radius + 1, col - radius:col + radius + 1].ravel()
    patch = patch - patch.mean()
    norm = math.sqrt(float(np.dot(patch, patch)))
    if norm < 1e-12:
        return None
    return patch / norm


def _describe(img: np.ndarray, pts: Sequence[PixelPoint], radius: int) -> Tuple[np.ndarray, np.ndarray]:
    cells, vectors = [], []
    for p in pts:
        col, row = int(math.floor(p.x)), int(math.floor(p.y))
        vec = _patch_vector(img, col, row, radius)
        if vec is not None:
            cells.append((col, row))
            vectors.append(vec)
    size = (2 * radius + 1) ** 2
    if not vectors:
        return np.zeros((0, 2), dtype=int), np.zeros((0, size))
    return np.array(cells, dtype=int), np.vstack(vectors)


def _refine(base_vec: np.ndarray, warp_img: np.ndarray, col: int, row: int,
            radius: int, max_steps: int = 3) -> Optional[Tuple[float, float, float]]:
    """
    Climb to the local NCC maximum around (col, row), then fit a parabola per
    axis through the 3x3 response. Returns (x, y, ncc) or None.
    """
    def ncc(c: int, r: int) -> float:
        vec = _patch_vector(warp_img, c, r, radius)
        return -np.inf if vec is None else float(np.dot(base_vec, vec))

    for _ in range(max_steps + 1):
        surface = np.array([[ncc(col + dx, row + dy) for dx in (-1, 0, 1)] for dy in (-1, 0, 1)])
        peak = surface[1, 1]
        if not np.isfinite(peak):
            return None
        best = np.unravel_index(int(np.argmax(surface)), surface.shape)
        if best == (1, 1) or surface[best] <= peak:
            break
        col += best[1] - 1
        row += best[0] - 1
    else:
        return None

    x, y = col + 0.5, row + 0.5
    if peak >= PERFECT_NCC:
        return x, y, min(peak, 1.0)

    def vertex(left: float, mid: float, right: float) -> float:
        if not (np.isfinite(left) and np.isfinite(right)):
            return 0.0
        denom = left - 2.0 * mid + right
        if denom >= 0:
            return 0.0
        return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))

    x += vertex(surface[1, 0], peak, surface[1, 2])
    y += vertex(surface[0, 1], peak, surface[2, 1])
    return x, y, peak


def describe_and_match(base_band: BandLike, warp_band: BandLike,
                       base_pts: Sequence[PixelPoint], warp_pts: Sequence[PixelPoint],
                       ratio: float = 0.9, radius: int = 8, subpixel: bool = True,
                       working_gsd: float = 0.0) -> TiePointSet:
    """
    Match keypoints by normalized cross-correlation of intensity patches

    Keeps mutual best matches that pass the ratio test on patch distance
    sqrt(2 - 2 * ncc). Warp locations are refined to subpixel accuracy.

    Args:
        base_band, warp_band: working-resolution grids
        base_pts, warp_pts: keypoints (pixel centers) in each grid
        ratio: best/second-best distance ratio bound
        radius: patch half-size in pixels
        subpixel: refine warp locations on the 3x3 NCC surface

    Returns:
        TiePointSet in canonical order (base x, then y)
    """
    base_img = _as_array(base_band)
    warp_img = _as_array(warp_band)
    base_size = (base_img.shape[1], base_img.shape[0])
    warp_size = (warp_img.shape[1], warp_img.shape[0])
    empty = TiePointSet(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), "builtin",
                        working_gsd, base_size, warp_size)

    base_cells, base_desc = _describe(base_img, base_pts, radius)
    warp_cells, warp_desc = _describe(warp_img, warp_pts, radius)
    if len(base_cells) == 0 or len(warp_cells) == 0:
        return empty

    similarity = base_desc @ warp_desc.T
    best_warp = np.argmax(similarity, axis=1)
    best_base = np.argmax(similarity, axis=0)
    mutual = best_base[best_warp] == np.arange(len(base_cells))

    distance = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * similarity))
    if distance.shape[1] > 1:
        two_smallest = np.partition(distance, 1, axis=1)[:, :2]
        passes_ratio = two_smallest[:, 0] < ratio * two_smallest[:, 1]
    else:
        passes_ratio = np.ones(len(base_cells), dtype=bool)

    base_xy, warp_xy, scores = [], [], []
    seen = set()
    for i in np.flatnonzero(mutual & passes_ratio):
        bc, br = base_cells[i]
        if (bc, br) in seen:
            continue
        wc, wr = warp_cells[best_warp[i]]
        ncc = float(similarity[i, best_warp[i]])
        wx, wy = wc + 0.5, wr + 0.5
        if subpixel:
            refined = _refine(base_desc[i], warp_img, int(wc), int(wr), radius)
            if refined is None:
                continue
            wx, wy, ncc = refined
        seen.add((bc, br))
        base_xy.append((bc + 0.5, br + 0.5))
        warp_xy.append((wx, wy))
        scores.append(float(np.clip((ncc + 1.0) / 2.0, 0.0, 1.0)))

    if not base_xy:
        return empty
    tps = TiePointSet(np.array(base_xy), np.array(warp_xy), np.array(scores), "builtin",
                      working_gsd, base_size, warp_size)
    logger.debug("Matched %d of %d base keypoints", len(tps), len(base_cells))
    return tps.sorted()


@dataclass(frozen=True)
class MatchParams:
    """Built-in detector/matcher settings"""
    max_corners: int = 2000
    fast_threshold: int = 20
    patch_radius: int = 8
    ratio: float = 0.9
    subpixel: bool = True

    def to_dict(self) -> dict:
        return {"max_corners": self.max_corners, "fast_threshold": self.fast_threshold,
                "patch_radius": self.patch_radius, "ratio": self.ratio, "subpixel": self.subpixel}


def normalize_intensity(band: RasterBand, low: float = 2.0, high: float = 98.0) -> np.ndarray:
    """
    Stretch a band to the 0-255 range between two percentiles

    Nodata samples are replaced with the median of the valid samples so
    they form flat (featureless) regions.
    """
    data = band.data.astype(np.float64)
    valid = np.isfinite(data)
    if band.nodata is not None and not math.isnan(band.nodata):
        valid &= data != band.nodata
    if not valid.any():
        return np.zeros_like(data)
    lo, hi = np.percentile(data[valid], [low, high])
    filled = np.where(valid, data, np.median(data[valid]))
    if hi <= lo:
        return np.zeros_like(data)
    return np.clip((filled - lo) / (hi - lo), 0.0, 1.0) * 255.0


def match_images(base_band: RasterBand, warp_band: RasterBand, params: MatchParams) -> TiePointSet:
    """Built-in tiepoint source: detect on both working bands and match"""
    base_img = normalize_intensity(base_band)
    warp_img = normalize_intensity(warp_band)
    base_pts = detect_corners(base_img, params.max_corners, params.fast_threshold)
    warp_pts = detect_corners(warp_img, params.max_corners, params.fast_threshold)
    logger.info("Detected %d base / %d warp corners", len(base_pts), len(warp_pts))
    tps = describe_and_match(base_img, warp_img, base_pts, warp_pts, ratio=params.ratio,
                             radius=params.patch_radius, subpixel=params.subpixel,
                             working_gsd=base_band.gsd)
    return tps


# ---------------------------------------------------------------------------
# Interchange format
# ---------------------------------------------------------------------------

def import_tiepoints(path: str) -> TiePointSet:
    """
    Read a tiepoint interchange file

    First non-comment line: murat-tiepoints v1 <base_w> <base_h> <warp_w> <warp_h> <gsd_m>
    Then one "x_b y_b x_w y_w score" line per point; '#' starts a comment line.
    """
    header = None
    base_xy, warp_xy, scores, line_nos = [], [], [], []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if header is None:
                if len(fields) != 7 or fields[0] != HEADER_MAGIC or fields[1] != HEADER_VERSION:
                    raise ParseError(f"Expected '{HEADER_MAGIC} {HEADER_VERSION} <base_w> <base_h> "
                                     f"<warp_w> <warp_h> <gsd_m>' header", line=line_no)
                try:
                    dims = tuple(int(v) for v in fields[2:6])
                    gsd = float(fields[6])
                except ValueError as e:
                    raise ParseError(f"Bad header value: {e}", line=line_no) from e
                if min(dims) <= 0 or not math.isfinite(gsd):
                    raise ParseError("Grid dimensions must be positive", line=line_no)
                header = (dims, gsd)
                continue

            if len(fields) != 5:
                raise ParseError(f"Expected 5 values, found {len(fields)}", line=line_no)
            try:
                xb, yb, xw, yw, score = (float(v) for v in fields)
            except ValueError as e:
                raise ParseError(f"Bad number: {e}", line=line_no) from e
            if not all(math.isfinite(v) for v in (xb, yb, xw, yw, score)):
                raise ParseError("Non-finite value", line=line_no)
            if not 0.0 <= score <= 1.0:
                raise ParseError(f"Score {score} outside [0, 1]", line=line_no)
            (bw, bh, ww, wh), _ = header
            if not (0 <= xb <= bw and 0 <= yb <= bh):
                raise OutOfGrid(f"line {line_no}: base point ({xb}, {yb}) outside {bw}x{bh} grid")
            if not (0 <= xw <= ww and 0 <= yw <= wh):
                raise OutOfGrid(f"line {line_no}: warp point ({xw}, {yw}) outside {ww}x{wh} grid")
            base_xy.append((xb, yb))
            warp_xy.append((xw, yw))
            scores.append(score)
            line_nos.append(line_no)

    if header is None:
        raise ParseError("Missing header", line=1)
    unique = TiePointCleaner.unique_mask(np.array(base_xy, dtype=np.float64).reshape(-1, 2))
    if not unique.all():
        raise ParseError("Duplicate base coordinate", line=line_nos[int(np.flatnonzero(~unique)[0])])
    (bw, bh, ww, wh), gsd = header
    name = os.path.splitext(os.path.basename(path))[0]
    return TiePointSet(
        np.array(base_xy, dtype=np.float64).reshape(-1, 2),
        np.array(warp_xy, dtype=np.float64).reshape(-1, 2),
        np.array(scores, dtype=np.float64),
        provenance=f"imported:{name}",
        working_gsd=gsd,
        base_size=(bw, bh),
        warp_size=(ww, wh),
    )


def export_tiepoints(tps: TiePointSet, path: str) -> None:
    """
    Write a tiepoint set with full float precision

    Unset grid sizes are replaced by the smallest grid holding every point.
    """
    bw, bh = _grid_size(tps.base_size, tps.base, "base")
    ww, wh = _grid_size(tps.warp_size, tps.warp, "warp")
    lines = [f"{HEADER_MAGIC} {HEADER_VERSION} {bw} {bh} {ww} {wh} {tps.working_gsd!r}",
             f"# provenance: {tps.provenance}"]
    for (xb, yb), (xw, yw), s in zip(tps.base, tps.warp, tps.scores):
        lines.append(f"{float(xb)!r} {float(yb)!r} {float(xw)!r} {float(yw)!r} {float(s)!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _grid_size(size: Tuple[int, int], points: np.ndarray, name: str) -> Tuple[int, int]:
    width, height = size
    if width > 0 and height > 0:
        return width, height
    if len(points) and points.min() < 0:
        raise ValueError(f"Cannot export {name} points with negative coordinates without a grid size")
    if not len(points):
        return 1, 1
    return max(1, math.ceil(points[:, 0].max())), max(1, math.ceil(points[:, 1].max()))
