"""
Polynomial misalignment-correction models and their least-squares fit

A model maps working-resolution base pixel coordinates (x_b, y_b) to
corrected warp pixel coordinates (x_w, y_w):

    shift:      x_w = a1 + x_b
    affine:     x_w = a1 + a2 x_b + a3 y_b
    quadratic:  x_w = a1 + a2 x_b + a3 y_b + a4 x_b^2 + a5 x_b y_b + a6 y_b^2

and likewise for y_w with the b coefficients.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.linalg import qr, solve_triangular

from errors import EmptySet, InsufficientPoints, RankDeficient
from geo.transform import PixelPoint
from alignment.tiepoints import TiePointSet

logger = logging.getLogger(__name__)

# Condition number bound (after scaling) above which a fit is refused
MAX_CONDITION = 1e12

ArrayLike = Union[float, np.ndarray]


class ModelKind(Enum):
    SHIFT = "shift"
    AFFINE = "affine"
    QUADRATIC = "quadratic"

    @property
    def params_per_axis(self) -> int:
        return {"shift": 1, "affine": 3, "quadratic": 6}[self.value]

    @classmethod
    def parse(cls, name: Union[str, "ModelKind"]) -> "ModelKind":
        if isinstance(name, ModelKind):
            return name
        try:
            return cls(name.lower())
        except ValueError as e:
            raise ValueError(f"Unknown model kind {name!r}; expected shift, affine or quadratic") from e


def design_matrix(kind: ModelKind, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Monomial basis evaluated at every point, columns in coefficient order"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ones = np.ones_like(xs)
    if kind is ModelKind.SHIFT:
        columns = [ones]
    elif kind is ModelKind.AFFINE:
        columns = [ones, xs, ys]
    else:
        columns = [ones, xs, ys, xs * xs, xs * ys, ys * ys]
    return np.stack(columns, axis=-1)


def design_row(kind: ModelKind, p: PixelPoint) -> np.ndarray:
    """Monomial basis at one point: [1], [1, x, y] or [1, x, y, x^2, xy, y^2]"""
    return design_matrix(kind, np.array(p.x), np.array(p.y))


@dataclass(frozen=True)
class CorrectionModel:
    """Coefficients of one polynomial correction model (working-resolution pixels)"""
    kind: ModelKind
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self):
        k = self.kind.params_per_axis
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if len(a) != k or len(b) != k:
            raise ValueError(f"{self.kind.value} model needs {k} coefficients per axis, got {len(a)}/{len(b)}")
        if not all(math.isfinite(v) for v in a + b):
            raise ValueError("Model coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls, kind: ModelKind = ModelKind.AFFINE) -> "CorrectionModel":
        if kind is ModelKind.SHIFT:
            return cls(kind, (0.0,), (0.0,))
        if kind is ModelKind.AFFINE:
            return cls(kind, (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
        return cls(kind, (0.0, 1.0, 0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0, 0.0, 0.0))

    def evaluate_xy(self, xs: ArrayLike, ys: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """Apply the model elementwise to scalars or arrays"""
        a, b = self.a, self.b
        if self.kind is ModelKind.SHIFT:
            return a[0] + xs, b[0] + ys
        if self.kind is ModelKind.AFFINE:
            return (a[0] + a[1] * xs + a[2] * ys,
                    b[0] + b[1] * xs + b[2] * ys)
        return (a[0] + a[1] * xs + a[2] * ys + a[3] * xs * xs + a[4] * xs * ys + a[5] * ys * ys,
                b[0] + b[1] * xs + b[2] * ys + b[3] * xs * xs + b[4] * xs * ys + b[5] * ys * ys)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CorrectionModel":
        return cls(ModelKind.parse(d["kind"]), tuple(d["a"]), tuple(d["b"]))


def evaluate(model: CorrectionModel, p: PixelPoint) -> PixelPoint:
    """Corrected warp coordinate for a base coordinate"""
    x, y = model.evaluate_xy(p.x, p.y)
    return PixelPoint(float(x), float(y))


@dataclass
class FitReport:
    """Before/after reprojection error of a fit"""
    rmse_before: float
    rmse_after: float
    inlier_count: int
    total_count: int
    residuals: np.ndarray = field(repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rmse_before": self.rmse_before,
            "rmse_after": self.rmse_after,
            "inlier_count": self.inlier_count,
            "total_count": self.total_count,
            "residuals": np.asarray(self.residuals).tolist(),
        }


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

def _normalization(values: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(values.min()), float(values.max())
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return center, (half if half > 0 else 1.0)


def _expand(kind: ModelKind, c: np.ndarray, cx: float, sx: float, cy: float, sy: float) -> np.ndarray:
    """Coefficients in u = (x - cx)/sx, v = (y - cy)/sy re-expressed in raw x, y"""
    if kind is ModelKind.SHIFT:
        return c.copy()
    al, be = 1.0 / sx, -cx / sx
    ga, de = 1.0 / sy, -cy / sy
    if kind is ModelKind.AFFINE:
        return np.array([
            c[0] + c[1] * be + c[2] * de,
            c[1] * al,
            c[2] * ga,
        ])
    return np.array([
        c[0] + c[1] * be + c[2] * de + c[3] * be * be + c[4] * be * de + c[5] * de * de,
        c[1] * al + 2.0 * c[3] * al * be + c[4] * al * de,
        c[2] * ga + c[4] * be * ga + 2.0 * c[5] * ga * de,
        c[3] * al * al,
        c[4] * al * ga,
        c[5] * ga * ga,
    ])


def condition_number(kind: ModelKind, base: np.ndarray) -> float:
    """Condition of the column-scaled, normalized design matrix"""
    cx, sx = _normalization(base[:, 0])
    cy, sy = _normalization(base[:, 1])
    A = design_matrix(kind, (base[:, 0] - cx) / sx, (base[:, 1] - cy) / sy)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return float(np.linalg.cond(A / norms))


def fit_arrays(kind: ModelKind, base: np.ndarray, warp: np.ndarray,
               max_condition: float = MAX_CONDITION) -> CorrectionModel:
    """
    Least-squares model from (N, 2) base and warp coordinate arrays

    Base coordinates are mapped to [-1, 1] and design columns scaled to unit
    norm; the x and y systems share one Householder QR factorization.
    """
    base = np.asarray(base, dtype=np.float64).reshape(-1, 2)
    warp = np.asarray(warp, dtype=np.float64).reshape(-1, 2)
    k = kind.params_per_axis
    if len(base) < k:
        raise InsufficientPoints(f"{kind.value} model needs at least {k} tiepoints, got {len(base)}")

    cx, sx = _normalization(base[:, 0])
    cy, sy = _normalization(base[:, 1])
    A = design_matrix(kind, (base[:, 0] - cx) / sx, (base[:, 1] - cy) / sy)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    Q, R = qr(A / norms, mode="economic")

    cond = float(np.linalg.cond(R))
    if not math.isfinite(cond) or cond > max_condition:
        raise RankDeficient(f"{kind.value} design matrix condition {cond:.3g} exceeds {max_condition:.0e}")

    # Shift models carry an implicit identity term
    targets = warp - base if kind is ModelKind.SHIFT else warp
    solution = solve_triangular(R, Q.T @ targets) / norms[:, None]
    a = _expand(kind, solution[:, 0], cx, sx, cy, sy)
    b = _expand(kind, solution[:, 1], cx, sx, cy, sy)
    return CorrectionModel(kind, tuple(a), tuple(b))


def fit(kind: ModelKind, tps: TiePointSet) -> CorrectionModel:
    """
    Least-squares estimate of the model coefficients from tiepoints

    Args:
        kind: shift, affine or quadratic
        tps: tiepoints at working resolution

    Returns:
        Model minimizing the summed squared reprojection error
    """
    return fit_arrays(kind, tps.base, tps.warp)


def residuals(model: CorrectionModel, tps: TiePointSet) -> np.ndarray:
    """Per-tiepoint (dx, dy) = model(base) - warp"""
    xs, ys = model.evaluate_xy(tps.base[:, 0], tps.base[:, 1])
    return np.stack([xs - tps.warp[:, 0], ys - tps.warp[:, 1]], axis=-1)


def rmse_of(res: np.ndarray) -> float:
    if len(res) == 0:
        raise EmptySet("RMSE needs at least one residual")
    return float(np.sqrt(np.mean(np.sum(np.square(res), axis=1))))


def reprojection_rmse(model: CorrectionModel, tps: TiePointSet) -> float:
    """Root-mean-square distance between predicted and measured warp points"""
    if len(tps) == 0:
        raise EmptySet("Reprojection RMSE needs at least one tiepoint")
    return rmse_of(residuals(model, tps))


def grid_displacement(model_a: CorrectionModel, model_b: CorrectionModel,
                      width: int, height: int, step: float = 8.0) -> float:
    """Largest distance between two models' mappings over a regular grid"""
    xs, ys = np.meshgrid(np.arange(0.0, width + 1e-9, step), np.arange(0.0, height + 1e-9, step))
    ax, ay = model_a.evaluate_xy(xs, ys)
    bx, by = model_b.evaluate_xy(xs, ys)
    return float(np.max(np.hypot(ax - bx, ay - by)))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_document(model: CorrectionModel, working_gsd_m: float,
                   base_grid: Dict[str, Any], warp_grid: Dict[str, Any],
                   metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """JSON-ready model document: kind, a, b, then grid context"""
    document = model.to_dict()
    document.update({
        "working_gsd_m": working_gsd_m,
        "base_grid": base_grid,
        "warp_grid": warp_grid,
    })
    if metadata:
        document["metadata"] = metadata
    return document


def save_model(document: Dict[str, Any], path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    return path


def load_model(path: str) -> Tuple[CorrectionModel, Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        document = json.load(f)
    return CorrectionModel.from_dict(document), document
