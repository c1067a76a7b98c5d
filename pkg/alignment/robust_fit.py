"""
RANSAC around the correction-model least-squares fit
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np

from errors import ConfigError, InsufficientPoints, NoConsensus, RankDeficient
from alignment.correction_model import (
    CorrectionModel, FitReport, ModelKind, condition_number, fit_arrays, rmse_of,
)
from alignment.tiepoints import TiePointSet

logger = logging.getLogger(__name__)

# Minimal samples whose scaled design matrix is worse than this are redrawn
SAMPLE_MAX_CONDITION = 1e8
MAX_DRAWS_PER_ITERATION = 100
# Extra refit/re-classify rounds allowed after refit_rounds to reach a fixed point
SETTLE_ROUNDS = 20

POLICIES = ("shift", "affine", "quadratic", "auto")


@dataclass(frozen=True)
class RansacConfig:
    """Hypothesize-and-verify settings"""
    inlier_threshold_px: float = 1.0
    max_iterations: int = 2000
    confidence: float = 0.999
    seed: int = 0
    refit_rounds: int = 3

    def __post_init__(self):
        if not self.inlier_threshold_px > 0:
            raise ConfigError(f"inlier threshold must be > 0, got {self.inlier_threshold_px}")
        if not 0 < self.confidence < 1:
            raise ConfigError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.refit_rounds < 0:
            raise ConfigError(f"refit_rounds must be >= 0, got {self.refit_rounds}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inlier_threshold_px": self.inlier_threshold_px,
            "max_iterations": self.max_iterations,
            "confidence": self.confidence,
            "seed": self.seed,
            "refit_rounds": self.refit_rounds,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RansacConfig":
        defaults = cls()
        return cls(
            inlier_threshold_px=float(d.get("inlier_threshold_px", defaults.inlier_threshold_px)),
            max_iterations=int(d.get("max_iterations", defaults.max_iterations)),
            confidence=float(d.get("confidence", defaults.confidence)),
            seed=int(d.get("seed", defaults.seed)),
            refit_rounds=int(d.get("refit_rounds", defaults.refit_rounds)),
        )


@dataclass
class RobustFitResult:
    """Outcome of ransac_fit"""
    model: CorrectionModel
    inlier_mask: np.ndarray
    report: FitReport
    iterations_used: int
    rmse_history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "inlier_mask": self.inlier_mask.astype(int).tolist(),
            "report": self.report.to_dict(),
            "iterations_used": self.iterations_used,
            "rmse_history": list(self.rmse_history),
        }


def _residual_norms(model: CorrectionModel, base: np.ndarray, warp: np.ndarray) -> np.ndarray:
    xs, ys = model.evaluate_xy(base[:, 0], base[:, 1])
    return np.hypot(xs - warp[:, 0], ys - warp[:, 1])


def _iteration_bound(inlier_ratio: float, sample_size: int, confidence: float, cap: int) -> int:
    """Iterations needed to draw one all-inlier sample with the given confidence"""
    p_good = inlier_ratio ** sample_size
    if p_good >= 1.0:
        return 1
    if p_good <= 0.0:
        return cap
    bound = math.log(1.0 - confidence) / math.log(1.0 - p_good)
    return int(min(cap, max(1, math.ceil(bound))))


def _draw_sample(rng: np.random.Generator, kind: ModelKind, base: np.ndarray) -> Optional[np.ndarray]:
    k = kind.params_per_axis
    for _ in range(MAX_DRAWS_PER_ITERATION):
        idx = rng.choice(len(base), size=k, replace=False)
        if k == 1 or condition_number(kind, base[idx]) <= SAMPLE_MAX_CONDITION:
            return idx
    return None


def ransac_fit(kind: ModelKind, tps: TiePointSet, cfg: RansacConfig) -> RobustFitResult:
    """
    Find the largest inlier set of tiepoints and fit the model on it

    Iteration i draws its minimal sample from a generator seeded with
    (cfg.seed, i), so results depend only on the seed.

    Args:
        kind: correction model to estimate
        tps: tiepoints at working resolution
        cfg: RANSAC settings

    Returns:
        RobustFitResult with the model refitted on the final inliers
    """
    n = len(tps)
    k = kind.params_per_axis
    if n < k:
        raise InsufficientPoints(f"{kind.value} model needs at least {k} tiepoints, got {n}")
    base, warp = tps.base, tps.warp
    threshold = cfg.inlier_threshold_px

    best_count, best_rmse, best_mask, best_iteration = -1, math.inf, None, -1
    bound = cfg.max_iterations
    iterations = 0
    for iteration in range(cfg.max_iterations):
        if iteration >= bound:
            break
        iterations = iteration + 1
        rng = np.random.default_rng([cfg.seed, iteration])
        idx = _draw_sample(rng, kind, base)
        if idx is None:
            continue
        try:
            hypothesis = fit_arrays(kind, base[idx], warp[idx], max_condition=SAMPLE_MAX_CONDITION)
        except RankDeficient:
            continue

        norms = _residual_norms(hypothesis, base, warp)
        mask = norms <= threshold
        count = int(mask.sum())
        rmse = float(np.sqrt(np.mean(norms[mask] ** 2))) if count else math.inf
        if count > best_count or (count == best_count and rmse < best_rmse):
            best_count, best_rmse, best_mask, best_iteration = count, rmse, mask, iteration
            bound = _iteration_bound(count / n, k, cfg.confidence, cfg.max_iterations)
            logger.debug("iteration %d: consensus %d/%d, rmse %.4f, bound %d",
                         iteration, count, n, rmse, bound)

    floor = k + 2
    if best_mask is None or best_count < floor:
        raise NoConsensus(
            f"Best {kind.value} consensus has {max(best_count, 0)} tiepoints; need at least {floor}"
        )

    mask, model, history = _refit(kind, base, warp, best_mask, cfg, floor)
    res = np.stack(model.evaluate_xy(base[:, 0], base[:, 1]), axis=-1) - warp
    identity = CorrectionModel.identity(ModelKind.SHIFT)
    before = np.stack(identity.evaluate_xy(base[mask, 0], base[mask, 1]), axis=-1) - warp[mask]
    report = FitReport(
        rmse_before=rmse_of(before),
        rmse_after=rmse_of(res[mask]),
        inlier_count=int(mask.sum()),
        total_count=n,
        residuals=res,
    )
    logger.info("%s fit: %d/%d inliers after %d iterations (best at %d), rmse %.3f -> %.3f px",
                kind.value, report.inlier_count, n, iterations, best_iteration,
                report.rmse_before, report.rmse_after)
    return RobustFitResult(model=model, inlier_mask=mask, report=report,
                           iterations_used=iterations, rmse_history=history)


def _truncated_rmse(norms: np.ndarray, mask: np.ndarray, threshold: float) -> float:
    """RMSE with inlier residuals as they are and every other point counted at the threshold"""
    return float(np.sqrt(np.mean(np.where(mask, norms ** 2, threshold ** 2))))


def _refit(kind: ModelKind, base: np.ndarray, warp: np.ndarray, mask: np.ndarray,
           cfg: RansacConfig, floor: int):
    """
    Alternate least-squares refit and re-classification until the inlier set is stable

    The returned mask is exactly the points within the threshold of the
    returned model. History entries are RMSE over all points with
    non-inliers counted at the threshold, which no round increases.
    """
    history = []
    threshold = cfg.inlier_threshold_px
    model = fit_arrays(kind, base[mask], warp[mask])
    for round_no in range(cfg.refit_rounds + SETTLE_ROUNDS):
        norms = _residual_norms(model, base, warp)
        history.append(_truncated_rmse(norms, mask, threshold))
        new_mask = norms <= threshold
        if np.array_equal(new_mask, mask):
            return mask, model, history
        if int(new_mask.sum()) < floor:
            break
        if round_no == cfg.refit_rounds:
            logger.debug("Inlier set still changing after %d refit rounds", cfg.refit_rounds)
        mask = new_mask
        model = fit_arrays(kind, base[mask], warp[mask])

    # No fixed point: drop inliers above threshold until the rest agree
    norms = _residual_norms(model, base, warp)
    while np.any(norms[mask] > threshold):
        mask = mask & (norms <= threshold)
        if int(mask.sum()) < floor:
            raise NoConsensus(f"Inlier set collapsed below {floor} tiepoints during refit")
        model = fit_arrays(kind, base[mask], warp[mask])
        norms = _residual_norms(model, base, warp)
        history.append(_truncated_rmse(norms, mask, threshold))
    # Points the shrunk model now accepts count as inliers too
    mask = norms <= threshold
    history.append(_truncated_rmse(norms, mask, threshold))
    return mask, model, history


def fit_with_policy(policy: Union[str, ModelKind], tps: TiePointSet, cfg: RansacConfig,
                    quadratic_min_inliers: int = 24) -> RobustFitResult:
    """
    Robust fit under a model-selection policy

    "auto" fits affine, then tries quadratic when the affine fit kept at
    least quadratic_min_inliers tiepoints; quadratic is used when it keeps
    at least as many inliers as affine.
    """
    if isinstance(policy, ModelKind):
        return ransac_fit(policy, tps, cfg)
    if policy not in POLICIES:
        raise ConfigError(f"Unknown model policy {policy!r}; expected one of {', '.join(POLICIES)}")
    if policy != "auto":
        return ransac_fit(ModelKind.parse(policy), tps, cfg)

    affine = ransac_fit(ModelKind.AFFINE, tps, cfg)
    if affine.report.inlier_count < quadratic_min_inliers:
        return affine
    try:
        quadratic = ransac_fit(ModelKind.QUADRATIC, tps, cfg)
    except (NoConsensus, RankDeficient, InsufficientPoints) as e:
        logger.info("Quadratic attempt failed (%s); keeping affine", e)
        return affine
    if quadratic.report.inlier_count >= affine.report.inlier_count:
        return quadratic
    return affine
