import json

import numpy as np
import pytest

from errors import EmptySet, InsufficientPoints, RankDeficient
from geo.transform import PixelPoint
from alignment.correction_model import (
    CorrectionModel, ModelKind, design_matrix, design_row, evaluate, fit, grid_displacement, load_model,
    model_document, reprojection_rmse, residuals, save_model,
)
from alignment.tiepoints import TiePointSet

KINDS = [ModelKind.SHIFT, ModelKind.AFFINE, ModelKind.QUADRATIC]


def random_model(rng, kind):
    if kind is ModelKind.SHIFT:
        return CorrectionModel(kind, (rng.normal(0, 3),), (rng.normal(0, 3),))
    if kind is ModelKind.AFFINE:
        return CorrectionModel(kind, (rng.normal(0, 3), 1 + rng.normal(0, 0.01), rng.normal(0, 0.01)),
                               (rng.normal(0, 3), rng.normal(0, 0.01), 1 + rng.normal(0, 0.01)))
    return CorrectionModel(
        kind,
        (rng.normal(0, 3), 1 + rng.normal(0, 0.01), rng.normal(0, 0.01), *rng.normal(0, 1e-5, 3)),
        (rng.normal(0, 3), rng.normal(0, 0.01), 1 + rng.normal(0, 0.01), *rng.normal(0, 1e-5, 3)),
    )


def tiepoints_for(model, base, noise=None):
    xs, ys = model.evaluate_xy(base[:, 0], base[:, 1])
    warp = np.stack([xs, ys], axis=-1)
    if noise is not None:
        warp = warp + noise
    return TiePointSet(base, warp, np.ones(len(base)))


@pytest.mark.parametrize("kind", KINDS)
def test_exact_recovery(kind, rng):
    truth = random_model(rng, kind)
    base = rng.uniform(0, 200, (40, 2))
    model = fit(kind, tiepoints_for(truth, base))
    assert model.kind is kind
    assert grid_displacement(model, truth, 200, 200) < 1e-8
    assert reprojection_rmse(model, tiepoints_for(truth, base)) < 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_minimal_point_count(kind, rng):
    truth = random_model(rng, kind)
    base = rng.uniform(0, 200, (kind.params_per_axis, 2))
    model = fit(kind, tiepoints_for(truth, base))
    assert np.max(np.abs(residuals(model, tiepoints_for(truth, base)))) < 1e-6


@pytest.mark.parametrize("kind", KINDS)
def test_too_few_points(kind, rng):
    base = rng.uniform(0, 200, (kind.params_per_axis - 1, 2))
    with pytest.raises(InsufficientPoints):
        fit(kind, tiepoints_for(CorrectionModel.identity(kind), base))


def test_matches_independent_least_squares(rng):
    for trial in range(100):
        kind = KINDS[trial % 3]
        n = int(rng.integers(kind.params_per_axis + 3, 80))
        base = rng.uniform(0, 300, (n, 2))
        truth = random_model(rng, kind)
        tps = tiepoints_for(truth, base, noise=rng.normal(0, 0.5, (n, 2)))
        model = fit(kind, tps)

        A = design_matrix(kind, base[:, 0], base[:, 1])
        targets = tps.warp - base if kind is ModelKind.SHIFT else tps.warp
        solution, *_ = np.linalg.lstsq(A, targets, rcond=None)
        oracle = CorrectionModel(kind, tuple(solution[:, 0]), tuple(solution[:, 1]))
        assert grid_displacement(model, oracle, 300, 300, step=30.0) < 1e-6, f"trial {trial}"
        assert reprojection_rmse(model, tps) <= reprojection_rmse(oracle, tps) + 1e-9


def test_design_row_monomials():
    p = PixelPoint(2.0, 3.0)
    assert design_row(ModelKind.SHIFT, p).tolist() == [1.0]
    assert design_row(ModelKind.AFFINE, p).tolist() == [1.0, 2.0, 3.0]
    assert design_row(ModelKind.QUADRATIC, p).tolist() == [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]


def test_richer_models_never_fit_worse(rng):
    for trial in range(20):
        base = rng.uniform(0, 200, (60, 2))
        truth = random_model(rng, ModelKind.QUADRATIC)
        tps = tiepoints_for(truth, base, noise=rng.normal(0, 0.4, (60, 2)))
        shift, affine, quad = (reprojection_rmse(fit(kind, tps), tps) for kind in KINDS)
        assert quad <= affine + 1e-9, f"trial {trial}"
        assert affine <= shift + 1e-9, f"trial {trial}"


@pytest.mark.parametrize("kind", [ModelKind.AFFINE, ModelKind.QUADRATIC])
def test_translating_warp_only_moves_constant_terms(kind, rng):
    base = rng.uniform(0, 200, (50, 2))
    tps = tiepoints_for(random_model(rng, kind), base, noise=rng.normal(0, 0.3, (50, 2)))
    moved = TiePointSet(tps.base, tps.warp + [4.25, -7.5], tps.scores)
    before, after = fit(kind, tps), fit(kind, moved)
    assert after.a[0] == pytest.approx(before.a[0] + 4.25, abs=1e-7)
    assert after.b[0] == pytest.approx(before.b[0] - 7.5, abs=1e-7)
    assert np.allclose(after.a[1:], before.a[1:], rtol=0, atol=1e-9)
    assert np.allclose(after.b[1:], before.b[1:], rtol=0, atol=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_residuals_orthogonal_to_design(kind, rng):
    base = rng.uniform(0, 100, (40, 2))
    tps = tiepoints_for(random_model(rng, kind), base, noise=rng.normal(0, 0.5, (40, 2)))
    res = residuals(fit(kind, tps), tps)
    A = design_matrix(kind, base[:, 0], base[:, 1])
    scale = np.linalg.norm(A, axis=0)[:, None] * np.linalg.norm(res, axis=0)[None, :]
    assert np.all(np.abs(A.T @ res) <= 1e-9 * scale)


def test_collinear_points_are_rank_deficient():
    line = np.stack([np.linspace(0, 100, 20), np.full(20, 50.0)], axis=-1)
    with pytest.raises(RankDeficient):
        fit(ModelKind.AFFINE, tiepoints_for(CorrectionModel.identity(), line))
    diagonal = np.stack([np.linspace(0, 100, 20), np.linspace(0, 100, 20)], axis=-1)
    with pytest.raises(RankDeficient):
        fit(ModelKind.QUADRATIC, tiepoints_for(CorrectionModel.identity(ModelKind.QUADRATIC), diagonal))


def test_shift_fits_mean_offset():
    base = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    warp = base + np.array([[1.0, 2.0], [3.0, 2.0], [2.0, 5.0]])
    model = fit(ModelKind.SHIFT, TiePointSet(base, warp, np.ones(3)))
    assert model.a == pytest.approx((2.0,))
    assert model.b == pytest.approx((3.0,))


def test_evaluate_and_residuals():
    model = CorrectionModel(ModelKind.AFFINE, (1.0, 2.0, 0.0), (0.0, 0.0, 1.0))
    assert evaluate(model, PixelPoint(3.0, 4.0)) == PixelPoint(7.0, 4.0)
    tps = TiePointSet(np.array([[3.0, 4.0], [0.0, 0.0]]), np.array([[7.0, 4.0], [4.0, 4.0]]), np.ones(2))
    assert residuals(model, tps).tolist() == [[0.0, 0.0], [-3.0, -4.0]]
    assert reprojection_rmse(model, tps) == pytest.approx(np.sqrt(12.5))


def test_rmse_of_empty_set():
    empty = TiePointSet(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(EmptySet):
        reprojection_rmse(CorrectionModel.identity(), empty)


def test_grid_displacement():
    a = CorrectionModel(ModelKind.SHIFT, (0.0,), (0.0,))
    b = CorrectionModel(ModelKind.SHIFT, (3.0,), (4.0,))
    assert grid_displacement(a, b, 64, 64) == pytest.approx(5.0)


def test_coefficient_count_checked():
    with pytest.raises(ValueError):
        CorrectionModel(ModelKind.AFFINE, (0.0, 1.0), (0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        ModelKind.parse("cubic")


def test_model_document_round_trip(tmp_path, rng):
    model = random_model(rng, ModelKind.QUADRATIC)
    grid = {"width": 100, "height": 80}
    document = model_document(model, 30.0, grid, grid, {"seed": 0})
    assert list(document)[:3] == ["kind", "a", "b"]
    path = save_model(document, str(tmp_path / "model.json"))
    loaded, raw = load_model(path)
    assert loaded == model
    assert raw["working_gsd_m"] == 30.0
    assert json.loads((tmp_path / "model.json").read_text())["metadata"] == {"seed": 0}
