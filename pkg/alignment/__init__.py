"""
Tiepoints, correction models, robust fitting and resampling
"""
from .tiepoints import (
    TiePoint, TiePointSet, MatchParams, detect_corners, describe_and_match, match_images,
    import_tiepoints, export_tiepoints,
)
from .correction_model import (
    ModelKind, CorrectionModel, FitReport, evaluate, fit, residuals, reprojection_rmse,
    grid_displacement, model_document, save_model, load_model,
)
from .robust_fit import RansacConfig, RobustFitResult, ransac_fit, fit_with_policy
from .resample import (
    InterpolationMethod, WorkingResolution, default_method, sample, to_working_resolution,
    working_resolution, resample_band_through_model,
)

__all__ = [
    'TiePoint', 'TiePointSet', 'MatchParams', 'detect_corners', 'describe_and_match', 'match_images',
    'import_tiepoints', 'export_tiepoints',
    'ModelKind', 'CorrectionModel', 'FitReport', 'evaluate', 'fit', 'residuals', 'reprojection_rmse',
    'grid_displacement', 'model_document', 'save_model', 'load_model',
    'RansacConfig', 'RobustFitResult', 'ransac_fit', 'fit_with_policy',
    'InterpolationMethod', 'WorkingResolution', 'default_method', 'sample', 'to_working_resolution',
    'working_resolution', 'resample_band_through_model',
]
