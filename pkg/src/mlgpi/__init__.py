"""Nonlinear metric learning by geodesic velocity fusion of local metrics."""

__version__ = "0.1.0"

from .classify import (EvaluationReport, TrainedModel, cross_validate,
                       fit_model, gpi_distance, knn_classify, plml_distance)
from .data import LabeledDataset, Standardizer, load_dataset, synth_stripes
from .fusion import (ComponentTransform, FusionAtlas, displacement_fusion,
                     fused_velocity, integrate_flow, jacobian_grid,
                     normalized_weights)
from .linalg import geodesic_interp, mat_exp, mat_log, project_to_glplus
from .lmnn import LmnnConfig, train_lmnn, train_multi_metric
