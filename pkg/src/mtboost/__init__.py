"""Multi-task gradient boosting with learned outlier-task gating."""

from .boosting import (BaselineKind, BaselineModel, ComponentEnsemble,
                       augment_task_onehot, fit_baseline, fit_gb, pool,
                       predict_gb)
from .data import MultiTaskDataset, load_csv, save_csv
from .evaluation import (MetricReport, RankSummary, align_theta, expand_grid,
                         grid_search_cv, metric, predict_dataset, rank_models,
                         split_train_test)
from .experiment import (DEFAULT_GRIDS, MODEL_NAMES, ExperimentConfig,
                         ExperimentResult, run_experiment)
from .losses import LossKind, loss_value, pseudo_residual, sigmoid, softmax
from .rmtgb import (RmtgbConfig, RmtgbModel, fit_rmtgb, non_outlier_residuals,
                    outlier_residuals, predict_rmtgb, shared_residuals,
                    task_residuals, theta_gradient)
from .stump import ACTIVE_KERNEL, Stump, fit_stump, predict_stump
from .synth import (PRESETS, RffFunction, SynthConfig, SyntheticBatch,
                    gen_multitask, rff_eval, sample_rff, sample_task_functions)

__version__ = "0.1.0"
