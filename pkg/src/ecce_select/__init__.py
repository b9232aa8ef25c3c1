"""Calibration metrics, post-hoc calibrators and guarded model selection."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CumulativeCurve,
    PredictionSet,
    canonical_sort,
    cumulative_curve,
    make_prediction_set,
)
from .metrics import (  # noqa: E402
    BinningSpec,
    MetricReport,
    Norm,
    Scheme,
    Weighting,
    brier_score,
    ece,
    ecce_mad,
    ecce_r,
    ecce_r_interval_oracle,
    log_loss,
    metric_report,
)
from .calibrators import Calibrator, Kind, fit_isotonic, fit_platt, fit_spline  # noqa: E402
