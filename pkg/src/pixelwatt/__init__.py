"""Display power modeling, perception-bounded color transforms, and the
rating-study tooling used to calibrate them."""

from .colorspace import D65, ColorSpace, WhitePoint, convert_array, convert_triple
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    FitError,
    PixelwattError,
)
from .features import FEATURE_NAMES, FeatureVector, correlations, extract_features
from .image import ImageBuffer, convert_image, load_png, png_bytes, save_png
from .powermodel import (
    ChannelPowerParams,
    ChannelScaling,
    MeasurementSample,
    PowerModel,
    fit_from_measurements,
    image_power,
    load_measurements_csv,
    load_model_json,
    refit_in_space,
    save_model_json,
)
from .predictor import (
    CVReport,
    KPrediction,
    PredictorKind,
    TrainedPredictor,
    TrainingRow,
    TrainingSet,
    cross_validate,
    leave_one_image_out,
    load_predictor_json,
    load_training_csv,
    predict_k,
    save_predictor_json,
    train,
)
from .study import (
    BoundaryPoint,
    ControlKind,
    LowerBoundFit,
    MosEntry,
    RatingRecord,
    SCORE_LABELS,
    aggregate_mos,
    filter_batches,
    fit_k,
    lambda_lower_bound,
    load_ratings_csv,
    lower_boundary,
    save_ratings_csv,
)
from .transform import (
    LAMBDA_GRID,
    DistanceMetric,
    LambdaRange,
    TransformConfig,
    TransformResult,
    apply,
    compute_lambda_range,
    denormalize_lambda,
)

__version__ = "0.1.0"
