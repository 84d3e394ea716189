from .ensemble import ModelBundle, ensemble_score, load_bundle, save_bundle
from .forest import ForestModel, oob_predictions, predict_forest, train_forest
from .svr import SvrModel, fit_dual, predict_svr, rbf_kernel, train_svr

__all__ = [
    "ForestModel", "ModelBundle", "SvrModel", "ensemble_score", "fit_dual", "load_bundle",
    "oob_predictions", "predict_forest", "predict_svr", "rbf_kernel", "save_bundle",
    "train_forest", "train_svr",
]
