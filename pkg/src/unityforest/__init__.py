"""Unity forests: tree ensembles with jointly chosen tree roots."""

from .core import (
    Covariate,
    Dataset,
    Hyperparams,
    Schema,
    Task,
    ValidationError,
    default_hyperparams,
    make_dataset,
    read_csv,
    validate_dataset,
)
from .forest import Forest, load_forest, save_forest, train, train_reference_rf
from .importance import VimResult, permutation_vim_baseline, unity_vim
from .crtr import CrtrReport, NoCrtr, crtrs, select_crtr

__version__ = "0.1.0"
