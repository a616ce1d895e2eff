"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError
from .scenario import Scenario


def check_scenario(scenario):
    if not isinstance(scenario, Scenario):
        raise ConfigurationError(f"expected a Scenario, got {type(scenario).__name__}")
    return scenario.validated()


def check_times(X, T):
    """Query times as a flat float array inside ``[0, T]``.

    Accepts a 1-D array of times or a single-column 2-D array.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    arr = check_array(arr, dtype=float, ensure_2d=True)
    if arr.shape[1] != 1:
        raise ValueError(f"expected one column of times, got {arr.shape[1]}")
    t = arr[:, 0]
    if np.any(t < 0.0) or np.any(t > T * (1.0 + 1e-12)):
        raise ValueError(f"query times must lie in [0, {T}]")
    return t
