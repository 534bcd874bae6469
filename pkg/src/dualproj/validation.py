"""Input validation helpers shared by every estimator and engine module."""

import numpy as np


def check_matrix(X, name="X", dtype=np.float64, allow_empty=False, copy=True):
    """Coerce ``X`` to a 2-D array of ``dtype`` and verify finiteness.

    With ``copy=True`` (the default) the result is a new contiguous array the
    caller may mutate freely. Read-only hot paths pass ``copy=False`` to skip
    the allocation; they get the caller's array back when it already conforms.
    """
    if copy:
        X = np.array(X, dtype=dtype, order="C", copy=True)
    else:
        X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={X.ndim}")
    if not allow_empty and (X.shape[0] == 0 or X.shape[1] == 0):
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        i, j = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"{name} contains a non-finite value at ({int(i)}, {int(j)})")
    return X


def check_vector(v, name="v", dtype=np.float64):
    v = np.asarray(v, dtype=dtype)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def check_same_shape(A, B, name_a="X", name_b="X_new"):
    if A.shape != B.shape:
        raise ValueError(
            f"{name_a} and {name_b} must share a shape, got {A.shape} vs {B.shape}"
        )


def check_fitted(obj, attr):
    if getattr(obj, attr, None) is None:
        raise RuntimeError(
            f"{type(obj).__name__} is not fitted; call fit() before this operation"
        )
