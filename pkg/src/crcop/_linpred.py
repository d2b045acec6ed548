import numpy as np


def linear_predictor(z, coef):
    """Return ``z . coef`` with a convention that keeps scalar covariates cheap.

    With a single coefficient every entry of ``z`` is a covariate value and the
    product is elementwise, so ``z`` may be a scalar or any array of subjects.
    With ``p > 1`` coefficients the last axis of ``z`` holds the covariates.
    """
    coef = np.atleast_1d(np.asarray(coef, dtype=float))
    z = np.asarray(z, dtype=float)
    if coef.size == 1:
        if z.ndim >= 1 and z.shape[-1] == 1 and z.ndim == 2:
            z = z[:, 0]
        return z * coef[0]
    if z.shape[-1] != coef.size:
        raise ValueError(f"covariate dimension {z.shape[-1]} != {coef.size} coefficients")
    return z @ coef
