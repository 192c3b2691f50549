"""Teacher/student similarity loss for learning-without-forgetting finetuning.

Only the similarity term is provided; the detector losses it is summed with
belong to the training harness.
"""
import numpy as np

EPS = 1e-12
SIMPLEX_TOL = 1e-6


def _pair(y_st, y_te, check):
    y_st = np.asarray(y_st, dtype=np.float64)
    y_te = np.asarray(y_te, dtype=np.float64)
    if y_st.ndim != 1 or y_te.ndim != 1:
        raise ValueError("probability vectors must be one-dimensional")
    if y_st.shape != y_te.shape:
        raise ValueError(f"length mismatch: {y_st.shape[0]} vs {y_te.shape[0]}")
    if check:
        for name, v in (("y_st", y_st), ("y_te", y_te)):
            if np.any(v < 0) or abs(v.sum() - 1.0) > SIMPLEX_TOL:
                raise ValueError(f"{name} is not a probability vector")
    return y_st, y_te


def kl_similarity_loss(y_st, y_te, *, check=True):
    """KL(student || teacher) summed over classes.

    Terms with a zero student probability contribute 0; teacher entries are
    clamped to ``EPS``. Pass ``check=False`` to evaluate off the simplex
    (e.g. for finite differences).
    """
    y_st, y_te = _pair(y_st, y_te, check)
    q = np.maximum(y_te, EPS)
    pos = y_st > 0
    return float(np.sum(y_st[pos] * np.log(y_st[pos] / q[pos])))


def kl_gradient(y_st, y_te, *, check=True):
    """Partial derivatives of the loss w.r.t. each student probability.

    Coordinates are treated as free (no projection onto the simplex); chain
    through a softmax Jacobian on the caller's side if needed.
    """
    y_st, y_te = _pair(y_st, y_te, check)
    p = np.maximum(y_st, EPS)
    q = np.maximum(y_te, EPS)
    return np.log(p / q) + 1.0


def weighted_similarity_loss(y_st, y_te, weight=2.0, *, check=True):
    if not weight > 0:
        raise ValueError(f"loss weight must be > 0, got {weight}")
    return weight * kl_similarity_loss(y_st, y_te, check=check)
