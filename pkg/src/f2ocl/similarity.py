import numpy as np

from .errors import InputError


def normalize(v: np.ndarray, axis: int = -1) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(n == 0):
        raise InputError("cosine similarity is undefined for a zero-norm vector")
    return v / n


_CHUNK_ELEMENTS = 1 << 20


def cosine_matrix(a, b) -> np.ndarray:
    """(n, m) cosine similarities between the rows of ``a`` and ``b``.

    Every entry goes through the same elementwise product and last-axis
    reduction, so identical rows of ``b`` score bit-identically and
    tie-breaking by class id stays exact. A BLAS matmul does not promise
    that: it may round two equal rows differently.
    """
    a, b = normalize(np.atleast_2d(a)), normalize(np.atleast_2d(b))
    out = np.empty((a.shape[0], b.shape[0]))
    step = max(1, _CHUNK_ELEMENTS // max(1, b.size))
    for s in range(0, a.shape[0], step):
        out[s:s + step] = (a[s:s + step, None, :] * b[None, :, :]).sum(-1)
    return out
