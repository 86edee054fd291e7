"""Pure-numpy versions of the hot kernels.

Same signatures and semantics as the compiled ``filtnoise._ext`` module. Used
when the extension is not built, or when ``FILTNOISE_PURE=1`` is set.
"""

import numpy as np

# points per chunk for the mode sum; bounds the (chunk, n_modes) temporaries
_CHUNK = 2048


def mode_velocity(points, kvec, cos_w, sin_w):
    """Sum ``cos_w[j] cos(k_j . x) + sin_w[j] sin(k_j . x)`` over modes.

    Parameters
    ----------
    points : (M, 2) float array
    kvec : (n, 2) integer array of wavevectors
    cos_w, sin_w : (n, 2) float arrays of vector weights

    Returns
    -------
    (M, 2) float array
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    kvec = np.asarray(kvec, dtype=np.float64)
    cos_w = np.asarray(cos_w, dtype=np.float64)
    sin_w = np.asarray(sin_w, dtype=np.float64)
    out = np.empty((points.shape[0], 2))
    for start in range(0, points.shape[0], _CHUNK):
        p = points[start:start + _CHUNK]
        phase = p @ kvec.T
        out[start:start + _CHUNK] = np.cos(phase) @ cos_w + np.sin(phase) @ sin_w
    return out


def _bspline_weights(t):
    t2 = t * t
    t3 = t2 * t
    return np.stack(
        [
            (1.0 - t) ** 3 / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0,
        ],
        axis=-1,
    )


def spline_velocity(coef_u, coef_v, points):
    """Evaluate two periodic cubic B-spline fields on ``[0, 2pi)^2``.

    ``coef_u`` and ``coef_v`` are (G, G) B-spline coefficient grids with node
    ``(i, j)`` at ``(2 pi i / G, 2 pi j / G)``.
    """
    coef_u = np.asarray(coef_u, dtype=np.float64)
    coef_v = np.asarray(coef_v, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    g = coef_u.shape[0]
    h = 2.0 * np.pi / g
    sx = np.mod(points[:, 0], 2.0 * np.pi) / h
    sy = np.mod(points[:, 1], 2.0 * np.pi) / h
    ix = np.floor(sx).astype(np.int64)
    iy = np.floor(sy).astype(np.int64)
    wx = _bspline_weights(sx - ix)
    wy = _bspline_weights(sy - iy)
    offs = np.arange(-1, 3)
    gx = np.mod(ix[:, None] + offs, g)
    gy = np.mod(iy[:, None] + offs, g)
    cu = coef_u[gx[:, :, None], gy[:, None, :]]
    cv = coef_v[gx[:, :, None], gy[:, None, :]]
    w = wx[:, :, None] * wy[:, None, :]
    return np.stack([(cu * w).sum(axis=(1, 2)), (cv * w).sum(axis=(1, 2))], axis=1)
