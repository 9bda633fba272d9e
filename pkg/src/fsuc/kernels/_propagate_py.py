"""Pure-numpy affine propagation kernel (fallback backend).

Same contract as the compiled kernel: iterate x_{k+1} = M x_k + c recording
y_k = C x_k.  To keep the Python-level loop count low the recurrence is
unrolled in blocks: with P = [M; M^2; ...; M^B] and d_m = (sum_{j<m} M^j) c,
a whole block of states is one matmul, P @ x + d.
"""

import numpy as np

_BLOCK = 64


def propagate_affine(m, c, out_map, x0, n_steps):
    """Return the (n_steps+1, k) trajectory of y = out_map @ x."""
    m = np.asarray(m, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out_map = np.asarray(out_map, dtype=np.float64)
    x = np.asarray(x0, dtype=np.float64).copy()
    n = m.shape[0]
    k = out_map.shape[0]
    y = np.empty((n_steps + 1, k), dtype=np.float64)
    y[0] = out_map @ x

    block = int(min(_BLOCK, max(n_steps, 1)))
    # Stacked powers P[(m-1)*n:m*n] = M^m and affine terms d[m-1] = (I+...+M^(m-1)) c.
    powers = np.empty((block, n, n), dtype=np.float64)
    offsets = np.empty((block, n), dtype=np.float64)
    powers[0] = m
    offsets[0] = c
    for i in range(1, block):
        powers[i] = m @ powers[i - 1]
        offsets[i] = m @ offsets[i - 1] + c
    # per-lag map from x to y: proj[m][j, k] = (C @ M^(m+1))[k, j]
    proj = np.transpose(powers, (0, 2, 1)) @ out_map.T

    done = 0
    while done < n_steps:
        take = min(block, n_steps - done)
        # y rows done+1 .. done+take, each C(M^m x + d_m)
        y[done + 1:done + take + 1] = (
            np.einsum("j,bjk->bk", x, proj[:take]) + offsets[:take] @ out_map.T
        )
        x = powers[take - 1] @ x + offsets[take - 1]
        done += take
    return y
