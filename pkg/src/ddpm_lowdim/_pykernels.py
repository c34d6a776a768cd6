"""Pure-Python/numpy versions of the compiled kernels.

Operation order mirrors ``_ckernels.pyx`` so both backends return
bitwise-identical results.
"""

import numpy as np


def greedy_net(points, eps):
    points = np.ascontiguousarray(points, dtype=np.float64)
    n, d = points.shape
    cols = np.asfortranarray(points)
    eps2 = eps * eps
    mind = np.full(n, np.inf)
    centers = [0]
    cur = 0
    while True:
        s = np.zeros(n)
        for j in range(d):
            diff = cols[:, j] - cols[cur, j]
            s += diff * diff
        np.minimum(mind, s, out=mind)
        arg = int(np.argmax(mind))
        if mind[arg] <= eps2:
            break
        centers.append(arg)
        cur = arg
    return np.asarray(centers, dtype=np.intp)


def propagate_block_variances(alpha, one_minus_alpha_bar, eta, sigma2, stop_t, on_var, off_var, limit):
    T = len(alpha)
    alpha = [float(v) for v in alpha]
    omab = [float(v) for v in one_minus_alpha_bar]
    eta = [float(v) for v in eta]
    sigma2 = [float(v) for v in sigma2]
    on_var = float(on_var)
    off_var = float(off_var)
    for t in range(T, stop_t, -1):
        i = t - 1
        m_on = 1.0 - eta[i]
        m_off = 1.0 - eta[i] / omab[i]
        on_var = (m_on * m_on * on_var + sigma2[i]) / alpha[i]
        off_var = (m_off * m_off * off_var + sigma2[i]) / alpha[i]
        if not (on_var <= limit and off_var <= limit):
            return on_var, off_var, t
    return on_var, off_var, 0
