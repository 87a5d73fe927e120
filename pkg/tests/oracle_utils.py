"""Independent reference implementations used to cross-check the library.

Everything here is built from first principles (explicit permutation
matrices, direct subset enumeration, index arithmetic) so the checks do not
share code with the paths they verify.
"""

from itertools import combinations
from math import comb

import numpy as np


def cyclic_shift_matrix(h, w, dy, dx):
    """Explicit matrix of the cyclic shift on flattened h*w images."""
    n = h * w
    mat = np.zeros((n, n))
    for r in range(h):
        for c in range(w):
            mat[r * w + c, ((r + dy) % h) * w + ((c + dx) % w)] = 1.0
    return mat


def replicate_pad_reference(img, dy, dx):
    """Index-mapping definition of the replicate-pad shift."""
    h, w = img.shape
    out = np.empty((h + dy, w + dx))
    for r in range(h + dy):
        for c in range(w + dx):
            out[r, c] = img[max(r - dy, 0), max(c - dx, 0)]
    return out


def direct_m_subset_residual(i, x, back_shifted, m):
    """Enumerated sum of m-packet residuals over all subsets containing i."""
    K = len(back_shifted)
    total = np.zeros_like(x)
    for combo in combinations(range(K), m):
        if i not in combo:
            continue
        acc = m * x
        for j in combo:
            if j != i:
                acc = acc - back_shifted[j]
        total = total + acc
    return total


def quadratic_z_minimizer(i, x, y_tilde, z_hats, shift_offsets, mu, lam, beta, m):
    """Minimize the per-packet quadratic objective by explicit linear solve.

    The objective in z is

        mu / C(K, m) * sum over m-subsets containing i of
            (1/N) || x - (1/m) (S_i^T z + sum_{j in subset, j != i} S_j^T z_j) ||^2
      + lam / K * (1/N) || x - S_i^T z ||^2
      + beta * || z - y_tilde ||^2

    assembled with explicit shift matrices and solved as A z = b.
    """
    h, w = x.shape
    n = h * w
    K = len(z_hats)
    xf = x.ravel()
    mats = [cyclic_shift_matrix(h, w, dy, dx).T for dy, dx in shift_offsets]
    p_i = mats[i]
    ptp = p_i.T @ p_i

    a = beta * np.eye(n) + (lam / K) * ptp / n
    b = beta * y_tilde.ravel() + (lam / K) * (p_i.T @ xf) / n
    scale = mu / comb(K, m)
    for combo in combinations(range(K), m):
        if i not in combo:
            continue
        r = np.zeros(n)
        for j in combo:
            if j != i:
                r = r + mats[j] @ z_hats[j].ravel()
        a += scale * ptp / (n * m * m)
        b += scale * (p_i.T @ (xf - r / m)) / (n * m)
    return np.linalg.solve(a, b).reshape(h, w)
