"""Shared test oracles: finite differences and product-Poisson chi-square."""

import numpy as np
from scipy import stats


def finite_diff_grad(f, theta, rel_h=1e-5):
    """Central finite-difference gradient with coordinate-scaled steps."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for j in range(theta.size):
        h = rel_h * (1.0 + abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (f(up) - f(dn)) / (2.0 * h)
    return g


def product_poisson_chi2_p(counts, means, min_expected=5.0):
    """Chi-square p-value of empirical joint counts against independent Poissons.

    ``counts`` is an (n_draws, N) matrix of joint count vectors.  Joint cells
    with expected count below ``min_expected`` are lumped into one remainder
    cell so the chi-square approximation is valid.
    """
    counts = np.asarray(counts)
    n_draws, n_coord = counts.shape
    caps = counts.max(axis=0)
    # Observed joint frequencies over the box [0, cap]^N.
    idx = np.zeros(n_draws, dtype=np.int64)
    mult = 1
    for c in range(n_coord):
        idx += counts[:, c] * mult
        mult *= caps[c] + 1
    observed = np.bincount(idx, minlength=mult).astype(float)

    # Expected joint probabilities cell by cell (same indexing).
    marginals = [stats.poisson.pmf(np.arange(caps[c] + 1), means[c]) for c in range(n_coord)]
    expected_p = marginals[0]
    for c in range(1, n_coord):
        expected_p = np.outer(marginals[c], expected_p).ravel()  # index = s_c*mult_c + prior
    expected = expected_p * n_draws

    # Everything outside the box, or with tiny expectation, lumps together.
    keep = expected >= min_expected
    obs_cells = np.append(observed[keep], observed[~keep].sum())
    exp_cells = np.append(expected[keep], n_draws - expected[keep].sum())
    if exp_cells[-1] <= 0:
        obs_cells, exp_cells = obs_cells[:-1], exp_cells[:-1]
    stat = np.sum((obs_cells - exp_cells) ** 2 / exp_cells)
    dof = obs_cells.size - 1
    return float(stats.chi2.sf(stat, dof))
