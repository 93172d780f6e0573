"""Pure-NumPy twin of the compiled curvature kernels.

Call-compatible with ``_kernels``; used when the extension is not built
and by the backend benchmark. Same conventions: [e_i, e_j] = c[k,i,j] e_k,
nabla_{e_i} e_j = gamma[k,i,j] e_k.
"""

import numpy as np

from .errors import NonSPDMetricError


def _cholesky(g):
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NonSPDMetricError("metric is not symmetric positive definite") from None
    return L


def _gamma(c, g, ginv):
    # K[i,j,l] = 1/2 (<[e_i,e_j],e_l> - <[e_j,e_l],e_i> + <[e_l,e_i],e_j>)
    K = 0.5 * (
        np.einsum("mij,ml->ijl", c, g)
        - np.einsum("mjl,mi->ijl", c, g)
        + np.einsum("mli,mj->ijl", c, g)
    )
    return np.einsum("kl,ijl->kij", ginv, K)


def connection(c, g):
    """Connection coefficients gamma[k,i,j] of the metric g."""
    L = _cholesky(g)
    Linv = np.linalg.inv(L)
    return _gamma(c, g, Linv.T @ Linv)


def _ricci_raw(c, gamma):
    # Ric_{jk} = sum_i R^i_{ijk} with
    # R^p_{ijk} = gamma^p_{il} gamma^l_{jk} - gamma^p_{jl} gamma^l_{ik} - c^m_{ij} gamma^p_{mk}
    return (
        np.einsum("iil,ljk->jk", gamma, gamma)
        - np.einsum("ijl,lik->jk", gamma, gamma)
        - np.einsum("mij,imk->jk", c, gamma)
    )


def ricci_raw(c, g):
    """Ricci tensor before symmetrization (exposes the roundoff asymmetry)."""
    L = _cholesky(g)
    Linv = np.linalg.inv(L)
    return _ricci_raw(c, _gamma(c, g, Linv.T @ Linv))


def curvature_core(c, g):
    """All pointwise curvature data of (c, g); see the compiled twin."""
    n = g.shape[0]
    L = _cholesky(g)
    Linv = np.linalg.inv(L)
    raw = _ricci_raw(c, _gamma(c, g, Linv.T @ Linv))
    ric = 0.5 * (raw + raw.T)
    B = Linv @ ric @ Linv.T
    R = float(np.trace(B))
    ric2 = float(np.sum(B * B))
    D = B - (R / n) * np.eye(n)
    dev = float(np.sum(D * D))
    return ric, B, R, ric2, dev
