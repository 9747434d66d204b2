"""Reference normal forms at a point for the supported structures.

Conventions (hyperbolic block form, used by the transplant machinery):

* J d_i = d_{i+mb} and J d_{i+mb} = eps d_i for i < mb = m/2, with
  eps = +1 (para) or -1 (complex);
* complex metrics take the block-diagonal pattern with the first pbar
  entries of each block equal to -1;
* para metrics necessarily have neutral signature and take
  diag(-1 x mb, +1 x mb).

The eigen-adapted para form (J = diag(+1 x mb, -1 x mb) with the dual
pairing metric) is the natural frame for curvature-model work.
"""

from __future__ import annotations

import numpy as np

from .fields import FieldError


def endo_sign(kind: str) -> float:
    if kind == "para":
        return 1.0
    if kind == "complex":
        return -1.0
    raise FieldError("kind must be 'para' or 'complex'")


def standard_endo(m: int, kind: str) -> np.ndarray:
    """Block normal form, component layout J[i, a]: J(d_i) = J[i, a] d_a."""
    if m % 2:
        raise FieldError("almost (para)-complex structures need even dimension")
    mb = m // 2
    J = np.zeros((m, m))
    for i in range(mb):
        J[i, i + mb] = 1.0
        J[i + mb, i] = endo_sign(kind)
    return J


def standard_metric(m: int, signature: tuple[int, int],
                    kind: str | None = None) -> np.ndarray:
    """Diagonal normal form of a metric value at the base point.

    Without a kind: diag(-1 x p, +1 x q).  With kind='complex' the negative
    entries sit at the head of each J-invariant block; with kind='para' the
    signature must be neutral.
    """
    p, q = signature
    if p + q != m or p < 0 or q < 0:
        raise FieldError("invalid signature")
    if kind is None:
        return np.diag(np.concatenate([-np.ones(p), np.ones(q)]))
    mb = m // 2
    if kind == "para":
        if p != q:
            raise FieldError("para-Hermitian metrics have neutral signature")
        return np.diag(np.concatenate([-np.ones(mb), np.ones(mb)]))
    if kind == "complex":
        if p % 2 or q % 2:
            raise FieldError("complex-Hermitian signatures have even (p, q)")
        pb = p // 2
        block = np.concatenate([-np.ones(pb), np.ones(mb - pb)])
        return np.diag(np.concatenate([block, block]))
    raise FieldError("kind must be 'para' or 'complex'")


def eigen_para_endo(m: int) -> np.ndarray:
    """Eigen-adapted para-complex structure diag(+1 x mb, -1 x mb)."""
    if m % 2:
        raise FieldError("even dimension required")
    mb = m // 2
    return np.diag(np.concatenate([np.ones(mb), -np.ones(mb)]))


def eigen_para_metric(m: int) -> np.ndarray:
    """Dual pairing <d_i, d_{i+mb}> = 1, anti-invariant under the eigen J."""
    mb = m // 2
    eps = np.zeros((m, m))
    for i in range(mb):
        eps[i, i + mb] = eps[i + mb, i] = 1.0
    return eps


def eigen_to_block_map(m: int) -> np.ndarray:
    """Linear map L with old = L @ new taking the eigen-adapted para pair
    (eigen_para_metric, eigen_para_endo) to the block normal form
    (standard_metric(..., 'para'), standard_endo(..., 'para')).

    Columns are the new frame vectors v_i = (a_i - b_i)/sqrt2 and
    J v_i = (a_i + b_i)/sqrt2 with a_i, b_i the +-1 eigenvectors.
    """
    mb = m // 2
    L = np.zeros((m, m))
    s = 1.0 / np.sqrt(2.0)
    for i in range(mb):
        a = np.eye(m)[i]
        b = np.eye(m)[i + mb]
        L[:, i] = s * (a - b)
        L[:, i + mb] = s * (a + b)
    return L


def compatibility_defect(g_vals: np.ndarray, J_vals: np.ndarray,
                         kind: str) -> float:
    """Max-abs violation of J*g = -g (para) or J*g = g (complex)."""
    target = -endo_sign(kind)
    JgJ = np.einsum("ia,jb,ab->ij", J_vals, J_vals, g_vals)
    return float(np.max(np.abs(JgJ - target * g_vals)))
