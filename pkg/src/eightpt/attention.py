"""Cross-attention and the bilinear essential-matrix attention block.

Only the attention arithmetic is implemented here: token projections, layer
norms and the block's MLP are left to callers.
"""
from __future__ import annotations

import numpy as np

from .compact import PatchGrid


def softmax(s, axis: int = -1) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    z = s - np.max(s, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def dual_softmax(s) -> np.ndarray:
    """Elementwise product of the row-wise and column-wise softmax of ``s``."""
    return softmax(s, axis=1) * softmax(s, axis=0)


def _logits(q, k, scale: bool) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ValueError(f"query/key shapes {q.shape} and {k.shape} are not conformable")
    s = q @ k.T
    if scale:
        s = s / np.sqrt(q.shape[1])
    return s


def standard_cross_attention(q1, k2, v2, q2, k1, v1, scale: bool = True) -> np.ndarray:
    """``[softmax(Q1 K2^T) V2, softmax(Q2 K1^T) V1]``, shape (P, 2D)."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    a12 = softmax(_logits(q1, k2, scale), axis=1)
    a21 = softmax(_logits(q2, k1, scale), axis=1)
    if a12.shape[1] != len(v2) or a21.shape[1] != len(v1):
        raise ValueError("value matrices do not match key counts")
    return np.hstack([a12 @ v2, a21 @ v1])


def _split_heads(x, n_heads: int) -> list[np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[1] % n_heads:
        raise ValueError(f"token dim {x.shape[1]} is not divisible by {n_heads} heads")
    return np.split(x, n_heads, axis=1)


def emm_forward(q1, k2, v2, grid: PatchGrid, n_heads: int = 1, scale: bool = True,
                attention=None) -> list[np.ndarray]:
    """Bilinear attention ``[V2, Phi]^T A [V2, Phi]`` for one direction.

    ``A = dual_softmax(Q1 K2^T)`` per head unless ``attention`` supplies a
    fixed (P, P) matrix or a per-head list, which replaces the normalization.
    Returns one ``(D_h + 6) x (D_h + 6)`` matrix per head.
    """
    phi = grid.phi
    P = len(phi)
    qs, ks, vs = (_split_heads(m, n_heads) for m in (q1, k2, v2))
    if any(len(m) != P for m in (qs[0], ks[0], vs[0])):
        raise ValueError(f"token count does not match the {P}-patch grid")
    if attention is not None and not isinstance(attention, (list, tuple)):
        attention = [attention] * n_heads
    out = []
    for h in range(n_heads):
        if attention is None:
            A = dual_softmax(_logits(qs[h], ks[h], scale))
        else:
            A = np.asarray(attention[h], dtype=float)
            if A.shape != (P, P):
                raise ValueError(f"attention override has shape {A.shape}, expected {(P, P)}")
        # Assembled blockwise so the positional block is bit-for-bit Phi^T A Phi.
        v = vs[h]
        vta, pta = v.T @ A, phi.T @ A
        out.append(np.block([[vta @ v, vta @ phi], [pta @ v, pta @ phi]]))
    return out


def emm_features(q1, k1, v1, q2, k2, v2, grid: PatchGrid, n_heads: int = 1,
                 scale: bool = True) -> np.ndarray:
    """Both directions, flattened and concatenated: length ``2 N_h (D_h + 6)^2``."""
    fwd = emm_forward(q1, k2, v2, grid, n_heads, scale)
    bwd = emm_forward(q2, k1, v1, grid, n_heads, scale)
    return np.concatenate([m.ravel() for m in fwd + bwd])


def emm_feature_length(dim: int, n_heads: int) -> int:
    dh = dim // n_heads
    return 2 * n_heads * (dh + 6) ** 2


def match_logits(p: int, m: int, matched_logit: float = 100.0, unmatched_logit: float = 1.0) -> np.ndarray:
    """Logit matrix with ``m`` disjoint matches on the leading diagonal."""
    if not 0 <= m <= p:
        raise ValueError("match count must lie in [0, p]")
    s = np.full((p, p), float(unmatched_logit))
    idx = np.arange(m)
    s[idx, idx] = matched_logit
    return s


def attention_energy_fraction(p: int, m: int, matched_logit: float = 100.0,
                              unmatched_logit: float = 1.0, mode: str = "dual") -> float:
    """Share of the normalized attention mass that sits on the ``m`` matches."""
    s = match_logits(p, m, matched_logit, unmatched_logit)
    if mode == "dual":
        A = dual_softmax(s)
    elif mode == "single":
        A = softmax(s, axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    idx = np.arange(m)
    return float(np.sum(A[idx, idx]) / np.sum(A))


def attention_sweep(p: int = 576, steps=None, matched_logit: float = 100.0,
                    unmatched_logit: float = 1.0) -> list[dict]:
    """Energy fraction for both normalizations over a range of match counts."""
    counts = range(p + 1) if steps is None else steps
    rows = []
    for m in counts:
        for mode in ("single", "dual"):
            rows.append({"p": p, "m_fraction": m / p, "mode": mode,
                         "energy_fraction": attention_energy_fraction(p, m, matched_logit, unmatched_logit, mode)})
    return rows
