"""Closed-form jump increments of the ranked masses.

Given the pre-jump ranked masses, the dust mass, the jump size r and the
participation flags of each ranked atom, `rank_increment` returns the change
of the k-th largest mass at the jump and `prefix_increment` the change of the
sum of the k largest.  `merge_and_rank` is the brute-force reference: merge
participants with the dust contribution, re-sort, diff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OutOfRange, ShapeMismatch


@dataclass
class RankedState:
    """Pre-jump view: nonincreasing masses, dust, jump size, participation flags."""

    w: Sequence[float]
    flags: Sequence[int]
    dust: float
    r: float

    def validate(self):
        if len(self.w) != len(self.flags):
            raise ShapeMismatch(f"{len(self.w)} masses vs {len(self.flags)} flags")
        if any(self.w[i] < self.w[i + 1] for i in range(len(self.w) - 1)):
            raise ShapeMismatch("masses must be nonincreasing")
        if sum(self.w) + self.dust > 1.0 + 1e-12:
            raise ShapeMismatch("masses plus dust exceed 1")
        return self


def _median3(a, b, c):
    if a > b:
        a, b = b, a
    return b if b < c else (a if a > c else c)


def rank_increment(state: RankedState, k: int) -> float:
    """Change of the k-th largest mass at a jump with the given participation."""
    if k < 1:
        raise OutOfRange(f"k must be >= 1, got {k}")
    if k == 1:
        return prefix_increment(state, 1)
    w, z = state.w, state.flags
    if len(w) != len(z):
        raise ShapeMismatch(f"{len(w)} masses vs {len(z)} flags")
    J = len(w)
    kk = min(k, J)
    beta_k = 0
    for j in range(kk):
        beta_k += z[j]
    merged = state.dust * state.r
    for j in range(k, J):
        if z[j]:
            merged += w[j]
    wk = w[k - 1] if k <= J else 0.0
    wkm1 = w[k - 2] if k - 1 <= J else 0.0
    if beta_k == 0:
        return _median3(wkm1, wk, merged) - wk
    if beta_k == 1:
        if k <= J and z[k - 1]:
            return min(wk + merged, wkm1) - wk
        return 0.0
    # beta_k >= 2: the new rank-k mass is the (k-1)-th surviving non-participant
    nonpart = k - beta_k
    val = 0.0
    for j in range(kk, J):
        if not z[j]:
            nonpart += 1
            if nonpart == k - 1:
                val = w[j]
                break
    return val - wk


def prefix_increment(state: RankedState, k: int) -> float:
    """Change of the sum of the k largest masses at the jump."""
    if k < 1:
        raise OutOfRange(f"k must be >= 1, got {k}")
    w, z = state.w, state.flags
    if len(w) != len(z):
        raise ShapeMismatch(f"{len(w)} masses vs {len(z)} flags")
    J = len(w)
    kk = min(k, J)
    beta_k = 0
    for j in range(kk):
        beta_k += z[j]
    merged = state.dust * state.r
    for j in range(k, J):
        if z[j]:
            merged += w[j]
    wk = w[k - 1] if k <= J else 0.0
    if beta_k == 0:
        out = max(merged - wk, 0.0)
    else:
        out = merged
    # surviving non-participant tail that stays within the top k
    nonpart = kk - beta_k
    for j in range(kk, J):
        if not z[j]:
            nonpart += 1
            if nonpart <= k - 1:
                out += w[j]
            else:
                break
    return out


def merge_and_rank(state: RankedState, k_max: int):
    """Brute-force reference: post-jump ranked masses, zero-padded to k_max."""
    w, z = np.asarray(state.w, dtype=float), np.asarray(state.flags)
    if w.shape != np.shape(z):
        raise ShapeMismatch(f"{w.shape} masses vs {np.shape(z)} flags")
    keep = list(w[np.asarray(z) == 0])
    new_mass = state.dust * state.r + float(np.sum(w[np.asarray(z) == 1]))
    if new_mass > 0.0:
        keep.append(new_mass)
    keep.sort(reverse=True)
    out = np.zeros(k_max)
    out[: min(k_max, len(keep))] = keep[:k_max]
    return out


# -- vectorized evaluation over jump batches ---------------------------------
#
# The replay harness evaluates millions of jumps; it records a compact view of
# each pre-jump state (top masses, their flags, top non-participant masses,
# total participating mass, dust * r) and the functions below reproduce
# rank_increment from that view.  test_kernels pins them against the scalar
# functions on random full states.


def topview_from_state(state: RankedState, kview: int):
    """Compact view (Wt, Zt, Nt, P) of a full ranked state, padded to kview."""
    w, z = list(state.w), list(state.flags)
    J = len(w)
    Wt = np.zeros(kview)
    Zt = np.zeros(kview, dtype=np.int8)
    for j in range(min(kview, J)):
        Wt[j] = w[j]
        Zt[j] = 1 if z[j] else 0
    Nt = np.zeros(max(kview - 1, 0))
    i = 0
    for j in range(J):
        if not z[j]:
            if i < kview - 1:
                Nt[i] = w[j]
                i += 1
            else:
                break
    P = 0.0
    for j in range(J):
        if z[j]:
            P += w[j]
    return Wt, Zt, Nt, P


def rank_increment_topview(Wt, Zt, Nt, P, dust_r, k: int):
    """Vectorized rank_increment from compact views.

    Wt (n, kview), Zt (n, kview), Nt (n, kview-1), P (n,), dust_r (n,);
    requires k <= kview.
    """
    Wt = np.asarray(Wt, dtype=float)
    Zt = np.asarray(Zt)
    if k < 1 or k > Wt.shape[1]:
        raise OutOfRange(f"k must lie in [1, {Wt.shape[1]}], got {k}")
    zw = np.where(Zt[:, :k] == 1, Wt[:, :k], 0.0).sum(axis=1)
    merged = np.asarray(dust_r, dtype=float) + np.asarray(P, dtype=float) - zw
    wk = Wt[:, k - 1]
    if k == 1:
        z1 = Zt[:, 0] == 1
        return np.where(z1, merged, np.maximum(merged - wk, 0.0))
    beta_k = (Zt[:, :k] == 1).sum(axis=1)
    wkm1 = Wt[:, k - 2]
    out = np.zeros(Wt.shape[0])
    b0 = beta_k == 0
    out[b0] = np.clip(merged[b0], wk[b0], wkm1[b0]) - wk[b0]
    b1 = (beta_k == 1) & (Zt[:, k - 1] == 1)
    out[b1] = np.minimum(wk[b1] + merged[b1], wkm1[b1]) - wk[b1]
    b2 = beta_k >= 2
    out[b2] = np.asarray(Nt, dtype=float)[b2, k - 2] - wk[b2]
    return out


def merge_and_rank_batch(W, Z, dust, r, k_max: int):
    """Vectorized merge_and_rank over rows of padded mass/flag matrices."""
    W = np.asarray(W, dtype=float)
    Z = np.asarray(Z)
    new_mass = np.asarray(dust, dtype=float) * np.asarray(r, dtype=float) + np.where(
        Z == 1, W, 0.0
    ).sum(axis=1)
    cand = np.concatenate([np.where(Z == 0, W, 0.0), new_mass[:, None]], axis=1)
    cand = -np.sort(-cand, axis=1)
    return cand[:, :k_max]
