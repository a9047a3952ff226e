"""Exact combinatorial identities behind the converse bound.

For any m x n matrix B with orthonormal rows (B B^T = I_m) and any
eps >= 0, the sum over all k-subsets s of column indices satisfies

    sum_s det(eps I_k + B_s^T B_s) = sum_{l=0..k} C(n-l, k-l) C(m, l) eps^{k-l},

a Cauchy-Binet consequence that is independent of B.  Averaging over the
C(n, k) states turns it into a deterministic upper bound on the smallest
normalized log-determinant, which is what caps how well any sampler can
treat its worst state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import _colex_combinations
from .numerics import binary_entropy, log_binomial
from .parallel import map_ordered

__all__ = [
    "ConverseCheck",
    "ENUMERATION_CAP",
    "min_state_logdet_bound",
    "minimax_lower_bound",
    "per_instance_sandwich",
    "subset_det_sum",
    "subset_det_sum_closed",
]

# Exhaustive identity checks refuse to run beyond this many subsets.
ENUMERATION_CAP = 10**6
ORTHONORMAL_ATOL = 1e-8
_CHUNK = 4096


@dataclass(frozen=True)
class ConverseCheck:
    """One enumerated-vs-closed-form comparison of the subset determinant sum."""

    n: int
    k: int
    m: int
    eps: float
    lhs_sum: float
    rhs_closed: float

    @property
    def relative_error(self) -> float:
        return abs(self.lhs_sum - self.rhs_closed) / max(self.rhs_closed, 1e-300)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "eps": self.eps,
            "lhs_sum": self.lhs_sum,
            "rhs_closed": self.rhs_closed,
            "relative_error": self.relative_error,
        }


def _check_orthonormal_rows(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] > b.shape[1]:
        raise ValueError(f"expected an m x n matrix with m <= n, got {b.shape}")
    gram = b @ b.T
    if float(np.max(np.abs(gram - np.eye(b.shape[0])))) > ORTHONORMAL_ATOL:
        raise ValueError("matrix rows are not orthonormal within 1e-8")
    return b


def _chunked_states(n: int, k: int, chunk: int = _CHUNK):
    block: list[tuple[int, ...]] = []
    for state in _colex_combinations(n, k):
        block.append(state)
        if len(block) == chunk:
            yield block
            block = []
    if block:
        yield block


def _subset_dets(b: np.ndarray, states: list[tuple[int, ...]], eps: float) -> np.ndarray:
    idx = np.asarray(states, dtype=int) - 1  # (S, k)
    sub = np.moveaxis(b[:, idx], 1, 0)  # (S, m, k)
    k = idx.shape[1]
    grams = np.einsum("smk,sml->skl", sub, sub)
    grams = grams + eps * np.eye(k)
    return np.linalg.det(grams)


def _subset_det_sum_raw(b: np.ndarray, k: int, eps: float, workers: int = 1) -> float:
    """Enumerated sum without the orthonormality precondition (verify hook)."""
    n = b.shape[1]
    chunks = list(_chunked_states(n, k))
    partials = map_ordered(
        lambda states: math.fsum(_subset_dets(b, states, eps).tolist()),
        chunks,
        workers=workers,
    )
    # Kahan compensation across chunk partials, fixed chunk order
    total = 0.0
    carry = 0.0
    for value in partials:
        y = value - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def subset_det_sum(b: np.ndarray, k: int, eps: float, workers: int = 1) -> float:
    """sum over all k-subsets s of det(eps I_k + B_s^T B_s), by enumeration.

    Requires orthonormal rows (within 1e-8), k <= m, eps >= 0 and
    C(n, k) <= ENUMERATION_CAP subsets.
    """
    b = _check_orthonormal_rows(b)
    m, n = b.shape
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if math.comb(n, k) > ENUMERATION_CAP:
        raise ValueError(
            f"C({n},{k}) = {math.comb(n, k)} exceeds the enumeration cap {ENUMERATION_CAP}"
        )
    return _subset_det_sum_raw(b, k, eps, workers=workers)


def subset_det_sum_closed(n: int, k: int, m: int, eps: float) -> float:
    """Closed form sum_{l=0..k} C(n-l, k-l) C(m, l) eps^{k-l}, exact binomials."""
    if not 1 <= k <= m <= n:
        raise ValueError(f"need 1 <= k <= m <= n, got ({n}, {k}, {m})")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    total = 0.0
    for l in range(k + 1):
        coeff = math.comb(n - l, k - l) * math.comb(m, l)
        total += float(coeff) * eps ** (k - l)
    return total


def min_state_logdet_bound(n: int, k: int, m: int, eps: float) -> dict[str, float]:
    """Deterministic caps on min_s (1/n) log det(eps I + B_s^T B_s).

    exact   = (1/n)[log C(m,k) - log C(n,k)] + 2 sqrt(eps)
    entropy = alpha H(beta/alpha) - H(beta) + 2 sqrt(eps) + log(n+1)/n

    exact <= entropy always; both hold for every orthonormal-rows B.
    """
    if not 1 <= k <= m <= n:
        raise ValueError(f"need 1 <= k <= m <= n, got ({n}, {k}, {m})")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    alpha = m / n
    beta = k / n
    root = 2.0 * math.sqrt(eps)
    exact = (log_binomial(m, k) - log_binomial(n, k)) / n + root
    entropy = (
        alpha * binary_entropy(min(beta / alpha, 1.0))
        - binary_entropy(beta)
        + root
        + math.log(n + 1) / n
    )
    return {"exact": exact, "entropy": entropy}


def minimax_lower_bound(n: int, k: int, m: int, snr_min: float, bandwidth: float) -> float:
    """Converse lower bound on the worst-case capacity loss, nats/s:

    (W/2)[H(beta) - alpha H(beta/alpha) - 2/sqrt(SNR_min) - log(n+1)/n].

    May be negative at low SNR or small n; returned as-is.
    """
    if not 1 <= k <= m <= n:
        raise ValueError(f"need 1 <= k <= m <= n, got ({n}, {k}, {m})")
    if snr_min <= 0:
        raise ValueError("snr_min must be positive")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    alpha = m / n
    beta = k / n
    return 0.5 * bandwidth * (
        binary_entropy(beta)
        - alpha * binary_entropy(min(beta / alpha, 1.0))
        - 2.0 / math.sqrt(snr_min)
        - math.log(n + 1) / n
    )


def per_instance_sandwich(
    b: np.ndarray, k: int, eps: float, workers: int = 1
) -> dict[str, float]:
    """Enumerated min of (1/n) log det(eps I + B_s^T B_s) and its certified cap.

    Returns {"min_state_value", "deterministic_upper"}; the min can never
    exceed the cap for any orthonormal-rows B, so a violation here is an
    internal-consistency failure, not statistical noise.
    """
    b = _check_orthonormal_rows(b)
    m, n = b.shape
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if math.comb(n, k) > ENUMERATION_CAP:
        raise ValueError(f"C({n},{k}) exceeds the enumeration cap {ENUMERATION_CAP}")

    def chunk_min(states: list[tuple[int, ...]]) -> float:
        dets = _subset_dets(b, states, eps)
        # eps = 0 with a singular submatrix gives det <= 0: log -> -inf
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.log(np.maximum(dets, 0.0))
        return float(np.min(logs)) / n

    partial_mins = map_ordered(chunk_min, list(_chunked_states(n, k)), workers=workers)
    bound = min_state_logdet_bound(n, k, m, eps)["exact"]
    return {
        "min_state_value": min(partial_mins),
        "deterministic_upper": bound,
    }
