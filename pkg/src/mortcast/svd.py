"""Singular value decomposition of small dense matrices by one-sided Jacobi.

Mortality matrices are at most a few hundred rows/columns, so a Hestenes
one-sided Jacobi sweep is accurate and more than fast enough. Columns of a
working copy are rotated pairwise until mutually orthogonal; their norms
are then the singular values. Each sweep is organized as round-robin
rounds of disjoint column pairs, which commute and can be applied as one
block rotation per round.
"""

from __future__ import annotations

import numpy as np


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Circle-method schedule: n-1 rounds of disjoint index pairs covering all pairs."""
    players = list(range(n))
    if n % 2 == 1:
        players.append(-1)
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        left = np.array(players[: size // 2])
        right = np.array(players[size // 2 :][::-1])
        keep = (left >= 0) & (right >= 0)
        rounds.append((left[keep], right[keep]))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(
    a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``a = u @ diag(s) @ v.T`` with singular values descending.

    Returns (u, s, v) with u of shape (m, r), s of shape (r,), v of shape
    (n, r), where r = min(m, n). Columns of u/v belonging to zero singular
    values are zero vectors (callers treat rank-deficient components
    separately and never use them).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    m, n = a.shape
    if m < n:
        u, s, v = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return v, s, u

    u = a.copy()
    v = np.eye(n)
    rounds = _round_robin_rounds(n)

    for _ in range(max_sweeps):
        rotated = False
        for left, right in rounds:
            ui = u[:, left]
            uj = u[:, right]
            alpha = np.einsum("ij,ij->j", ui, ui)
            beta = np.einsum("ij,ij->j", uj, uj)
            gamma = np.einsum("ij,ij->j", ui, uj)
            # sqrt before multiplying so near-zero columns cannot underflow
            needs = np.abs(gamma) > tol * np.sqrt(alpha) * np.sqrt(beta)
            if not needs.any():
                continue
            # a vanishing column next to a live one can push zeta past the
            # float range; the implied angle is below resolution, so skip
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                zeta_raw = (beta - alpha) / (2.0 * gamma)
            needs &= np.isfinite(zeta_raw)
            if not needs.any():
                continue
            rotated = True
            zeta = np.where(needs, zeta_raw, 0.0)
            t = np.where(
                needs,
                np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta)),
                0.0,
            )
            c = 1.0 / np.hypot(1.0, t)
            s_ = c * t
            u[:, left] = c * ui - s_ * uj
            u[:, right] = s_ * ui + c * uj
            vi = v[:, left]
            vj = v[:, right]
            v[:, left] = c * vi - s_ * vj
            v[:, right] = s_ * vi + c * vj
        if not rotated:
            break

    sigma = np.sqrt(np.einsum("ij,ij->j", u, u))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    u = u[:, order]
    v = v[:, order]
    nonzero = sigma > 0
    u[:, nonzero] /= sigma[nonzero]
    u[:, ~nonzero] = 0.0
    return u, sigma, v
