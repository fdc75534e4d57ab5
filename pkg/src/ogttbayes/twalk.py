"""The t-walk: a scale-invariant MCMC sampler for continuous targets.

The sampler evolves a pair of points ``(x, x')`` on the product space with
four Metropolis-Hastings move kernels:

* walk      -- move one point along the line through both points,
* traverse  -- reflect one point through the other with a random stretch,
* blow      -- Gaussian jump centred on the other point, scaled by their distance,
* hop       -- Gaussian jump centred on itself, scaled by a third of that distance.

Each move updates a random subset of coordinates (on average ``n_update``
of them). The target only needs to return a log density; ``-inf`` (or NaN)
marks points outside the support and rejects the proposal immediately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "TWalkSettings",
    "Chain",
    "MOVES",
    "twalk_run",
    "integrated_autocorrelation",
    "burn_and_thin",
]

MOVES = ("traverse", "walk", "blow", "hop")
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TWalkSettings:
    """Move parameters; defaults are the published t-walk recommendations."""

    walk_param: float = 1.5
    traverse_param: float = 6.0
    n_update: float = 4.0
    kernel_probs: tuple = (0.4918, 0.4918, 0.0082, 0.0082)  # traverse, walk, blow, hop

    def __post_init__(self):
        probs = np.asarray(self.kernel_probs, dtype=float)
        if probs.shape != (4,) or np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("kernel_probs must be 4 nonnegative numbers summing to 1")
        if not self.walk_param > 0 or not self.traverse_param > 1 or not self.n_update > 0:
            raise ValueError("walk_param > 0, traverse_param > 1 and n_update > 0 required")


@dataclass(frozen=True)
class Chain:
    """Output of one t-walk run (the ``x`` component only)."""

    draws: np.ndarray
    logdens: np.ndarray
    proposed: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    accepted: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    seed: Optional[int] = None

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]

    @property
    def acceptance_rates(self) -> dict:
        out = {}
        for name, n_prop, n_acc in zip(MOVES, self.proposed, self.accepted):
            out[name] = float(n_acc / n_prop) if n_prop else float("nan")
        total = self.proposed.sum()
        out["overall"] = float(self.accepted.sum() / total) if total else float("nan")
        return out


def _sim_beta(rng: np.random.Generator, at: float) -> float:
    if rng.random() < (at - 1.0) / (2.0 * at):
        return rng.random() ** (1.0 / (at + 1.0))
    return rng.random() ** (1.0 / (1.0 - at))


def _safe_logdens(target, y) -> float:
    val = float(target(y))
    return val if val == val else -math.inf  # NaN counts as out of support


def twalk_run(
    target: Callable[[np.ndarray], float],
    x0,
    x0p,
    iterations: int,
    rng: Union[np.random.Generator, int, None] = None,
    settings: TWalkSettings = TWalkSettings(),
) -> Chain:
    """Run the t-walk for ``iterations`` moves.

    Parameters
    ----------
    target : callable
        Log density (up to a constant) of a real n-vector.
    x0, x0p : array_like
        The two starting points; they must differ in every coordinate and
        both have finite log density.
    iterations : int
        Number of proposals. One draw (the current ``x``) is kept per proposal.
    rng : Generator or int
        Random stream, or an integer seed which is then recorded in the chain.
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng

    x = np.array(x0, dtype=np.float64).ravel()
    xp = np.array(x0p, dtype=np.float64).ravel()
    if x.shape != xp.shape:
        raise ValueError("starting points must have the same dimension")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    if np.any(x == xp):
        raise ValueError("starting points must differ in every coordinate")
    lx = _safe_logdens(target, x)
    lxp = _safe_logdens(target, xp)
    if not (math.isfinite(lx) and math.isfinite(lxp)):
        raise ValueError("starting points must have finite log density")

    n = x.size
    pphi = min(n, settings.n_update) / n
    aw = settings.walk_param
    at = settings.traverse_param
    cum = np.cumsum(settings.kernel_probs)

    draws = np.empty((iterations, n))
    logdens = np.empty(iterations)
    proposed = np.zeros(4, dtype=np.int64)
    accepted = np.zeros(4, dtype=np.int64)

    for it in range(iterations):
        u_ker = rng.random()
        kernel = int(np.searchsorted(cum, u_ker, side="right"))
        kernel = min(kernel, 3)
        move_x = rng.random() < 0.5
        h, o, lh = (x, xp, lx) if move_x else (xp, x, lxp)

        phi = rng.random(n) < pphi
        nphi = int(phi.sum())
        proposed[kernel] += 1

        y = None
        log_ratio = 0.0  # proposal-density correction, log q(h|y) - log q(y|h)
        if nphi == 0:
            accepted[kernel] += 1
        elif kernel == 0:  # traverse
            beta = _sim_beta(rng, at)
            y = np.where(phi, o + beta * (o - h), h)
            log_ratio = (nphi - 2) * math.log(beta)
        elif kernel == 1:  # walk
            u = rng.random(n)
            z = np.where(phi, (aw / (1.0 + aw)) * (aw * u * u + 2.0 * u - 1.0), 0.0)
            y = h + (h - o) * z
        else:  # blow or hop
            diff = np.abs(o - h)[phi]
            sigma = diff.max() if kernel == 2 else diff.max() / 3.0
            if sigma > 0:
                eps = rng.standard_normal(n)
                if kernel == 2:
                    y = np.where(phi, o + sigma * eps, h)
                    sigma_back = np.abs(o - y)[phi].max()
                    fwd = ((y - o)[phi] ** 2).sum()
                    back = ((h - o)[phi] ** 2).sum()
                else:
                    y = np.where(phi, h + sigma * eps, h)
                    sigma_back = np.abs(o - y)[phi].max() / 3.0
                    fwd = back = ((y - h)[phi] ** 2).sum()
                if sigma_back > 0:
                    # -log q(y | h, o) + log q(h | y, o)
                    log_ratio = (
                        nphi * math.log(sigma) + 0.5 * fwd / sigma**2
                        - nphi * math.log(sigma_back) - 0.5 * back / sigma_back**2
                    )
                else:
                    y = None
            if y is None:
                nphi = -1  # degenerate proposal, reject

        if y is not None and np.all(y != o):
            ly = _safe_logdens(target, y)
            if math.isfinite(ly):
                log_a = ly - lh + log_ratio
                if log_a >= 0 or math.log(rng.random()) < log_a:
                    accepted[kernel] += 1
                    if move_x:
                        x, lx = y, ly
                    else:
                        xp, lxp = y, ly

        draws[it] = x
        logdens[it] = lx

    return Chain(draws, logdens, proposed, accepted, None if seed is None else int(seed))


def integrated_autocorrelation(chain: Union[Chain, np.ndarray], coordinate: int = 0) -> float:
    """Integrated autocorrelation time of one coordinate.

    Uses Geyer's initial positive sequence: autocorrelations are summed in
    adjacent pairs until the first non-positive pair sum. A chain with zero
    variance never mixed; its IAT is reported as the chain length.
    """
    x = chain.draws[:, coordinate] if isinstance(chain, Chain) else np.asarray(chain, float)
    if x.ndim != 1:
        x = x[:, coordinate]
    n = x.size
    if n < 100:
        raise ValueError(f"chain too short for an IAT estimate ({n} < 100)")
    xc = x - x.mean()
    if not np.any(xc):
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n]
    rho = acov / acov[0]
    m = n // 2
    pairs = rho[0 : 2 * m : 2] + rho[1 : 2 * m : 2]
    nonpos = np.flatnonzero(pairs <= 0)
    stop = nonpos[0] if nonpos.size else pairs.size
    tau = -1.0 + 2.0 * pairs[:stop].sum()
    return float(max(tau, 1.0 / n))


def burn_and_thin(chain: Chain, burn: int, stride: int) -> Chain:
    """Drop the first ``burn`` draws and keep every ``stride``-th one after that."""
    if burn < 0 or stride < 1:
        raise ValueError("burn must be >= 0 and stride >= 1")
    if burn + stride > len(chain):
        raise ValueError(f"burn + stride ({burn} + {stride}) exceeds chain length {len(chain)}")
    sel = slice(burn, None, stride)
    draws = chain.draws[sel]
    if draws.shape[0] == 0:
        raise ValueError("burn/thin left no draws")
    return replace(chain, draws=draws, logdens=chain.logdens[sel])
