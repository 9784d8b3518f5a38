"""Random states with a prescribed von Neumann entropy."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import softmax, xlogy

from . import fock
from .errors import ConstraintError, DomainError
from .fock import DensityOperator

ENTROPY_TOL = 1e-10


def shannon(p: np.ndarray) -> float:
    return float(-np.sum(xlogy(p, p)))


def tail_spectrum(n_tail: int) -> np.ndarray:
    """Geometric tail profile (ratio 1/2) used to make sampled states full rank."""
    w = 0.5 ** np.arange(1, n_tail + 1)
    return w / w.sum()


def fixed_entropy_spectrum(z: np.ndarray, S0: float, tail: int = 0,
                           tail_weight: float = 0.0) -> np.ndarray:
    """Spectrum (1-eps) softmax(beta z) ++ eps*tail with beta >= 0 root-found so the entropy is S0.

    beta = 0 gives the uniform spectrum on the support (entropy ln m plus tail
    contribution); beta -> inf concentrates the support part on argmax z.
    """
    z = np.asarray(z, dtype=float)
    m = z.size
    if S0 < 0:
        raise DomainError(f"S0 must be >= 0, got {S0}")
    eps = float(tail_weight) if tail else 0.0
    tw = eps * tail_spectrum(tail) if tail else np.zeros(0)
    floor = shannon(tw) - xlogy(1 - eps, 1 - eps) if eps else 0.0

    def spec(beta):
        return np.concatenate([(1.0 - eps) * softmax(beta * z), tw])

    top = shannon(spec(0.0))
    if S0 > top + ENTROPY_TOL:
        raise ConstraintError(f"S0={S0} exceeds the reachable entropy {top:.6f} on support {m}")
    if S0 <= floor + ENTROPY_TOL:
        if abs(S0 - floor) > ENTROPY_TOL:
            raise ConstraintError(f"S0={S0} below the tail entropy floor {floor:.6f}")
        p = np.zeros(m)
        p[int(np.argmax(z))] = 1.0 - eps
        return np.concatenate([p, tw])
    if abs(S0 - top) <= ENTROPY_TOL:
        return spec(0.0)
    ties = int(np.sum(z >= z.max()))
    if ties > 1:
        # beta -> inf spreads the support weight uniformly over the tied maxima
        lim = np.zeros(m)
        lim[z >= z.max()] = (1.0 - eps) / ties
        low = shannon(np.concatenate([lim, tw]))
        if S0 < low - ENTROPY_TOL:
            raise ConstraintError(f"S0={S0} below {low:.6f}, the least entropy reachable with {ties} tied maxima")
        if S0 <= low + ENTROPY_TOL:
            return np.concatenate([lim, tw])
    f = lambda b: shannon(spec(b)) - S0
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e250:
            raise ConstraintError("entropy root-find failed to bracket")
    beta = brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = spec(beta)
    if abs(shannon(p) - S0) > ENTROPY_TOL:
        raise ConstraintError(f"entropy residual {abs(shannon(p) - S0):.2e} exceeds tolerance")
    return p


def state_from_parameters(p: np.ndarray, U: np.ndarray, d: int) -> DensityOperator:
    """U diag(p[:m]) U^dag on the support, diagonal tail p[m:], zero-padded to cutoff d."""
    m = U.shape[0]
    out = np.zeros((d, d), dtype=complex)
    out[:m, :m] = (U * p[:m]) @ U.conj().T
    rest = p[m:]
    out[m:m + rest.size, m:m + rest.size] = np.diag(rest)
    return DensityOperator(out, (d,), validate=False)


def sample_fixed_entropy_state(S0: float, d: int, seed=None, support: int | None = None,
                               margin: float = 0.5, tail_weight: float = 0.0) -> DensityOperator:
    """Random state on cutoff ``d`` with von Neumann entropy exactly S0.

    The support part is Haar-rotated on the lowest ``support`` levels. With
    ``tail_weight > 0`` the levels above the support carry a small diagonal
    geometric tail so the state is full rank.
    """
    rng = np.random.default_rng(seed)
    m = d if support is None else int(support)
    if not 1 <= m <= d:
        raise ConstraintError(f"support {m} must lie in [1, {d}]")
    if S0 > math.log(m) - margin and S0 > 0:
        raise ConstraintError(f"S0={S0} exceeds ln({m}) - {margin}; increase the support")
    z = rng.standard_normal(m)
    U = fock.haar_unitary(m, rng)
    tail = d - m if tail_weight > 0 else 0
    p = fixed_entropy_spectrum(z, S0, tail, tail_weight)
    return state_from_parameters(p, U, d)
