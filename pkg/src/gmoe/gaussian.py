"""Covariance-matrix backend for one-mode Gaussian states (q, p ordering, vacuum cov = I/2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .channels import ChannelSpec
from .errors import CutoffTooSmallError, DomainError, SpecError, UnphysicalStateError
from .fock import DensityOperator

R_FLIP = np.diag([1.0, -1.0])


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise UnphysicalStateError("non-finite Gaussian moments")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12:
            raise UnphysicalStateError("covariance matrix must be symmetric")
        if cov[0, 0] <= 0 or cov[1, 1] <= 0 or np.linalg.det(cov) < 0.25 - 1e-10:
            raise UnphysicalStateError(
                f"covariance violates the uncertainty bound (det={np.linalg.det(cov):.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @classmethod
    def thermal(cls, N: float) -> "GaussianState":
        return cls(np.zeros(2), (N + 0.5) * np.eye(2))

    @classmethod
    def squeezed(cls, var_q: float, var_p: float) -> "GaussianState":
        return cls(np.zeros(2), np.diag([var_q, var_p]))

    @property
    def symplectic_eigenvalue(self) -> float:
        return math.sqrt(max(np.linalg.det(self.cov), 0.25))

    @property
    def mean_photon(self) -> float:
        return 0.5 * (np.trace(self.cov) + self.mean @ self.mean - 1.0)


def gaussian_entropy(s: GaussianState) -> float:
    """g(sqrt(det cov) - 1/2) in nats."""
    det = np.linalg.det(s.cov)
    if det < 0.25 - 1e-10:
        raise UnphysicalStateError(f"det(cov)={det} below 1/4")
    arg = math.sqrt(max(det, 0.25)) - 0.5
    return fock.g_function(0.0 if arg < 1e-10 else arg)


def apply_gaussian_channel(s: GaussianState, ch: ChannelSpec) -> GaussianState:
    k, N = ch.kind, ch.N
    I = np.eye(2)
    if k == "C_att":
        return GaussianState(math.sqrt(ch.eta) * s.mean, ch.eta * s.cov + (1 - ch.eta) * (N + 0.5) * I)
    if k == "C_amp":
        k2 = ch.kappa2
        return GaussianState(math.sqrt(k2) * s.mean, k2 * s.cov + (k2 - 1) * (N + 0.5) * I)
    if k == "D":
        # environment output of a gain-(1+kappa2) squeezer: phase-conjugated input
        k2 = ch.kappa2
        return GaussianState(math.sqrt(k2) * R_FLIP @ s.mean,
                             k2 * R_FLIP @ s.cov @ R_FLIP + (k2 + 1) * (N + 0.5) * I)
    if k == "B2":
        return GaussianState(s.mean, s.cov + ch.t * I)
    if k == "B1":
        return GaussianState(s.mean, s.cov + np.diag([0.5, 0.0]))
    if k == "A1":
        return GaussianState.thermal(N)
    if k == "A2":
        # e^{ixp} shifts <q> by -x; p is reprepared thermal
        return GaussianState(np.array([-s.mean[0], 0.0]),
                             np.diag([s.cov[0, 0] + N + 0.5, N + 0.5]))
    raise SpecError(f"unknown class {k}")


def conjugate_variance(sigma: float, S0: float) -> float:
    """sigma' with g(sigma*sigma' - 1/2) = S0, i.e. sigma*sigma' = N0 + 1/2."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    return (fock.g_inverse(S0) + 0.5) / sigma


@dataclass
class InfimumTable:
    kind: str
    S0: float
    N: float
    limit: float
    sigmas: np.ndarray
    entropies: np.ndarray

    def gap_at(self, sigma: float) -> float:
        i = int(np.argmin(np.abs(self.sigmas - sigma)))
        return float(abs(self.entropies[i] - self.limit))

    def rows(self):
        return list(zip(self.sigmas.tolist(), self.entropies.tolist()))


def infimum_limit_experiment(kind: str, S0: float, sigma_sequence, N: float = 0.0) -> InfimumTable:
    """Output entropies of fixed-entropy squeezed inputs as the squeezed standard deviation shrinks.

    A2 squeezes sigma_q (limit g(N)); B1 squeezes sigma_p (limit S0).
    """
    if kind not in ("A2", "B1"):
        raise SpecError("infimum experiment defined for A2 and B1 only")
    if S0 < 0:
        raise DomainError("S0 must be >= 0")
    ch = ChannelSpec.a2(N) if kind == "A2" else ChannelSpec.b1()
    sig = np.asarray(sigma_sequence, dtype=float)
    if np.any(sig <= 0):
        raise DomainError("sigma values must be positive")
    out = []
    for s in sig:
        other = conjugate_variance(s, S0)
        vq, vp = (s**2, other**2) if kind == "A2" else (other**2, s**2)
        out.append(gaussian_entropy(apply_gaussian_channel(GaussianState.squeezed(vq, vp), ch)))
    limit = fock.g_function(N) if kind == "A2" else S0
    return InfimumTable(kind, S0, N, limit, sig, np.array(out))


def quadrature_moments(rho) -> GaussianState:
    """First and second moments of a Fock-space state (symmetrised covariance)."""
    m = fock.as_matrix(rho)
    d = m.shape[0]
    q, p = fock.position_op(d), fock.momentum_op(d)
    mq = np.real(np.trace(m @ q))
    mp = np.real(np.trace(m @ p))
    vq = np.real(np.trace(m @ q @ q)) - mq**2
    vp = np.real(np.trace(m @ p @ p)) - mp**2
    cqp = 0.5 * np.real(np.trace(m @ (q @ p + p @ q))) - mq * mp
    return GaussianState(np.array([mq, mp]), np.array([[vq, cqp], [cqp, vp]]))


def embed_gaussian_to_fock(s: GaussianState, d: int) -> DensityOperator:
    """Squeezed thermal state S R gibbs(nu - 1/2) R^dag S^dag with zero mean."""
    if np.any(np.abs(s.mean) > 1e-12):
        raise DomainError("only zero-mean Gaussian states can be embedded")
    nu = s.symplectic_eigenvalue
    w, v = np.linalg.eigh(s.cov)
    r = 0.25 * math.log(w[1] / w[0])
    base = fock.gibbs_state(max(nu - 0.5, 0.0), d).matrix
    if r < 1e-14:
        return DensityOperator(base, (d,), validate=False)
    a = fock.annihilation_op(d)
    # exp[r(a^2 - a^dag^2)/2] squeezes q (var e^{-2r}/2); rotate so the squeezed axis is the
    # small-eigenvalue eigenvector of cov
    S = fock.expm_antihermitian(0.5 * r * (a @ a - a.conj().T @ a.conj().T))
    theta = math.atan2(v[1, 0], v[0, 0])
    n = np.arange(d)
    Rot = np.diag(np.exp(1j * theta * n))
    U = Rot @ S
    m = U @ base @ U.conj().T
    out = DensityOperator(m, (d,), validate=False)
    if out.tail_mass >= fock.TAIL_LIMIT:
        raise CutoffTooSmallError(f"embedding tail mass {out.tail_mass:.2e} at cutoff {d}")
    return out
