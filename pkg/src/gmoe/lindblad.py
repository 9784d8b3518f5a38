"""Gaussian Lindblad semigroups L = (g+/2) L+ + (g-/2) L- and their entropy production.

L+(X) = 2 a^dag X a - a a^dag X - X a a^dag,  L-(X) = 2 a X a^dag - a^dag a X - X a^dag a.

Parameter dictionary for the three semigroup families (time t):
attenuator g+ = N, g- = N+1 (eta = e^{-t}); amplifier g+ = N+1, g- = N
(kappa^2 = e^{t}); additive noise g+ = g- = 1 (noise t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import simpson

from . import fock
from .errors import CutoffTooSmallError, DomainError, ResourceError, StepError
from .fock import DensityOperator, as_matrix
from .sampling import sample_fixed_entropy_state

LEAKAGE_LIMIT = 1e-8
MAX_STEP_STIFFNESS = 2.5
DRIFT_LIMIT = 1e-5


@dataclass(frozen=True)
class LindbladGenerator:
    gamma_plus: float
    gamma_minus: float

    def __post_init__(self):
        for v in (self.gamma_plus, self.gamma_minus):
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"rates must be finite and non-negative, got {v}")

    @classmethod
    def attenuator(cls, N: float) -> "LindbladGenerator":
        return cls(N, N + 1.0)

    @classmethod
    def amplifier(cls, N: float) -> "LindbladGenerator":
        return cls(N + 1.0, N)

    @classmethod
    def additive_noise(cls) -> "LindbladGenerator":
        return cls(1.0, 1.0)

    def photon_rate(self, n: float) -> float:
        """d<n>/dt at mean photon number n."""
        return (self.gamma_plus - self.gamma_minus) * n + self.gamma_plus

    def gibbs_rate(self, N0: float) -> float:
        """Entropy production rate at Gibbs(N0): photon_rate(N0) * ln((N0+1)/N0)."""
        if N0 <= 0:
            return 0.0 if self.gamma_plus == 0 else math.inf
        return self.photon_rate(N0) * math.log1p(1.0 / N0)

    def stiffness(self, d: int) -> float:
        return (self.gamma_plus + self.gamma_minus) * d + self.gamma_plus

    def to_dict(self) -> dict:
        return {"gamma_plus": self.gamma_plus, "gamma_minus": self.gamma_minus}


def _ops(d: int):
    a = fock.annihilation_op(d)
    ad = a.conj().T
    return a, ad, a @ ad, ad @ a


def dissipator_plus(X: np.ndarray) -> np.ndarray:
    a, ad, aad, _ = _ops(X.shape[0])
    return 2 * ad @ X @ a - aad @ X - X @ aad


def dissipator_minus(X: np.ndarray) -> np.ndarray:
    a, ad, _, ada = _ops(X.shape[0])
    return 2 * a @ X @ ad - ada @ X - X @ ada


def _apply(gen: LindbladGenerator, m: np.ndarray, ops) -> np.ndarray:
    a, ad, aad, ada = ops
    out = np.zeros_like(m)
    if gen.gamma_plus:
        out += 0.5 * gen.gamma_plus * (2 * ad @ m @ a - aad @ m - m @ aad)
    if gen.gamma_minus:
        out += 0.5 * gen.gamma_minus * (2 * a @ m @ ad - ada @ m - m @ ada)
    return out


def _leakage_guard(m: np.ndarray) -> None:
    top = float(np.real(m[-1, -1]))
    if top >= LEAKAGE_LIMIT:
        raise CutoffTooSmallError(
            f"top Fock level population {top:.2e} >= {LEAKAGE_LIMIT:g} at cutoff {m.shape[0]}")


def generator_apply(gen: LindbladGenerator, rho) -> np.ndarray:
    """L(rho) as a traceless Hermitian matrix."""
    m = as_matrix(rho)
    _leakage_guard(m)
    return _apply(gen, m, _ops(m.shape[0]))


@dataclass
class Trajectory:
    times: np.ndarray
    final: DensityOperator
    trace_drift: np.ndarray
    entropies: np.ndarray | None = None
    rates: np.ndarray | None = None
    steps: int = 0
    dt: float = 0.0


def default_steps(gen: LindbladGenerator, d: int, T: float) -> int:
    return max(1, math.ceil(T * gen.stiffness(d) / 0.5))


def integrate(gen: LindbladGenerator, rho, T: float, steps: int | None = None,
              record_entropy: bool = False) -> Trajectory:
    """Fixed-step classical RK4 for d rho/dt = L(rho) on [0, T]."""
    if T < 0:
        raise DomainError(f"duration must be >= 0, got {T}")
    m = as_matrix(rho).copy()
    d = m.shape[0]
    n = default_steps(gen, d, T) if steps is None else int(steps)
    if n < 1:
        raise StepError("need at least one step")
    dt = T / n
    if dt * gen.stiffness(d) > MAX_STEP_STIFFNESS:
        raise StepError(f"step {dt:.3g} unstable for stiffness {gen.stiffness(d):.3g}")
    ops = _ops(d)
    f = lambda x: _apply(gen, x, ops)
    drift = np.zeros(n + 1)
    ent = np.zeros(n + 1) if record_entropy else None
    rates = np.zeros(n + 1) if record_entropy else None
    tr0 = np.trace(m).real
    for i in range(n + 1):
        _leakage_guard(m)
        drift[i] = abs(np.trace(m).real - tr0)
        if drift[i] > DRIFT_LIMIT:
            raise StepError(f"trace drift {drift[i]:.2e} at step {i}")
        if record_entropy:
            ent[i] = fock.von_neumann_entropy(m)
            rates[i] = _rate(f(m), m)
        if i == n:
            break
        k1 = f(m)
        k2 = f(m + 0.5 * dt * k1)
        k3 = f(m + 0.5 * dt * k2)
        k4 = f(m + dt * k3)
        m = m + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        m = 0.5 * (m + m.conj().T)
    final = DensityOperator(m, (d,), validate=False)
    return Trajectory(np.linspace(0, T, n + 1), final, drift, ent, rates, n, dt)


def evolve(gen: LindbladGenerator, rho, T: float, steps: int | None = None) -> DensityOperator:
    return integrate(gen, rho, T, steps).final


def evolve_exact(gen: LindbladGenerator, rho, T: float) -> DensityOperator:
    """Superoperator exponential (slow oracle, d <= 12)."""
    m = as_matrix(rho)
    d = m.shape[0]
    if d > 12:
        raise ResourceError(f"exact superoperator path limited to d <= 12, got {d}")
    ops = _ops(d)
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[k] = 1.0
        cols.append(_apply(gen, e.reshape(d, d), ops).ravel())
    S = np.array(cols).T
    out = (scipy.linalg.expm(T * S) @ m.ravel()).reshape(d, d)
    return DensityOperator(0.5 * (out + out.conj().T), (d,), validate=False)


def _rate(lr: np.ndarray, m: np.ndarray) -> float:
    lam, v = np.linalg.eigh(m)
    flow = np.real(np.einsum("ij,ik,kj->j", v.conj(), lr, v))
    small = lam < fock.EIG_CLAMP
    if np.any(flow[small] > 1e-10):
        return math.inf
    return float(-np.sum(flow * np.log(np.maximum(lam, fock.EIG_CLAMP))))


def entropy_rate(gen: LindbladGenerator, rho) -> float:
    """-Tr[L(rho) ln rho]; +inf when L pushes weight into the kernel of rho."""
    m = as_matrix(rho)
    return _rate(generator_apply(gen, m), m)


def verify_integral_form(gen: LindbladGenerator, rho, T: float, steps: int | None = None) -> float:
    """|S(Phi_T rho) - S(rho) - int_0^T rate dt| with the integral by Simpson on the step grid."""
    if T == 0:
        return 0.0
    if steps is None:
        # the rate varies fastest right after t=0; a finer grid than evolve() uses
        steps = 4 * default_steps(gen, as_matrix(rho).shape[0], T)
    tr = integrate(gen, rho, T, steps, record_entropy=True)
    if not np.all(np.isfinite(tr.rates)):
        return math.inf
    integral = simpson(tr.rates, x=tr.times)
    return float(abs(tr.entropies[-1] - tr.entropies[0] - integral))


@dataclass
class InfinitesimalReport:
    generator: dict
    S0: float
    N0: float
    conjectured: float
    minimum: float | None
    rates: list = field(default_factory=list)
    violations: int = 0
    tolerance: float = 1e-4

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def infinitesimal_conjecture_check(gen: LindbladGenerator, S0: float, samples: int, seed=0,
                                   d: int = 40, support: int = 6, tail_weight: float = 1e-6,
                                   tol: float = 1e-4) -> InfinitesimalReport:
    """Entropy production rates over fixed-entropy states against the Gibbs value.

    Sample 0 is Gibbs(N0) itself; the others are random full-rank states with
    entropy S0 (support part Haar-rotated, geometric tail above).
    """
    N0 = fock.g_inverse(S0)
    conj = gen.gibbs_rate(N0)
    rep = InfinitesimalReport(gen.to_dict(), S0, N0, conj, None, tolerance=tol)
    if samples <= 0:
        return rep
    rng = np.random.default_rng(seed)
    rates = [entropy_rate(gen, fock.gibbs_state(N0, d))]
    for _ in range(samples - 1):
        rho = sample_fixed_entropy_state(S0, d, rng, support=support, margin=0.0,
                                         tail_weight=tail_weight)
        rates.append(entropy_rate(gen, rho))
    rep.rates = rates
    rep.minimum = float(min(rates))
    rep.violations = int(sum(r < conj - tol for r in rates))
    return rep
