"""Truncated Fock-space linear algebra for one or several bosonic modes.

Conventions: hbar = 1, q = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2), so the
vacuum has quadrature variance 1/2. Entropies are in nats.

Operators are plain complex ``numpy`` arrays. States are wrapped in
:class:`DensityOperator`, which carries the per-mode cutoffs and validates the
density-matrix invariants on construction.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.special import xlogy

from .errors import (
    CutoffTooSmallError,
    DomainError,
    GridError,
    InvalidDimensionError,
    NotPositiveError,
    ShapeError,
)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
NEGATIVITY_TOL = 1e-9
EIG_CLAMP = 1e-14
TAIL_LIMIT = 1e-6


def tail_levels(d: int) -> int:
    """Number of top Fock levels that count towards the tail-mass estimate."""
    return math.ceil(d / 8)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive, unit-trace matrix on a (multi-mode) truncated Fock space.

    ``dims`` lists the cutoff of every mode; the matrix acts on their Kronecker
    product in row-major mode order. ``validate=False`` skips the eigenvalue
    check for trusted intermediate results (Hermiticity and trace are always
    checked).
    """

    matrix: np.ndarray
    dims: tuple[int, ...] = ()
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        dims = tuple(int(x) for x in self.dims) if self.dims else (m.shape[0],)
        object.__setattr__(self, "dims", dims)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density matrix must be square, got {m.shape}")
        if int(np.prod(dims)) != m.shape[0]:
            raise ShapeError(f"dims {dims} do not match matrix size {m.shape[0]}")
        if any(d < 2 for d in dims):
            raise InvalidDimensionError(f"every mode cutoff must be >= 2, got {dims}")
        if not np.all(np.isfinite(m)):
            raise DomainError("density matrix has non-finite entries")
        herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm > HERMITIAN_TOL:
            raise NotPositiveError(f"matrix is not Hermitian (defect {herm:.2e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotPositiveError(f"trace is {tr!r}, expected 1")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if validate:
            lo = np.linalg.eigvalsh(m)[0]
            if lo < -NEGATIVITY_TOL:
                raise NotPositiveError(f"minimum eigenvalue {lo:.3e} < -{NEGATIVITY_TOL}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @cached_property
    def populations(self) -> np.ndarray:
        """Diagonal of the matrix (Fock populations, product basis for many modes)."""
        return np.clip(np.diag(self.matrix).real, 0.0, None)

    def mode_populations(self, mode: int) -> np.ndarray:
        if not 0 <= mode < self.n_modes:
            raise ShapeError(f"mode {mode} out of range for {self.n_modes} modes")
        pops = self.populations.reshape(self.dims)
        axes = tuple(i for i in range(self.n_modes) if i != mode)
        return pops.sum(axis=axes) if axes else pops

    @cached_property
    def tail_mass(self) -> float:
        """Largest, over modes, population on the top ceil(d/8) Fock levels."""
        return max(
            float(self.mode_populations(i)[-tail_levels(d):].sum())
            for i, d in enumerate(self.dims)
        )

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def require_tail(self, limit: float = TAIL_LIMIT, what: str = "state") -> "DensityOperator":
        if self.tail_mass >= limit:
            raise CutoffTooSmallError(
                f"{what} tail mass {self.tail_mass:.2e} >= {limit:g} at cutoff {self.dims}"
            )
        return self


def as_matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityOperator) else np.asarray(x, dtype=complex)


# ---------------------------------------------------------------- operators


def _check_dim(d: int) -> int:
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"cutoff must be an integer >= 2, got {d!r}")
    return int(d)


def annihilation_op(d: int) -> np.ndarray:
    d = _check_dim(d)
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def creation_op(d: int) -> np.ndarray:
    return annihilation_op(d).T.copy()


def number_op(d: int) -> np.ndarray:
    return np.diag(np.arange(_check_dim(d), dtype=float)).astype(complex)


def position_op(d: int) -> np.ndarray:
    a = annihilation_op(d)
    return (a + a.conj().T) / math.sqrt(2)


def momentum_op(d: int) -> np.ndarray:
    a = annihilation_op(d)
    return 1j * (a.conj().T - a) / math.sqrt(2)


def expm_antihermitian(gen: np.ndarray, sectors: np.ndarray | None = None):
    """exp(gen) for anti-Hermitian ``gen`` via eigendecomposition of ``-1j*gen``.

    When ``sectors`` labels every basis vector with a quantity conserved by
    ``gen``, each sector is diagonalised separately and a sparse CSR matrix is
    returned; otherwise the result is dense.
    """
    if sectors is None:
        w, v = np.linalg.eigh(-1j * np.asarray(gen))
        return (v * np.exp(1j * w)) @ v.conj().T
    gen = sp.csr_matrix(gen)
    rows, cols, vals = [], [], []
    for label in np.unique(sectors):
        idx = np.flatnonzero(sectors == label)
        block = gen[idx][:, idx].toarray()
        w, v = np.linalg.eigh(-1j * block)
        ub = (v * np.exp(1j * w)) @ v.conj().T
        r, c = np.nonzero(np.abs(ub) > 0)
        rows.append(idx[r])
        cols.append(idx[c])
        vals.append(ub[r, c])
    n = gen.shape[0]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def displacement_op(mu: complex, d: int) -> np.ndarray:
    """Truncated D(mu) = exp(mu a^dag - mu* a); exactly unitary on the truncated space."""
    a = annihilation_op(d)
    mu = complex(mu)
    if mu == 0:
        return np.eye(d, dtype=complex)
    return expm_antihermitian(mu * a.conj().T - mu.conjugate() * a)


def displacement_defect(mu: complex, d: int) -> float:
    """Population that D(mu)|0> puts on the top ceil(d/8) levels (truncation diagnostic)."""
    col = displacement_op(mu, d)[:, 0]
    return float(np.sum(np.abs(col[-tail_levels(d):]) ** 2))


# ---------------------------------------------------------------- entropies


def g_function(N):
    """Entropy (N+1)ln(N+1) - N ln N of the thermal state with mean photon number N."""
    n = np.asarray(N, dtype=float)
    if np.any(n < 0):
        raise DomainError(f"g is defined for N >= 0, got {N!r}")
    out = xlogy(n + 1, n + 1) - xlogy(n, n)
    return float(out) if out.ndim == 0 else out


def g_derivative(N: float) -> float:
    return math.inf if N == 0 else math.log1p(1.0 / N)


def g_inverse(S: float) -> float:
    """Mean photon number N0 with g(N0) = S."""
    if S < 0:
        raise DomainError(f"entropy must be non-negative, got {S!r}")
    if S == 0:
        return 0.0
    hi = 1.0
    while g_function(hi) < S:
        hi *= 2.0
    n = brentq(lambda x: g_function(x) - S, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    for _ in range(3):
        if n <= 0:
            break
        n -= (g_function(n) - S) / g_derivative(n)
    return float(n)


def entropy_from_eigenvalues(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -1e-8:
        raise NotPositiveError(f"eigenvalue {w.min():.3e} below -1e-8")
    w = np.where(w < EIG_CLAMP, 0.0, w)
    return float(-np.sum(xlogy(w, w)))


def von_neumann_entropy(rho) -> float:
    if isinstance(rho, DensityOperator):
        return entropy_from_eigenvalues(rho.eigenvalues)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(as_matrix(rho)))


def relative_entropy(rho, sigma) -> float:
    """S(rho||sigma) in nats; ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise ShapeError(f"shape mismatch {r.shape} vs {s.shape}")
    lr, vr = np.linalg.eigh(r)
    ls, vs = np.linalg.eigh(s)
    lr = np.where(lr < EIG_CLAMP, 0.0, lr)
    # weight of rho on each sigma eigenvector
    overlap = np.abs(vs.conj().T @ vr) ** 2
    weight = overlap @ lr
    null = ls < 1e-12
    if np.any(weight[null] > 1e-10):
        return math.inf
    cross = np.sum(weight[~null] * np.log(ls[~null]))
    return float(np.sum(xlogy(lr, lr)) - cross)


def trace_distance(rho, sigma) -> float:
    diff = as_matrix(rho) - as_matrix(sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


# ---------------------------------------------------------------- states


def gibbs_populations(N0: float, d: int) -> np.ndarray:
    if N0 < 0:
        raise DomainError(f"mean photon number must be >= 0, got {N0!r}")
    d = _check_dim(d)
    if N0 == 0:
        p = np.zeros(d)
        p[0] = 1.0
        return p
    n = np.arange(d)
    p = np.exp(n * math.log(N0 / (N0 + 1.0))) / (N0 + 1.0)
    return p / p.sum()


def gibbs_state(N0: float, d: int) -> DensityOperator:
    """Thermal state with mean photon number N0, renormalised on the truncated block."""
    p = gibbs_populations(N0, d)
    rho = DensityOperator(np.diag(p).astype(complex), (d,), validate=False)
    return rho.require_tail(what=f"Gibbs state N0={N0}")


def fock_state(n: int, d: int) -> DensityOperator:
    d = _check_dim(d)
    if not 0 <= n < d:
        raise ShapeError(f"number state {n} outside cutoff {d}")
    m = np.zeros((d, d), dtype=complex)
    m[n, n] = 1.0
    return DensityOperator(m, (d,), validate=False)


def vacuum(d: int) -> DensityOperator:
    return fock_state(0, d)


def pure_state(psi: np.ndarray) -> DensityOperator:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return DensityOperator(np.outer(psi, psi.conj()), (psi.size,), validate=False)


def pad(rho: DensityOperator, d: int) -> DensityOperator:
    """Embed a single-mode state into a larger cutoff (zero populations above)."""
    if rho.n_modes != 1:
        raise ShapeError("pad applies to single-mode states")
    if d < rho.dim:
        raise ShapeError(f"cannot pad from {rho.dim} down to {d}")
    if d == rho.dim:
        return rho
    m = np.zeros((d, d), dtype=complex)
    m[: rho.dim, : rho.dim] = rho.matrix
    return DensityOperator(m, (d,), validate=False)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(support: int, cutoff: int | None = None, rank: int | None = None,
                   rng: np.random.Generator | int | None = None) -> DensityOperator:
    """Random mixed state (induced Ginibre measure) on the lowest ``support`` levels."""
    rng = np.random.default_rng(rng)
    rank = support if rank is None else rank
    g = rng.standard_normal((support, rank)) + 1j * rng.standard_normal((support, rank))
    m = g @ g.conj().T
    m /= np.trace(m).real
    rho = DensityOperator(m, (support,), validate=False)
    return pad(rho, cutoff) if cutoff else rho


# ---------------------------------------------------------------- expectation values


def mean_photon(rho) -> float:
    if isinstance(rho, DensityOperator) and rho.n_modes != 1:
        raise ShapeError("mean_photon applies to single-mode states")
    m = as_matrix(rho)
    return float(np.real(np.diag(m) @ np.arange(m.shape[0])))


def expectation(rho, op: np.ndarray) -> complex:
    return complex(np.trace(as_matrix(rho) @ op))


def characteristic_function(rho, mu) -> complex | np.ndarray:
    """chi(mu) = Tr[rho D(mu)]; ``mu`` may be a scalar or an array of amplitudes."""
    m = as_matrix(rho)
    d = m.shape[0]
    mus = np.asarray(mu, dtype=complex)
    out = np.array([np.sum(m.T * displacement_op(x, d)) for x in mus.ravel()])
    return complex(out[0]) if mus.ndim == 0 else out.reshape(mus.shape)


# ---------------------------------------------------------------- multi-mode


def tensor(*states: DensityOperator) -> DensityOperator:
    m = states[0].matrix
    dims = states[0].dims
    for s in states[1:]:
        m = np.kron(m, s.matrix)
        dims = dims + s.dims
    return DensityOperator(m, dims, validate=False)


def partial_trace(omega: DensityOperator, keep) -> DensityOperator:
    """Reduced state on the modes listed in ``keep`` (kept in ascending order)."""
    keep = sorted({int(k) for k in ([keep] if np.isscalar(keep) else keep)})
    n = omega.n_modes
    if not keep or any(k < 0 or k >= n for k in keep):
        raise ShapeError(f"keep={keep} invalid for {n} modes")
    dims = omega.dims
    t = omega.matrix.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    kd = tuple(dims[i] for i in keep)
    size = int(np.prod(kd))
    return DensityOperator(red.reshape(size, size), kd, validate=False)


# ---------------------------------------------------------------- position representation


def hermite_functions(d: int, x: np.ndarray) -> np.ndarray:
    """Fock-state wavefunctions <x|n>, n < d, shape (d, len(x)); real-valued."""
    x = np.asarray(x, dtype=float)
    psi = np.empty((d, x.size))
    psi[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if d > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(2, d):
        psi[n] = math.sqrt(2.0 / n) * x * psi[n - 1] - math.sqrt((n - 1) / n) * psi[n - 2]
    return psi


def default_grid(d: int) -> np.ndarray:
    """Uniform position grid wide and fine enough for any state of cutoff ``d``."""
    kmax = math.sqrt(2 * d + 1)
    half = kmax + 6.0
    step = math.pi / (4.0 * (kmax + 2.0))
    n = 2 * math.ceil(half / step) + 1
    return np.linspace(-half, half, n)


def position_distribution(rho, grid) -> np.ndarray:
    """Density <x|rho|x> on a uniform grid, checked for coverage and normalisation."""
    m = as_matrix(rho)
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise GridError("grid must be a 1-D array with at least 3 points")
    dx = np.diff(x)
    if np.any(dx <= 0) or np.ptp(dx) > 1e-9 * max(1.0, abs(dx[0])):
        raise GridError("grid must be uniform and increasing")
    psi = hermite_functions(m.shape[0], x)
    dens = np.real(np.sum((m @ psi) * psi, axis=0))
    if max(dens[0], dens[-1]) > 1e-8:
        raise GridError(f"grid too narrow: edge density {max(dens[0], dens[-1]):.2e}")
    total = np.trapezoid(dens, x)
    if abs(total - np.real(np.trace(m))) > 1e-6:
        raise GridError(f"density integrates to {total:.8f}; grid too coarse")
    return dens
