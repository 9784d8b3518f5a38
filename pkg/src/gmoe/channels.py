"""Fock-space implementations of the canonical one-mode Gaussian channel classes.

Classes: A1 (replace by a thermal state), A2 (position measurement followed by a
shifted thermal re-preparation), B1 (classical q-noise of variance 1/2),
B2 (isotropic classical noise), C_att / C_amp (thermal attenuator / amplifier)
and D (environment output of an amplifier dilation).

Attenuator, amplifier and class D use explicit two-mode dilations. The unitaries
are block diagonal in a conserved quantity (total photon number for the beam
splitter, photon-number difference for the two-mode squeezer); each block is
exponentiated exactly, so truncated dilations are exactly unitary. Classical
noise channels act as Hadamard products in the eigenbasis of the truncated
quadrature that generates the shifts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import fock
from .errors import CutoffTooSmallError, DomainError, GridError, SpecError
from .fock import DensityOperator, as_matrix

CLASSES = ("A1", "A2", "B1", "B2", "C_att", "C_amp", "D")
_PARAM_KEY = {"C_att": "eta", "C_amp": "kappa2", "D": "kappa2", "B2": "t"}
B1_VARIANCE = 0.5
KERNEL_TOL = 1e-6


@dataclass(frozen=True)
class ChannelSpec:
    """Class tag plus parameters; (kappa2_eff, c_eff) give the photon-number map."""

    kind: str
    eta: float | None = None
    kappa2: float | None = None
    N: float = 0.0
    t: float | None = None

    def __post_init__(self):
        if self.kind not in CLASSES:
            raise SpecError(f"unknown channel class {self.kind!r}; expected one of {CLASSES}")
        vals = [self.N] + [v for v in (self.eta, self.kappa2, self.t) if v is not None]
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("channel parameters must be finite")
        if self.N < 0:
            raise DomainError(f"N must be >= 0, got {self.N}")
        need = _PARAM_KEY.get(self.kind)
        if need is not None and getattr(self, need) is None:
            raise SpecError(f"class {self.kind} requires parameter {need!r}")
        if self.kind == "C_att" and not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if self.kind == "C_amp" and self.kappa2 < 1.0:
            raise DomainError(f"amplifier gain must be >= 1, got {self.kappa2}")
        if self.kind == "D" and self.kappa2 < 0.0:
            raise DomainError(f"class D kappa2 must be >= 0, got {self.kappa2}")
        if self.kind == "B2":
            if self.t < 0:
                raise DomainError(f"t must be >= 0, got {self.t}")
            # B2 is parametrised by its noise strength alone
            object.__setattr__(self, "N", float(self.t))

    # constructors
    @classmethod
    def attenuator(cls, eta: float, N: float = 0.0) -> "ChannelSpec":
        return cls("C_att", eta=float(eta), N=float(N))

    @classmethod
    def amplifier(cls, kappa2: float, N: float = 0.0) -> "ChannelSpec":
        return cls("C_amp", kappa2=float(kappa2), N=float(N))

    @classmethod
    def class_d(cls, kappa2: float, N: float = 0.0) -> "ChannelSpec":
        return cls("D", kappa2=float(kappa2), N=float(N))

    @classmethod
    def additive_noise(cls, t: float) -> "ChannelSpec":
        return cls("B2", t=float(t))

    @classmethod
    def a1(cls, N: float = 0.0) -> "ChannelSpec":
        return cls("A1", N=float(N))

    @classmethod
    def a2(cls, N: float = 0.0) -> "ChannelSpec":
        return cls("A2", N=float(N))

    @classmethod
    def b1(cls) -> "ChannelSpec":
        return cls("B1")

    @property
    def kappa2_eff(self) -> float:
        """Slope of the photon-number map; NaN for A2, whose output depends on <q^2>."""
        k = self.kind
        if k == "C_att":
            return self.eta
        if k in ("C_amp", "D"):
            return self.kappa2
        if k in ("B1", "B2"):
            return 1.0
        if k == "A1":
            return 0.0
        return math.nan

    @property
    def c_eff(self) -> float:
        k, N = self.kind, self.N
        if k == "C_att":
            return (1.0 - self.eta) * N
        if k == "C_amp":
            return (self.kappa2 - 1.0) * (N + 1.0)
        if k == "D":
            return self.kappa2 * (N + 1.0) + N
        if k == "B2":
            return self.t
        if k == "A1":
            return N
        if k == "B1":
            return 0.25
        return math.nan

    def predicted_mean_photon(self, rho) -> float:
        """Output mean photon number predicted from the input state."""
        if self.kind == "A2":
            m = as_matrix(rho)
            d = m.shape[0] + 2  # q^2 couples n to n+2; pad so the top level is not clipped
            q = fock.position_op(d)
            full = np.zeros((d, d), dtype=complex)
            full[: m.shape[0], : m.shape[0]] = m
            # <q^2>_in / 2 + N; the p-quadrature is replaced by thermal noise
            return float(np.real(np.trace(full @ q @ q))) / 2.0 + self.N
        return self.kappa2_eff * fock.mean_photon(rho) + self.c_eff

    @property
    def has_semigroup(self) -> bool:
        return self.kind in ("C_att", "C_amp", "B2")

    # serialisation
    def to_dict(self) -> dict:
        d = {"class": self.kind}
        key = _PARAM_KEY.get(self.kind)
        if key:
            d[key] = getattr(self, key)
        if self.kind != "B2":
            d["N"] = self.N
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        d = dict(d)
        try:
            kind = d.pop("class")
        except KeyError:
            raise SpecError("channel object needs a 'class' field") from None
        allowed = {"eta", "kappa2", "t", "N"}
        extra = set(d) - allowed
        if extra:
            raise SpecError(f"unexpected channel fields {sorted(extra)}")
        if kind == "B2" and "N" in d and "t" not in d:
            d["t"] = d.pop("N")
        if kind == "B2":
            d.pop("N", None)
        return cls(kind, **{k: float(v) for k, v in d.items()})

    @classmethod
    def from_json(cls, s: str) -> "ChannelSpec":
        try:
            obj = json.loads(s)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid channel JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise SpecError("channel JSON must be an object")
        return cls.from_dict(obj)


# ---------------------------------------------------------------- two-mode unitaries


@lru_cache(maxsize=16)
def _two_mode_unitary(kind: str, angle: float, d_sys: int, d_env: int) -> sp.csc_matrix:
    a = sp.csr_matrix(fock.annihilation_op(d_sys))
    b = sp.csr_matrix(fock.annihilation_op(d_env))
    ia, ib = sp.identity(d_sys, format="csr"), sp.identity(d_env, format="csr")
    A, B = sp.kron(a, ib, format="csr"), sp.kron(ia, b, format="csr")
    na, nb = np.divmod(np.arange(d_sys * d_env), d_env)
    if kind == "bs":
        gen = angle * (A.conj().T @ B - A @ B.conj().T)
        sectors = na + nb
    else:
        gen = angle * (A.conj().T @ B.conj().T - A @ B)
        sectors = na - nb
    u = fock.expm_antihermitian(gen, sectors).tocsc()
    u.sort_indices()
    return u


def beam_splitter_unitary(eta: float, d_sys: int, d_env: int) -> sp.csc_matrix:
    """exp[arccos(sqrt(eta)) (a^dag b - a b^dag)] on the truncated two-mode space (sparse)."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    return _two_mode_unitary("bs", math.acos(math.sqrt(eta)), int(d_sys), int(d_env))


def two_mode_squeezer(kappa2: float, d_sys: int, d_env: int) -> sp.csc_matrix:
    """exp[r (a^dag b^dag - a b)] with cosh^2 r = kappa2 (sparse)."""
    if kappa2 < 1.0:
        raise DomainError(f"squeezer gain must be >= 1, got {kappa2}")
    return _two_mode_unitary("tms", math.acosh(math.sqrt(kappa2)), int(d_sys), int(d_env))


def sector_leakage(rho, env_pops: np.ndarray, d_sys: int, d_env: int) -> float:
    """Product-state mass on beam-splitter sectors that the truncation cuts short."""
    p_sys = np.clip(np.diag(as_matrix(rho)).real, 0, None)
    tot = np.add.outer(np.arange(p_sys.size), np.arange(env_pops.size))
    return float(np.sum(np.outer(p_sys, env_pops)[tot >= min(d_sys, d_env)]))


@dataclass(frozen=True, eq=False)
class DilationResult:
    """Both reductions of U (rho x rho_E) U^dag, plus what is needed to rebuild the joint state."""

    output: DensityOperator
    complement: DensityOperator
    vectors: np.ndarray = field(repr=False)  # (d_sys*d_env, r) sqrt-weighted joint eigenvectors
    dims: tuple[int, int]
    input_entropy: float
    leakage: float = 0.0

    @property
    def joint(self) -> DensityOperator:
        v = self.vectors
        return DensityOperator(v @ v.conj().T, self.dims, validate=False)

    def joint_entropy(self) -> float:
        v = self.vectors
        return fock.entropy_from_eigenvalues(np.linalg.eigvalsh(v.conj().T @ v))


def _pad_to(rho, d: int) -> np.ndarray:
    m = as_matrix(rho)
    if m.shape[0] > d:
        raise CutoffTooSmallError(f"input cutoff {m.shape[0]} exceeds output cutoff {d}")
    out = np.zeros((d, d), dtype=complex)
    out[: m.shape[0], : m.shape[0]] = m
    return out


def _env_populations(N: float, d_env: int) -> np.ndarray:
    fock.gibbs_state(N, d_env)  # tail guard
    return fock.gibbs_populations(N, d_env)


def _dilate(rho, U: sp.csc_matrix, d_sys: int, d_env: int, N: float,
            prune: float = 1e-18) -> DilationResult:
    m = _pad_to(rho, d_sys)
    lam, vec = np.linalg.eigh(m)
    keep = lam > fock.EIG_CLAMP
    psi = vec[:, keep] * np.sqrt(lam[keep])
    pops = _env_populations(N, d_env)
    cols = []
    base = np.arange(d_sys) * d_env
    for n, pn in enumerate(pops):
        if pn < prune:
            continue
        cols.append((U[:, base + n] @ psi) * math.sqrt(pn))
    vectors = np.concatenate(cols, axis=1)
    # both reductions as Gram products (BLAS) of the branch vectors
    y3 = vectors.reshape(d_sys, d_env, -1)
    ya = y3.reshape(d_sys, -1)
    yb = y3.transpose(1, 0, 2).reshape(d_env, -1)
    out = ya @ ya.conj().T
    comp = yb @ yb.conj().T
    s_in = fock.entropy_from_eigenvalues(np.clip(lam, 0, None)) + fock.g_function(N)
    res = DilationResult(
        output=DensityOperator(out, (d_sys,), validate=False),
        complement=DensityOperator(comp, (d_env,), validate=False),
        vectors=vectors,
        dims=(d_sys, d_env),
        input_entropy=s_in,
        leakage=sector_leakage(m, pops, d_sys, d_env),
    )
    return res


def _check_tail(state: DensityOperator, what: str) -> DensityOperator:
    return state.require_tail(what=what)


def apply_attenuator(rho, eta: float, N: float, d_env: int | None = None,
                     cutoff: int | None = None) -> DilationResult:
    """Thermal attenuator through its beam-splitter dilation with a Gibbs(N) environment."""
    d_sys = cutoff or as_matrix(rho).shape[0]
    d_env = d_env or d_sys
    U = beam_splitter_unitary(eta, d_sys, d_env)
    res = _dilate(rho, U, d_sys, d_env, N)
    _check_tail(res.output, "attenuator output")
    _check_tail(res.complement, "attenuator complement")
    return res


def weak_complementary_attenuator(rho, eta: float, N: float, d_env: int | None = None,
                                  cutoff: int | None = None) -> DensityOperator:
    return apply_attenuator(rho, eta, N, d_env, cutoff).complement


def apply_amplifier(rho, kappa2: float, N: float, d_env: int | None = None,
                    cutoff: int | None = None) -> DilationResult:
    """Thermal amplifier through a two-mode-squeezer dilation, environment in Gibbs(N)."""
    d_sys = cutoff or as_matrix(rho).shape[0]
    d_env = d_env or d_sys
    U = two_mode_squeezer(kappa2, d_sys, d_env)
    res = _dilate(rho, U, d_sys, d_env, N)
    _check_tail(res.output, "amplifier output")
    _check_tail(res.complement, "amplifier complement")
    return res


def apply_class_D(rho, kappa2: float, N: float, d_env: int | None = None,
                  cutoff: int | None = None) -> DensityOperator:
    """Environment-side output of an amplifier dilation with gain 1 + kappa2."""
    if kappa2 < 0:
        raise DomainError(f"class D kappa2 must be >= 0, got {kappa2}")
    d_sys = cutoff or as_matrix(rho).shape[0]
    d_env = d_env or d_sys
    U = two_mode_squeezer(1.0 + kappa2, d_sys, d_env)
    res = _dilate(rho, U, d_sys, d_env, N)
    _check_tail(res.output, "class D system side")
    return _check_tail(res.complement, "class D output")


def apply_A1(rho, N: float, cutoff: int | None = None) -> DensityOperator:
    return fock.gibbs_state(N, cutoff or as_matrix(rho).shape[0])


# ---------------------------------------------------------------- classical shift channels


@lru_cache(maxsize=32)
def quadrature_basis(d: int, which: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the truncated q or p (a discrete-variable basis)."""
    op = fock.momentum_op(d) if which == "p" else fock.position_op(d)
    lam, v = np.linalg.eigh(op)
    lam.setflags(write=False)
    v.setflags(write=False)
    return lam, v


def _kernel_apply(m: np.ndarray, which: str, kernel) -> np.ndarray:
    lam, v = quadrature_basis(m.shape[0], which)
    mt = v.conj().T @ m @ v
    k = kernel(np.subtract.outer(lam, lam)) if callable(kernel) else kernel
    return v @ (mt * k) @ v.conj().T


def _gaussian_shift_kernel(m: np.ndarray, which: str, var: float) -> np.ndarray:
    """Average of exp(-i x G) m exp(i x G) over x ~ N(0, var) by Gauss-Hermite quadrature.

    G is the truncated p (``which='p'``: q-shifts) or q (p-shifts). The node count
    is doubled until the quadrature kernel, weighted by the state's entries in the
    G eigenbasis, agrees with its Gaussian limit to ``KERNEL_TOL``.
    """
    if var == 0:
        return m
    lam, v = quadrature_basis(m.shape[0], which)
    mt = v.conj().T @ m @ v
    delta = np.subtract.outer(lam, lam)
    exact = np.exp(-0.5 * var * delta**2)
    n = 32
    while True:
        y, w = np.polynomial.hermite.hermgauss(n)
        x = math.sqrt(2.0 * var) * y
        k = np.einsum("k,kjl->jl", w / math.sqrt(math.pi), np.exp(-1j * np.multiply.outer(x, delta)))
        err = float(np.sum(np.abs(mt) * np.abs(k - exact)))
        if err <= KERNEL_TOL:
            break
        if n >= 512:
            raise GridError(f"shift quadrature did not converge (weighted error {err:.2e})")
        n *= 2
    return v @ (mt * k) @ v.conj().T


def _b2_raw(m: np.ndarray, t: float) -> np.ndarray:
    return _gaussian_shift_kernel(_gaussian_shift_kernel(m, "p", t), "q", t)


def _b1_raw(m: np.ndarray) -> np.ndarray:
    return _gaussian_shift_kernel(m, "p", B1_VARIANCE)


def apply_B2(rho, t: float, cutoff: int | None = None) -> DensityOperator:
    """Isotropic Gaussian displacement noise: q- and p-shifts of variance t each."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    m = _pad_to(rho, cutoff or as_matrix(rho).shape[0])
    out = DensityOperator(_b2_raw(m, t), validate=False)
    return _check_tail(out, "B2 output")


def apply_B1(rho, cutoff: int | None = None) -> DensityOperator:
    """q-only Gaussian shift noise adding 1/2 to the q-variance."""
    m = _pad_to(rho, cutoff or as_matrix(rho).shape[0])
    out = DensityOperator(_b1_raw(m), validate=False)
    return _check_tail(out, "B1 output")


def a2_grid(d_in: int, d_out: int) -> np.ndarray:
    """Uniform x-grid covering inputs of cutoff d_in and resolving shifts at cutoff d_out."""
    half = math.sqrt(2 * d_in + 1) + 6.0
    step = math.pi / (2.0 * (2.0 * math.sqrt(2 * d_out + 1) + 1.0))
    n = 2 * math.ceil(half / step) + 1
    return np.linspace(-half, half, n)


def _a2_weights(m: np.ndarray, grid: np.ndarray, check: bool) -> np.ndarray:
    if check:
        dens = fock.position_distribution(m, grid)
    else:
        psi = fock.hermite_functions(m.shape[0], grid)
        dens = np.sum((m @ psi) * psi, axis=0)
    return dens * (grid[1] - grid[0])


def _a2_from_weights(w: np.ndarray, grid: np.ndarray, N: float, d_out: int) -> np.ndarray:
    env = fock.gibbs_state(N, d_out).matrix
    lam, _ = quadrature_basis(d_out, "p")
    delta = np.subtract.outer(lam, lam)
    k = np.tensordot(w, np.exp(1j * np.multiply.outer(grid, delta)), axes=1)
    return _kernel_apply(env, "p", k)


def apply_A2(rho, N: float, x_grid: np.ndarray | None = None,
             cutoff: int | None = None) -> DensityOperator:
    """sum_k P_rho(x_k) dx exp(i x_k p) rho_E exp(-i x_k p) with rho_E = Gibbs(N)."""
    m = as_matrix(rho)
    d_out = cutoff or m.shape[0]
    grid = a2_grid(m.shape[0], d_out) if x_grid is None else np.asarray(x_grid, dtype=float)
    w = _a2_weights(m, grid, check=True).real
    w = w / w.sum()
    out = _a2_from_weights(w, grid, N, d_out)
    return _check_tail(DensityOperator(out, validate=False), "A2 output")


# ---------------------------------------------------------------- dispatch


def apply_channel(ch: ChannelSpec, rho, cutoff: int | None = None,
                  env_cutoff: int | None = None) -> DensityOperator:
    """Output state of ``ch`` on ``rho`` at output cutoff ``cutoff`` (default: input cutoff)."""
    k = ch.kind
    if k == "C_att":
        return apply_attenuator(rho, ch.eta, ch.N, env_cutoff, cutoff).output
    if k == "C_amp":
        return apply_amplifier(rho, ch.kappa2, ch.N, env_cutoff, cutoff).output
    if k == "D":
        return apply_class_D(rho, ch.kappa2, ch.N, env_cutoff, cutoff)
    if k == "B2":
        return apply_B2(rho, ch.t, cutoff)
    if k == "B1":
        return apply_B1(rho, cutoff)
    if k == "A1":
        return apply_A1(rho, ch.N, cutoff)
    if k == "A2":
        return apply_A2(rho, ch.N, cutoff=cutoff)
    raise SpecError(f"unsupported class {k}")


def channel_transfer_tensor(ch: ChannelSpec, support: int, cutoff: int,
                            env_cutoff: int | None = None) -> np.ndarray:
    """T[i, j] = Phi(|i><j|) for i, j < support, shape (support, support, cutoff, cutoff).

    The map is linear, so Phi(rho) = tensordot(rho, T) for any rho on the support.
    """
    m, d = int(support), int(cutoff)
    if m > d:
        raise CutoffTooSmallError(f"support {m} exceeds cutoff {d}")
    k = ch.kind
    T = np.zeros((m, m, d, d), dtype=complex)
    if k in ("C_att", "C_amp", "D"):
        d_env = env_cutoff or d
        if k == "C_att":
            U = beam_splitter_unitary(ch.eta, d, d_env)
        else:
            U = two_mode_squeezer(ch.kappa2 if k == "C_amp" else 1.0 + ch.kappa2, d, d_env)
        pops = _env_populations(ch.N, d_env)
        base = np.arange(m) * d_env
        for n, pn in enumerate(pops):
            if pn < 1e-18:
                continue
            y = U[:, base + n].toarray().reshape(d, d_env, m)
            if k == "D":
                T += pn * np.einsum("abi,adj->ijbd", y, y.conj())
            else:
                T += pn * np.einsum("abi,cbj->ijac", y, y.conj())
        return T
    if k == "A1":
        g = fock.gibbs_state(ch.N, d).matrix
        for i in range(m):
            T[i, i] = g
        return T
    if k in ("B1", "B2"):
        which = ["p"] if k == "B1" else ["p", "q"]
        var = B1_VARIANCE if k == "B1" else ch.t
        for i in range(m):
            for j in range(m):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                for w in which:
                    lam, v = quadrature_basis(d, w)
                    e = v @ ((v.conj().T @ e @ v) * np.exp(-0.5 * var * np.subtract.outer(lam, lam) ** 2)) @ v.conj().T
                T[i, j] = e
        return T
    if k == "A2":
        grid = a2_grid(m, d)
        psi = fock.hermite_functions(m, grid)
        dx = grid[1] - grid[0]
        for i in range(m):
            for j in range(i, m):
                out = _a2_from_weights(psi[i] * psi[j] * dx, grid, ch.N, d)
                T[i, j] = out
                T[j, i] = out.conj().T
        return T
    raise SpecError(f"unsupported class {k}")


def apply_transfer(T: np.ndarray, rho_support: np.ndarray) -> np.ndarray:
    return np.tensordot(rho_support, T, axes=([0, 1], [0, 1]))


# ---------------------------------------------------------------- characteristic functions


def predicted_characteristic(ch: ChannelSpec, rho, mu) -> complex:
    mu = complex(mu)
    a2 = abs(mu) ** 2
    k = ch.kind
    if k == "C_att":
        return fock.characteristic_function(rho, math.sqrt(ch.eta) * mu) * math.exp(
            -(1.0 - ch.eta) * (ch.N + 0.5) * a2)
    if k == "A1":
        return complex(np.trace(as_matrix(rho))) * math.exp(-(ch.N + 0.5) * a2)
    if k == "A2":
        return fock.characteristic_function(rho, -1j * mu.imag) * math.exp(-(ch.N + 0.5) * a2)
    if k == "B1":
        return fock.characteristic_function(rho, mu) * math.exp(-B1_VARIANCE * mu.imag**2)
    if k == "B2":
        return fock.characteristic_function(rho, mu) * math.exp(-ch.t * a2)
    raise SpecError(f"no characteristic-function relation implemented for class {k}")


def verify_char_relation(rho, ch: ChannelSpec, mu_grid, cutoff: int | None = None,
                         env_cutoff: int | None = None) -> float:
    """Max over ``mu_grid`` of |chi_out(mu) - predicted(chi_in, mu)|."""
    if ch.kind not in ("C_att", "A1", "A2", "B1", "B2"):
        raise SpecError(f"no characteristic-function relation implemented for class {ch.kind}")
    out = apply_channel(ch, rho, cutoff, env_cutoff)
    mus = np.ravel(np.asarray(mu_grid, dtype=complex))
    chi_out = fock.characteristic_function(out, mus)
    pred = np.array([predicted_characteristic(ch, rho, x) for x in mus])
    return float(np.max(np.abs(chi_out - pred))) if mus.size else 0.0
