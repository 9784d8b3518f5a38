"""Search for the minimal output entropy of a channel over inputs of fixed entropy S0.

Candidates live on the lowest ``support`` Fock levels: rho = U diag(p) U^dag, with
p = fixed_entropy_spectrum(z, S0) (exactly on the S0 shell) and U unitary. Local
descent moves U by exp(A(h)) with A anti-Hermitian and z freely, using central
finite differences and a backtracking line search. The channel is precomputed
as a transfer tensor on the support, so one objective evaluation is a
tensordot and a Hermitian eigenvalue problem.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import fock, gaussian
from .channels import ChannelSpec, apply_channel, apply_transfer, channel_transfer_tensor
from .errors import ConstraintError, CutoffTooSmallError, SpecError
from .fock import DensityOperator
from .sampling import fixed_entropy_spectrum, sample_fixed_entropy_state

__all__ = [
    "OptimizerConfig", "OptimizationReport", "conjectured_bound", "gibbs_candidate_entropy",
    "minimize_output_entropy", "conjecture_v2_scan", "equiv_identity_residual",
    "dds_inequality_check", "monotonicity_prefactor", "sample_fixed_entropy_state",
    "fixed_entropy_spectrum",
]


@dataclass
class OptimizerConfig:
    restarts: int = 20
    iterations: int = 40
    step: float = 1e-5          # finite-difference step
    seed: int = 0
    support: int | None = None  # defaults to the smallest support with ln(m) >= S0 + margin
    margin: float = 0.5
    tol: float = 1e-4           # violation tolerance
    grad_tol: float = 1e-7


@dataclass
class OptimizationReport:
    channel: dict
    S0: float
    N0: float
    conjectured_min: float
    best_found: float | None
    gap: float | None
    n_restarts: int
    n_samples: int
    violations: int
    seed: int
    cutoff: int
    support: int = 0
    tolerance: float = 1e-4
    gibbs_candidate: float | None = None
    scan_min: float | None = None
    samples: list = field(default_factory=list)    # (index, input entropy, output entropy)
    aborted: list = field(default_factory=list)
    best_state_diagnostics: dict = field(default_factory=dict)
    best_state: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["sample", "input_entropy", "output_entropy", "bound", "slack"])
        for i, s_in, s_out in sorted(self.samples):
            w.writerow([i, repr(s_in), repr(s_out), repr(self.conjectured_min),
                        repr(s_out - self.conjectured_min)])
        return buf.getvalue()


def conjectured_bound(ch: ChannelSpec, S0: float) -> float:
    """Conjectured minimal output entropy; g(kappa^2 N0 + c) except for the degenerate classes."""
    if ch.kind in ("A1", "A2"):
        return fock.g_function(ch.N)
    if ch.kind == "B1":
        return float(S0)
    N0 = fock.g_inverse(S0)
    return fock.g_function(ch.kappa2_eff * N0 + ch.c_eff)


def _gibbs_cutoff(N0: float, tail: float = 1e-12) -> int:
    if N0 == 0:
        return 8
    r = N0 / (N0 + 1.0)
    d = 8
    while r ** (d - math.ceil(d / 8)) >= tail:
        d += 4
    return d


def gibbs_candidate_entropy(ch: ChannelSpec, S0: float) -> float:
    """Output entropy of the Gibbs input (Gaussian infimum for the anisotropic A2/B1)."""
    N0 = fock.g_inverse(S0)
    if ch.kind in ("A2", "B1"):
        # the infimum sits at the squeezed boundary; report the Gaussian-backend limit value
        sig = 1e-6
        tab = gaussian.infimum_limit_experiment(ch.kind, S0, [sig], ch.N)
        return float(tab.entropies[0])
    if ch.kind == "A1":
        return fock.g_function(ch.N)
    n_out = ch.kappa2_eff * N0 + ch.c_eff
    d = max(_gibbs_cutoff(N0), _gibbs_cutoff(n_out))
    return fock.von_neumann_entropy(apply_channel(ch, fock.gibbs_state(N0, d), cutoff=d))


def default_support(S0: float, margin: float = 0.5) -> int:
    return max(2, math.ceil(math.exp(S0 + margin) - 1e-9))


def _antihermitian(h: np.ndarray, m: int) -> np.ndarray:
    A = np.zeros((m, m), dtype=complex)
    iu = np.triu_indices(m, 1)
    k = len(iu[0])
    A[iu] = h[:k] + 1j * h[k:2 * k]
    A = A - A.conj().T
    A[np.diag_indices(m)] = 1j * h[2 * k:]
    return A


class _Objective:
    def __init__(self, T: np.ndarray, S0: float, m: int):
        self.T, self.S0, self.m = T, S0, m

    def state(self, z, U):
        p = fixed_entropy_spectrum(z, self.S0)
        return (U * p) @ U.conj().T

    def __call__(self, z, U) -> float:
        out = apply_transfer(self.T, self.state(z, U))
        w = np.linalg.eigvalsh(0.5 * (out + out.conj().T))
        if not np.all(np.isfinite(w)):
            return math.nan
        return fock.entropy_from_eigenvalues(np.clip(w, 0, None))

    def tail_mass(self, z, U) -> float:
        out = apply_transfer(self.T, self.state(z, U))
        d = out.shape[0]
        return float(np.sum(np.real(np.diag(out))[d - fock.tail_levels(d):]))


def _expm_ah(A: np.ndarray) -> np.ndarray:
    return fock.expm_antihermitian(A)


def _descend(obj: _Objective, z, U, cfg: OptimizerConfig):
    m = obj.m
    f = obj(z, U)
    alpha = 0.1
    h = cfg.step
    for _ in range(cfg.iterations):
        n = m + m * m
        grad = np.zeros(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fp = _eval_shift(obj, z, U, e)
            fm = _eval_shift(obj, z, U, -e)
            grad[i] = (fp - fm) / (2 * h)
        if not np.all(np.isfinite(grad)):
            return z, U, math.nan
        gn = np.linalg.norm(grad)
        if gn < cfg.grad_tol:
            break
        accepted = False
        while alpha > 1e-10:
            zt, Ut = _shifted(z, U, -alpha * grad, m)
            ft = obj(zt, Ut)
            if ft <= f - 1e-4 * alpha * gn * gn:
                z, U, f = zt, Ut, ft
                alpha *= 2.0
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    return z, U, f


def _shifted(z, U, delta, m):
    z2 = z + delta[:m]
    U2 = U @ _expm_ah(_antihermitian(delta[m:], m))
    return z2, U2


def _eval_shift(obj, z, U, delta):
    z2, U2 = _shifted(z, U, delta, obj.m)
    return obj(z2, U2)


def _bound_and_header(ch: ChannelSpec, S0: float, d: int, cfg_seed: int, tol: float, m: int):
    N0 = fock.g_inverse(S0)
    bound = conjectured_bound(ch, S0)
    return OptimizationReport(
        channel=ch.to_dict(), S0=S0, N0=N0, conjectured_min=bound, best_found=None, gap=None,
        n_restarts=0, n_samples=0, violations=0, seed=cfg_seed, cutoff=d, support=m,
        tolerance=tol,
    )


def minimize_output_entropy(ch: ChannelSpec, S0: float, d: int,
                            config: OptimizerConfig | None = None) -> OptimizationReport:
    """Multi-start local descent on the S0 shell (support-restricted inputs, output cutoff d)."""
    cfg = config or OptimizerConfig()
    m = cfg.support or default_support(S0, cfg.margin)
    if m > d:
        raise ConstraintError(f"support {m} exceeds cutoff {d}")
    if S0 > math.log(m) + 1e-12:
        raise ConstraintError(f"S0={S0} unreachable on support {m}")
    rep = _bound_and_header(ch, S0, d, cfg.seed, cfg.tol, m)
    rep.gibbs_candidate = gibbs_candidate_entropy(ch, S0)
    T = channel_transfer_tensor(ch, m, d)
    obj = _Objective(T, S0, m)
    starts, finals = [], []
    best = (math.inf, None, None)
    for r in range(cfg.restarts):
        rng = np.random.default_rng(cfg.seed + r)
        z = rng.standard_normal(m)
        U = fock.haar_unitary(m, rng)
        f0 = obj(z, U)
        if not math.isfinite(f0) or obj.tail_mass(z, U) >= fock.TAIL_LIMIT:
            rep.aborted.append({"restart": r, "reason": "output leaks past the cutoff at start"})
            continue
        starts.append(f0)
        rep.samples.append((r, S0, f0))
        z, U, f = _descend(obj, z, U, cfg)
        if not math.isfinite(f) or obj.tail_mass(z, U) >= fock.TAIL_LIMIT:
            rep.aborted.append({"restart": r, "reason": "output leaks past the cutoff after descent"})
            continue
        finals.append(f)
        if f < best[0]:
            best = (f, z, U)
    rep.n_restarts = cfg.restarts
    rep.n_samples = len(starts)
    if starts:
        rep.scan_min = float(min(starts))
    if best[1] is not None:
        f, z, U = best
        rep.best_found = float(f)
        rep.gap = float(f - rep.conjectured_min)
        rho = DensityOperator(obj.state(z, U), (m,), validate=False)
        out = DensityOperator(apply_transfer(T, rho.matrix), (d,), validate=False)
        p = fixed_entropy_spectrum(z, S0)
        rep.best_state_diagnostics = {
            "entropy_residual": abs(fock.von_neumann_entropy(rho) - S0),
            "tail_mass": out.tail_mass,
        }
        rep.best_state = {
            "spectrum": p.tolist(),
            "unitary_real": U.real.tolist(),
            "unitary_imag": U.imag.tolist(),
        }
    rep.violations = int(sum(v < rep.conjectured_min - cfg.tol for v in starts + finals))
    return rep


def squeezed_probes(ch: ChannelSpec, S0: float, sigmas=(0.5, 0.2, 0.1, 0.05, 0.01)):
    """Fixed-entropy squeezed Gaussian inputs for A2/B1, evaluated with the covariance backend."""
    if ch.kind not in ("A2", "B1"):
        return []
    tab = gaussian.infimum_limit_experiment(ch.kind, S0, sigmas, ch.N)
    return tab.entropies.tolist()


def conjecture_v2_scan(ch: ChannelSpec, S0: float, n_samples: int, seed: int = 0, d: int = 32,
                       support: int | None = None, tol: float = 1e-4,
                       margin: float = 0.5) -> OptimizationReport:
    """Pure sampling of S(Phi(rho)) over random states with entropy S0 (no descent)."""
    m = support or default_support(S0, margin)
    rep = _bound_and_header(ch, S0, d, seed, tol, m)
    if n_samples <= 0:
        return rep
    T = channel_transfer_tensor(ch, m, d)
    rng = np.random.default_rng(seed)
    vals = []
    for i in range(n_samples):
        rho = sample_fixed_entropy_state(S0, m, rng, margin=0.0)
        out = DensityOperator(apply_transfer(T, rho.matrix), (d,), validate=False)
        if out.tail_mass >= fock.TAIL_LIMIT:
            raise CutoffTooSmallError(f"scan output tail mass {out.tail_mass:.2e} at cutoff {d}")
        s_out = fock.von_neumann_entropy(out)
        vals.append(s_out)
        rep.samples.append((i, fock.von_neumann_entropy(rho), s_out))
    probes = squeezed_probes(ch, S0)
    for j, v in enumerate(probes):
        rep.samples.append((n_samples + j, S0, v))
    allv = vals + probes
    rep.n_samples = len(allv)
    rep.scan_min = rep.best_found = float(min(allv))
    rep.gap = rep.best_found - rep.conjectured_min
    rep.violations = int(sum(v < rep.conjectured_min - tol for v in allv))
    return rep


# ---------------------------------------------------------------- relative-entropy reformulation


def _phase_covariant(ch: ChannelSpec) -> None:
    if ch.kind not in ("C_att", "C_amp", "B2"):
        raise SpecError("relative-entropy identity implemented for C_att, C_amp and B2")


def monotonicity_prefactor(ch: ChannelSpec, N0: float) -> float:
    """kappa^2 ln((N'+1)/N') / ln((N0+1)/N0) with N' = kappa^2 N0 + c."""
    Np = ch.kappa2_eff * N0 + ch.c_eff
    return ch.kappa2_eff * math.log1p(1.0 / Np) / math.log1p(1.0 / N0)


@lru_cache(maxsize=32)
def _gibbs_pair(ch: ChannelSpec, N0: float, d: int):
    rho0 = fock.gibbs_state(N0, d)
    return rho0, apply_channel(ch, rho0, cutoff=d)


def _relative_terms(ch: ChannelSpec, rho, N0: float, cutoff: int | None):
    m = fock.as_matrix(rho)
    d = cutoff or m.shape[0]
    full = np.zeros((d, d), dtype=complex)
    full[: m.shape[0], : m.shape[0]] = m
    rho0, out0 = _gibbs_pair(ch, float(N0), int(d))
    out = apply_channel(ch, full, cutoff=d)
    return full, rho0, out, out0


def equiv_identity_residual(ch: ChannelSpec, rho, N0: float, cutoff: int | None = None) -> float:
    """|LHS - RHS| of S(Phi rho) - g(N') = prefactor * S(rho||rho0) - S(Phi rho||Phi rho0).

    Returns NaN when a relative entropy is infinite (not applicable).
    """
    _phase_covariant(ch)
    if N0 <= 0:
        return math.nan
    full, rho0, out, out0 = _relative_terms(ch, rho, N0, cutoff)
    Np = ch.kappa2_eff * N0 + ch.c_eff
    r_in = fock.relative_entropy(full, rho0)
    r_out = fock.relative_entropy(out, out0)
    if not (math.isfinite(r_in) and math.isfinite(r_out)):
        return math.nan
    lhs = fock.von_neumann_entropy(out) - fock.g_function(Np)
    rhs = monotonicity_prefactor(ch, N0) * r_in - r_out
    return abs(lhs - rhs)


def dds_inequality_check(ch: ChannelSpec, rho, N0: float, cutoff: int | None = None,
                         prefactor: bool = True) -> float:
    """prefactor * S(rho||rho0) - S(Phi rho||Phi rho0); the conjecture predicts >= 0.

    With ``prefactor=False`` the prefactor is replaced by 1 (plain monotonicity).
    """
    _phase_covariant(ch)
    if N0 <= 0:
        return math.nan
    full, rho0, out, out0 = _relative_terms(ch, rho, N0, cutoff)
    r_in = fock.relative_entropy(full, rho0)
    r_out = fock.relative_entropy(out, out0)
    if not (math.isfinite(r_in) and math.isfinite(r_out)):
        return math.nan
    c = monotonicity_prefactor(ch, N0) if prefactor else 1.0
    return c * r_in - r_out
