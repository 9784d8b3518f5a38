"""Acceptance criteria at their stated tolerances; each test records one PASS/FAIL line."""

import math
import subprocess
import sys

import numpy as np
import pytest

from gmoe import cascade, channels, fock, gaussian, lindblad, optimizer
from gmoe.channels import ChannelSpec
from gmoe.errors import CutoffTooSmallError
from gmoe.lindblad import LindbladGenerator
from gmoe.optimizer import OptimizerConfig
from gmoe.sampling import sample_fixed_entropy_state

N_STATES = 50
N_CASCADE = 30


def fixed_entropy_input(N0, seed, support=None):
    S0 = fock.g_function(N0)
    m = support or max(3, math.ceil(math.exp(S0 + 0.2)))
    return sample_fixed_entropy_state(S0, m, seed, margin=0.0)


def full_rank_input(N0, seed, d=40):
    return sample_fixed_entropy_state(fock.g_function(N0), d, seed, support=6, margin=0.0, tail_weight=1e-6)


def test_c01_fixed_point(criterion):
    worst = 0.0
    for eta in (0.3, 0.5, 0.8):
        for N0 in (0.5, 1.0, 2.0):
            g = fock.gibbs_state(N0, 60)
            out = channels.apply_attenuator(g, eta, N0).output
            worst = max(worst, fock.trace_distance(out, g))
    assert criterion("1 fixed point", worst < 1e-6, f"max trace distance {worst:.2e}")


ALL_CLASSES = [ChannelSpec.attenuator(0.45, 0.6), ChannelSpec.amplifier(1.3, 0.2), ChannelSpec.additive_noise(0.5),
               ChannelSpec.class_d(0.5, 0.2), ChannelSpec.a1(0.7), ChannelSpec.a2(0.4), ChannelSpec.b1()]


def test_c02_photon_bookkeeping(criterion):
    rng = np.random.default_rng(2)
    worst = {}
    for ch in ALL_CLASSES:
        err = 0.0
        for _ in range(N_STATES):
            S0 = rng.uniform(0.0, 1.2)
            rho = sample_fixed_entropy_state(S0, 5, rng, margin=0.0)
            out = channels.apply_channel(ch, fock.pad(rho, 8), cutoff=40)
            err = max(err, abs(fock.mean_photon(out) - ch.predicted_mean_photon(rho)))
        worst[ch.kind] = err
    # the class constants themselves
    consts = [ChannelSpec.attenuator(0.3, 2.0), ChannelSpec.amplifier(2.0, 0.5), ChannelSpec.additive_noise(0.7),
              ChannelSpec.class_d(1.5, 0.2)]
    expect = [(0.3, 0.7 * 2.0), (2.0, 1.0 * 1.5), (1.0, 0.7), (1.5, 1.5 * 1.2 + 0.2)]
    const_ok = all(math.isclose(c.kappa2_eff, k) and math.isclose(c.c_eff, v) for c, (k, v) in zip(consts, expect))
    top = max(worst.values())
    ok = top < 1e-5 and const_ok
    assert criterion("2 photon bookkeeping", ok, f"max |n_out - prediction| {top:.2e} over 7 classes")


def _disc(radius=1.5, n=7):
    pts = [x + 1j * y for x in np.linspace(-radius, radius, n) for y in np.linspace(-radius, radius, n)]
    return [mu for mu in pts if abs(mu) <= radius]


def test_c03_characteristic_function(criterion):
    mus = _disc()
    rho = fixed_entropy_input(1.0, 3)
    res = {
        "attenuator gibbs": channels.verify_char_relation(fock.gibbs_state(1.0, 80), ChannelSpec.attenuator(0.4, 0.5), mus, 80),
        "attenuator random": channels.verify_char_relation(fock.pad(rho, 80), ChannelSpec.attenuator(0.6, 1.0), mus, 80),
        "A1": channels.verify_char_relation(fock.pad(rho, 80), ChannelSpec.a1(0.8), mus, 80),
        "B1": channels.verify_char_relation(fock.pad(rho, 80), ChannelSpec.b1(), mus, 80),
    }
    top = max(res.values())
    assert criterion("3 characteristic functions", top < 1e-5, f"max residual {top:.2e}")


def _cascade_suite(k, d, N0_list=(0.5, 1.0), n=N_CASCADE):
    worst = dict(joint=0.0, sub=math.inf, bound=math.inf, td=0.0)
    for N0 in N0_list:
        for seed in range(n):
            rep = cascade.run_cascade(fixed_entropy_input(N0, seed), k, N0, d)
            worst["joint"] = max(worst["joint"], abs(rep.joint_entropy - rep.target_joint))
            worst["sub"] = min(worst["sub"], rep.subadditivity_slack)
            worst["bound"] = min(worst["bound"], rep.bound_slack)
            worst["td"] = max(worst["td"], rep.a_trace_distance)
    ok = worst["joint"] < 1e-5 and worst["sub"] >= -1e-6 and worst["bound"] >= -1e-5 and worst["td"] < 1e-4
    detail = (f"joint dev {worst['joint']:.1e}, min subadditivity slack {worst['sub']:.2e}, "
              f"min bound slack {worst['bound']:.2e}, A-reduction distance {worst['td']:.1e}")
    return ok, detail


def test_c04_theorem_k2(criterion):
    ok, detail = _cascade_suite(2, 24)
    assert criterion("4 theorem k=2 d=24", ok, detail)


@pytest.mark.xfail(raises=CutoffTooSmallError, strict=True,
                   reason="Gibbs(N0) keeps >1e-4 of its weight on the top levels of a 10-level mode")
def test_c04_theorem_k3_stated_cutoff(criterion):
    try:
        ok, detail = _cascade_suite(3, 10)
    except CutoffTooSmallError as exc:
        criterion("4 theorem k=3 d=10", False, f"cutoff too small: {exc}")
        raise
    assert criterion("4 theorem k=3 d=10", ok, detail)


def test_c04_theorem_k3_adequate_cutoff(criterion):
    ok, detail = _cascade_suite(3, 32)
    assert criterion("4 theorem k=3 d=32", ok, detail)


def test_c05_semigroup(criterion):
    d = 40
    rho = fixed_entropy_input(1.0, 5)
    comp = []
    for e1, e2 in ((0.3, 0.6), (0.8, 0.5)):
        a = channels.apply_attenuator(channels.apply_attenuator(rho, e1, 1.0, cutoff=d).output, e2, 1.0).output
        b = channels.apply_attenuator(rho, e1 * e2, 1.0, cutoff=d).output
        comp.append(fock.trace_distance(a, b))
    a = channels.apply_B2(channels.apply_B2(fock.pad(rho, d), 0.2), 0.3)
    comp.append(fock.trace_distance(a, channels.apply_B2(fock.pad(rho, d), 0.5)))
    a = channels.apply_amplifier(channels.apply_amplifier(rho, 1.2, 0.0, cutoff=d).output, 1.25, 0.0).output
    comp.append(fock.trace_distance(a, channels.apply_amplifier(rho, 1.5, 0.0, cutoff=d).output))
    lind = []
    for t in (0.2, 0.7):
        for N in (0.0, 1.0):
            ev = lindblad.evolve(LindbladGenerator.attenuator(N), fock.pad(rho, d), t)
            ref = channels.apply_attenuator(rho, math.exp(-t), N, cutoff=d).output
            lind.append(fock.trace_distance(ev, ref))
    ok = max(comp) < 1e-5 and max(lind) < 1e-4
    assert criterion("5 semigroup", ok, f"composition {max(comp):.1e}, Lindblad vs dilation {max(lind):.1e}")


def test_c06_infinitesimal_anchors(criterion):
    worst = 0.0
    for N0 in (0.5, 1.0, 2.0):
        d = {0.5: 60, 1.0: 80, 2.0: 120}[N0]
        g = fock.gibbs_state(N0, d)
        for gen in (LindbladGenerator.attenuator(N0), LindbladGenerator.amplifier(N0),
                    LindbladGenerator.additive_noise()):
            expected = ((gen.gamma_plus - gen.gamma_minus) * N0 + gen.gamma_plus) * math.log((N0 + 1) / N0)
            worst = max(worst, abs(lindblad.entropy_rate(gen, g) - expected))
    assert criterion("6 infinitesimal anchors", worst < 1e-5, f"max rate error {worst:.1e}")


def test_c07_relative_entropy(criterion):
    N0, d = 1.0, 48
    equiv = 0.0
    for ch in (ChannelSpec.attenuator(0.7, 1.0), ChannelSpec.amplifier(1.3, 0.5), ChannelSpec.additive_noise(0.4)):
        for seed in range(N_CASCADE):
            r = optimizer.equiv_identity_residual(ch, full_rank_input(N0, seed), N0, cutoff=d)
            assert not math.isnan(r)
            equiv = max(equiv, r)
    mono = math.inf
    rng = np.random.default_rng(7)
    for ch in ALL_CLASSES:
        T = channels.channel_transfer_tensor(ch, 4, 36)
        for _ in range(20):
            a = fock.random_density(4, rng=rng).matrix
            b = fock.random_density(4, rng=rng).matrix
            mono = min(mono, fock.relative_entropy(a, b) - fock.relative_entropy(
                channels.apply_transfer(T, a), channels.apply_transfer(T, b)))
    dds = math.inf
    ch = ChannelSpec.attenuator(0.5, N0)
    for seed in range(N_CASCADE):
        dds = min(dds, optimizer.dds_inequality_check(ch, full_rank_input(N0, seed), N0, cutoff=d))
    ok = equiv < 1e-4 and mono >= -1e-6 and dds >= -1e-5
    assert criterion("7 relative entropy", ok,
                     f"identity residual {equiv:.1e}, monotonicity slack {mono:.1e}, proved-case slack {dds:.2e}")


def test_c08_degenerate_classes(criterion):
    N = 1.0
    S0 = fock.g_function(N)
    a2_probe = math.inf
    b1_probe = math.inf
    for seed in range(20):
        rho = fixed_entropy_input(N, seed)
        a2_probe = min(a2_probe, fock.von_neumann_entropy(channels.apply_A2(rho, N, cutoff=48)) - fock.g_function(N))
        b1_probe = min(b1_probe, fock.von_neumann_entropy(channels.apply_B1(fock.pad(rho, 40))) - S0)
    a2_tab = gaussian.infimum_limit_experiment("A2", S0, [1.0, 0.1, 1e-2], N=N)
    b1_tab = gaussian.infimum_limit_experiment("B1", S0, [1.0, 0.1, 1e-2])
    a2_probe = min(a2_probe, float(np.min(a2_tab.entropies - fock.g_function(N))))
    b1_probe = min(b1_probe, float(np.min(b1_tab.entropies - S0)))
    a1 = abs(fock.von_neumann_entropy(channels.apply_A1(fock.pad(fixed_entropy_input(N, 0), 60), N)) - fock.g_function(N))
    ok = (a2_probe >= -1e-5 and b1_probe >= -1e-5 and a2_tab.gap_at(1e-2) < 0.01
          and b1_tab.gap_at(1e-2) < 0.01 and a1 < 1e-8)
    assert criterion("8 degenerate classes", ok,
                     f"A2 gap at 1e-2 {a2_tab.gap_at(1e-2):.1e}, B1 gap {b1_tab.gap_at(1e-2):.1e}, A1 error {a1:.1e}")


def test_c09_optimizer(criterion):
    S0 = fock.g_function(1.0)
    rep = optimizer.minimize_output_entropy(ChannelSpec.attenuator(0.5, 1.0), S0, 24, OptimizerConfig(restarts=20))
    gap_ok = -1e-4 <= rep.gap <= 0.05
    cand_ok = abs(rep.gibbs_candidate - S0) < 1e-6
    proved = [ChannelSpec.attenuator(0.5, 1.0), ChannelSpec.attenuator(1 / 3, 1.0), ChannelSpec.a1(1.0),
              ChannelSpec.a2(1.0), ChannelSpec.b1()]
    # A2 outputs spread in q; they need a larger cutoff than the others to stay under the tail guard
    violations = rep.violations + sum(
        optimizer.conjecture_v2_scan(ch, S0, 20, seed=4, d=48 if ch.kind == "A2" else 32).violations
        for ch in proved)
    ok = gap_ok and cand_ok and violations == 0
    assert criterion("9 optimizer", ok, f"gap {rep.gap:.2e}, Gibbs candidate error {abs(rep.gibbs_candidate - S0):.1e}, "
                                        f"violations {violations}")


def test_c10_negative_controls(criterion):
    N0 = 1.0
    ch = ChannelSpec.attenuator(0.7, 1.0)
    residuals = []
    for seed in range(3):
        rho = sample_fixed_entropy_state(fock.g_function(N0) + 0.1, 40, seed, support=8, margin=0.0,
                                         tail_weight=1e-6)
        residuals.append(optimizer.equiv_identity_residual(ch, rho, N0, cutoff=48))
    broken = min(residuals) > 1e-2
    diagnosed = []
    for call in (lambda: channels.apply_attenuator(fock.vacuum(8), 0.5, 2.0),
                 lambda: fock.gibbs_state(3.0, 10),
                 lambda: cascade.run_cascade(fixed_entropy_input(1.0, 0), 3, 1.0, 10),
                 lambda: lindblad.evolve(LindbladGenerator.amplifier(1.0), fock.fock_state(6, 10), 1.0)):
        try:
            call()
            diagnosed.append(False)
        except CutoffTooSmallError:
            diagnosed.append(True)
    cli = subprocess.run([sys.executable, "-m", "gmoe", "apply", "--channel", "C_att,eta=0.5,N=3", "--N0", "3",
                          "--cutoff", "8"], capture_output=True, text=True)
    ok = broken and all(diagnosed) and cli.returncode == 4
    assert criterion("10 negative controls", ok,
                     f"perturbed residual min {min(residuals):.2e}, small-cutoff guards {sum(diagnosed)}/4, "
                     f"CLI exit {cli.returncode}")
