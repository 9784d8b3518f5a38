import json

import numpy as np
import pytest

from gmoe import channels, fock, gaussian
from gmoe.channels import ChannelSpec
from gmoe.errors import CutoffTooSmallError, DomainError, GridError, SpecError


def rand_state(seed, support=5, cutoff=32):
    return fock.random_density(support, cutoff=cutoff, rng=seed)


# ---- channel constants

@pytest.mark.parametrize("ch,k2,c", [
    (ChannelSpec.attenuator(0.3, 2.0), 0.3, 0.7 * 2.0),
    (ChannelSpec.amplifier(2.0, 0.5), 2.0, 1.0 * 1.5),
    (ChannelSpec.additive_noise(0.7), 1.0, 0.7),
    (ChannelSpec.class_d(1.5, 0.2), 1.5, 1.5 * 1.2 + 0.2),
    (ChannelSpec.a1(0.9), 0.0, 0.9),
    (ChannelSpec.b1(), 1.0, 0.25),
])
def test_photon_constants(ch, k2, c):
    assert ch.kappa2_eff == pytest.approx(k2)
    assert ch.c_eff == pytest.approx(c)


def test_spec_validation():
    with pytest.raises(DomainError):
        ChannelSpec.attenuator(1.2)
    with pytest.raises(DomainError):
        ChannelSpec.amplifier(0.5)
    with pytest.raises(SpecError):
        ChannelSpec("C_att")
    with pytest.raises(SpecError):
        ChannelSpec.from_json('{"eta": 0.5}')


@pytest.mark.parametrize("ch", [ChannelSpec.attenuator(0.3, 2.0), ChannelSpec.additive_noise(0.7),
                                ChannelSpec.class_d(1.5, 0.2), ChannelSpec.b1()])
def test_json_round_trip(ch):
    d = json.loads(ch.to_json())
    assert d["class"] == ch.kind
    assert ChannelSpec.from_json(ch.to_json()) == ch


def test_json_field_names():
    assert ChannelSpec.attenuator(0.5, 1).to_dict() == {"class": "C_att", "eta": 0.5, "N": 1.0}
    assert ChannelSpec.additive_noise(2).to_dict() == {"class": "B2", "t": 2.0}


# ---- beam splitter

def test_beam_splitter_identity():
    U = channels.beam_splitter_unitary(1.0, 4, 5).toarray()
    assert np.allclose(U, np.eye(20))


def test_beam_splitter_single_photon():
    U = channels.beam_splitter_unitary(0.5, 3, 3).toarray()
    out = U[:, 1 * 3 + 0]  # |1,0>
    # 2x2 rotation on span{|1,0>, |0,1>} by pi/4
    assert abs(out[3]) ** 2 == pytest.approx(0.5, abs=1e-12)
    assert abs(out[1]) ** 2 == pytest.approx(0.5, abs=1e-12)


def test_beam_splitter_conserves_number():
    d = 6
    U = channels.beam_splitter_unitary(0.37, d, d).toarray()
    n = np.diag(np.add.outer(np.arange(d), np.arange(d)).ravel())
    assert np.max(np.abs(U @ n - n @ U)) < 1e-10
    assert np.allclose(U @ U.conj().T, np.eye(d * d), atol=1e-10)


def test_beam_splitter_domain():
    with pytest.raises(DomainError):
        channels.beam_splitter_unitary(1.5, 3, 3)


# ---- attenuator

def test_attenuator_fixed_point():
    g = fock.gibbs_state(1.0, 40)
    res = channels.apply_attenuator(g, 0.4, 1.0)
    assert fock.trace_distance(res.output, g) < 1e-7


def test_attenuator_vacuum():
    res = channels.apply_attenuator(fock.vacuum(10), 0.3, 0.0)
    assert fock.trace_distance(res.output, fock.vacuum(10)) < 1e-12


def test_attenuator_photon_arithmetic():
    psi = np.zeros(40)
    psi[4] = 1.0
    res = channels.apply_attenuator(fock.pure_state(psi), 0.25, 2.0, d_env=60)
    assert fock.mean_photon(res.output) == pytest.approx(2.5, abs=1e-6)


def test_dilation_witness():
    r = rand_state(1, 4, 24)
    res = channels.apply_attenuator(r, 0.6, 0.5)
    assert res.joint_entropy() == pytest.approx(fock.von_neumann_entropy(r) + fock.g_function(0.5), abs=1e-7)
    assert abs(np.trace(res.output.matrix) - 1) < 1e-9
    assert abs(np.trace(res.complement.matrix) - 1) < 1e-9


def test_weak_complementary():
    g = fock.gibbs_state(0.8, 40)
    assert fock.trace_distance(channels.weak_complementary_attenuator(g, 0.5, 0.8), g) < 1e-7
    r = rand_state(2, 5, 40)
    comp = channels.weak_complementary_attenuator(r, 0.3, 1.0)
    other = channels.apply_attenuator(r, 0.7, 1.0).output
    assert fock.von_neumann_entropy(comp) == pytest.approx(fock.von_neumann_entropy(other), abs=1e-5)
    env = fock.gibbs_state(1.0, 40)
    assert fock.trace_distance(channels.weak_complementary_attenuator(r, 1.0, 1.0), env) < 1e-9


def test_attenuator_env_cutoff_guard():
    with pytest.raises(CutoffTooSmallError):
        channels.apply_attenuator(fock.vacuum(8), 0.5, 2.0)


@pytest.mark.parametrize("e1,e2", [(0.3, 0.6), (0.5, 0.5), (0.9, 0.2)])
@pytest.mark.parametrize("N", [0.0, 1.0])
def test_attenuator_semigroup(e1, e2, N):
    r = rand_state(3, 5, 40)
    two = channels.apply_attenuator(channels.apply_attenuator(r, e1, N).output, e2, N).output
    one = channels.apply_attenuator(r, e1 * e2, N).output
    assert fock.trace_distance(two, one) < 1e-5


# ---- amplifier and class D

def test_amplifier_identity():
    r = rand_state(4, 4, 20)
    assert fock.trace_distance(channels.apply_amplifier(r, 1.0, 0.3).output, r) < 1e-8


def test_amplifier_vacuum():
    out = channels.apply_amplifier(fock.vacuum(60), 2.0, 0.0).output
    assert fock.mean_photon(out) == pytest.approx(1.0, abs=1e-5)
    # pure amplification of vacuum is thermal with n = kappa^2 - 1
    ref = gaussian.gaussian_entropy(gaussian.apply_gaussian_channel(
        gaussian.GaussianState.thermal(0), ChannelSpec.amplifier(2.0, 0.0)))
    assert fock.von_neumann_entropy(out) == pytest.approx(ref, abs=1e-4)
    assert ref == pytest.approx(fock.g_function(1.0))


def test_amplifier_headroom_guard():
    with pytest.raises(CutoffTooSmallError):
        channels.apply_amplifier(fock.fock_state(5, 10), 3.0, 0.5)


def test_class_d():
    assert fock.trace_distance(channels.apply_class_D(fock.vacuum(10), 0.0, 0.0), fock.vacuum(10)) < 1e-10
    out = channels.apply_class_D(fock.vacuum(40), 1.0, 0.0)
    assert fock.mean_photon(out) == pytest.approx(1.0, abs=1e-5)


def test_class_d_slope():
    k2, N = 0.6, 0.3
    n0 = fock.mean_photon(channels.apply_class_D(fock.vacuum(48), k2, N))
    two = np.zeros(48)
    two[2] = 1.0
    n2 = fock.mean_photon(channels.apply_class_D(fock.pure_state(two), k2, N))
    assert (n2 - n0) / 2 == pytest.approx(k2, abs=1e-5)


# ---- B2

def test_b2_zero():
    r = rand_state(5, 4, 20)
    assert fock.trace_distance(channels.apply_B2(r, 0.0), r) < 1e-12


def test_b2_vacuum():
    assert fock.mean_photon(channels.apply_B2(fock.vacuum(40), 1.0)) == pytest.approx(1.0, abs=1e-5)


def test_b2_gibbs():
    out = channels.apply_B2(fock.gibbs_state(0.5, 60), 0.7)
    assert fock.trace_distance(out, fock.gibbs_state(1.2, 60)) < 1e-4


def test_b2_matches_lindblad():
    from gmoe import lindblad
    r = rand_state(6, 4, 40)
    a = channels.apply_B2(r, 0.3)
    b = lindblad.evolve(lindblad.LindbladGenerator.additive_noise(), r, 0.3)
    assert fock.trace_distance(a, b) < 1e-4


# ---- A1

def test_a1():
    r1, r2 = rand_state(7, 4, 30), fock.fock_state(3, 30)
    o1, o2 = channels.apply_A1(r1, 1.3), channels.apply_A1(r2, 1.3)
    assert fock.trace_distance(o1, fock.gibbs_state(1.3, 30)) < 1e-10
    assert np.array_equal(o1.matrix, o2.matrix)
    assert fock.von_neumann_entropy(o1) == pytest.approx(fock.g_function(1.3), abs=1e-6)


# ---- A2

def test_a2_entropy_lower_bound():
    N = 0.5
    for seed in range(20):
        out = channels.apply_A2(rand_state(seed, 4, 16), N, cutoff=40)
        assert fock.von_neumann_entropy(out) >= fock.g_function(N) - 1e-5


def test_a2_vacuum_variance():
    out = channels.apply_A2(fock.vacuum(8), 0.0, cutoff=40)
    x = fock.default_grid(40)
    dens = fock.position_distribution(out, x)
    assert np.trapezoid(x * x * dens, x) == pytest.approx(1.0, abs=1e-4)


def test_a2_depends_only_on_position_distribution():
    # Hermite functions are real, so rho and its complex conjugate share <x|rho|x>
    for seed in range(3):
        r = rand_state(9 + seed, 4, 12)
        conj = fock.DensityOperator(r.matrix.conj(), r.dims)
        assert np.max(np.abs(r.matrix.imag)) > 1e-3
        a = channels.apply_A2(r, 0.3, cutoff=40)
        b = channels.apply_A2(conj, 0.3, cutoff=40)
        assert fock.trace_distance(a, b) < 1e-10


def test_a2_grid_refinement():
    r = rand_state(10, 3, 12)
    x1 = channels.a2_grid(12, 36)
    x2 = np.linspace(x1[0] - 2, x1[-1] + 2, 2 * x1.size + 1)
    a = channels.apply_A2(r, 0.2, x_grid=x1, cutoff=36)
    b = channels.apply_A2(r, 0.2, x_grid=x2, cutoff=36)
    assert fock.trace_distance(a, b) < 1e-8


def test_a2_grid_error():
    with pytest.raises(GridError):
        channels.apply_A2(rand_state(1, 4, 12), 0.3, x_grid=np.linspace(-2, 2, 50))


# ---- B1

def test_b1_moments():
    d = 40
    q, p = fock.position_op(d), fock.momentum_op(d)
    for seed in range(5):
        r = rand_state(seed, 5, d)
        out = channels.apply_B1(r)
        dq = np.real(np.trace(out.matrix @ q @ q) - np.trace(r.matrix @ q @ q))
        dp = np.real(np.trace(out.matrix @ p @ p) - np.trace(r.matrix @ p @ p))
        assert dq == pytest.approx(0.5, abs=1e-5)
        assert abs(dp) < 1e-6


def test_b1_entropy_increases():
    for seed in range(20):
        r = rand_state(seed, 4, 32)
        assert fock.von_neumann_entropy(channels.apply_B1(r)) >= fock.von_neumann_entropy(r) - 1e-9


# ---- characteristic function relation

MU = [x + 1j * y for x in np.linspace(-1.06, 1.06, 5) for y in np.linspace(-1.06, 1.06, 5)]


def test_char_relation_attenuator():
    assert channels.verify_char_relation(fock.gibbs_state(1, 80), ChannelSpec.attenuator(0.4, 0.5), MU) < 1e-5


def test_char_relation_identity():
    r = rand_state(3, 5, 40)
    assert channels.verify_char_relation(r, ChannelSpec.attenuator(1.0, 0.7), MU) < 1e-8


@pytest.mark.parametrize("ch", [ChannelSpec.a1(0.6), ChannelSpec.b1(), ChannelSpec.additive_noise(0.4),
                                ChannelSpec.a2(0.4)], ids=lambda c: c.kind)
def test_char_relation_other_classes(ch):
    r = rand_state(4, 4, 40)
    assert channels.verify_char_relation(r, ch, MU, cutoff=48) < 1e-5


def test_char_relation_unsupported():
    with pytest.raises(SpecError):
        channels.verify_char_relation(fock.vacuum(10), ChannelSpec.amplifier(1.5), MU)


# ---- generic invariants over all classes

ALL = [ChannelSpec.attenuator(0.45, 0.6), ChannelSpec.amplifier(1.2, 0.2), ChannelSpec.class_d(0.5, 0.2),
       ChannelSpec.additive_noise(0.5), ChannelSpec.b1(), ChannelSpec.a1(0.7), ChannelSpec.a2(0.4)]


@pytest.mark.parametrize("ch", ALL, ids=lambda c: c.kind)
def test_trace_and_positivity(ch):
    for seed in range(5):
        out = channels.apply_channel(ch, rand_state(seed, 4, 16), cutoff=40)
        assert abs(np.trace(out.matrix) - 1) < 1e-6
        assert out.eigenvalues.min() > -1e-7


@pytest.mark.parametrize("ch", ALL, ids=lambda c: c.kind)
def test_relative_entropy_monotone(ch):
    rng = np.random.default_rng(17)
    T = channels.channel_transfer_tensor(ch, 4, 36)
    for _ in range(20):
        a = fock.random_density(4, rng=rng).matrix
        b = fock.random_density(4, rng=rng).matrix
        before = fock.relative_entropy(a, b)
        after = fock.relative_entropy(channels.apply_transfer(T, a), channels.apply_transfer(T, b))
        assert before >= after - 1e-6


@pytest.mark.parametrize("ch", ALL, ids=lambda c: c.kind)
def test_transfer_tensor_matches_direct(ch):
    r = rand_state(8, 4, 4)
    T = channels.channel_transfer_tensor(ch, 4, 36)
    direct = channels.apply_channel(ch, r, cutoff=36)
    assert np.max(np.abs(channels.apply_transfer(T, r.matrix) - direct.matrix)) < 1e-6
