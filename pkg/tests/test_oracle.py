import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockphase import engine as eng
from fockphase import oracle as orc
from fockphase.errors import CapExceededError, InvalidSpecError, ZeroProbabilityRecordError
from fockphase.model import (
    CondensateSpec,
    DetectionEvent,
    PhaseDistribution,
    RegionLayout,
    reduce_position,
    three_mode_event,
)

import reference as ref

TWO_PI = 2 * math.pi
K_A, K_B, K_C = np.array([0.3, 0.0, 0.0]), np.array([-0.7, 0.0, 0.0]), np.array([0.0, 1.1, 0.0])


def pos(u):
    return DetectionEvent("position", u=u)


def spin(theta, eta, site=None):
    return DetectionEvent("spin", theta=theta, eta=eta, site=site)


def test_elementary_symmetric_examples():
    assert np.allclose(orc.elementary_symmetric([1, 1]), [1, 2, 1])
    assert np.allclose(orc.elementary_symmetric([]), [1])
    assert np.allclose(orc.elementary_symmetric([1, -1]), [1, 0, -1], atol=1e-15)


@given(st.lists(st.floats(0, TWO_PI), max_size=30))
def test_elementary_symmetric_bound(us):
    e = orc.elementary_symmetric(np.exp(1j * np.array(us)))
    P = len(us)
    assert all(abs(e[m]) <= comb(P, m) * (1 + 1e-12) for m in range(P + 1))


def test_two_detection_hand_values():
    spec = CondensateSpec(10, 10, k_b=(1, 0, 0))
    ev = [pos(0), pos(0)]
    # ||(a + b)^2 |10,10>||^2 = 10*9 + 4*100 + 10*9
    assert orc.exact_sequence_probability(ev, spec, "falling").value == pytest.approx(580)
    assert orc.exact_sequence_probability(ev, spec, "power").value == pytest.approx(600)


@pytest.mark.parametrize("u", [0.0, 1.7, 4.0])
def test_single_detection_has_no_fringe(u):
    spec = CondensateSpec(7, 4, k_b=(1, 0, 0))
    assert orc.exact_sequence_probability([pos(u)], spec).value == pytest.approx(11.0)


def test_opposite_spins_impossible_for_one_particle_each():
    spec = CondensateSpec(1, 1, spinful=True)
    for th in (0.0, 1.3):
        assert abs(orc.exact_sequence_probability([spin(th, 1), spin(th, -1)], spec).value) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5),
       st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=5))
def test_position_dp_matches_fock_space(n_a, n_b, pts):
    if n_a + n_b == 0:
        return
    spec = CondensateSpec(n_a, n_b, k_a=K_A, k_b=K_B)
    rs = [np.array([x, y, 0.0]) for x, y in pts]
    events = [pos(reduce_position(r, K_A, K_B)) for r in rs]
    expect = ref.normal_ordered([ref.position_channels(r, [K_A, K_B]) for r in rs], (n_a, n_b))
    for method in ("dp", "esp", "brute"):
        got = orc.exact_sequence_probability(events, spec, "falling", method).value
        assert got == pytest.approx(expect, rel=1e-10, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4),
       st.lists(st.tuples(st.floats(0, TWO_PI), st.sampled_from([1, -1])), min_size=1, max_size=5))
def test_spin_dp_matches_fock_space(n_a, n_b, evs):
    if n_a + n_b == 0:
        return
    spec = CondensateSpec(n_a, n_b, spinful=True)
    events = [spin(t, h) for t, h in evs]
    expect = ref.normal_ordered([ref.spin_channels(1.0, 1.0, t, h) for t, h in evs], (n_a, n_b))
    for method in ("dp", "esp", "brute"):
        got = orc.exact_sequence_probability(events, spec, "falling", method).value
        assert got == pytest.approx(expect, rel=1e-10, abs=1e-10)
    dense = orc.twomode_spin_sequential(events, n_a, n_b)
    assert dense * 2 ** len(events) == pytest.approx(expect, rel=1e-10, abs=1e-10)


def test_spin_blind_positions_on_spinful_pair():
    lay = RegionLayout.normalized({"L": (2, 1, 1j), "R": (3, 0.5, 1)})
    pair = lay.mode_pair()
    spec = CondensateSpec(3, 2, pair=pair, spinful=True)
    sites = [0, 2, 4]
    events = [DetectionEvent("position", site=s) for s in sites]
    expect = ref.normal_ordered([ref.spin_blind_channels(pair.phi_a[s], pair.phi_b[s]) for s in sites],
                                (3, 2))
    assert orc.exact_sequence_probability(events, spec).value == pytest.approx(expect, rel=1e-12)
    assert orc.exact_sequence_probability(events, spec, method="brute").value == pytest.approx(
        expect, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3),
       st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4)), min_size=1, max_size=4))
def test_three_mode_dp_matches_fock_space(n_a, n_b, n_c, pts):
    if n_a + n_b + n_c == 0:
        return
    spec = CondensateSpec(n_a, n_b, n_c=n_c, k_a=K_A, k_b=K_B, k_c=K_C)
    rs = [np.array([x, y, 0.0]) for x, y in pts]
    events = [three_mode_event(reduce_position(r, K_A, K_B), reduce_position(r, K_B, K_C)) for r in rs]
    expect = ref.normal_ordered([ref.position_channels(r, [K_A, K_B, K_C]) for r in rs],
                                (n_a, n_b, n_c))
    for method in ("dp", "brute"):
        got = orc.exact_sequence_probability(events, spec, "falling", method).value
        assert got == pytest.approx(expect, rel=1e-10, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10**6), st.integers(1, 10**6),
       st.lists(st.tuples(st.floats(0, TWO_PI), st.floats(0, TWO_PI), st.sampled_from([1, -1])),
                min_size=1, max_size=12))
def test_power_mode_equals_phase_integral(n_a, n_b, evs):
    spec = CondensateSpec(n_a, n_b, k_b=(1, 0, 0), spinful=True)
    events = [DetectionEvent("spin", u=u, theta=t, eta=h) for u, t, h in evs]
    P = len(events)
    model = eng.EventFactorModel.from_spec(spec)
    log_engine = eng.log_sequence_probability(events, PhaseDistribution.uniform(max(16, 2 * P + 2)), model)
    res = orc.exact_sequence_probability(events, spec, "power")
    assert res.scaled == pytest.approx(math.exp(log_engine), rel=1e-10)


def test_power_mode_identity_tabulated():
    lay = RegionLayout.normalized({"L": (2, 1, 1j), "R": (3, 0.5, 1)})
    spec = CondensateSpec(40, 25, pair=lay.mode_pair(), spinful=True)
    events = [spin(0.3, 1, 0), spin(2.0, -1, 2), spin(4.1, 1, 3), spin(1.0, 1, 4)]
    model = eng.EventFactorModel.from_spec(spec)
    engine_val = eng.sequence_probability(events, PhaseDistribution.uniform(16), model)
    assert orc.exact_sequence_probability(events, spec, "power").scaled == pytest.approx(
        engine_val, rel=1e-12)


def test_falling_approaches_power():
    rng = np.random.default_rng(5)
    events = [pos(u) for u in rng.uniform(0, TWO_PI, 10)]
    devs = []
    for N in (10**2, 10**3, 10**4, 10**5):
        spec = CondensateSpec(N // 2, N // 2, k_b=(1, 0, 0))
        fa = orc.exact_sequence_probability(events, spec, "falling").value
        pw = orc.exact_sequence_probability(events, spec, "power").value
        devs.append(abs(fa / pw - 1))
        assert devs[-1] <= 10**2 / (N // 2)
    assert all(b < a for a, b in zip(devs, devs[1:]))


def test_falling_weights_survive_huge_populations():
    spec = CondensateSpec(10**9, 10**9, k_b=(1, 0, 0))
    events = [pos(0.1 * i) for i in range(8)]
    fa = orc.exact_sequence_probability(events, spec, "falling")
    pw = orc.exact_sequence_probability(events, spec, "power")
    assert math.isfinite(fa.value) and abs(fa.scaled / pw.scaled - 1) < 1e-7


def test_dense_oracle_examples():
    # one detection: <P> = N/2 for either result
    assert orc.twomode_spin_sequential([spin(0.4, 1)], 1, 1) == pytest.approx(1.0)
    assert orc.twomode_spin_sequential([spin(0.4, -1)], 1, 1) == pytest.approx(1.0)
    pp = orc.twomode_spin_sequential([spin(0.4, 1), spin(0.4, 1)], 1, 1)
    pats = [orc.twomode_spin_sequential([spin(0.4, a), spin(0.4, b)], 1, 1)
            for a in (1, -1) for b in (1, -1)]
    assert pp / sum(pats) == pytest.approx(0.5)
    # coincident-point operator products: each one-particle-per-mode projector squares to itself
    assert orc.twomode_spin_sequential([spin(0.4, 1)], 1, 1, ordering="operator") == pytest.approx(1.0)
    assert orc.twomode_spin_sequential([spin(0.4, 1), spin(0.4, 1)], 1, 1,
                                       ordering="operator") == pytest.approx(2.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6),
       st.lists(st.tuples(st.floats(0, TWO_PI), st.sampled_from([1, -1])), min_size=1, max_size=5),
       st.floats(0, TWO_PI))
def test_dense_oracle_rotation_invariant(n_a, n_b, evs, delta):
    if n_a + n_b == 0:
        return
    a = orc.twomode_spin_sequential([spin(t, h) for t, h in evs], n_a, n_b)
    b = orc.twomode_spin_sequential([spin(t + delta, h) for t, h in evs], n_a, n_b)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("P", [1, 3, 5])
def test_spin_completeness(P):
    rng = np.random.default_rng(P)
    thetas = rng.uniform(0, TWO_PI, P)
    n_a, n_b = 4, 3
    total = 0.0
    for etas in np.ndindex(*(2,) * P):
        total += orc.twomode_spin_sequential([spin(t, 1 - 2 * e) for t, e in zip(thetas, etas)],
                                             n_a, n_b)
    assert total == pytest.approx(ref.falling(n_a + n_b, P), rel=1e-12)


def test_caps_and_input_checks():
    with pytest.raises(CapExceededError):
        orc.twomode_spin_sequential([spin(0, 1)], 3000, 1001)
    s3 = CondensateSpec(50, 50, n_c=50, k_a=K_A, k_b=K_B, k_c=K_C)
    with pytest.raises(CapExceededError):
        orc.exact_sequence_probability([three_mode_event(0.1 * i, 0.2) for i in range(16)], s3)
    with pytest.raises(CapExceededError):
        orc.exact_sequence_probability([pos(0.1 * i) for i in range(11)],
                                       CondensateSpec(20, 20, k_b=(1, 0, 0)), method="brute")
    lay = RegionLayout.normalized({"D": (4, 1, 1)})
    spec = CondensateSpec(3, 3, pair=lay.mode_pair(), spinful=True)
    with pytest.raises(InvalidSpecError):
        orc.exact_sequence_probability([spin(0, 1, 0), spin(1, 1, 0)], spec)


def test_more_detections_than_particles_is_zero():
    spec = CondensateSpec(1, 1, k_b=(1, 0, 0))
    assert orc.exact_sequence_probability([pos(0), pos(1), pos(2)], spec).value == 0.0


REMOTE = RegionLayout.normalized({"D": (4, 1, 1), "D'": (2, 1, 1j), "D''": (2, 0.5, 1 + 1j)})


def test_remote_orientation_examples():
    spec = CondensateSpec(3, 3, pair=REMOTE.mode_pair(), spinful=True)
    for th in (0.0, 1.0, 4.0):
        assert abs(orc.remote_orientation_exact([], 5, th, spec)) < 1e-12
    ev = [spin(0.7, 1, 0)]
    a = orc.remote_orientation_exact(ev, 5, 1.2, spec)
    b = orc.remote_orientation_exact(ev, 5, 1.2 + math.pi, spec)
    assert abs(a) > 1e-3 and a == pytest.approx(-b, rel=1e-12)
    with pytest.raises(InvalidSpecError):
        orc.remote_orientation_exact(ev, 0, 0.0, spec)
    with pytest.raises(ZeroProbabilityRecordError):
        orc.remote_orientation_exact([spin(0.7, 1, 0), spin(0.7, -1, 1)],
                                     5, 0.0, CondensateSpec(1, 0, pair=REMOTE.mode_pair(),
                                                            spinful=True))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4),
       st.lists(st.tuples(st.floats(0, TWO_PI), st.sampled_from([1, -1])), min_size=0, max_size=3),
       st.integers(4, 7), st.floats(0, TWO_PI))
def test_remote_orientation_matches_fock_space(n_a, n_b, evs, target, theta):
    pair = REMOTE.mode_pair()
    spec = CondensateSpec(n_a, n_b, pair=pair, spinful=True)
    events = [spin(t, h, site) for site, (t, h) in enumerate(evs)]
    chans = [ref.spin_channels(pair.phi_a[e.site], pair.phi_b[e.site], e.theta, e.eta)
             for e in events]
    den = ref.normal_ordered(chans, (n_a, n_b))
    if den < 1e-9:
        return
    expect = ref.conditional_transverse_spin(chans, (n_a, n_b),
                                             (pair.phi_a[target], pair.phi_b[target]), theta)
    got = orc.remote_orientation_exact(events, target, theta, spec)
    assert got == pytest.approx(expect, abs=1e-10)
