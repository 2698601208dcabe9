from __future__ import annotations

import math

import numpy as np
import pytest

from qprofile.circuit import Circuit, QaoaParams, build_qaoa, cnot, h, measure, rx
from qprofile.problem import generate_instance
from qprofile.statevector import StateVector, sample, simulate


def test_bell_state_amplitudes():
    c = Circuit(n=2, gates=(h(0), cnot(0, 1), measure(0), measure(1)))
    psi = simulate(c).amplitudes
    expected = np.zeros(4, dtype=complex)
    expected[0] = expected[3] = 1 / math.sqrt(2)
    np.testing.assert_allclose(psi, expected, atol=1e-12)


def test_bell_sampling_has_exact_support():
    c = Circuit(n=2, gates=(h(0), cnot(0, 1)))
    counts = sample(simulate(c), shots=4000, seed=1)
    assert set(counts.counts) == {"00", "11"}
    assert sum(counts.counts.values()) == 4000


def test_basis_state_preparation_and_bit_order():
    # flipping qubit 0 must set the leftmost character
    c = Circuit(n=2, gates=(rx(math.pi, 0),))
    counts = sample(simulate(c), shots=100, seed=0)
    assert counts.counts == {"10": 100}


def test_zero_angle_ansatz_is_uniform():
    g = generate_instance(3, 0)
    c = build_qaoa(g, QaoaParams(p=2, gammas=(0.0, 0.0), betas=(0.0, 0.0)))
    probs = simulate(c).probabilities()
    np.testing.assert_allclose(probs, np.full(8, 1 / 8), atol=1e-12)


def test_sampling_is_deterministic_in_the_seed():
    c = Circuit(n=2, gates=(h(0), h(1)))
    st = simulate(c)
    assert sample(st, 500, seed=9).counts == sample(st, 500, seed=9).counts
    assert sample(st, 500, seed=9).counts != sample(st, 500, seed=10).counts


def test_sampled_frequencies_track_probabilities():
    st = simulate(Circuit(n=1, gates=(h(0),)))
    counts = sample(st, 1000, seed=3)
    assert 400 <= counts.counts["0"] <= 600


def test_total_variation_distance_at_many_shots():
    g = generate_instance(3, 1)
    c = build_qaoa(g, QaoaParams(p=1, gammas=(0.8,), betas=(0.3,)))
    st = simulate(c)
    probs = st.probabilities()
    shots = 100_000
    counts = sample(st, shots, seed=5)
    empirical = np.zeros_like(probs)
    for bits, k in counts.counts.items():
        empirical[int(bits, 2)] = k / shots
    tv = 0.5 * float(np.abs(empirical - probs).sum())
    assert tv < 0.02


def test_state_vector_validation():
    with pytest.raises(ValueError):
        StateVector(n=1, amplitudes=np.array([1.0, 1.0], dtype=complex))
    with pytest.raises(ValueError):
        StateVector(n=2, amplitudes=np.array([1.0, 0.0], dtype=complex))


def test_simulation_size_cap():
    with pytest.raises(ValueError):
        simulate(Circuit(n=25, gates=()))


def test_sample_rejects_nonpositive_shots():
    st = simulate(Circuit(n=1, gates=(h(0),)))
    with pytest.raises(ValueError):
        sample(st, 0, seed=0)
