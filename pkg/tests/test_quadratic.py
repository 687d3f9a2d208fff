import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import oracle_twist_expectation, slater_bruteforce
from topoindex.errors import DomainError, NumericalError
from topoindex.models import add_disorder, build_hubbard_ssh, build_rice_mele, build_ssh
from topoindex.quadratic import (bloch_from_spec, correlation_matrix, free_fermion_ground,
                                 single_particle_matrix, slater_expectation, slater_twist_expectation,
                                 sp_spectrum, spectrum_csv, ssh_bloch, ssh_edge_levels, zak_phase, zak_table)
from topoindex.solver import solve
from topoindex.twist import default_profile, expectation, make_profile, twist_for, z2_index


def test_open_chain_levels_s0():
    e = ssh_edge_levels(8, 0.0)
    assert np.allclose(e, [-1] * 4 + [1] * 4)


def test_open_chain_zero_modes_s1():
    e = ssh_edge_levels(8, 1.0)
    assert np.sum(np.abs(e) < 1e-12) == 2
    assert np.allclose(np.sort(np.abs(e))[2:], 1.0)


@pytest.mark.parametrize("s", [0.0, 0.3, 0.8])
def test_correlation_matrix_properties(s):
    C = correlation_matrix(build_ssh(12, s))
    assert np.allclose(C, C.conj().T)
    assert np.trace(C).real == pytest.approx(6.0)
    assert np.allclose(C @ C, C, atol=1e-12)


def test_correlation_matrix_dimer_blocks():
    C = correlation_matrix(build_ssh(8, 0.0))
    assert np.allclose(np.diag(C), 0.5)
    # bonding orbital with hopping +1 is antisymmetric: <c†_0 c_1> = -1/2
    assert C[0, 1].real == pytest.approx(-0.5)
    assert abs(C[1, 2]) < 1e-14


def test_degenerate_fermi_level():
    with pytest.raises(DomainError, match="degenerate"):
        correlation_matrix(build_ssh(8, 0.5))


def test_interacting_spec_rejected():
    with pytest.raises(DomainError):
        single_particle_matrix(build_hubbard_ssh(4, 0.3, 1.0))


@pytest.mark.parametrize("s", [0.0, 0.2, 0.7, 1.0])
def test_slater_matches_exact_diagonalization(s):
    spec = build_ssh(12, s)
    gs = solve(spec)
    for conv in ("cellA", "cellB_dual", "bond_centered"):
        U = twist_for(gs, default_profile(spec, conv), conv)
        assert slater_expectation(spec, U) == pytest.approx(expectation(gs, U), abs=1e-12)


def test_slater_rice_mele_against_oracle():
    spec = build_rice_mele(8, 0.9)
    U = twist_for(solve(spec), make_profile(0.5, 7.0), "site_centered")
    ref, _ = oracle_twist_expectation(spec, U.site_angles, U.offset)
    assert slater_expectation(spec, U) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(L=st.sampled_from([6, 8, 10]), seed=st.integers(0, 10_000), data=st.data())
def test_determinant_formula_vs_orbital_overlap(L, seed, data):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    h = A + A.conj().T
    N = data.draw(st.integers(0, L))
    angles = rng.uniform(0, 2 * np.pi, L)
    e, V = np.linalg.eigh(h)
    occ = V[:, :N]
    C = occ.conj() @ occ.T
    assert slater_twist_expectation(C, angles) == pytest.approx(slater_bruteforce(h, N, angles), abs=1e-10)


def test_free_fermion_energy_with_onsite_terms():
    spec = build_rice_mele(10, 1.3)
    ff = free_fermion_ground(spec)
    gs = solve(spec)
    assert ff.E0 == pytest.approx(gs.E0, abs=1e-10)
    assert ff.gap == pytest.approx(gs.gap, abs=1e-8)


def test_free_fermion_spinful():
    spec = build_hubbard_ssh(4, 0.3, 0.0)
    ff = free_fermion_ground(spec)
    assert ff.E0 == pytest.approx(solve(spec).E0, abs=1e-10)


def test_spectrum_csv(tmp_path):
    spectrum_csv(build_ssh(4, 0.0), tmp_path / "spec.csv")
    lines = (tmp_path / "spec.csv").read_text().splitlines()
    assert lines[0] == "n,energy" and len(lines) == 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), amp=st.floats(0, 0.4))
def test_particle_hole_spectral_symmetry(seed, amp):
    spec = add_disorder(build_ssh(10, 0.3), seed, amp, 0.0)
    e, _ = sp_spectrum(spec)
    assert np.allclose(np.sort(e), np.sort(-e), atol=1e-12)


# -- Zak phase -----------------------------------------------------------

@pytest.mark.parametrize("s,nu", [(0.0, 0), (0.25, 0), (0.4, 0), (0.6, 1), (0.75, 1), (1.0, 1)])
def test_zak_values(s, nu):
    assert zak_phase(s) == nu


def test_zak_from_spec_matches_builder():
    for s in (0.25, 0.75):
        assert zak_phase(build_ssh(8, s)) == zak_phase(s)


def test_zak_small_grid():
    with pytest.raises(DomainError):
        zak_phase(0.3, Nk=8)


def test_zak_gap_closing():
    with pytest.raises(NumericalError):
        zak_phase(0.5, Nk=64)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(0.05, 0.95).filter(lambda x: abs(x - 0.5) > 0.05), seed=st.integers(0, 1000))
def test_zak_invariant_under_orbital_phase_and_rescaling(s, seed):
    """A fixed orbital phase, a positive k-dependent scale and an energy shift leave ν unchanged."""
    rng = np.random.default_rng(seed)
    base = ssh_bloch(s)
    g = np.diag([1.0, np.exp(1j * rng.uniform(0, 2 * np.pi))])
    a, b, c = rng.uniform(0.5, 2.0), rng.uniform(0, 0.4), rng.normal()

    def h(k):
        return (a + b * np.cos(k)) * (g @ base(k) @ g.conj()) + c * np.sin(k) * np.eye(2)
    assert zak_phase(h) == zak_phase(s)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.7, 0.9])
def test_zak_agrees_with_twist_index(s):
    spec = build_ssh(16, s)
    assert z2_index(solve(spec), spec).index == zak_phase(s)


def test_bloch_from_spec_needs_translation():
    with pytest.raises(DomainError):
        bloch_from_spec(add_disorder(build_ssh(8, 0.3), 1, 0.1, 0.0))
    h = bloch_from_spec(build_ssh(8, 0.3))
    assert np.allclose(h(0.7), ssh_bloch(0.3)(0.7))


def test_zak_table(tmp_path):
    rows = zak_table([0.25, 0.75], path=tmp_path / "zak.csv")
    assert rows == [(0.25, 0), (0.75, 1)]
    assert (tmp_path / "zak.csv").exists()
