import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import FullFock
from topoindex.errors import DomainError, SymmetryError
from topoindex.fock import DOWN, UP
from topoindex.models import (FlipTerm, InteractionTerm, ModelSpec, add_disorder, build_atomic,
                              build_extended_hubbard, build_hubbard_ssh, build_rice_mele, build_ssh,
                              detect_symmetry, exchange_terms, restrict_half_chain, spec_from_json,
                              validate_symmetry)
from topoindex import io


def test_ssh_bonds():
    spec = build_ssh(8, 0.3)
    assert spec.hop[(0, 1)] == pytest.approx(0.7)
    assert spec.hop[(1, 2)] == pytest.approx(0.3)
    assert spec.hop[(7, 0)] == pytest.approx(0.3)
    assert spec.r0 == 1
    assert spec.t0 == pytest.approx(4 * (0.7 + 0.3))


def test_ssh_open_has_no_seam():
    spec = build_ssh(8, 0.3, boundary="open")
    assert (7, 0) not in spec.hop
    assert spec.t0 == pytest.approx(4.0)


@pytest.mark.parametrize("L,s", [(7, 0.3), (8, 1.5), (8, -0.1)])
def test_ssh_rejects_bad_parameters(L, s):
    with pytest.raises(DomainError):
        build_ssh(L, s)


def test_non_hermitian_hop_rejected():
    with pytest.raises(DomainError):
        ModelSpec(4, hop={(0, 1): 1.0, (1, 0): 2.0})


def test_flip_terms_need_spin():
    with pytest.raises(DomainError):
        ModelSpec(4, flip_terms=(FlipTerm(1.0, 0, 1),))


@pytest.mark.parametrize("s", [0.0, 0.3, 1.0])
def test_ssh_symmetries(s):
    spec = build_ssh(8, s)
    assert validate_symmetry(spec, "phg") == []
    assert validate_symmetry(spec, "bond_inversion") == []
    assert validate_symmetry(spec, "ph") != []


def test_rice_mele_breaks_phg_but_not_u1():
    spec = build_rice_mele(8, 0.7)
    assert validate_symmetry(spec, "phg") != []
    assert validate_symmetry(build_rice_mele(8, 0.0), "phg") == []


def test_atomic_symmetry():
    spec = build_atomic(12, -1.0)
    assert validate_symmetry(spec, "site_inversion") == []
    assert "phg" not in detect_symmetry(spec)


def test_hubbard_equals_unshifted_form():
    """U(n↑-½)(n↓-½) + shifts reproduces U n↑ n↓ in full Fock space."""
    spec = build_hubbard_ssh(2, 0.0, 3.0, boundary="open")
    ff = FullFock(2, spinful=True)
    H = ff.hamiltonian(spec)
    ref = sum(ff.cd(j, s) @ ff.an(k, s) for (j, k) in [(0, 1), (1, 0)] for s in (UP, DOWN))
    ref = ref + 3.0 * sum(ff.num(j, UP) @ ff.num(j, DOWN) for j in range(2))
    assert np.allclose(H, ref)


def test_exchange_is_heisenberg():
    """Density and flip terms add up to -J S_0·S_1 built from spin operators."""
    J = 1.7
    dens, flips = exchange_terms(0, 1, J)
    spec = ModelSpec(2, "open", "spinful", {}, dens, flips)
    ff = FullFock(2, spinful=True)

    def S(j):
        sp = ff.cd(j, UP) @ ff.an(j, DOWN)
        sz = 0.5 * (ff.num(j, UP) - ff.num(j, DOWN))
        return 0.5 * (sp + sp.T), -0.5j * (sp - sp.T), sz

    SS = sum(a @ b for a, b in zip(S(0), S(1)))
    assert np.allclose(ff.hamiltonian(spec), -J * SS)
    # singly occupied sector: triplet at -J/4, singlet at 3J/4
    w, _, _ = ff.sector_spectrum(spec, (1, 1))
    single = [e for e in w if abs(e) > 1e-12]
    assert sorted(np.round(single, 12)) == sorted(np.round([-J / 4, 3 * J / 4], 12))


def test_extended_hubbard_structure():
    spec = build_extended_hubbard(8, 4.0, 1.0)
    assert len(spec.flip_terms) == 4
    assert validate_symmetry(spec, "phg") == []
    assert spec.hop.get((0, 1), 0.0) == 0.0
    assert spec.hop[(1, 2)] == 1.0


def test_disorder_is_deterministic_and_symmetric():
    base = build_ssh(12, 0.2)
    a = add_disorder(base, 5, 0.2, 0.2)
    b = add_disorder(base, 5, 0.2, 0.2)
    c = add_disorder(base, 6, 0.2, 0.2)
    assert a.spec_hash() == b.spec_hash() != c.spec_hash()
    assert validate_symmetry(a, "phg") == []
    assert a.meta["disorder"]["seed"] == 5


def test_disorder_zero_amplitude_is_identity():
    base = build_ssh(8, 0.2)
    assert add_disorder(base, 1, 0.0, 0.0) is base


def test_disorder_inversion_tag():
    base = build_ssh(12, 0.3)
    spec = add_disorder(base, 2, 0.2, 0.1, tag="bond_inversion")
    assert validate_symmetry(spec, "bond_inversion") == []


def test_disorder_refuses_bad_base():
    with pytest.raises(SymmetryError):
        add_disorder(build_rice_mele(8, 0.5), 1, 0.1, 0.0)
    with pytest.raises(SymmetryError):
        add_disorder(build_ssh(8, 0.2), 1, 0.1, 0.0, tag="ph")


def test_spinful_disorder():
    spec = add_disorder(build_hubbard_ssh(6, 0.3, 2.0), 3, 0.1, 0.2)
    assert validate_symmetry(spec, "phg") == []


def test_half_chain_restriction():
    ring = build_ssh(8, 0.4)
    half = restrict_half_chain(ring)
    assert half.boundary == "half_chain"
    assert (7, 0) not in half.hop and (0, 7) not in half.hop
    assert len(half.hop) == len(ring.hop) - 2


def test_cut_restriction_keeps_interactions():
    ring = ModelSpec(8, "ring", "spinless", build_ssh(8, 0.4).hop,
                     (InteractionTerm(0.5, ((3, None), (4, None))),))
    dec = restrict_half_chain(ring, cut=4)
    assert dec.boundary == "decoupled" and dec.cut == 4
    assert (3, 4) not in dec.hop
    assert dec.int_terms == ring.int_terms
    with pytest.raises(DomainError):
        restrict_half_chain(ring, cut=3)


def test_edge_terms_must_respect_symmetry():
    ring = build_ssh(8, 0.4)
    bad = ModelSpec(8, "open", "spinless", {}, (InteractionTerm(0.3, ((0, None),)),))
    with pytest.raises(SymmetryError):
        restrict_half_chain(ring, delta=bad, tag="phg")
    ok = ModelSpec(8, "open", "spinless", {(0, 1): 0.1, (1, 0): 0.1})
    assert restrict_half_chain(ring, delta=ok, tag="phg").hop[(0, 1)] == pytest.approx(0.7)


@settings(max_examples=30, deadline=None)
@given(L=st.sampled_from([4, 6, 8]), s=st.floats(0, 1), seed=st.integers(0, 10_000),
       amp=st.floats(0, 0.5), spinful=st.booleans())
def test_serialization_round_trip(L, s, seed, amp, spinful):
    base = build_hubbard_ssh(L, s, 1.5) if spinful else build_ssh(L, s)
    spec = add_disorder(base, seed, amp, amp)
    text = io.dumps(spec.to_dict())
    back = spec_from_json(text)
    assert back.spec_hash() == spec.spec_hash()
    for key, t in spec.hop.items():
        assert back.hop[key] == t


def test_from_dict_rejects_unknown_keys():
    d = build_ssh(4, 0.2).to_dict()
    d["extra"] = 1
    with pytest.raises(DomainError):
        ModelSpec.from_dict(d)
