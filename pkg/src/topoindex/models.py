"""Declarative Hamiltonian specifications and symmetry validation.

A :class:`ModelSpec` describes

    H = Σ_{j,k,σ} t_{jk} c†_{jσ} c_{kσ}
        + Σ_m v_m Π_{(j,σ)∈m} (n_{jσ} - 1/2)
        + Σ_f J_f (c†_{j↑}c_{j↓}c†_{k↓}c_{k↑} + h.c.)
        - μ N + const

on a finite window of ``L`` sites.  Interaction monomials are stored in
``(n - 1/2)`` form so particle-hole evenness is a syntactic property.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, SymmetryError
from .fock import DOWN, UP

BOUNDARIES = ("ring", "open", "half_chain", "decoupled")
SYMMETRY_TAGS = ("phg", "ph", "bond_inversion", "site_inversion", "none")

# tolerance used when deciding whether a coefficient is real / imaginary / zero
COEF_TOL = 1e-12

Factor = Tuple[int, Optional[int]]


@dataclass(frozen=True)
class InteractionTerm:
    """``coef * Π (n_{site,spin} - 1/2)`` over ``factors``."""

    coef: float
    factors: Tuple[Factor, ...]

    @property
    def degree(self) -> int:
        return len(self.factors)

    @property
    def sites(self) -> Tuple[int, ...]:
        return tuple(sorted({j for j, _ in self.factors}))


@dataclass(frozen=True)
class FlipTerm:
    """``coef * (c†_{j↑}c_{j↓}c†_{k↓}c_{k↑} + h.c.)``, the transverse exchange."""

    coef: float
    j: int
    k: int


@dataclass(frozen=True)
class ModelSpec:
    L: int
    boundary: str = "ring"
    spin: str = "spinless"
    hop: Dict[Tuple[int, int], complex] = field(default_factory=dict)
    int_terms: Tuple[InteractionTerm, ...] = ()
    flip_terms: Tuple[FlipTerm, ...] = ()
    mu: float = 0.0
    const: float = 0.0
    cut: Optional[int] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.spin not in ("spinless", "spinful"):
            raise DomainError(f"unknown spin structure {self.spin!r}")
        if self.boundary == "decoupled" and self.cut is None:
            raise DomainError("decoupled boundary needs a cut position")
        for (j, k), t in self.hop.items():
            if not (0 <= j < self.L and 0 <= k < self.L):
                raise DomainError(f"hop ({j},{k}) outside the chain")
            if abs(np.conj(t) - self.hop.get((k, j), 0.0)) > COEF_TOL:
                raise DomainError(f"hop ({j},{k}) violates t_jk = conj(t_kj)")
        for term in self.int_terms:
            for j, s in term.factors:
                if not 0 <= j < self.L:
                    raise DomainError(f"interaction factor on site {j} outside the chain")
                if (s is None) != (self.spin == "spinless"):
                    raise DomainError("interaction factor spin does not match the model")
        if self.flip_terms and self.spin != "spinful":
            raise DomainError("exchange terms need a spinful model")

    @property
    def spinful(self) -> bool:
        return self.spin == "spinful"

    @property
    def is_ring(self) -> bool:
        return self.boundary == "ring"

    def distance(self, j: int, k: int) -> int:
        d = abs(j - k)
        return min(d, self.L - d) if self.is_ring else d

    def crosses_cut(self, j: int, k: int) -> bool:
        if self.cut is None:
            return False
        lo, hi = min(j, k), max(j, k)
        return lo < self.cut <= hi

    def term_supports(self) -> List[Tuple[int, ...]]:
        sups = [(j, k) for (j, k), t in self.hop.items() if t != 0]
        sups += [t.sites for t in self.int_terms]
        sups += [(f.j, f.k) for f in self.flip_terms]
        return sups

    def diameter(self, sites: Sequence[int]) -> int:
        sites = sorted(sites)
        if len(sites) < 2:
            return 0
        if not self.is_ring:
            return sites[-1] - sites[0]
        # smallest arc covering all sites on the ring
        gaps = [sites[i + 1] - sites[i] for i in range(len(sites) - 1)]
        gaps.append(sites[0] + self.L - sites[-1])
        return self.L - max(gaps)

    @property
    def r0(self) -> int:
        return max([1] + [self.diameter(s) for s in self.term_supports()])

    @property
    def t0(self) -> float:
        """max_j Σ_{k≠j} |t_jk| (d(j,k)+1)², the short-range hopping constant."""
        rows = np.zeros(self.L)
        for (j, k), t in self.hop.items():
            if j != k:
                rows[j] += abs(t) * (self.distance(j, k) + 1) ** 2
        return float(rows.max()) if self.L else 0.0

    @property
    def v0(self) -> float:
        """Upper bound on the norm of the interaction attached to any site."""
        rows = np.zeros(self.L)
        for term in self.int_terms:
            j = term.sites[0]
            rows[j] += abs(term.coef) * 0.5 ** term.degree
        for f in self.flip_terms:
            rows[min(f.j, f.k)] += 2 * abs(f.coef)
        return float(rows.max()) if self.L else 0.0

    @property
    def is_quadratic(self) -> bool:
        return all(t.degree <= 1 for t in self.int_terms) and not self.flip_terms

    def hop_matrix(self) -> np.ndarray:
        h = np.zeros((self.L, self.L), dtype=complex)
        for (j, k), t in self.hop.items():
            h[j, k] += t
        return h

    def half_filling(self) -> Tuple[int, ...]:
        if self.L % 2:
            raise DomainError("half filling needs an even number of sites")
        return (self.L // 2, self.L // 2) if self.spinful else (self.L // 2,)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "boundary": self.boundary,
            "spin": self.spin,
            "cut": self.cut,
            "mu": self.mu,
            "const": self.const,
            "hop": [[j, k, complex(t).real, complex(t).imag] for (j, k), t in sorted(self.hop.items())],
            "int_terms": [
                {"coef": t.coef, "factors": [[j, _spin_label(s)] for j, s in t.factors]}
                for t in self.int_terms
            ],
            "flip_terms": [[f.coef, f.j, f.k] for f in self.flip_terms],
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        known = {"L", "boundary", "spin", "cut", "mu", "const", "hop", "int_terms", "flip_terms", "meta"}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown ModelSpec keys: {sorted(extra)}")
        hop = {}
        for j, k, re, im in d.get("hop", []):
            hop[(int(j), int(k))] = complex(re, im) if im else float(re)
        terms = tuple(
            InteractionTerm(float(t["coef"]), tuple((int(j), _spin_from_label(s)) for j, s in t["factors"]))
            for t in d.get("int_terms", [])
        )
        flips = tuple(FlipTerm(float(c), int(j), int(k)) for c, j, k in d.get("flip_terms", []))
        return cls(
            L=int(d["L"]),
            boundary=d.get("boundary", "ring"),
            spin=d.get("spin", "spinless"),
            hop=hop,
            int_terms=terms,
            flip_terms=flips,
            mu=float(d.get("mu", 0.0)),
            const=float(d.get("const", 0.0)),
            cut=d.get("cut"),
            meta=dict(d.get("meta", {})),
        )

    def spec_hash(self) -> str:
        from .io import dumps

        payload = self.to_dict()
        payload.pop("meta")
        return hashlib.sha256(dumps(payload).encode()).hexdigest()[:16]


def _spin_label(s):
    return {None: None, UP: "up", DOWN: "dn"}[s]


def _spin_from_label(s):
    return {None: None, "up": UP, "dn": DOWN, 0: UP, 1: DOWN}[s]


# -- builders ------------------------------------------------------------

def _set_bond(hop: dict, j: int, k: int, t: complex) -> None:
    if t == 0:
        return
    hop[(j, k)] = hop.get((j, k), 0.0) + t
    hop[(k, j)] = hop.get((k, j), 0.0) + t.conjugate()


def _check_boundary(L: int, boundary: str, cut: Optional[int]) -> None:
    if boundary not in BOUNDARIES:
        raise DomainError(f"unknown boundary {boundary!r}")
    if boundary == "decoupled":
        if cut is None or cut % 2 or not 0 < cut < L:
            raise DomainError("decoupled chains need an even cut position inside the chain")


def _nn_bonds(L: int, boundary: str, cut: Optional[int] = None, include_cut: bool = False):
    bonds = [(j, j + 1) for j in range(L - 1)]
    if boundary == "ring" and L > 2:
        bonds.append((L - 1, 0))
    if boundary == "decoupled" and not include_cut:
        bonds = [b for b in bonds if not (min(b) < cut <= max(b))]
    return bonds


def _ssh_hops(L: int, intra: float, inter: float, boundary: str, cut: Optional[int]) -> dict:
    hop: dict = {}
    for j, k in _nn_bonds(L, boundary, cut):
        a = min(j, k) if abs(j - k) == 1 else max(j, k)
        _set_bond(hop, j, k, intra if a % 2 == 0 else inter)
    return hop


def _hubbard_terms(L: int, U: float):
    terms = tuple(InteractionTerm(U, ((k, UP), (k, DOWN))) for k in range(L)) if U else ()
    # U n↑n↓ = U(n↑-½)(n↓-½) + (U/2) N - U/4
    return terms, -U / 2.0, -U * L / 4.0


def build_ssh(L: int, s: float, boundary: str = "ring", cut: Optional[int] = None) -> ModelSpec:
    """SSH chain: intra-cell bonds (2j, 2j+1) carry 1-s, inter-cell bonds s."""
    if L % 2:
        raise DomainError(f"SSH chains need an even number of sites, got {L}")
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"coupling s={s} outside [0, 1]")
    _check_boundary(L, boundary, cut)
    hop = _ssh_hops(L, 1.0 - s, s, boundary, cut)
    return ModelSpec(L, boundary, "spinless", hop, cut=cut, meta={"builder": "ssh", "s": s})


def build_hubbard_ssh(L: int, s: float, U: float, boundary: str = "ring", cut: Optional[int] = None) -> ModelSpec:
    if L % 2:
        raise DomainError(f"SSH chains need an even number of sites, got {L}")
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"coupling s={s} outside [0, 1]")
    _check_boundary(L, boundary, cut)
    hop = _ssh_hops(L, 1.0 - s, s, boundary, cut)
    terms, mu, const = _hubbard_terms(L, U)
    return ModelSpec(L, boundary, "spinful", hop, terms, mu=mu, const=const, cut=cut,
                     meta={"builder": "hubbard_ssh", "s": s, "U": U})


def exchange_terms(j: int, k: int, J: float):
    """-J S_j·S_k split into density monomials and one transverse flip term."""
    if J == 0:
        return (), ()
    # (n_j↑ - n_j↓)(n_k↑ - n_k↓) with n↑ - n↓ = (n↑-½) - (n↓-½)
    dens = []
    for sj, a in ((UP, 1), (DOWN, -1)):
        for sk, b in ((UP, 1), (DOWN, -1)):
            dens.append(InteractionTerm(-J / 4.0 * a * b, ((j, sj), (k, sk))))
    return tuple(dens), (FlipTerm(-J / 2.0, j, k),)


def build_extended_hubbard(L: int, U: float, J: float, boundary: str = "ring") -> ModelSpec:
    """Inter-cell hopping, on-site U and ferromagnetic intra-cell exchange -J S·S."""
    if L % 2:
        raise DomainError(f"need an even number of sites, got {L}")
    _check_boundary(L, boundary, None)
    hop = _ssh_hops(L, 0.0, 1.0, boundary, None)
    terms, mu, const = _hubbard_terms(L, U)
    flips: tuple = ()
    for c in range(L // 2):
        d, f = exchange_terms(2 * c, 2 * c + 1, J)
        terms += d
        flips += f
    return ModelSpec(L, boundary, "spinful", hop, terms, flips, mu=mu, const=const,
                     meta={"builder": "extended_hubbard", "U": U, "J": J})


def build_atomic(L: int, potential: float, hop: float = 0.0, boundary: str = "ring") -> ModelSpec:
    """Alternating on-site potential ``potential * (-1)^j (n_j - 1/2)`` plus uniform hopping.

    ``potential < 0`` favours the even sublattice, ``> 0`` the odd one.
    """
    if L % 2:
        raise DomainError(f"need an even number of sites, got {L}")
    _check_boundary(L, boundary, None)
    h: dict = {}
    for j, k in _nn_bonds(L, boundary):
        _set_bond(h, j, k, hop)
    terms = tuple(InteractionTerm(potential * (-1) ** j, ((j, None),)) for j in range(L))
    return ModelSpec(L, boundary, "spinless", h, terms, meta={"builder": "atomic", "potential": potential, "hop": hop})


def build_rice_mele(L: int, phase: float, hop: float = 1.0, dimerization: float = 0.5,
                    stagger: float = 1.0, boundary: str = "ring") -> ModelSpec:
    """Rice-Mele chain at pumping angle ``phase``; only U(1) symmetric in general.

    Intra-cell hopping ``hop + dimerization cos(phase)``, inter-cell
    ``hop - dimerization cos(phase)``, on-site ``± stagger sin(phase)`` on
    the even/odd sublattice.
    """
    if L % 2:
        raise DomainError(f"need an even number of sites, got {L}")
    _check_boundary(L, boundary, None)
    c, s = np.cos(phase), np.sin(phase)
    h = _ssh_hops(L, hop + dimerization * c, hop - dimerization * c, boundary, None)
    terms = tuple(InteractionTerm(stagger * s * (-1) ** j, ((j, None),)) for j in range(L)) if s else ()
    return ModelSpec(L, boundary, "spinless", h, terms,
                     meta={"builder": "rice_mele", "phase": float(phase), "hop": hop,
                           "dimerization": dimerization, "stagger": stagger})


# -- symmetry ------------------------------------------------------------

def _inversion_map(spec: ModelSpec, tag: str):
    L = spec.L
    if tag == "bond_inversion":
        return lambda j: L - 1 - j
    return lambda j: (L - j) % L


def _canonical_terms(terms, m=lambda j: j) -> Dict[tuple, float]:
    out: Dict[tuple, float] = {}
    for t in terms:
        key = tuple(sorted((m(j), -1 if s is None else s) for j, s in t.factors))
        out[key] = out.get(key, 0.0) + t.coef
    return out


def _dict_close(a: dict, b: dict, tol: float) -> List[tuple]:
    bad = []
    for key in set(a) | set(b):
        if abs(a.get(key, 0.0) - b.get(key, 0.0)) > tol:
            bad.append(key)
    return sorted(bad, key=repr)


def validate_symmetry(spec: ModelSpec, tag: str, tol: float = COEF_TOL) -> List[str]:
    """List of violations of ``tag``; an empty list means the spec passes.

    A nonzero chemical potential is accepted for ``phg``/``ph``: in the
    half-filled sector, which the transformation maps onto itself, ``-μN``
    is a constant.
    """
    if tag not in SYMMETRY_TAGS:
        raise DomainError(f"unknown symmetry tag {tag!r}")
    out: List[str] = []
    if tag == "none":
        return out
    if tag in ("phg", "ph"):
        for (j, k), t in sorted(spec.hop.items()):
            t = complex(t)
            if j == k:
                if abs(t) > tol:
                    out.append(f"on-site term t[{j},{j}]={t} must vanish")
                continue
            odd = (j - k) % 2 == 1
            if tag == "phg" and odd and abs(t.imag) > tol:
                out.append(f"t[{j},{k}]={t} must be real (odd distance)")
            elif (tag == "ph" or not odd) and abs(t.real) > tol:
                out.append(f"t[{j},{k}]={t} must be pure imaginary")
        for term in spec.int_terms:
            if term.degree % 2 and abs(term.coef) > tol:
                out.append(f"interaction {term} is odd in (n - 1/2)")
        return out
    m = _inversion_map(spec, tag)
    for (j, k), t in sorted(spec.hop.items()):
        t2 = spec.hop.get((m(j), m(k)), 0.0)
        if abs(t - t2) > tol:
            out.append(f"t[{j},{k}]={t} differs from mirrored t[{m(j)},{m(k)}]={t2}")
    a = _canonical_terms(spec.int_terms)
    b = _canonical_terms(spec.int_terms, m)
    for key in _dict_close(a, b, tol):
        out.append(f"interaction on {key} not inversion symmetric")
    fa: Dict[tuple, float] = {}
    fb: Dict[tuple, float] = {}
    for f in spec.flip_terms:
        fa[tuple(sorted((f.j, f.k)))] = fa.get(tuple(sorted((f.j, f.k))), 0.0) + f.coef
        key = tuple(sorted((m(f.j), m(f.k))))
        fb[key] = fb.get(key, 0.0) + f.coef
    for key in _dict_close(fa, fb, tol):
        out.append(f"exchange on {key} not inversion symmetric")
    return out


def detect_symmetry(spec: ModelSpec) -> List[str]:
    return [tag for tag in SYMMETRY_TAGS[:-1] if not validate_symmetry(spec, tag)]


# -- disorder and restrictions -------------------------------------------

def _density_pair(spec: ModelSpec, j: int, k: int, coef: float) -> Tuple[InteractionTerm, ...]:
    if not spec.spinful:
        return (InteractionTerm(coef, ((j, None), (k, None))),)
    # (n_j - 1)(n_k - 1) with n = n↑ + n↓ and n - 1 = (n↑-½) + (n↓-½)
    return tuple(InteractionTerm(coef, ((j, a), (k, b))) for a in (UP, DOWN) for b in (UP, DOWN))


def add_disorder(spec: ModelSpec, rng_seed: int, hop_amplitude: float, int_amplitude: float,
                 tag: str = "phg") -> ModelSpec:
    """Random nearest-neighbour hopping and density-density disorder.

    Hopping deviates are real and uniform on ``[-hop_amplitude,
    hop_amplitude]``; couplings ``(n_j - 1/2)(n_k - 1/2)`` are uniform on
    ``[-int_amplitude, int_amplitude]``.  Inversion tags get mirror-symmetric
    deviates.  Deterministic in ``rng_seed``.
    """
    if hop_amplitude < 0 or int_amplitude < 0:
        raise DomainError("disorder amplitudes must be non-negative")
    if hop_amplitude == 0 and int_amplitude == 0:
        return spec
    if validate_symmetry(spec, tag):
        raise SymmetryError(f"base spec does not satisfy {tag}")
    if tag == "ph" and hop_amplitude > 0:
        raise SymmetryError("real hopping disorder breaks particle-hole symmetry")
    rng = np.random.default_rng(rng_seed)
    hop_bonds = _nn_bonds(spec.L, spec.boundary, spec.cut)
    int_bonds = _nn_bonds(spec.L, spec.boundary, spec.cut, include_cut=True)
    dh = rng.uniform(-hop_amplitude, hop_amplitude, len(hop_bonds))
    dv = rng.uniform(-int_amplitude, int_amplitude, len(int_bonds))
    if tag in ("bond_inversion", "site_inversion"):
        m = _inversion_map(spec, tag)
        dh = _symmetrize(hop_bonds, dh, m)
        dv = _symmetrize(int_bonds, dv, m)
    hop = dict(spec.hop)
    for (j, k), d in zip(hop_bonds, dh):
        if d:
            _set_bond(hop, j, k, float(d))
    terms = list(spec.int_terms)
    for (j, k), d in zip(int_bonds, dv):
        if d:
            terms.extend(_density_pair(spec, j, k, float(d)))
    meta = dict(spec.meta)
    meta["disorder"] = {"seed": int(rng_seed), "hop": hop_amplitude, "int": int_amplitude, "tag": tag}
    out = replace(spec, hop=hop, int_terms=tuple(terms), meta=meta)
    bad = validate_symmetry(out, tag)
    if bad:
        raise SymmetryError(f"disorder broke {tag}: {bad[:3]}")
    return out


def _symmetrize(bonds, values, m):
    index = {tuple(sorted(b)): i for i, b in enumerate(bonds)}
    out = np.array(values, dtype=float)
    for i, (j, k) in enumerate(bonds):
        partner = index.get(tuple(sorted((m(j), m(k)))))
        if partner is not None:
            out[i] = 0.5 * (values[i] + values[partner])
    return out


def restrict_half_chain(spec: ModelSpec, delta: Optional[ModelSpec] = None, cut: Optional[int] = None,
                        tag: Optional[str] = None) -> ModelSpec:
    """Open the chain at site 0 (or additionally cut it before site ``cut``).

    Terms whose support wraps around the ring seam are dropped; with
    ``cut`` every hop across the cut is dropped too while interactions
    across it are kept.  ``delta`` holds boundary terms merged into the
    result and must respect ``tag`` (default: every symmetry the parent
    satisfies).
    """
    if spec.boundary not in ("ring", "open"):
        raise DomainError(f"cannot restrict a {spec.boundary} chain")
    L = spec.L
    if cut is not None and (cut % 2 or not 0 < cut < L):
        raise DomainError("cuts must sit before an even site inside the chain (unit cells intact)")
    wraps = (lambda sites: spec.is_ring and max(sites) - min(sites) > spec.diameter(sites))
    hop = {}
    for (j, k), t in spec.hop.items():
        if wraps((j, k)):
            continue
        if cut is not None and min(j, k) < cut <= max(j, k):
            continue
        hop[(j, k)] = t
    terms = tuple(t for t in spec.int_terms if not wraps(t.sites))
    flips = tuple(f for f in spec.flip_terms if not wraps((f.j, f.k))
                  and not (cut is not None and min(f.j, f.k) < cut <= max(f.j, f.k)))
    mu, const = spec.mu, spec.const
    tags = [tag] if tag else detect_symmetry(spec)
    if delta is not None:
        if delta.L != L or delta.spin != spec.spin:
            raise DomainError("edge terms must live on the same chain")
        for key, t in delta.hop.items():
            hop[key] = hop.get(key, 0.0) + t
        terms += delta.int_terms
        flips += delta.flip_terms
        mu += delta.mu
        const += delta.const
    meta = dict(spec.meta)
    meta["restricted"] = {"cut": cut, "edge_terms": delta is not None}
    out = ModelSpec(L, "decoupled" if cut is not None else "half_chain", spec.spin, hop, terms, flips,
                    mu, const, cut, meta)
    if delta is not None:
        for tg in tags:
            bad = validate_symmetry(out, tg)
            if bad:
                raise SymmetryError(f"edge terms break {tg}: {bad[:3]}")
    return out


def spec_from_json(text: str) -> ModelSpec:
    return ModelSpec.from_dict(json.loads(text))
