"""Twist (flux-insertion) operators and the Z2 index built from them.

A twist operator is diagonal in the occupation basis,

    U |n> = exp(i φ_n) |n>,   φ_n = Σ_j θ_j n_j + offset,

where the per-site angles ``θ_j`` come from a ramp profile ``θ(x)`` that
winds once from 0 to 2π.  Cell conventions give both sites of a unit cell
the angle of the cell and subtract the cell's reference charge, so phases
of cells sitting at 2π are exactly trivial.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, SymmetryError
from .fock import FockBasis, popcount
from .models import ModelSpec, validate_symmetry
from .solver import GroundStateResult, solve

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
REALITY_TOL = 1e-9
MAGNITUDE_TOL = 1e-6

CONVENTIONS = ("cellA", "cellB_dual", "bond_centered", "site_centered", "spin_up_cell")
CELL_CONVENTIONS = ("cellA", "cellB_dual", "spin_up_cell")
REQUIRED_SYMMETRY = {
    "cellA": ("phg", "ph"),
    "cellB_dual": ("phg", "ph"),
    "spin_up_cell": ("phg", "ph"),
    "bond_centered": ("bond_inversion",),
    "site_centered": ("site_inversion",),
}


@dataclass(frozen=True)
class TwistProfile:
    """Monotone ramp from 0 at ``x0`` to 2π at ``x1 = x0 + ell - 2 r0``."""

    x0: float
    ell: float
    r0: int = 1
    shape: str = "linear"

    @property
    def x1(self) -> float:
        return self.x0 + self.ell - 2 * self.r0

    @property
    def width(self) -> float:
        return self.ell - 2 * self.r0

    @property
    def center(self) -> float:
        return 0.5 * (self.x0 + self.x1)

    @property
    def gamma(self) -> float:
        if self.shape == "linear":
            return TWO_PI / self.width
        return np.pi ** 2 / self.width

    def theta(self, x) -> np.ndarray:
        t = np.clip((np.asarray(x, dtype=float) - self.x0) / self.width, 0.0, 1.0)
        if self.shape == "linear":
            val = TWO_PI * t
        else:
            val = np.pi * (1.0 - np.cos(np.pi * t))
        # pin the plateaus to exact values so 2π cells drop out exactly
        val = np.where(t >= 1.0, TWO_PI, np.where(t <= 0.0, 0.0, val))
        return val

    def shifted(self, R: float) -> "TwistProfile":
        return TwistProfile(self.x0 + R, self.ell, self.r0, self.shape)

    def summary(self) -> dict:
        return {"x0": self.x0, "ell": self.ell, "r0": self.r0, "shape": self.shape,
                "x1": self.x1, "gamma": self.gamma}


@dataclass(frozen=True)
class CutProfile:
    """Profile pulled apart at ``cut``: ``θ(x+R)`` right of the cut, ``θ(x-R)`` left of it."""

    base: TwistProfile
    cut: int
    R: float

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @property
    def ell(self) -> float:
        return self.base.ell

    @property
    def center(self) -> float:
        return float(self.cut)

    def theta(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.cut, self.base.theta(x + self.R), self.base.theta(x - self.R))

    def summary(self) -> dict:
        d = self.base.summary()
        d.update({"cut": self.cut, "R": self.R})
        return d


def make_profile(x0: float, ell: float, shape: str = "linear", r0: int = 1,
                 L: Optional[int] = None, boundary: str = "ring") -> TwistProfile:
    """Build a ramp profile; with ``L`` given, check that it fits the chain.

    On a ring the window may sit anywhere but must leave part of the ring
    untwisted (``ell < L``).  On open chains the ramp keeps a margin of
    ``2 r0`` from both ends.
    """
    if shape not in ("linear", "smoothstep"):
        raise DomainError(f"unknown profile shape {shape!r}")
    if ell - 2 * r0 <= 0:
        raise DomainError(f"window length {ell} too short for range {r0}")
    prof = TwistProfile(float(x0), float(ell), int(r0), shape)
    if L is not None:
        if boundary == "ring":
            if ell >= L:
                raise DomainError(f"window length {ell} does not fit a ring of {L} sites")
        elif prof.x0 < 2 * r0 or prof.x1 > L - 1 - 2 * r0:
            raise DomainError(f"ramp [{prof.x0}, {prof.x1}] leaves less than {2 * r0} sites of margin")
    return prof


def default_profile(spec: ModelSpec, convention: str = "cellA", shape: str = "linear",
                    ell: Optional[float] = None) -> TwistProfile:
    """Widest admissible ramp for ``spec``.

    Rings: ``ell = L - 1`` centered at ``L/4`` (``L/2`` for inversion
    conventions, whose ramp must be antisymmetric about the inversion
    center).  Open chains: centered, with the ``2 r0`` margins.
    """
    L, r0 = spec.L, spec.r0
    inversion = convention in ("bond_centered", "site_centered")
    if spec.is_ring:
        ell = L - 1 if ell is None else ell
        center = L / 2 if inversion else L / 4
    else:
        center = L / 2 if inversion else (L - 1) / 2
        max_w = 2 * min(center - 2 * r0, L - 1 - 2 * r0 - center)
        ell = max_w + 2 * r0 if ell is None else ell
    w = ell - 2 * r0
    return make_profile(center - w / 2, ell, shape, r0, L, "ring" if spec.is_ring else "open")


@dataclass(frozen=True, eq=False)
class TwistOperator:
    convention: str
    profile: object
    L: int
    spinful: bool
    site_angles: np.ndarray
    offset: float
    phases: np.ndarray
    basis: FockBasis

    @property
    def diagonal(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def phases_for(self, words: np.ndarray) -> np.ndarray:
        """Phases for arbitrary occupation words of the twisted species."""
        words = np.asarray(words, dtype=np.int64)
        occ = (words[:, None] >> np.arange(self.L)) & 1
        return occ @ self.site_angles + self.offset


def _lift(x: np.ndarray, center: float, L: int, ring: bool) -> np.ndarray:
    if not ring:
        return x
    return center + np.mod(x - center + L / 2, L) - L / 2


def site_angles(profile, convention: str, L: int, ring: bool = True) -> Tuple[np.ndarray, float]:
    """Per-site angles and constant offset of a twist convention.

    Angles equal to 2π are replaced by 0, which leaves the operator
    unchanged because cell charges and occupations are integers.
    """
    if convention not in CONVENTIONS:
        raise DomainError(f"unknown twist convention {convention!r}")
    sites = np.arange(L, dtype=float)
    angles = np.zeros(L)
    offset = 0.0
    if convention in CELL_CONVENTIONS:
        if L % 2:
            raise DomainError("cell conventions need an even number of sites")
        p = np.arange(0, L, 2)
        th = profile.theta(_lift(p.astype(float), profile.center, L, ring))
        th = np.where(th >= TWO_PI, 0.0, th)
        if convention == "cellB_dual":
            angles[p] = th
            left = p - 1
            if ring:
                angles[left % L] = th
            else:
                # the first dual cell (-1, 0) is cut by the open edge
                angles[left[1:]] = th[1:]
        else:
            angles[p] = th
            angles[p + 1] = th
        offset = -float(th.sum())
    else:
        x = sites + 0.5 if convention == "bond_centered" else sites
        th = profile.theta(_lift(x, profile.center, L, ring))
        angles = np.where(th >= TWO_PI, 0.0, th)
    return angles, offset


def build_twist(profile, convention: str, basis: FockBasis, ring: bool = True) -> TwistOperator:
    """Diagonal phases of the twist operator on every state of ``basis``.

    On spinful bases only the up species is twisted; ``cellA`` is spelled
    ``spin_up_cell`` there.
    """
    if convention == "spin_up_cell" and not basis.spinful:
        raise DomainError("spin_up_cell needs a spinful basis")
    if convention == "cellA" and basis.spinful:
        raise DomainError("use spin_up_cell for spinful bases")
    angles, offset = site_angles(profile, convention, basis.L, ring)
    occ = basis.occupations()
    phases = occ @ angles + offset
    return TwistOperator(convention, profile, basis.L, basis.spinful, angles, offset, phases, basis)


def twist_for(gs: GroundStateResult, profile, convention: str) -> TwistOperator:
    return build_twist(profile, convention, gs.basis, ring=gs.spec.is_ring)


def expectation(gs: GroundStateResult, U: TwistOperator) -> complex:
    if not gs.basis.same_space(U.basis):
        raise DomainError("ground state and twist operator live in different sectors")
    w = np.abs(gs.vector) ** 2
    return complex(np.sum(w * np.exp(1j * U.phases)))


def lsm_bound(gs: GroundStateResult, spec: Optional[ModelSpec], U: TwistOperator) -> Tuple[float, float]:
    """``(<U† H U> - E0, t0 γ² ℓ)`` for the twisted ground state."""
    if not gs.basis.same_space(U.basis):
        raise DomainError("ground state and twist operator live in different sectors")
    spec = gs.spec if spec is None else spec
    w = np.exp(1j * U.phases) * gs.vector
    Hw = gs.hamiltonian.matrix @ w
    lhs = float(np.real(np.vdot(w, Hw))) - gs.E0
    rhs = spec.t0 * U.profile.gamma ** 2 * U.profile.ell
    return lhs, float(rhs)


@dataclass
class IndexReport:
    expectation: complex
    imag_residual: float
    index: Optional[int]
    convention: str
    profile: dict
    bound_lhs: float
    bound_rhs: float
    gap: float
    E0: float
    spec_hash: str = ""
    reason: str = ""
    warnings: List[str] = field(default_factory=list)
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.index is not None

    def to_dict(self) -> dict:
        return {
            "spec_hash": self.spec_hash,
            "convention": self.convention,
            "profile": self.profile,
            "re": self.expectation.real,
            "im": self.expectation.imag,
            "imag_residual": self.imag_residual,
            "index": self.index,
            "reason": self.reason,
            "gap": self.gap,
            "E0": self.E0,
            "bound_lhs": self.bound_lhs,
            "bound_rhs": self.bound_rhs,
            "warnings": list(self.warnings),
            **({"extra": self.extra} if self.extra else {}),
        }

    def csv_row(self) -> list:
        p = self.profile
        return [self.spec_hash, self.convention, p.get("x0"), p.get("ell"), p.get("shape"),
                self.expectation.real, self.expectation.imag,
                "" if self.index is None else self.index, self.bound_lhs, self.bound_rhs]


INDEX_CSV_HEADER = ["spec_hash", "convention", "x0", "ell", "shape", "re", "im", "index", "bound_lhs", "bound_rhs"]


def check_convention_symmetry(spec: ModelSpec, convention: str) -> None:
    tags = REQUIRED_SYMMETRY[convention]
    if all(validate_symmetry(spec, t) for t in tags):
        raise SymmetryError(f"{convention} twist needs one of {tags}; spec satisfies none")


def z2_index(gs: GroundStateResult, spec: Optional[ModelSpec] = None, profile=None, convention: str = "cellA",
             reality_tol: float = REALITY_TOL, magnitude_tol: float = MAGNITUDE_TOL,
             check_symmetry: bool = True) -> IndexReport:
    """Index 0/1 from the sign of the real twist expectation, or undefined."""
    spec = gs.spec if spec is None else spec
    if profile is None:
        profile = default_profile(spec, convention)
    if check_symmetry:
        check_convention_symmetry(spec, convention)
    U = twist_for(gs, profile, convention)
    z = expectation(gs, U)
    lhs, rhs = lsm_bound(gs, spec, U)
    warnings: List[str] = []
    t0 = spec.t0
    if t0 > 0 and profile.gamma ** 2 * profile.ell >= gs.gap / t0:
        warnings.append(
            f"gamma^2 ell = {profile.gamma ** 2 * profile.ell:.4g} >= gap/t0 = {gs.gap / t0:.4g}; "
            "sign not guaranteed by the gap condition"
        )
        log.info("%s", warnings[-1])
    index: Optional[int] = None
    reason = ""
    if gs.degenerate:
        reason = f"degenerate ground state (gap {gs.gap:.3e})"
    elif abs(z.imag) > reality_tol:
        reason = f"expectation not real (|Im| = {abs(z.imag):.3e})"
    elif abs(z.real) < magnitude_tol:
        reason = f"|Re<U>| = {abs(z.real):.3e} below magnitude tolerance"
    else:
        index = 0 if z.real > 0 else 1
    summary = profile.summary() if hasattr(profile, "summary") else {}
    return IndexReport(z, abs(z.imag), index, convention, summary, lhs, rhs, gs.gap, gs.E0,
                       spec.spec_hash(), reason, warnings)


@dataclass
class DualityResult:
    index: Optional[int]
    dual_index: Optional[int]
    total: Optional[int]
    primary: IndexReport
    dual: IndexReport

    def as_tuple(self):
        return self.index, self.dual_index, self.total


def duality_check(gs: GroundStateResult, spec: Optional[ModelSpec] = None, profile=None) -> DualityResult:
    """Indices under both unit-cell groupings and their sum."""
    spec = gs.spec if spec is None else spec
    primary_conv = "spin_up_cell" if spec.spinful else "cellA"
    if profile is None:
        profile = default_profile(spec, primary_conv)
    a = z2_index(gs, spec, profile, primary_conv)
    b = z2_index(gs, spec, profile, "cellB_dual")
    total = None if a.index is None or b.index is None else a.index + b.index
    return DualityResult(a.index, b.index, total, a, b)


def index_of_spec(spec: ModelSpec, convention: str = "cellA", profile=None, **solver_kw) -> IndexReport:
    gs = solve(spec, **solver_kw)
    return z2_index(gs, spec, profile, convention)


# -- edge modes ----------------------------------------------------------

@dataclass
class EdgeSearchResult:
    crossing: bool
    R: Optional[float]
    profile: Optional[dict]
    expectation: Optional[complex]
    residual: Optional[float]
    energy: Optional[float]
    bound: Optional[float]
    budget: float
    accepted: bool
    trace: List[Tuple[float, float]]

    def to_dict(self) -> dict:
        return {
            "crossing": self.crossing, "R": self.R, "profile": self.profile,
            "expectation": self.expectation, "residual": self.residual, "energy": self.energy,
            "bound": self.bound, "budget": self.budget, "accepted": self.accepted,
            "trace": [list(t) for t in self.trace],
        }


def edge_excitation_search(spec_half: ModelSpec, eps: float, R_grid: Optional[Sequence[float]] = None,
                           width: Optional[float] = None, shape: str = "linear",
                           gs: Optional[GroundStateResult] = None, convention: Optional[str] = None,
                           tol: float = 1e-10, max_bisect: int = 80) -> EdgeSearchResult:
    """Slide a twist ramp toward the open edge at site 0 and locate <U> = 0 on the real axis.

    The ramp starts in the bulk (``R = 0`` stretches it over the chain,
    ending at the last cell) and moves left in steps of one unit cell until it has left the
    chain, where ``U`` is the identity.  The first sign change of Re<U> is
    refined by bisection; the twisted state is an edge excitation whose
    energy is compared with ``eps``.
    """
    if spec_half.boundary not in ("half_chain", "open"):
        raise DomainError("edge search needs an open (half) chain")
    if gs is None:
        gs = solve(spec_half)
    convention = convention or ("spin_up_cell" if spec_half.spinful else "cellA")
    L, r0 = spec_half.L, spec_half.r0
    if width is None:
        width = float(L - 2)
    # the ramp ends at the last cell so the far edge sits on the 2π plateau
    base = TwistProfile(L - 2 - width, width + 2 * r0, r0, shape)
    if R_grid is None:
        R_grid = [-2.0 * i for i in range(int(np.ceil((base.x1 + 2) / 2)) + 1)]

    def re_at(R: float) -> Tuple[float, TwistOperator, complex]:
        U = build_twist(base.shifted(R), convention, gs.basis, ring=False)
        z = expectation(gs, U)
        return z.real, U, z

    trace = []
    prev = None
    bracket = None
    for R in R_grid:
        val, _, _ = re_at(R)
        trace.append((float(R), val))
        if prev is not None and np.sign(val) != np.sign(prev[1]) and val != prev[1]:
            bracket = (prev[0], float(R))
            break
        prev = (float(R), val)
    if bracket is None:
        return EdgeSearchResult(False, None, None, None, None, None, None, eps, False, trace)
    a, b = bracket
    fa = re_at(a)[0]
    for _ in range(max_bisect):
        m = 0.5 * (a + b)
        fm = re_at(m)[0]
        if abs(fm) < tol or b - a < 1e-13:
            break
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    R = 0.5 * (a + b) if abs(re_at(0.5 * (a + b))[0]) <= abs(re_at(m)[0]) else m
    _, U, z = re_at(R)
    lhs, rhs = lsm_bound(gs, spec_half, U)
    return EdgeSearchResult(True, float(R), base.shifted(R).summary(), z, abs(z), lhs, rhs, eps,
                            bool(lhs <= eps), trace)


# -- decoupled chains ----------------------------------------------------

def verify_cut(spec: ModelSpec) -> int:
    cut = spec.cut
    if cut is None:
        raise DomainError("spec has no cut")
    if cut % 2:
        raise DomainError(f"cut before site {cut} splits a unit cell")
    for (j, k), t in spec.hop.items():
        if t != 0 and min(j, k) < cut <= max(j, k):
            raise DomainError(f"hop ({j},{k}) crosses the cut at {cut}")
        if spec.is_ring and t != 0 and spec.diameter((j, k)) != abs(j - k):
            raise DomainError("ring seam still connects the two halves")
    for f in spec.flip_terms:
        if min(f.j, f.k) < cut <= max(f.j, f.k):
            raise DomainError("exchange term crosses the cut")
    return cut


def decoupled_index(spec_dec: ModelSpec, profile: Optional[TwistProfile] = None,
                    gs: Optional[GroundStateResult] = None, steps: int = 24) -> IndexReport:
    """Index of a chain with no hopping across its cut.

    The ramp is centered on the cut.  The report's ``extra['deformation']``
    follows <U> while the two halves of the ramp are pulled apart (the
    profile becomes discontinuous at the cut, allowed since nothing hops
    across it) until U is the identity.
    """
    cut = verify_cut(spec_dec)
    if gs is None:
        gs = solve(spec_dec)
    convention = "spin_up_cell" if spec_dec.spinful else "cellA"
    r0 = spec_dec.r0
    if profile is None:
        half = min(cut, spec_dec.L - cut) - 2 * r0
        w = max(2.0, 2.0 * half - 1.0)
        profile = make_profile(cut - w / 2, w + 2 * r0, "linear", r0)
    report = z2_index(gs, spec_dec, profile, convention)
    R_max = profile.width + 2
    path = []
    for R in np.linspace(0.0, R_max, steps + 1):
        prof = CutProfile(profile, cut, float(R))
        U = build_twist(prof, convention, gs.basis, ring=spec_dec.is_ring)
        z = expectation(gs, U)
        lhs, rhs = lsm_bound(gs, spec_dec, U)
        path.append({"R": float(R), "re": z.real, "im": z.imag, "bound_lhs": lhs})
    report.extra["deformation"] = path
    report.extra["cut"] = cut
    report.extra["path_positive"] = bool(all(p["re"] > 0 for p in path))
    return report
