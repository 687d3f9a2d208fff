"""Parameter sweeps, disorder ensembles, winding numbers and edge-gap scaling."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, RefinementError, TopoIndexError
from .models import (ModelSpec, add_disorder, build_hubbard_ssh, build_rice_mele, build_ssh,
                     restrict_half_chain, validate_symmetry)
from .quadratic import correlation_matrix, slater_twist_expectation
from .solver import solve
from .twist import MAGNITUDE_TOL, default_profile, expectation, site_angles, twist_for, z2_index

log = logging.getLogger(__name__)

SWEEP_HEADER = ["s", "E0", "gap", "re", "im", "index", "error"]
ENSEMBLE_HEADER = ["seed", "gap", "re", "im", "index", "error"]


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get("TOPOINDEX_THREADS", "1") or 1)
    if threads < 1:
        raise DomainError(f"thread count must be positive, got {threads}")
    return threads


def _pmap(fn, items, threads: Optional[int] = None) -> list:
    """Ordered map over independent work items."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PathSpec:
    """A one-parameter family ``s -> ModelSpec`` sampled on ``grid``.

    ``symmetry`` names a tag every sampled spec must satisfy; None means
    only U(1) is assumed (winding mode).
    """

    family: Callable[[float], ModelSpec]
    grid: Tuple[float, ...]
    closed: bool = False
    symmetry: Optional[str] = None
    name: str = "custom"
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(s) for s in self.grid))
        if len(self.grid) < 2:
            raise DomainError("a path needs at least two grid points")

    def reversed(self) -> "PathSpec":
        lo, hi = self.grid[0], self.grid[-1]
        fam = self.family
        return PathSpec(lambda s: fam(lo + hi - s), self.grid, self.closed, self.symmetry,
                        self.name + "_reversed", dict(self.params))

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "grid": list(self.grid),
                "closed": self.closed, "symmetry": self.symmetry}


def ssh_path(L: int, grid: Sequence[float], boundary: str = "ring") -> PathSpec:
    return PathSpec(lambda s: build_ssh(L, s, boundary), grid, False, "phg", "ssh",
                    {"L": L, "boundary": boundary})


def hubbard_ssh_path(L: int, U: float, grid: Sequence[float], boundary: str = "ring") -> PathSpec:
    return PathSpec(lambda s: build_hubbard_ssh(L, s, U, boundary), grid, False, "phg", "hubbard_ssh",
                    {"L": L, "U": U, "boundary": boundary})


def rice_mele_path(L: int, grid: Optional[Sequence[float]] = None, hop: float = 1.0,
                   dimerization: float = 0.5, stagger: float = 1.0) -> PathSpec:
    """Closed pumping cycle, ``s`` in [0, 1] mapped to angle ``2π s``."""
    grid = np.linspace(0.0, 1.0, 33) if grid is None else grid
    return PathSpec(lambda s: build_rice_mele(L, 2 * np.pi * s, hop, dimerization, stagger), grid, True,
                    None, "rice_mele", {"L": L, "hop": hop, "dimerization": dimerization, "stagger": stagger})


def constant_path(spec: ModelSpec, grid: Sequence[float] = (0.0, 0.5, 1.0), closed: bool = True) -> PathSpec:
    return PathSpec(lambda s: spec, grid, closed, None, "constant", {"spec_hash": spec.spec_hash()})


def concat_paths(first: PathSpec, second: PathSpec) -> PathSpec:
    """Run ``first`` on [0, 1/2] and ``second`` on [1/2, 1]; both must share a base point."""
    if not (first.closed and second.closed):
        raise DomainError("only closed paths can be concatenated")
    f1, f2 = first.family, second.family
    a1, b1 = first.grid[0], first.grid[-1]
    a2, b2 = second.grid[0], second.grid[-1]

    def fam(s: float) -> ModelSpec:
        if s <= 0.5:
            return f1(a1 + 2 * s * (b1 - a1))
        return f2(a2 + (2 * s - 1) * (b2 - a2))

    g1 = [0.5 * (s - a1) / (b1 - a1) for s in first.grid]
    g2 = [0.5 + 0.5 * (s - a2) / (b2 - a2) for s in second.grid]
    grid = g1 + g2[1:]
    return PathSpec(fam, grid, True, None, f"{first.name}+{second.name}",
                    {"first": first.describe(), "second": second.describe()})


# -- sweeps ----------------------------------------------------------------

@dataclass
class SweepPoint:
    s: float
    E0: Optional[float] = None
    gap: Optional[float] = None
    re: Optional[float] = None
    im: Optional[float] = None
    index: Optional[int] = None
    error: str = ""

    @property
    def defined(self) -> bool:
        return self.index is not None

    def row(self) -> list:
        return [self.s, self.E0, self.gap, self.re, self.im, self.index, self.error]


@dataclass
class SweepResult:
    points: List[SweepPoint]
    transitions: List[Tuple[float, float]]
    refined: List[Tuple[float, float]] = field(default_factory=list)
    convention: str = "cellA"
    profile: dict = field(default_factory=dict)
    path: dict = field(default_factory=dict)

    def rows(self) -> list:
        return [p.row() for p in self.points]

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "convention": self.convention,
            "profile": self.profile,
            "points": [dict(zip(SWEEP_HEADER, p.row())) for p in self.points],
            "transitions": [list(b) for b in self.transitions],
            "refined": [list(b) for b in self.refined],
        }


def evaluate_point(spec: ModelSpec, s: float, profile, convention: str, symmetry: Optional[str] = None,
                   **solver_kw) -> SweepPoint:
    pt = SweepPoint(float(s))
    try:
        if symmetry is not None:
            bad = validate_symmetry(spec, symmetry)
            if bad:
                raise DomainError(f"{symmetry} violated: {bad[0]}")
        gs = solve(spec, **solver_kw)
        pt.E0, pt.gap = gs.E0, gs.gap
        rep = z2_index(gs, spec, profile, convention)
        pt.re, pt.im, pt.index = rep.expectation.real, rep.expectation.imag, rep.index
        if rep.index is None:
            pt.error = rep.reason
    except TopoIndexError as exc:
        pt.error = f"{type(exc).__name__}: {exc}"
    return pt


def _klass(p: SweepPoint) -> int:
    if p.index is None:
        return 0
    return 1 if p.index == 0 else -1


def find_brackets(points: Sequence[SweepPoint]) -> List[Tuple[float, float]]:
    """Intervals between consecutive defined points whose signs differ or that enclose undefined points."""
    defined = [i for i, p in enumerate(points) if p.defined]
    out = []
    for i, j in zip(defined, defined[1:]):
        if j > i + 1 or points[i].index != points[j].index:
            out.append((points[i].s, points[j].s))
    return out


def default_convention(spec: ModelSpec) -> str:
    return "spin_up_cell" if spec.spinful else "cellA"


def sweep(path: PathSpec, profile=None, convention: Optional[str] = None, resolution: Optional[float] = None,
          threads: Optional[int] = None, **solver_kw) -> SweepResult:
    """Ground state and twist index at every grid point, plus transition brackets.

    With ``resolution`` each bracket is bisected on the class of the
    midpoint (sign of Re<U>, or undefined) until narrower than
    ``resolution``.
    """
    first = path.family(path.grid[0])
    convention = convention or default_convention(first)
    if profile is None:
        profile = default_profile(first, convention)

    def work(s):
        return evaluate_point(path.family(s), s, profile, convention, path.symmetry, **solver_kw)

    points = _pmap(work, path.grid, threads)
    brackets = find_brackets(points)
    refined = []
    if resolution is not None:
        if resolution <= 0:
            raise DomainError("resolution must be positive")
        by_s = {p.s: p for p in points}
        for a, b in brackets:
            ka = _klass(by_s[a])
            while b - a > resolution:
                m = 0.5 * (a + b)
                if _klass(work(m)) == ka:
                    a = m
                else:
                    b = m
            refined.append((a, b))
    summary = profile.summary() if hasattr(profile, "summary") else {}
    return SweepResult(points, brackets, refined, convention, summary, path.describe())


# -- disorder ensembles ------------------------------------------------------

@dataclass
class EnsembleResult:
    records: List[dict]
    counts: Dict[str, int]
    min_gap: Optional[float]
    base_hash: str
    hop_amplitude: float
    int_amplitude: float

    def rows(self) -> list:
        return [[r[k] for k in ENSEMBLE_HEADER] for r in self.records]

    def to_dict(self) -> dict:
        return {"base_hash": self.base_hash, "hop_amplitude": self.hop_amplitude,
                "int_amplitude": self.int_amplitude, "counts": self.counts,
                "min_gap": self.min_gap, "records": self.records}


def disorder_ensemble(base: ModelSpec, hop_amplitude: float, int_amplitude: float, seeds: Sequence[int],
                      profile=None, convention: Optional[str] = None, tag: str = "phg",
                      gap_threshold: float = 0.0, threads: Optional[int] = None, **solver_kw) -> EnsembleResult:
    """Index of each disorder realization; seeds are explicit.

    Realizations with gap at or below ``gap_threshold`` are counted as
    ``gapless`` rather than trusted.
    """
    seeds = [int(s) for s in seeds]
    convention = convention or default_convention(base)
    if profile is None:
        profile = default_profile(base, convention)

    def work(seed):
        rec = {"seed": seed, "gap": None, "re": None, "im": None, "index": None, "error": ""}
        try:
            spec = add_disorder(base, seed, hop_amplitude, int_amplitude, tag)
            gs = solve(spec, **solver_kw)
            rec["gap"] = gs.gap
            rep = z2_index(gs, spec, profile, convention)
            rec.update(re=rep.expectation.real, im=rep.expectation.imag, index=rep.index)
            if rep.index is None:
                rec["error"] = rep.reason
            elif gs.gap <= gap_threshold:
                rec["error"] = f"gap {gs.gap:.4g} below threshold {gap_threshold}"
        except TopoIndexError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
        return rec

    records = _pmap(work, seeds, threads)
    counts = {"0": 0, "1": 0, "undefined": 0, "gapless": 0}
    for r in records:
        if r["index"] is None:
            counts["undefined"] += 1
        elif r["error"]:
            counts["gapless"] += 1
        else:
            counts[str(r["index"])] += 1
    gaps = [r["gap"] for r in records if r["gap"] is not None]
    return EnsembleResult(records, counts, min(gaps) if gaps else None, base.spec_hash(),
                          hop_amplitude, int_amplitude)


# -- winding ---------------------------------------------------------------

@dataclass
class WindingResult:
    q: int
    raw: float
    samples: List[Tuple[float, complex]]
    min_modulus: float
    method: str

    def to_dict(self) -> dict:
        return {"q": self.q, "raw": self.raw, "min_modulus": self.min_modulus, "method": self.method,
                "samples": [[s, z.real, z.imag] for s, z in self.samples]}


def winding_number(path: PathSpec, profile=None, convention: str = "site_centered", method: str = "ed",
                   magnitude_tol: float = MAGNITUDE_TOL, max_step: float = np.pi / 2,
                   max_depth: int = 12, drift_tol: float = 0.1, threads: Optional[int] = None,
                   **solver_kw) -> WindingResult:
    """Winding of <U> around the origin along a closed path.

    Intervals whose phase step reaches ``max_step`` are bisected until the
    unwrapped phase is unambiguous.  Positive ``q`` means the phase of <U>
    increases with ``s``, i.e. charge moves toward larger x through the
    ramp.
    """
    if not path.closed:
        raise DomainError("winding needs a closed path")
    if method not in ("ed", "slater"):
        raise DomainError(f"unknown method {method!r}")
    base = path.family(path.grid[0])
    if profile is None:
        profile = default_profile(base, convention)

    def value(s: float) -> complex:
        spec = path.family(s)
        if method == "slater":
            if spec.spinful:
                raise DomainError("the determinant method handles spinless specs")
            angles, offset = site_angles(profile, convention, spec.L, spec.is_ring)
            z = np.exp(1j * offset) * slater_twist_expectation(correlation_matrix(spec), angles)
        else:
            gs = solve(spec, **solver_kw)
            if gs.degenerate:
                raise RefinementError(f"degenerate ground state at s={s}")
            z = expectation(gs, twist_for(gs, profile, convention))
        if abs(z) < magnitude_tol:
            raise RefinementError(f"|<U>| = {abs(z):.3e} at s={s}; the path passes near the origin")
        return z

    grid = list(path.grid)
    zs = _pmap(value, grid, threads)
    samples = list(zip(grid, zs))
    total = 0.0
    out = [samples[0]]
    for (s0, z0), (s1, z1) in zip(samples, samples[1:]):
        total += _unwrap(value, s0, z0, s1, z1, max_step, max_depth, out)
    raw = total / (2 * np.pi)
    q = int(round(raw))
    if abs(raw - q) > drift_tol:
        raise RefinementError(f"accumulated winding {raw:.4f} is not close to an integer")
    return WindingResult(q, raw, out, float(min(abs(z) for _, z in out)), method)


def _unwrap(value, s0, z0, s1, z1, max_step, depth, out) -> float:
    step = float(np.angle(z1 / z0))
    if abs(step) < max_step:
        out.append((s1, z1))
        return step
    if depth == 0:
        raise RefinementError(f"phase step {step:.3f} between s={s0} and s={s1} not resolved")
    sm = 0.5 * (s0 + s1)
    zm = value(sm)
    return (_unwrap(value, s0, z0, sm, zm, max_step, depth - 1, out)
            + _unwrap(value, sm, zm, s1, z1, max_step, depth - 1, out))


# -- edge gaps ---------------------------------------------------------------

def edge_gap_scaling(family: Callable[[int], ModelSpec], sizes: Sequence[int], convention: Optional[str] = None,
                     threads: Optional[int] = None, **solver_kw) -> List[dict]:
    """Bulk index of the ring parent and in-sector gap of its half chain for each size."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise DomainError("sizes must be ascending")

    def work(L):
        parent = family(L)
        conv = convention or default_convention(parent)
        row = {"L": L, "bulk_index": None, "half_gap": None, "error": ""}
        try:
            gs = solve(parent, **solver_kw)
            row["bulk_index"] = z2_index(gs, parent, None, conv).index
            half = restrict_half_chain(parent)
            row["half_gap"] = solve(half, **solver_kw).gap
        except TopoIndexError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    return _pmap(work, sizes, threads)
