"""Sector Hamiltonians and their low-lying spectrum."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError, ResourceError
from .fock import DOWN, UP, FockBasis, enumerate_basis, op_elements
from .models import ModelSpec
from .io import fmt_float, write_atomic

log = logging.getLogger(__name__)

MAX_DIM = 2_000_000
DENSE_THRESHOLD = 2000
DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SectorMatrix:
    matrix: sp.csr_matrix
    basis: FockBasis
    spec: ModelSpec

    @property
    def dim(self) -> int:
        return self.basis.dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    E0: float
    E1: float
    gap: float
    vector: np.ndarray
    degenerate: bool
    energies: np.ndarray
    residual: float
    hamiltonian: SectorMatrix

    @property
    def basis(self) -> FockBasis:
        return self.hamiltonian.basis

    @property
    def sector(self) -> Tuple[int, ...]:
        return self.basis.sector

    @property
    def spec(self) -> ModelSpec:
        return self.hamiltonian.spec


def resolve_sector(spec: ModelSpec, sector=None) -> Tuple[int, ...]:
    if sector is None:
        return spec.half_filling()
    sec = (int(sector),) if np.isscalar(sector) else tuple(int(n) for n in sector)
    if len(sec) != (2 if spec.spinful else 1):
        raise DomainError(f"sector {sector!r} does not match a {spec.spin} model")
    return sec


def _diagonal(spec: ModelSpec, basis: FockBasis) -> np.ndarray:
    diag = np.full(basis.dim, spec.const, dtype=float)
    occ = {None: None, UP: None, DOWN: None}
    if basis.spinful:
        occ[UP] = basis.occupations(UP)
        occ[DOWN] = basis.occupations(DOWN)
        ntot = occ[UP].sum(axis=1) + occ[DOWN].sum(axis=1)
    else:
        occ[None] = basis.occupations()
        ntot = occ[None].sum(axis=1)
    diag -= spec.mu * ntot
    for term in spec.int_terms:
        prod = np.full(basis.dim, term.coef, dtype=float)
        for j, s in term.factors:
            prod *= occ[s][:, j] - 0.5
        diag += prod
    spins = (UP, DOWN) if basis.spinful else (None,)
    for (j, k), t in spec.hop.items():
        if j == k:
            for s in spins:
                diag += np.real(t) * occ[s][:, j]
    return diag


def term_elements(spec: ModelSpec, basis: FockBasis) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(rows, cols, values)`` of every term of ``spec`` in ``basis``."""
    yield np.arange(basis.dim), np.arange(basis.dim), _diagonal(spec, basis).astype(complex)
    spins = (UP, DOWN) if basis.spinful else (None,)
    for (j, k), t in spec.hop.items():
        if j == k or t == 0:
            continue
        for s in spins:
            rows, cols, signs = op_elements(basis, [(True, j, s), (False, k, s)])
            yield rows, cols, t * signs
    for f in spec.flip_terms:
        for a, b in ((f.j, f.k), (f.k, f.j)):
            ops = [(True, a, UP), (False, a, DOWN), (True, b, DOWN), (False, b, UP)]
            rows, cols, signs = op_elements(basis, ops)
            yield rows, cols, f.coef * signs.astype(complex)


def assemble(spec: ModelSpec, sector=None, max_dim: int = MAX_DIM) -> SectorMatrix:
    """Sparse matrix of ``spec`` in one particle-number sector (default: half filling)."""
    from math import comb

    sec = resolve_sector(spec, sector)
    dim = 1
    for n in sec:
        dim *= comb(spec.L, n)
    if dim < 1:
        raise DomainError("empty sector")
    if dim > max_dim:
        raise ResourceError(f"sector dimension {dim} exceeds cap {max_dim}")
    basis = enumerate_basis(spec.L, sec)
    parts = list(term_elements(spec, basis))
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([np.asarray(p[2], dtype=complex) for p in parts])
    if np.all(vals.imag == 0):
        vals = vals.real
    H = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    H.sum_duplicates()
    H.eliminate_zeros()
    return SectorMatrix(H, basis, spec)


def apply_hamiltonian(spec: ModelSpec, basis: FockBasis, x: np.ndarray) -> np.ndarray:
    """Matrix-free ``H @ x``: terms are regenerated and applied one at a time."""
    x = np.asarray(x)
    y = np.zeros(basis.dim, dtype=np.result_type(x, complex))
    for rows, cols, vals in term_elements(spec, basis):
        np.add.at(y, rows, vals * x[cols])
    if np.isrealobj(x) and np.all(y.imag == 0):
        return y.real
    return y


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    ph = v[i] / abs(v[i])
    return v / ph


LANCZOS_SEED = 20240917


def ground_state(matrix: SectorMatrix, k: int = 2, degeneracy_tol: float = DEGENERACY_TOL,
                 dense_threshold: int = DENSE_THRESHOLD, residual_tol: float = RESIDUAL_TOL,
                 maxiter: Optional[int] = None) -> GroundStateResult:
    """Lowest ``k`` eigenpairs; dense below ``dense_threshold``, Lanczos above.

    The Krylov start vector is drawn from a fixed-seed generator: runs are
    reproducible, and unlike a uniform vector it overlaps every symmetry
    sector, so exact degeneracies (e.g. free edge spins) are not missed.
    """
    if k < 1:
        raise DomainError("need at least one eigenpair")
    H = matrix.matrix
    n = matrix.dim
    k = min(k, n)
    if n <= dense_threshold:
        A = H.toarray()
        w, V = np.linalg.eigh(A)
        w, V = w[:k], V[:, :k]
    else:
        v0 = np.random.default_rng(LANCZOS_SEED).standard_normal(n).astype(H.dtype)
        try:
            w, V = spla.eigsh(H, k=max(k, 2), which="SA", v0=v0, tol=1e-13,
                              maxiter=maxiter or 50 * n, ncv=min(n, max(2 * k + 1, 40)))
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"Lanczos did not converge ({len(exc.eigenvalues)} pairs)") from exc
        order = np.argsort(w)
        w, V = w[order][:k], V[:, order][:, :k]
    v = V[:, 0]
    v = _fix_phase(v / np.linalg.norm(v))
    resid = float(np.linalg.norm(H @ v - w[0] * v))
    scale = max(1.0, abs(w[0]))
    if resid > residual_tol * scale:
        raise NumericalError(f"ground-state residual {resid:.3e} above tolerance", residual=resid)
    E0 = float(w[0])
    E1 = float(w[1]) if k >= 2 else float("inf")
    gap = E1 - E0
    degenerate = bool(gap < degeneracy_tol * scale)
    return GroundStateResult(E0, E1, gap, v, degenerate, np.asarray(w, dtype=float), resid, matrix)


def solve(spec: ModelSpec, sector=None, k: int = 2, **kwargs) -> GroundStateResult:
    max_dim = kwargs.pop("max_dim", MAX_DIM)
    return ground_state(assemble(spec, sector, max_dim=max_dim), k=k, **kwargs)


def gap_scan(family: Callable[[int], ModelSpec], sizes: Sequence[int], **kwargs) -> List[Tuple[int, float]]:
    """In-sector half-filling gap for each chain length in ``sizes``."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise DomainError("sizes must be ascending")
    out = []
    for L in sizes:
        gs = solve(family(L), **kwargs)
        log.debug("L=%d E0=%.12g gap=%.6g", L, gs.E0, gs.gap)
        out.append((L, gs.gap))
    return out


def dump_triplets(matrix: SectorMatrix, path) -> None:
    """Write ``row col re im`` lines (0-based) after a ``# dim nnz`` header."""
    coo = matrix.matrix.tocoo()
    lines = [f"# {matrix.dim} {coo.nnz}"]
    for i, j, v in zip(coo.row, coo.col, coo.data):
        v = complex(v)
        lines.append(f"{i} {j} {fmt_float(v.real)} {fmt_float(v.imag)}")
    write_atomic(path, "\n".join(lines) + "\n")


def load_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        dim, _ = (int(x) for x in fh.readline().lstrip("#").split())
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((dim, dim))
    vals = data[:, 2] + 1j * data[:, 3]
    return sp.csr_matrix((vals, (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim))
