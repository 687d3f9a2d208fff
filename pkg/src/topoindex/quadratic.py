"""Free-fermion fast path: single-particle spectra, Slater correlations, Zak phase."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, NumericalError
from .fock import DOWN, UP, spin_index
from .models import ModelSpec, build_ssh
from .io import write_csv

log = logging.getLogger(__name__)

FERMI_TOL = 1e-10
GAP_TOL = 1e-10
COND_WARN = 1e8


def _require_quadratic(spec: ModelSpec) -> None:
    if not spec.is_quadratic:
        raise DomainError("spec has interaction terms; use exact diagonalization")


def single_particle_matrix(spec: ModelSpec, spin=None) -> np.ndarray:
    """L×L matrix ``h_jk = t_jk`` plus on-site terms of one species.

    On-site terms ``v (n_j - 1/2)`` enter as ``v`` on the diagonal; their
    constant part is left to :func:`free_fermion_ground`.
    """
    _require_quadratic(spec)
    h = spec.hop_matrix()
    s = spin_index(spin)
    for term in spec.int_terms:
        if term.degree == 1:
            j, ts = term.factors[0]
            if not spec.spinful or ts == (UP if s is None else s):
                h[j, j] += term.coef
    if not np.allclose(h, h.conj().T, atol=1e-14):
        raise DomainError("hopping matrix is not Hermitian")
    return h


def sp_spectrum(spec: ModelSpec, spin=None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orbitals (columns) of one species.

    The chemical potential shifts every level by ``-mu``.
    """
    h = single_particle_matrix(spec, spin)
    e, V = np.linalg.eigh(h)
    return e - spec.mu, V


def correlation_matrix(spec: ModelSpec, N: Optional[int] = None, tol: float = FERMI_TOL,
                       spin=None) -> np.ndarray:
    """``C_jk = <c†_j c_k>`` of the N-particle Slater ground state of one species."""
    e, V = sp_spectrum(spec, spin)
    L = spec.L
    if N is None:
        N = spec.half_filling()[0]
    if not 0 <= N <= L:
        raise DomainError(f"filling {N} outside [0, {L}]")
    if 0 < N < L and e[N] - e[N - 1] < tol * max(1.0, abs(e[N])):
        deg = np.nonzero(np.abs(e - e[N - 1]) < tol * max(1.0, abs(e[N])))[0]
        raise DomainError(f"Fermi level degenerate at filling {N}: levels {deg.tolist()} at {e[N - 1]:.12g}")
    occ = V[:, :N]
    return occ.conj() @ occ.T


def slater_twist_expectation(C: np.ndarray, phases: Sequence[float]) -> complex:
    """``det((1 - C) + C diag(e^{iθ}))`` via pivoted LU.

    Equals ``<exp(i Σ θ_j n_j)>`` in the Slater state with correlation ``C``.
    """
    C = np.asarray(C, dtype=complex)
    d = np.exp(1j * np.asarray(phases, dtype=float))
    M = np.eye(C.shape[0], dtype=complex) - C + C * d[None, :]
    try:
        lu, piv = sla.lu_factor(M, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalError(f"LU factorization failed: {exc}") from exc
    diag = np.diag(lu)
    if np.any(diag == 0):
        cond = np.inf
        raise NumericalError(f"singular determinant matrix (condition {cond})")
    if np.min(np.abs(diag)) < 1e-8 * np.max(np.abs(diag)):
        cond = np.linalg.cond(M)
        if cond > COND_WARN:
            log.info("determinant matrix condition number %.3e", cond)
    sign = (-1) ** int(np.sum(piv != np.arange(piv.size)))
    return complex(sign * np.prod(diag))


def slater_expectation(spec: ModelSpec, U, C: Optional[np.ndarray] = None) -> complex:
    """Twist expectation of a non-interacting ground state from the determinant formula.

    ``U`` is a :class:`~topoindex.twist.TwistOperator`; its constant offset
    multiplies the determinant.  For spinful specs the twisted species is the
    up species at filling ``N_up``.
    """
    if C is None:
        N = spec.half_filling()[0]
        C = correlation_matrix(spec, N)
    return complex(np.exp(1j * U.offset) * slater_twist_expectation(C, U.site_angles))


@dataclass(frozen=True)
class FreeFermionGround:
    E0: float
    gap: float
    levels: np.ndarray


def free_fermion_ground(spec: ModelSpec, N: Optional[int] = None) -> FreeFermionGround:
    """Many-body ground energy and lowest in-sector excitation of a quadratic spec.

    ``N`` is the particle number per species; spinful specs fill both
    species.  The gap is the smallest particle-hole excitation of either
    species.
    """
    N = spec.half_filling()[0] if N is None else N
    offset = spec.const
    for term in spec.int_terms:
        offset += term.coef if term.degree == 0 else -0.5 * term.coef
    E0, gap, levels = offset, float("inf"), None
    for spin in ((UP, DOWN) if spec.spinful else (None,)):
        e, _ = sp_spectrum(spec, spin)
        levels = e if levels is None else levels
        E0 += float(np.sum(e[:N]))
        if 0 < N < spec.L:
            gap = min(gap, float(e[N] - e[N - 1]))
    return FreeFermionGround(E0, gap, levels)


# -- Zak phase -------------------------------------------------------------

def ssh_bloch(s: float) -> Callable[[float], np.ndarray]:
    """Bloch Hamiltonian of the SSH chain with cells (2j, 2j+1)."""
    def h(k: float) -> np.ndarray:
        q = (1.0 - s) + s * np.exp(-1j * k)
        return np.array([[0.0, q], [np.conj(q), 0.0]])
    return h


def bloch_from_spec(spec: ModelSpec) -> Callable[[float], np.ndarray]:
    """Two-band Bloch Hamiltonian of a translation-invariant ring spec."""
    _require_quadratic(spec)
    if not spec.is_ring or spec.L % 2:
        raise DomainError("Bloch form needs an even ring")
    L = spec.L
    for (j, k), t in spec.hop.items():
        if abs(spec.hop.get(((j + 2) % L, (k + 2) % L), 0.0) - t) > 1e-12:
            raise DomainError("spec is not invariant under translation by one cell")
    onsite = np.diag(single_particle_matrix(spec)).real
    if not np.allclose(onsite[2:], onsite[:-2], atol=1e-12):
        raise DomainError("on-site terms are not invariant under translation by one cell")
    entries = [(a, a, 0, onsite[a] - spec.hop.get((a, a), 0.0)) for a in (0, 1)]
    for (j, k), t in spec.hop.items():
        if j in (0, 1):
            d = (k - j + L // 2) % L - L // 2  # shortest signed displacement
            kk = j + d
            R = kk // 2
            entries.append((j, kk - 2 * R, R, t))

    def h(kq: float) -> np.ndarray:
        m = np.zeros((2, 2), dtype=complex)
        for a, b, R, t in entries:
            m[a, b] += t * np.exp(1j * kq * R)
        m -= spec.mu * np.eye(2)
        return m
    return h


def zak_phase(model: Union[float, ModelSpec, Callable[[float], np.ndarray]], Nk: int = 64,
              gap_tol: float = GAP_TOL) -> int:
    """Zak index ν ∈ {0, 1} of the lower band from a discrete Wilson loop.

    The loop closes on the vector at k = 0, which is the periodic gauge for
    cells (2j, 2j+1), so the product of overlaps is gauge invariant.
    """
    if Nk < 16:
        raise DomainError(f"Nk={Nk} too small; need at least 16 momenta")
    if isinstance(model, ModelSpec):
        h = bloch_from_spec(model)
    elif callable(model):
        h = model
    else:
        h = ssh_bloch(float(model))
    us = []
    for n in range(Nk):
        k = 2 * np.pi * n / Nk
        e, V = np.linalg.eigh(h(k))
        if e[1] - e[0] < gap_tol:
            raise NumericalError(f"band gap closes at k={k:.6g} (gap {e[1] - e[0]:.3e})")
        us.append(V[:, 0])
    W = 1.0 + 0j
    for n in range(Nk):
        W *= np.vdot(us[n], us[(n + 1) % Nk])
    if abs(W) < 1e-12:
        raise NumericalError("Wilson loop vanishes; refine the momentum grid")
    phase = -np.angle(W)
    return int(round(phase / np.pi)) % 2


def zak_table(s_values: Sequence[float], Nk: int = 64, path=None):
    rows = [(s, zak_phase(s, Nk)) for s in s_values]
    if path is not None:
        write_csv(path, ["s", "nu"], rows)
    return rows


def spectrum_csv(spec: ModelSpec, path) -> None:
    e, _ = sp_spectrum(spec)
    write_csv(path, ["n", "energy"], list(enumerate(e)))


def ssh_edge_levels(L: int, s: float) -> np.ndarray:
    """Single-particle levels of the open SSH chain."""
    return sp_spectrum(build_ssh(L, s, boundary="open"))[0]
