"""Brute-force reference implementations used by the tests.

Everything here is built from dense Kronecker products in the full Fock
space, independently of the bit-twiddling in ``topoindex.fock``.  Spinful
modes are interleaved (site-major: mode ``2j + σ``), a different operator
ordering from the library's, so only ordering-independent quantities
(spectra, expectation values) are compared against it.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.sparse as sp

from topoindex.fock import DOWN, UP, op_elements

_Z = np.diag([1.0, -1.0])
_A = np.array([[0.0, 1.0], [0.0, 0.0]])  # annihilator on (|0>, |1>)
_I = np.eye(2)


def _kron(mats):
    return reduce(np.kron, mats)


class FullFock:
    """Dense fermion operators on ``M`` modes."""

    def __init__(self, L: int, spinful: bool = False):
        self.L = L
        self.spinful = spinful
        self.M = 2 * L if spinful else L
        self.c = []
        for m in range(self.M):
            self.c.append(_kron([_Z] * m + [_A] + [_I] * (self.M - m - 1)))
        self.n = [ci.T @ ci for ci in self.c]

    def mode(self, j: int, spin=None) -> int:
        if not self.spinful:
            return j
        return 2 * j + (0 if spin in (None, UP) else 1)

    def cd(self, j, spin=None):
        return self.c[self.mode(j, spin)].T

    def an(self, j, spin=None):
        return self.c[self.mode(j, spin)]

    def num(self, j, spin=None):
        return self.n[self.mode(j, spin)]

    def number(self, spin="all"):
        if spin == "all":
            return sum(self.n)
        return sum(self.num(j, spin) for j in range(self.L))

    def hamiltonian(self, spec) -> np.ndarray:
        dim = 2 ** self.M
        H = spec.const * np.eye(dim, dtype=complex)
        spins = (UP, DOWN) if self.spinful else (None,)
        for (j, k), t in spec.hop.items():
            for s in spins:
                H += t * self.cd(j, s) @ self.an(k, s)
        half = 0.5 * np.eye(dim)
        for term in spec.int_terms:
            op = term.coef * np.eye(dim)
            for j, s in term.factors:
                op = op @ (self.num(j, s) - half)
            H += op
        for f in spec.flip_terms:
            X = self.cd(f.j, UP) @ self.an(f.j, DOWN) @ self.cd(f.k, DOWN) @ self.an(f.k, UP)
            H += f.coef * (X + X.conj().T)
        H -= spec.mu * self.number()
        return H

    def sector_mask(self, sector) -> np.ndarray:
        if self.spinful:
            nu = np.diag(self.number(UP)).real
            nd = np.diag(self.number(DOWN)).real
            return (np.rint(nu) == sector[0]) & (np.rint(nd) == sector[1])
        return np.rint(np.diag(self.number()).real) == sector[0]

    def sector_spectrum(self, spec, sector=None):
        sector = spec.half_filling() if sector is None else tuple(sector)
        mask = self.sector_mask(sector)
        H = self.hamiltonian(spec)[np.ix_(mask, mask)]
        w, V = np.linalg.eigh(H)
        return w, V, mask

    def twist_diagonal(self, site_angles, offset=0.0, spin=None) -> np.ndarray:
        """Diagonal of exp(i(Σ θ_j n_j + offset)) acting on one species."""
        phase = offset * np.ones(2 ** self.M)
        for j, th in enumerate(site_angles):
            phase = phase + th * np.diag(self.num(j, spin if self.spinful else None)).real
        return np.exp(1j * phase)


def oracle_ground(spec, sector=None):
    ff = FullFock(spec.L, spec.spinful)
    w, V, mask = ff.sector_spectrum(spec, sector)
    return ff, w, V[:, 0], mask


def oracle_twist_expectation(spec, site_angles, offset=0.0):
    ff, w, v, mask = oracle_ground(spec)
    d = ff.twist_diagonal(site_angles, offset, UP if spec.spinful else None)[mask]
    return complex(np.sum(np.abs(v) ** 2 * d)), w


def slater_bruteforce(h: np.ndarray, N: int, angles) -> complex:
    """<exp(iΣθ n)> in the N-particle Slater state of ``h`` by explicit determinants of orbitals."""
    e, V = np.linalg.eigh(h)
    occ = V[:, :N]
    # U Φ is the Slater determinant of orbitals diag(e^{iθ}) φ_a; overlap is det(Φ† D Φ)
    D = np.diag(np.exp(1j * np.asarray(angles)))
    return complex(np.linalg.det(occ.conj().T @ D @ occ))


# -- random local perturbations ------------------------------------------

def random_local_operator(basis, rng, support: int = 4, n_terms: int = 6) -> sp.csr_matrix:
    """Sparse matrix of a random number-conserving operator supported on
    ``support`` consecutive sites (constant, density, hop and pair-hop terms
    with complex coefficients).  Spinful operators conserve each species.
    """
    L = basis.L
    a = int(rng.integers(0, L))
    sites = [(a + i) % L for i in range(min(support, L))]
    spins = (UP, DOWN) if basis.spinful else (None,)
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    M = M + complex(rng.normal(), rng.normal()) * sp.identity(basis.dim, format="csr")
    for _ in range(n_terms):
        kind = int(rng.integers(0, 3))
        s = spins[int(rng.integers(0, len(spins)))]
        coef = complex(rng.normal(), rng.normal())
        if kind == 0:
            j = sites[int(rng.integers(0, len(sites)))]
            ops = [(True, j, s), (False, j, s)]
        elif kind == 1:
            j, k = rng.choice(sites, 2, replace=False)
            ops = [(True, int(j), s), (False, int(k), s)]
        else:
            if len(sites) < 2:
                continue
            j, k = rng.choice(sites, 2, replace=False)
            l, m = rng.choice(sites, 2, replace=False)
            if basis.spinful:
                s2 = spins[int(rng.integers(0, 2))]
                if s2 == s and (j == k or l == m):
                    continue
                ops = [(True, int(j), s), (True, int(k), s2), (False, int(l), s2), (False, int(m), s)]
            else:
                ops = [(True, int(j), s), (True, int(k), s), (False, int(l), s), (False, int(m), s)]
        rows, cols, signs = op_elements(basis, ops)
        M = M + sp.csr_matrix((coef * signs, (rows, cols)), shape=(basis.dim, basis.dim))
    return M.tocsr()
