"""Collective spin operators on the maximal symmetric sector.

Each ensemble of N spin-1/2 particles is represented by its spin-j = N/2
irreducible block, with basis |j, m> ordered by descending m (index 0 is
the fully excited level m = j, index N is the ground level m = -j).

Working in this sector alone is exact, not an approximation. Every jump
operator we build is a linear combination of per-ensemble collective
operators J^+ and J^-, and each of these commutes with its own ensemble's
Casimir J.J. The Casimir of every ensemble is therefore conserved by the
full Lindblad generator, and a state that starts in the j = N/2 block
(as the fully excited and fully ground product states do) never leaves it.

Per-ensemble matrices are small and kept dense; embedded operators on the
joint product space are returned as CSR matrices.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from numbers import Integral

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument

EXCITED = "excited"
GROUND = "ground"
LEVELS = (EXCITED, GROUND)


def _check_n_spins(n_spins):
    if isinstance(n_spins, bool) or not isinstance(n_spins, Integral) or n_spins < 1:
        raise InvalidArgument(f"n_spins must be a positive integer, got {n_spins!r}")
    return int(n_spins)


@dataclass(frozen=True)
class SpinRepresentation:
    """Spin-j block of one ensemble of ``n_spins`` two-level systems."""

    n_spins: int
    jplus: np.ndarray = field(repr=False)
    jminus: np.ndarray = field(repr=False)
    jz: np.ndarray = field(repr=False)

    @property
    def j(self):
        return self.n_spins / 2

    @property
    def dim(self):
        return self.n_spins + 1

    @property
    def m_values(self):
        return self.j - np.arange(self.dim)

    def casimir(self):
        """J.J = J^+J^- + (J^z)^2 - J^z, which equals j(j+1) times identity."""
        return self.jplus @ self.jminus + self.jz @ self.jz - self.jz

    @classmethod
    def build(cls, n_spins):
        jp, jm, jz = collective_operators(n_spins)
        return cls(_check_n_spins(n_spins), jp, jm, jz)


@lru_cache(maxsize=64)
def _ladder(n_spins):
    j = n_spins / 2
    m = j - np.arange(n_spins + 1)
    # J^- |j, m> = sqrt(j(j+1) - m(m-1)) |j, m-1>; m-1 sits one index further down
    amp = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1))
    jminus = np.diag(amp, k=-1)
    jz = np.diag(m)
    for a in (jminus, jz):
        a.setflags(write=False)
    return jminus, jz


def collective_operators(n_spins):
    """Return ``(Jplus, Jminus, Jz)`` for ``n_spins`` spins in the |j, m> basis."""
    n_spins = _check_n_spins(n_spins)
    jminus, jz = _ladder(n_spins)
    jplus = jminus.T
    return jplus, jminus, jz


def embed(op, slot, dims):
    """Kronecker-embed ``op`` at position ``slot`` of the product space ``dims``."""
    dims = [int(d) for d in dims]
    if not 0 <= slot < len(dims):
        raise InvalidArgument(f"slot {slot} out of range for {len(dims)} ensembles")
    shape = getattr(op, "shape", None)
    if shape is None or len(shape) != 2 or shape[0] != shape[1] or shape[0] != dims[slot]:
        raise InvalidArgument(
            f"operator of shape {shape} does not match dims[{slot}] = {dims[slot]}"
        )
    left = int(np.prod(dims[:slot], dtype=np.int64))
    right = int(np.prod(dims[slot + 1 :], dtype=np.int64))
    out = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(op), format="csr")
    return sp.kron(out, sp.identity(right, format="csr"), format="csr")


def level_indices(dims):
    """Per-ensemble level index k_mu (0 = top level) of every joint basis state.

    Returns an int array of shape (len(dims), prod(dims)).
    """
    grids = np.indices(dims).reshape(len(dims), -1)
    return grids.astype(np.int64)


@dataclass(frozen=True)
class DensityMatrix:
    """Joint state over a product of symmetric sectors."""

    data: np.ndarray
    dims: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        dim = int(np.prod(dims))
        if data.shape != (dim, dim):
            raise InvalidArgument(f"density matrix shape {data.shape} does not match dims {dims}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def n_spins(self):
        return tuple(d - 1 for d in self.dims)

    def trace(self):
        return complex(np.trace(self.data))

    def expect(self, op):
        """Tr(op rho) for a dense or sparse operator on the joint space."""
        if sp.issparse(op):
            return complex(op.multiply(self.data.T).sum())
        return complex(np.einsum("ij,ji->", op, self.data))

    def check(self, tol=1e-10, neg_tol=1e-8):
        """Raise ``InvalidArgument`` if trace, Hermiticity or positivity fail."""
        if abs(self.trace() - 1) > tol:
            raise InvalidArgument(f"trace {self.trace():.3e} differs from 1")
        herm = np.max(np.abs(self.data - self.data.conj().T), initial=0.0)
        if herm > tol:
            raise InvalidArgument(f"not Hermitian (max deviation {herm:.3e})")
        lam = np.linalg.eigvalsh(self.data).min()
        if lam < -neg_tol:
            raise InvalidArgument(f"negative eigenvalue {lam:.3e}")
        return self


def initial_state(levels, n_spins):
    """Pure product state with each ensemble fully ``excited`` or ``ground``."""
    if isinstance(levels, str):
        levels = [levels]
    if isinstance(n_spins, Integral):
        n_spins = [n_spins]
    levels = list(levels)
    n_spins = [_check_n_spins(n) for n in n_spins]
    if len(levels) != len(n_spins):
        raise InvalidArgument(
            f"got {len(levels)} levels for {len(n_spins)} ensembles"
        )
    dims = [n + 1 for n in n_spins]
    index = []
    for level, n in zip(levels, n_spins):
        if level not in LEVELS:
            raise InvalidArgument(f"level must be one of {LEVELS}, got {level!r}")
        index.append(0 if level == EXCITED else n)
    flat = np.ravel_multi_index(index, dims)
    dim = int(np.prod(dims))
    rho = np.zeros((dim, dim), dtype=complex)
    rho[flat, flat] = 1.0
    return DensityMatrix(rho, tuple(dims))
