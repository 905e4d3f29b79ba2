"""Exact Lindblad dynamics on the product of symmetric spin sectors.

The generator is

    d rho / dt = sum_c rate_c (2 O rho O^+ - O^+ O rho - rho O^+ O),

with the explicit factor 2 on the jump term. Jump operators are linear
combinations of collective J^+ / J^- of the individual ensembles.

Every such generator commutes with the common phase rotation
J^pm -> exp(+-i theta) J^pm, so an entry rho[i, j] only couples to entries
with the same charge q = k(i) - k(j), where k counts de-excitations summed
over ensembles. Trajectories are therefore integrated on the "packed"
support: only the charges present in the initial state are stored. For the
diagonal initial states used in practice that is q = 0 alone, a block
diagonal matrix far smaller than D x D.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import kernels
from ._accel import HAS_NUMBA
from .errors import CapacityError, IntegrationFailure, InvalidArgument
from .integrate import check_grid, dense_solve
from .spin_algebra import DensityMatrix, collective_operators, embed, level_indices

MAX_EXACT_DIM = 4096
MATRIX_NNZ_BUDGET = 40_000_000
POSITIVITY_ABORT = -1e-6
_FULL_EIG_LIMIT = 512

RAISE = "+"
LOWER = "-"


@dataclass(frozen=True)
class LindbladChannel:
    """Jump operator sum_k coef_k J_{ens_k}^{kind_k} with a nonnegative rate.

    ``terms`` is a tuple of ``(ensemble, kind, coef)`` with kind "+" or "-".
    """

    terms: tuple
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise InvalidArgument(f"channel rate must be nonnegative, got {self.rate}")
        terms = tuple((int(e), k, complex(c)) for e, k, c in self.terms)
        for e, k, _ in terms:
            if k not in (RAISE, LOWER) or e < 0:
                raise InvalidArgument(f"bad jump term {(e, k)}")
        object.__setattr__(self, "terms", terms)

    def operator(self, dims):
        """Sparse matrix of the jump operator on the joint space."""
        out = None
        for ens, kind, coef in self.terms:
            if ens >= len(dims):
                raise InvalidArgument(f"channel references ensemble {ens} but only {len(dims)} exist")
            jp, jm, _ = collective_operators(dims[ens] - 1)
            op = coef * embed(jp if kind == RAISE else jm, ens, dims)
            out = op if out is None else out + op
        return out

    def describe(self, labels):
        parts = []
        for ens, kind, coef in self.terms:
            c = "" if coef == 1 else f"{coef.real:g}*" if coef.imag == 0 else f"({coef})*"
            parts.append(f"{c}J_{labels[ens]}^{kind}")
        return f"{self.rate:g} L[{' + '.join(parts)}]"


def build_channels(scenario):
    """Channels of the multi-reservoir master equation with collective pumping.

    One dissipative channel J_C^- + J_Bm^- per reservoir at gamma_down (nbar + 1),
    its thermal partner J_C^+ + J_Bm^+ at gamma_down nbar when nbar > 0, and an
    incoherent pump J_C^+ at gamma_up when gamma_up > 0.
    """
    gd, gu, nbar = scenario.gamma_down, scenario.gamma_up, scenario.nbar
    if gd < 0 or gu < 0 or nbar < 0:
        raise InvalidArgument("rates and nbar must be nonnegative")
    channels = []
    if gd > 0:
        for m in range(1, scenario.n_batteries + 1):
            channels.append(LindbladChannel(((0, LOWER, 1), (m, LOWER, 1)), gd * (nbar + 1)))
            if nbar > 0:
                channels.append(LindbladChannel(((0, RAISE, 1), (m, RAISE, 1)), gd * nbar))
    if gu > 0:
        channels.append(LindbladChannel(((0, RAISE, 1),), gu))
    return channels


def apply_generator(rho, channels):
    """d rho / dt for a dense density matrix (reference path, sparse products)."""
    if not isinstance(rho, DensityMatrix):
        raise InvalidArgument("apply_generator expects a DensityMatrix")
    r = rho.data
    out = np.zeros_like(r)
    for ch in channels:
        if ch.rate == 0:
            continue
        op = ch.operator(rho.dims)
        if op.shape[0] != r.shape[0]:
            raise InvalidArgument("channel operator does not match state dimension")
        odo = (op.conj().T @ op).tocsr()
        r_od = (op @ r.conj().T).conj().T  # rho O^+
        r_odo = (odo @ r.conj().T).conj().T  # rho O^+ O, odo is Hermitian
        out += ch.rate * (2 * (op @ r_od) - odo @ r - r_odo)
    return out


class PackedSupport:
    """Index bookkeeping for density matrices restricted to a set of charges.

    Entries are grouped in blocks (q, k): rows with total de-excitation k,
    columns with k - q. Within a block, storage is row-major by the rank of
    each basis state inside its excitation class.
    """

    def __init__(self, dims, charges):
        self.dims = tuple(int(d) for d in dims)
        self.dim = int(np.prod(self.dims))
        kexc = level_indices(self.dims).sum(axis=0)
        self.kexc = kexc
        self.kmax = int(kexc.max())
        count = np.bincount(kexc, minlength=self.kmax + 1)
        order = np.argsort(kexc, kind="stable")
        rank = np.empty(self.dim, dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(count)])
        rank[order] = np.arange(self.dim) - starts[kexc[order]]
        self.count = count.astype(np.int64)
        self.rank = rank
        self.charges = tuple(sorted(set(int(q) for q in charges)))
        qslot = -np.ones(2 * self.kmax + 1, dtype=np.int64)
        offset = np.zeros((len(self.charges), self.kmax + 1), dtype=np.int64)
        rows, cols = [], []
        pos = 0
        for s, q in enumerate(self.charges):
            qslot[q + self.kmax] = s
            for k in range(self.kmax + 1):
                offset[s, k] = pos
                kb = k - q
                if not 0 <= kb <= self.kmax:
                    continue
                ri = order[starts[k] : starts[k + 1]]
                ci = order[starts[kb] : starts[kb + 1]]
                rows.append(np.repeat(ri, ci.size))
                cols.append(np.tile(ci, ri.size))
                pos += ri.size * ci.size
        self.qslot = qslot
        self.offset = offset
        self.rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        self.cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        self.size = pos

    @classmethod
    def from_state(cls, rho):
        k = level_indices(rho.dims).sum(axis=0)
        i, j = np.nonzero(rho.data)
        return cls(rho.dims, np.unique(k[i] - k[j]))

    def pack(self, data):
        return np.ascontiguousarray(data[self.rows, self.cols])

    def unpack(self, x):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[self.rows, self.cols] = x
        return out

    def blocks(self, x):
        """Diagonal (q = 0) blocks as square arrays; valid only for q = 0 support."""
        s = self.qslot[self.kmax]
        out = []
        for k in range(self.kmax + 1):
            n = self.count[k]
            start = self.offset[s, k]
            out.append(x[start : start + n * n].reshape(n, n))
        return out


class PackedGenerator:
    """Generator acting on packed vectors.

    Two backends: "numpy" assembles the generator once as a CSR matrix over
    the packed support; "numba" applies it matrix-free. The sparse matvec is
    several times faster, the matrix-free loop needs no storage beyond the
    state, so "auto" picks the matrix unless its estimated size exceeds
    ``MATRIX_NNZ_BUDGET`` nonzeros and numba is available.
    """

    def __init__(self, support, channels, time_scale=1.0, backend="auto"):
        self.support = support
        dims = support.dims
        dim = support.dim
        kidx = level_indices(dims)
        strides = [int(np.prod(dims[e + 1 :])) for e in range(len(dims))]
        src, amp, tstart, weight = [], [], [0], []
        kmat = sp.csr_matrix((dim, dim), dtype=complex)
        for ch in channels:
            if ch.rate == 0 or not ch.terms:
                continue
            for ens, kind, coef in ch.terms:
                if ens >= len(dims):
                    raise InvalidArgument(f"channel references ensemble {ens} but only {len(dims)} exist")
                jp, jm, _ = collective_operators(dims[ens] - 1)
                k = kidx[ens]
                s = -np.ones(dim, dtype=np.int64)
                a = np.zeros(dim, dtype=complex)
                if kind == LOWER:
                    ok = k >= 1
                    s[ok] = np.flatnonzero(ok) - strides[ens]
                    a[ok] = coef * jm[k[ok], k[ok] - 1]
                else:
                    ok = k <= dims[ens] - 2
                    s[ok] = np.flatnonzero(ok) + strides[ens]
                    a[ok] = coef * jp[k[ok], k[ok] + 1]
                src.append(s)
                amp.append(a)
            tstart.append(len(src))
            weight.append(2.0 * ch.rate / time_scale)
            op = ch.operator(dims)
            kmat = kmat + (ch.rate / time_scale) * (op.conj().T @ op)
        self.n_channels = len(weight)
        self.src = np.array(src, dtype=np.int64).reshape(-1, dim)
        self.amp = np.array(amp, dtype=complex).reshape(-1, dim)
        self.tstart = np.array(tstart, dtype=np.int64)
        self.weight = np.array(weight, dtype=complex)
        kmat = kmat.tocsr()
        kmat.eliminate_zeros()
        width = int(np.diff(kmat.indptr).max()) if kmat.nnz else 0
        self.kcol = -np.ones((dim, width), dtype=np.int64)
        self.kval = np.zeros((dim, width), dtype=complex)
        for i in range(dim):
            lo, hi = kmat.indptr[i], kmat.indptr[i + 1]
            self.kcol[i, : hi - lo] = kmat.indices[lo:hi]
            self.kval[i, : hi - lo] = kmat.data[lo:hi]
        if backend in (None, "auto"):
            backend = "numba" if HAS_NUMBA and self.estimated_nnz > MATRIX_NNZ_BUDGET else "numpy"
        if backend not in ("numba", "numpy"):
            raise InvalidArgument(f"unknown backend {backend!r}")
        if backend == "numba" and not HAS_NUMBA:
            raise InvalidArgument("numba backend requested but numba is unavailable or disabled")
        self.backend = backend

    @property
    def estimated_nnz(self):
        per_entry = int(np.diff(self.tstart) @ np.diff(self.tstart)) + 2 * self.kcol.shape[1]
        return self.support.size * per_entry

    def _args(self):
        s = self.support
        return (
            s.rows, s.cols, s.kexc, s.rank, s.count, s.qslot, s.offset, s.kmax,
            self.tstart, self.weight, self.src, self.amp, self.kcol, self.kval,
        )

    @cached_property
    def matrix(self):
        return kernels.assemble_packed_generator(*self._args())

    @property
    def is_zero(self):
        return self.n_channels == 0

    def __call__(self, t, x):
        if self.backend == "numba":
            s = self.support
            return kernels.lindblad_action_loop(
                x, s.rows, s.cols, s.kexc, s.rank, s.count, s.qslot, s.offset, s.kmax,
                self.tstart, self.weight, self.src, self.amp, self.kcol, self.kval,
                np.empty(s.size, dtype=complex),
            )
        return self.matrix @ x


def _check_capacity(dim):
    if dim > MAX_EXACT_DIM:
        raise CapacityError(
            f"joint dimension {dim} exceeds the exact-solver limit {MAX_EXACT_DIM}; "
            "use the mean-field solver (method=meanfield) for systems this large"
        )


def _min_eigenvalue(support, x):
    if support.charges == (0,):
        return min(np.linalg.eigvalsh(b).min() for b in support.blocks(x) if b.size)
    if support.dim <= _FULL_EIG_LIMIT:
        return np.linalg.eigvalsh(support.unpack(x)).min()
    return None


def iter_exact(rho0, channels, tau_grid, time_scale=1.0, rtol=1e-8, atol=1e-10, backend="auto"):
    """Yield ``(tau, DensityMatrix)`` along ``tau_grid`` (lazy ``evolve_exact``).

    Positivity is checked at every grid point (for non-block-diagonal
    supports larger than 512 states, only at the last one); a drift below
    -1e-6 raises :class:`IntegrationFailure`.
    """
    if not isinstance(rho0, DensityMatrix):
        raise InvalidArgument("rho0 must be a DensityMatrix")
    _check_capacity(rho0.dim)
    grid = check_grid(tau_grid)
    support = PackedSupport.from_state(rho0)
    gen = PackedGenerator(support, channels, time_scale=time_scale, backend=backend)
    x0 = support.pack(rho0.data)
    if gen.is_zero:
        for tau in grid:
            yield tau, DensityMatrix(rho0.data.copy(), rho0.dims)
        return
    last = grid[-1]
    for tau, x in dense_solve(gen, x0, grid, rtol, atol):
        check_now = support.charges == (0,) or support.dim <= _FULL_EIG_LIMIT or tau == last
        if check_now:
            lam = _min_eigenvalue(support, x)
            if lam is None:
                lam = np.linalg.eigvalsh(support.unpack(x)).min()
            if lam < POSITIVITY_ABORT:
                raise IntegrationFailure(
                    f"density matrix lost positivity at tau={tau:.6g} (min eigenvalue {lam:.3e}); "
                    "tighten rtol/atol",
                    tau=tau,
                )
        yield tau, DensityMatrix(support.unpack(x), rho0.dims)


def evolve_exact(rho0, channels, tau_grid, time_scale=1.0, rtol=1e-8, atol=1e-10, backend="auto"):
    """Density matrices at every point of ``tau_grid`` (tau = time_scale * t)."""
    return [rho for _, rho in iter_exact(rho0, channels, tau_grid, time_scale, rtol, atol, backend)]


def energy_densities(rho, scenario=None):
    """<J_mu^z>/N_mu + 1/2 for every ensemble, charger first."""
    dims = rho.dims
    if scenario is not None and tuple(scenario.dims) != dims:
        raise InvalidArgument(f"scenario dims {scenario.dims} do not match state dims {dims}")
    p = np.real(np.diag(rho.data))
    kidx = level_indices(dims)
    out = []
    for e, d in enumerate(dims):
        n = d - 1
        jz = (n / 2 - kidx[e]) @ p
        out.append(float(jz / n + 0.5))
    return out


def partial_transpose(data, dims, partition):
    dims = tuple(dims)
    n = len(dims)
    t = data.reshape(dims + dims)
    axes = list(range(2 * n))
    for e in partition:
        axes[e], axes[n + e] = axes[n + e], axes[e]
    return t.transpose(axes).reshape(data.shape)


def logarithmic_negativity(rho, partition):
    """log2 of the trace norm of rho partially transposed over ``partition``."""
    if rho.dim > MAX_EXACT_DIM:
        raise CapacityError(
            f"dimension {rho.dim} too large for dense partial transpose; use the mean-field solver"
        )
    partition = sorted(set(int(e) for e in partition))
    if any(not 0 <= e < len(rho.dims) for e in partition):
        raise InvalidArgument(f"partition {partition} references unknown ensembles")
    pt = partial_transpose(rho.data, rho.dims, partition)
    pt = 0.5 * (pt + pt.conj().T)
    norm = np.abs(np.linalg.eigvalsh(pt)).sum()
    return max(0.0, float(np.log2(norm)))
