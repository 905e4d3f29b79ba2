"""Inner loops of both solvers.

Two kernels dominate runtime:

* ``eval_tape``: evaluates the flattened mean-field right-hand side,
  a sum of ``coef * v[a] * v[b]`` products scattered into output slots.
* ``lindblad_action``: applies the Lindblad generator to a density matrix
  stored only on its excitation-charge support (see
  :class:`qbcharge.exact_solver.PackedSupport`).

Each has a loop version compiled with numba and a vectorised numpy
version. ``QBCHARGE_DISABLE_NUMBA=1`` forces the numpy versions.
"""

import numpy as np
import scipy.sparse as sp

from ._accel import HAS_NUMBA, njit


# --- mean-field tape -------------------------------------------------------


def _eval_tape_loop(v, target, coef, ia, ib, out):
    out[:] = 0.0
    for t in range(target.shape[0]):
        out[target[t]] += coef[t] * v[ia[t]] * v[ib[t]]
    return out


def _eval_tape_numpy(v, target, coef, ia, ib, out):
    w = coef * v[ia] * v[ib]
    n = out.shape[0]
    out[:] = np.bincount(target, weights=w.real, minlength=n)
    out += 1j * np.bincount(target, weights=w.imag, minlength=n)
    return out


eval_tape_loop = njit(cache=True)(_eval_tape_loop)


def eval_tape(v, target, coef, ia, ib, out):
    """out[target[t]] += coef[t] * v[ia[t]] * v[ib[t]] over the whole tape."""
    if HAS_NUMBA:
        return eval_tape_loop(v, target, coef, ia, ib, out)
    return _eval_tape_numpy(v, target, coef, ia, ib, out)


# --- packed Lindblad action --------------------------------------------------


def _packed_pos(a, b, kexc, rank, count, qslot, offset, kmax):
    ka = kexc[a]
    kb = kexc[b]
    return offset[qslot[ka - kb + kmax], ka] + rank[a] * count[kb] + rank[b]


_packed_pos_jit = njit(cache=True, inline="always")(_packed_pos)


def _lindblad_action_loop(
    x, rows, cols, kexc, rank, count, qslot, offset, kmax,
    tstart, weight, src, amp, kcol, kval, out,
):
    nch = tstart.shape[0] - 1
    width = kcol.shape[1]
    for p in range(rows.shape[0]):
        i = rows[p]
        j = cols[p]
        acc = 0.0j
        for ch in range(nch):
            w = weight[ch]
            for t1 in range(tstart[ch], tstart[ch + 1]):
                a = src[t1, i]
                if a < 0:
                    continue
                ai = w * amp[t1, i]
                for t2 in range(tstart[ch], tstart[ch + 1]):
                    b = src[t2, j]
                    if b < 0:
                        continue
                    q = _packed_pos_jit(a, b, kexc, rank, count, qslot, offset, kmax)
                    acc += ai * np.conj(amp[t2, j]) * x[q]
        for s in range(width):
            a = kcol[i, s]
            if a >= 0:
                q = _packed_pos_jit(a, j, kexc, rank, count, qslot, offset, kmax)
                acc -= kval[i, s] * x[q]
            b = kcol[j, s]
            if b >= 0:
                q = _packed_pos_jit(i, b, kexc, rank, count, qslot, offset, kmax)
                acc -= np.conj(kval[j, s]) * x[q]
        out[p] = acc
    return out


lindblad_action_loop = njit(cache=True)(_lindblad_action_loop)


def assemble_packed_generator(
    rows, cols, kexc, rank, count, qslot, offset, kmax,
    tstart, weight, src, amp, kcol, kval,
):
    """Sparse matrix of the generator on the packed support (numpy path)."""
    n = rows.shape[0]
    p_all = np.arange(n)
    pos = lambda a, b: offset[qslot[kexc[a] - kexc[b] + kmax], kexc[a]] + rank[a] * count[kexc[b]] + rank[b]  # noqa: E731
    r_parts, c_parts, d_parts = [], [], []
    for ch in range(len(tstart) - 1):
        for t1 in range(tstart[ch], tstart[ch + 1]):
            a = src[t1, rows]
            for t2 in range(tstart[ch], tstart[ch + 1]):
                b = src[t2, cols]
                ok = (a >= 0) & (b >= 0)
                r_parts.append(p_all[ok])
                c_parts.append(pos(a[ok], b[ok]))
                d_parts.append(weight[ch] * amp[t1, rows[ok]] * np.conj(amp[t2, cols[ok]]))
    for s in range(kcol.shape[1]):
        a = kcol[rows, s]
        ok = a >= 0
        r_parts.append(p_all[ok])
        c_parts.append(pos(a[ok], cols[ok]))
        d_parts.append(-kval[rows[ok], s])
        b = kcol[cols, s]
        ok = b >= 0
        r_parts.append(p_all[ok])
        c_parts.append(pos(rows[ok], b[ok]))
        d_parts.append(-np.conj(kval[cols[ok], s]))
    if not r_parts:
        return sp.csr_matrix((n, n), dtype=complex)
    g = sp.coo_matrix(
        (np.concatenate(d_parts), (np.concatenate(r_parts), np.concatenate(c_parts))),
        shape=(n, n),
        dtype=complex,
    )
    return g.tocsr()
