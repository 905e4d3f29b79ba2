"""Mean-field equations from symbolic su(2) algebra.

Pipeline: for every tracked observable A (J_mu^z, and J_mu^+ J_nu^- for
mu <= nu), form the adjoint generator

    sum_c rate_c (L^+ [A, L] + [L^+, A] L),

normal-order it with the per-ensemble rewrite rules

    J^- J^+ -> J^+ J^- - 2 J^z
    J^z J^+ -> J^+ J^z + J^+
    J^- J^z -> J^z J^- + J^-

(canonical order within an ensemble is +, z, -; different ensembles
commute), then close the hierarchy at second order:

    <J_a^+ J_b^z J_c^->  ->  z_b s_ac
    <J_a^z J_b^z>        ->  z_a z_b
    <J_a^+ J_b^->        ->  s_ab
    <J_a^z>              ->  z_a

and every monomial whose raising and lowering counts differ is dropped
(the generators are invariant under a common phase rotation, so those
moments vanish for the diagonal initial states used here).

This closure is the standard one for collective superradiance. It is an
interpretation: at small ensemble sizes it can be quantitatively off (a
single pumped spin relaxes to the wrong fixed point), which is why it is
cross-checked against the exact solver rather than trusted blindly.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from . import kernels
from .errors import InvalidArgument, UnsupportedClosure
from .exact_solver import RAISE, build_channels
from .spin_algebra import EXCITED, collective_operators

PLUS, ZED, MINUS = "+", "z", "-"
_RANK = {PLUS: 0, ZED: 1, MINUS: 2}
_DAGGER = {PLUS: MINUS, ZED: ZED, MINUS: PLUS}


def default_labels(n):
    return ("C",) + tuple(f"B{m}" for m in range(1, n))


@dataclass(frozen=True)
class OperatorMonomial:
    """coefficient * prod_mu (J_mu^+)^a (J_mu^z)^b (J_mu^-)^c."""

    coefficient: complex
    exponents: tuple

    @property
    def degree(self):
        return sum(a + b + c for a, b, c in self.exponents)

    def word(self):
        w = []
        for ens, (a, b, c) in enumerate(self.exponents):
            w += [(ens, PLUS)] * a + [(ens, ZED)] * b + [(ens, MINUS)] * c
        return tuple(w)


class OperatorPolynomial:
    """Linear combination of operator words.

    A word is a tuple of ``(ensemble, kind)`` factors in product order;
    ``kind`` is "+", "z" or "-". Multiplication concatenates words without
    reordering; call :func:`normal_order` to reach canonical form.
    """

    def __init__(self, terms=None, n_ensembles=1):
        self.n_ensembles = int(n_ensembles)
        self.terms = {}
        for word, c in (terms or {}).items():
            word = tuple((int(e), k) for e, k in word)
            for e, k in word:
                if k not in _RANK or not 0 <= e < self.n_ensembles:
                    raise InvalidArgument(f"bad factor {(e, k)} for {self.n_ensembles} ensembles")
            c = self.terms.get(word, 0) + complex(c)
            self.terms[word] = c
        self.terms = {w: c for w, c in self.terms.items() if c != 0}

    @classmethod
    def generator(cls, ensemble, kind, n_ensembles):
        return cls({((ensemble, kind),): 1}, n_ensembles)

    @classmethod
    def identity(cls, n_ensembles):
        return cls({(): 1}, n_ensembles)

    def _n(self, other):
        return max(self.n_ensembles, other.n_ensembles)

    def __add__(self, other):
        if not isinstance(other, OperatorPolynomial):
            other = OperatorPolynomial.identity(self.n_ensembles) * other
        terms = dict(self.terms)
        for w, c in other.terms.items():
            terms[w] = terms.get(w, 0) + c
        return OperatorPolynomial(terms, self._n(other))

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, OperatorPolynomial):
            terms = {}
            for (w1, c1), (w2, c2) in product(self.terms.items(), other.terms.items()):
                terms[w1 + w2] = terms.get(w1 + w2, 0) + c1 * c2
            return OperatorPolynomial(terms, self._n(other))
        return OperatorPolynomial({w: c * other for w, c in self.terms.items()}, self.n_ensembles)

    def __rmul__(self, other):
        return self * other

    def __eq__(self, other):
        if isinstance(other, OperatorPolynomial):
            return self.terms == other.terms
        return NotImplemented

    def dagger(self):
        return OperatorPolynomial(
            {tuple((e, _DAGGER[k]) for e, k in reversed(w)): np.conj(c) for w, c in self.terms.items()},
            self.n_ensembles,
        )

    @property
    def degree(self):
        return max((len(w) for w in self.terms), default=0)

    def is_normal_ordered(self):
        return all(w == _canonical_key(w) for w in self.terms)

    def monomials(self):
        if not self.is_normal_ordered():
            raise InvalidArgument("monomials() needs a normal-ordered polynomial")
        out = []
        for w, c in self.terms.items():
            exps = [[0, 0, 0] for _ in range(self.n_ensembles)]
            for e, k in w:
                exps[e][_RANK[k]] += 1
            out.append(OperatorMonomial(c, tuple(tuple(x) for x in exps)))
        return out

    def to_matrix(self, n_spins):
        """Dense matrix on the product of spin-N/2 sectors, for checks."""
        if len(n_spins) != self.n_ensembles:
            raise InvalidArgument("need one spin count per ensemble")
        mats = []
        for n in n_spins:
            jp, jm, jz = collective_operators(n)
            mats.append({PLUS: jp, ZED: jz, MINUS: jm})
        dims = [n + 1 for n in n_spins]
        out = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
        for w, c in self.terms.items():
            per = [np.eye(d) for d in dims]
            for e, k in w:
                per[e] = per[e] @ mats[e][k]
            full = per[0]
            for m in per[1:]:
                full = np.kron(full, m)
            out += c * full
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for w, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0])):
            name = " ".join(f"J{e}{k}" for e, k in w) or "1"
            parts.append(f"({c:g})*{name}")
        return " + ".join(parts)


def _canonical_key(word):
    return tuple(sorted(word, key=lambda f: (f[0], _RANK[f[1]])))


@lru_cache(maxsize=None)
def _order_letters(letters):
    """Normal-order a single-ensemble word; returns ((letters, coef), ...)."""
    for i in range(len(letters) - 1):
        x, y = letters[i], letters[i + 1]
        if _RANK[x] <= _RANK[y]:
            continue
        pre, post = letters[:i], letters[i + 2 :]
        if (x, y) == (ZED, PLUS):
            rewrites = [((PLUS, ZED), 1), ((PLUS,), 1)]
        elif (x, y) == (MINUS, PLUS):
            rewrites = [((PLUS, MINUS), 1), ((ZED,), -2)]
        else:  # (MINUS, ZED)
            rewrites = [((ZED, MINUS), 1), ((MINUS,), 1)]
        acc = {}
        for mid, c in rewrites:
            for w, c2 in _order_letters(pre + mid + post):
                acc[w] = acc.get(w, 0) + c * c2
        return tuple((w, c) for w, c in acc.items() if c != 0)
    return ((letters, 1),)


def normal_order(poly):
    """Rewrite ``poly`` into canonical +, z, - order within each ensemble."""
    terms = {}
    for word, coef in poly.terms.items():
        per_ens = {}
        for e, k in word:
            per_ens.setdefault(e, []).append(k)
        ens = sorted(per_ens)
        expansions = [_order_letters(tuple(per_ens[e])) for e in ens]
        for combo in product(*expansions):
            c = coef
            w = []
            for e, (letters, ci) in zip(ens, combo):
                c = c * ci
                w += [(e, k) for k in letters]
            w = tuple(w)
            terms[w] = terms.get(w, 0) + c
    return OperatorPolynomial(terms, poly.n_ensembles)


def _jump_polynomial(channel, n_ensembles):
    out = OperatorPolynomial({}, n_ensembles)
    for ens, kind, coef in channel.terms:
        out = out + OperatorPolynomial.generator(ens, PLUS if kind == RAISE else MINUS, n_ensembles) * coef
    return out


def adjoint_rhs(observable, channels):
    """Heisenberg-picture generator applied to ``observable``, normal-ordered."""
    n = observable.n_ensembles
    for ch in channels:
        n = max(n, 1 + max((e for e, _, _ in ch.terms), default=-1))
    obs = OperatorPolynomial(observable.terms, n)
    out = OperatorPolynomial({}, n)
    for ch in channels:
        if ch.rate == 0:
            continue
        jump = _jump_polynomial(ch, n)
        jd = jump.dagger()
        comm1 = obs * jump - jump * obs
        comm2 = jd * obs - obs * jd
        out = out + (jd * comm1 + comm2 * jump) * ch.rate
    return normal_order(out)


class MomentExpression:
    """Polynomial in moment variables: {sorted tuple of names: coefficient}.

    ``s_a_b`` with a after b in ensemble order stands for conj(s_b_a).
    """

    def __init__(self, terms=None):
        self.terms = {}
        for k, c in (terms or {}).items():
            k = tuple(sorted(k))
            self.terms[k] = self.terms.get(k, 0) + complex(c)
        self.terms = {k: c for k, c in self.terms.items() if c != 0}

    def __add__(self, other):
        merged = dict(self.terms)
        for k, c in other.terms.items():
            merged[k] = merged.get(k, 0) + c
        return MomentExpression(merged)

    def __eq__(self, other):
        return isinstance(other, MomentExpression) and self.terms == other.terms

    def isclose(self, other, tol=1e-12):
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= tol for k in keys)

    def evaluate(self, values):
        """Evaluate with ``values`` mapping z/s names (mu <= nu only) to numbers."""
        total = 0j
        for key, c in self.terms.items():
            term = c
            for name in key:
                term = term * _lookup(values, name)
            total += term
        return total

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for key, c in sorted(self.terms.items()):
            c = c.real if c.imag == 0 else c
            parts.append(f"{c:+g}" + "".join(f"*{n}" for n in key))
        return " ".join(parts)


def _split_s(name):
    _, a, b = name.split("_")
    return a, b


def _lookup(values, name):
    if name in values:
        return values[name]
    a, b = _split_s(name)
    return np.conj(values[f"s_{b}_{a}"])


def cumulant_close(poly, labels=None):
    """Second-order cumulant closure of a normal-ordered polynomial."""
    labels = labels or default_labels(poly.n_ensembles)
    if not poly.is_normal_ordered():
        poly = normal_order(poly)
    out = {}
    for w, c in poly.terms.items():
        if len(w) > 3:
            raise UnsupportedClosure(f"degree {len(w)} monomial {w} beyond second-order closure")
        ps = [e for e, k in w if k == PLUS]
        zs = [e for e, k in w if k == ZED]
        ms = [e for e, k in w if k == MINUS]
        if len(ps) != len(ms):
            continue
        if not w:
            key = ()
        elif len(ps) == 1:
            key = (f"s_{labels[ps[0]]}_{labels[ms[0]]}",) + tuple(f"z_{labels[e]}" for e in zs)
        elif len(zs) <= 2:
            key = tuple(f"z_{labels[e]}" for e in zs)
        else:
            raise UnsupportedClosure(f"no closure rule for {w}")
        key = tuple(sorted(key))
        out[key] = out.get(key, 0) + c
    return MomentExpression(out)


@dataclass(frozen=True)
class MomentState:
    """Mean-field variables: z_mu and packed s_{mu nu} (mu <= nu)."""

    z: np.ndarray
    s: np.ndarray
    n_spins: tuple

    @property
    def pairs(self):
        return pair_list(len(self.n_spins))

    def s_matrix(self):
        n = len(self.n_spins)
        out = np.zeros((n, n), dtype=complex)
        for p, (a, b) in enumerate(self.pairs):
            out[a, b] = self.s[p]
            out[b, a] = np.conj(self.s[p])
        return out

    def energies(self):
        return self.z / np.asarray(self.n_spins, dtype=float) + 0.5

    def scales(self):
        n = np.asarray(self.n_spins, dtype=float)
        return n, np.array([n[a] * n[b] for a, b in self.pairs])

    def to_vector(self):
        """Real vector of normalised variables used by the integrator."""
        nz, ns = self.scales()
        s = self.s / ns
        return np.concatenate([self.z / nz, s.real, s.imag])

    @classmethod
    def from_vector(cls, y, n_spins):
        n = len(n_spins)
        npair = n * (n + 1) // 2
        tmp = cls(np.zeros(n), np.zeros(npair, dtype=complex), tuple(n_spins))
        nz, ns = tmp.scales()
        z = y[:n] * nz
        s = (y[n : n + npair] + 1j * y[n + npair :]) * ns
        return cls(z, s, tuple(n_spins))


def pair_list(n):
    return tuple((a, b) for a in range(n) for b in range(a, n))


def initial_moments(scenario):
    """Moments of the product of fully excited / fully ground ensembles."""
    n = len(scenario.n_spins)
    z = np.array(
        [N / 2 if lev == EXCITED else -N / 2 for N, lev in zip(scenario.n_spins, scenario.initial_levels)],
        dtype=float,
    )
    s = np.zeros(n * (n + 1) // 2, dtype=complex)
    for p, (a, b) in enumerate(pair_list(n)):
        if a == b and scenario.initial_levels[a] == EXCITED:
            s[p] = scenario.n_spins[a]  # <J^+J^-> = 2j on |j, j>
    return MomentState(z, s, scenario.n_spins)


class MomentSystem:
    """Closed second-order equations d<X>/dt for X in {z_mu, s_{mu nu}}.

    Rates are the raw channel rates (unscaled time). ``rhs`` evaluates
    through a flat product tape compiled once at construction.
    """

    closure_order = 2

    def __init__(self, labels, equations):
        self.labels = tuple(labels)
        n = len(self.labels)
        self.z_names = tuple(f"z_{l}" for l in self.labels)
        self.pairs = pair_list(n)
        self.s_names = tuple(f"s_{self.labels[a]}_{self.labels[b]}" for a, b in self.pairs)
        self.variables = self.z_names + self.s_names
        missing = set(self.variables) - set(equations)
        if missing:
            raise InvalidArgument(f"missing equations for {sorted(missing)}")
        self.equations = {v: equations[v] for v in self.variables}
        self._compile()

    def _slot(self, name):
        n, npair = len(self.labels), len(self.pairs)
        if name.startswith("z_"):
            return 1 + self.z_names.index(name)
        if name in self.s_names:
            return 1 + n + self.s_names.index(name)
        a, b = _split_s(name)
        return 1 + n + npair + self.s_names.index(f"s_{b}_{a}")

    def _compile(self):
        target, coef, ia, ib = [], [], [], []
        for t, var in enumerate(self.variables):
            for key, c in self.equations[var].terms.items():
                slots = [self._slot(nm) for nm in key] + [0, 0]
                target.append(t)
                coef.append(c)
                ia.append(slots[0])
                ib.append(slots[1])
        self.tape = (
            np.array(target, dtype=np.int64),
            np.array(coef, dtype=complex),
            np.array(ia, dtype=np.int64),
            np.array(ib, dtype=np.int64),
        )
        n, npair = len(self.labels), len(self.pairs)
        self._v = np.zeros(1 + n + 2 * npair, dtype=complex)
        self._v[0] = 1.0
        self._out = np.zeros(n + npair, dtype=complex)

    def rhs(self, z, s):
        """Return (dz, ds) for real z and packed complex s."""
        n, npair = len(self.labels), len(self.pairs)
        v = self._v
        v[1 : 1 + n] = z
        v[1 + n : 1 + n + npair] = s
        v[1 + n + npair :] = np.conj(s)
        out = kernels.eval_tape(v, *self.tape, self._out)
        return out[:n].real.copy(), out[n:].copy()

    def lines(self):
        return [f"d{v}/dt = {self.equations[v]}" for v in self.variables]

    def dump(self):
        return "\n".join(self.lines()) + "\n"


def moment_system_from_channels(channels, n_ensembles, labels=None):
    labels = tuple(labels or default_labels(n_ensembles))
    eqs = {}
    gen = OperatorPolynomial.generator
    for mu in range(n_ensembles):
        obs = gen(mu, ZED, n_ensembles)
        eqs[f"z_{labels[mu]}"] = cumulant_close(adjoint_rhs(obs, channels), labels)
    for a, b in pair_list(n_ensembles):
        obs = gen(a, PLUS, n_ensembles) * gen(b, MINUS, n_ensembles)
        eqs[f"s_{labels[a]}_{labels[b]}"] = cumulant_close(adjoint_rhs(obs, channels), labels)
    return MomentSystem(labels, eqs)


def generate_moment_system(scenario):
    """Closed mean-field system for the scenario's channel list."""
    return moment_system_from_channels(build_channels(scenario), len(scenario.n_spins), scenario.labels)
