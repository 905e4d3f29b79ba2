"""Hand-derived mean-field equations, written out term by term.

Independent of the symbolic engine: used as the oracle for the generated
systems. Names follow the engine's convention (s_a_b with a after b means
conj(s_b_a)); factor tuples are sorted.
"""

from qbcharge.moment_engine import MomentExpression


def _add(acc, coef, *names):
    key = tuple(sorted(names))
    acc[key] = acc.get(key, 0) + coef


def reference_system(n_batteries, gd, gu):
    labels = ["C"] + [f"B{m}" for m in range(1, n_batteries + 1)]
    z = {l: f"z_{l}" for l in labels}

    def s(a, b):
        return f"s_{a}_{b}"

    eqs = {}
    acc = {}
    for m in labels[1:]:
        _add(acc, -2 * gd, s("C", "C"))
        _add(acc, -gd, s("C", m))
        _add(acc, -gd, s(m, "C"))
    _add(acc, 2 * gu, s("C", "C"))
    _add(acc, -4 * gu, z["C"])
    eqs["z_C"] = acc
    for m in labels[1:]:
        acc = {}
        _add(acc, -2 * gd, s(m, m))
        _add(acc, -gd, s(m, "C"))
        _add(acc, -gd, s("C", m))
        eqs[z[m]] = acc

    for i, mu in enumerate(labels):
        for nu in labels[i:]:
            acc = {}
            for m in labels[1:]:
                chan = ("C", m)
                if mu in chan:
                    _add(acc, 2 * gd, z[mu], s("C", nu))
                    _add(acc, 2 * gd, z[mu], s(m, nu))
                if nu in chan:
                    _add(acc, 2 * gd, z[nu], s(mu, "C"))
                    _add(acc, 2 * gd, z[nu], s(mu, m))
            if nu == "C":
                _add(acc, -2 * gu, z["C"], s(mu, "C"))
                _add(acc, -2 * gu, s(mu, "C"))
            if mu == "C":
                _add(acc, -2 * gu, z["C"], s("C", nu))
                _add(acc, -2 * gu, s("C", nu))
            if mu == nu == "C":
                _add(acc, 8 * gu, z["C"], z["C"])
            eqs[s(mu, nu)] = acc
    return {k: MomentExpression(v) for k, v in eqs.items()}
