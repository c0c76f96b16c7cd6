"""Plug-in (histogram) information measures over discrete symbol streams.

All quantities are in bits.  Inputs are ``QuantizedBand`` objects, integer
arrays of symbols, or (for ``entropy``) a ``JointPmf``.  Entropy is always
computed from the sorted vector of nonzero cell counts, so two streams with
the same histogram up to relabeling give bit-identical entropies.  That is
what makes ``interaction_info(x, x, c) == -mutual_info(x, c)`` hold exactly.

The second half of the module is an exact oracle that evaluates the same
measures by direct summation over an explicit joint PMF.  It shares no code
with the estimators and exists to test them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cube import QuantizedBand

# product alphabet size above which joint histograms switch to a sparse count
DENSE_LIMIT = 1 << 24


def _symbols(x) -> np.ndarray:
    if isinstance(x, QuantizedBand):
        s = x.symbols
    else:
        s = np.asarray(x)
    if s.ndim != 1:
        s = s.ravel()
    if s.size == 0:
        raise ValueError("empty symbol stream")
    if s.dtype.kind not in "iu":
        if s.dtype.kind == "b":
            s = s.astype(np.int64)
        else:
            raise TypeError(f"symbols must be integers, got dtype {s.dtype}")
    if s.dtype.kind == "i" and s.min() < 0:
        raise ValueError("symbols must be non-negative")
    return s.astype(np.int64, copy=False)


def _same_length(*streams) -> None:
    n = streams[0].size
    for s in streams[1:]:
        if s.size != n:
            raise ValueError(f"sample length mismatch: {n} vs {s.size}")


def entropy_from_counts(counts) -> float:
    c = np.asarray(counts, dtype=np.float64).ravel()
    c = np.sort(c[c > 0])
    if c.size == 0:
        raise ValueError("entropy of an empty distribution")
    p = c / c.sum()
    return float(-np.sum(p * np.log2(p))) + 0.0


def _combine(streams) -> tuple:
    """Mixed-radix code for a tuple of streams, plus the product alphabet size."""
    code = streams[0]
    size = int(code.max()) + 1
    for s in streams[1:]:
        radix = int(s.max()) + 1
        code = code * radix + s
        size *= radix
    return code, size


def _joint_counts(*streams) -> np.ndarray:
    code, size = _combine(streams)
    if size <= DENSE_LIMIT:
        return np.bincount(code, minlength=0)
    _, counts = np.unique(code, return_counts=True)
    return counts


def _h(*streams) -> float:
    return entropy_from_counts(_joint_counts(*streams))


def entropy(x) -> float:
    """Shannon entropy ``-sum p log2 p``; a ``JointPmf`` gives the entropy of its whole table."""
    if isinstance(x, JointPmf):
        return entropy_from_counts(x.probs)
    return _h(_symbols(x))


def joint_entropy(x, y) -> float:
    sx, sy = _symbols(x), _symbols(y)
    _same_length(sx, sy)
    return _h(sx, sy)


def joint_entropy3(x, y, z) -> float:
    sx, sy, sz = _symbols(x), _symbols(y), _symbols(z)
    _same_length(sx, sy, sz)
    return _h(sx, sy, sz)


def _mi_raw(sx, sy) -> float:
    return _h(sx) + _h(sy) - _h(sx, sy)


def mutual_info(x, y) -> float:
    """``H(X) + H(Y) - H(X,Y)``, clamped at 0."""
    sx, sy = _symbols(x), _symbols(y)
    _same_length(sx, sy)
    return max(0.0, _mi_raw(sx, sy))


def normalized_mi_min(x, y) -> float:
    """MI divided by the smaller marginal entropy; 0 when either input is constant."""
    sx, sy = _symbols(x), _symbols(y)
    _same_length(sx, sy)
    h_min = min(_h(sx), _h(sy))
    if h_min <= 0.0:
        return 0.0
    return min(1.0, max(0.0, _mi_raw(sx, sy)) / h_min)


def normalized_mi_joint(b, gt) -> float:
    """``(H(B) + H(GT)) / H(B, GT)``, in [1, 2]."""
    sb, sg = _symbols(b), _symbols(gt)
    _same_length(sb, sg)
    h_joint = _h(sb, sg)
    if h_joint <= 0.0:
        raise ValueError("normalized MI undefined: inputs are jointly constant")
    return (_h(sb) + _h(sg)) / h_joint


def joint_pair_class_mi(x, y, c) -> float:
    """MI between the pair ``(X, Y)`` and ``C``: ``H(X,Y) + H(C) - H(X,Y,C)``."""
    sx, sy, sc = _symbols(x), _symbols(y), _symbols(c)
    _same_length(sx, sy, sc)
    return max(0.0, _h(sx, sy) + _h(sc) - _h(sx, sy, sc))


def interaction_info(x, y, c) -> float:
    """Signed interaction ``I((X,Y);C) - I(X;C) - I(Y;C)``.

    Positive values mean synergy, negative values redundancy.  Not clamped.
    """
    sx, sy, sc = _symbols(x), _symbols(y), _symbols(c)
    _same_length(sx, sy, sc)
    h_c = _h(sc)
    pair = _h(sx, sy) + h_c - _h(sx, sy, sc)
    return pair - (_h(sx) + h_c - _h(sx, sc)) - (_h(sy) + h_c - _h(sy, sc))


def conditional_mutual_info(x, y, z) -> float:
    """``I(X;Y|Z) = H(X|Z) + H(Y|Z) - H(X,Y|Z)``."""
    sx, sy, sz = _symbols(x), _symbols(y), _symbols(z)
    _same_length(sx, sy, sz)
    h_z = _h(sz)
    return (_h(sx, sz) - h_z) + (_h(sy, sz) - h_z) - (_h(sx, sy, sz) - h_z)


def interaction_info_conditional(x, y, z) -> float:
    """Interaction information via conditional entropies: ``I(X;Y|Z) - I(X;Y)``.

    Same quantity as :func:`interaction_info`, reached through a different
    set of entropies.  Used as a cross-check.
    """
    sx, sy = _symbols(x), _symbols(y)
    return conditional_mutual_info(x, y, z) - _mi_raw(sx, sy)


# --------------------------------------------------------------------------
# exact oracle over explicit PMFs
# --------------------------------------------------------------------------

PMF_TOL = 1e-12


@dataclass(frozen=True)
class JointPmf:
    """Dense probability table over 1 to 3 discrete variables."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if not 1 <= p.ndim <= 3:
            raise ValueError(f"JointPmf supports 1-3 variables, got {p.ndim}")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(math.fsum(p.ravel().tolist()) - 1.0) > PMF_TOL:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def dims(self) -> tuple:
        return self.probs.shape

    @classmethod
    def from_counts(cls, counts) -> "JointPmf":
        c = np.asarray(counts, dtype=np.float64)
        return cls(c / c.sum())


def _xlog(p: float) -> float:
    return 0.0 if p == 0.0 else -p * math.log2(p)


def _marginal(table: dict, keep: tuple) -> dict:
    parts: dict = {}
    for key, p in table.items():
        parts.setdefault(tuple(key[i] for i in keep), []).append(p)
    return {sub: math.fsum(ps) for sub, ps in parts.items()}


def _h_table(table: dict) -> float:
    return math.fsum(_xlog(p) for p in table.values())


def _cond_h(table: dict, target: tuple, given: tuple) -> float:
    """``H(target | given)`` as ``-sum p(t, g) log2 p(t | g)``."""
    joint = _marginal(table, target + given)
    cond = _marginal(table, given)
    n_t = len(target)
    terms = []
    for key, p in joint.items():
        if p > 0.0:
            terms.append(-p * math.log2(p / cond[key[n_t:]]))
    return math.fsum(terms)


def oracle_measures(pmf: JointPmf) -> dict:
    """Every measure the estimators provide, by exact summation over ``pmf``.

    Variables are named ``x``, ``y``, ``z`` in axis order.  For a 3-variable
    table, ``z`` plays the class role in the pair/class measures.
    """
    p = pmf.probs
    table = {idx: float(p[idx]) for idx in itertools.product(*(range(d) for d in p.shape))}
    n = p.ndim
    names = "xyz"[:n]
    out: dict = {}
    for r in range(1, n + 1):
        for combo in itertools.combinations(range(n), r):
            out["h_" + "".join(names[i] for i in combo)] = _h_table(_marginal(table, combo))
    if n >= 2:
        for a, b in itertools.combinations(range(n), 2):
            key = names[a] + names[b]
            # MI as relative entropy between joint and product of marginals
            pa = _marginal(table, (a,))
            pb = _marginal(table, (b,))
            terms = [q * math.log2(q / (pa[(i,)] * pb[(j,)]))
                     for (i, j), q in _marginal(table, (a, b)).items() if q > 0.0]
            mi = max(0.0, math.fsum(terms))
            out["mi_" + key] = mi
            h_min = min(out["h_" + names[a]], out["h_" + names[b]])
            out["nmi_min_" + key] = 0.0 if h_min <= 0.0 else mi / h_min
            h_ab = out["h_" + key]
            if h_ab > 0.0:
                out["nmi_joint_" + key] = (out["h_" + names[a]] + out["h_" + names[b]]) / h_ab
    if n == 3:
        pz = _marginal(table, (2,))
        pxy = _marginal(table, (0, 1))
        terms = [q * math.log2(q / (pxy[(i, j)] * pz[(k,)]))
                 for (i, j, k), q in table.items() if q > 0.0]
        out["mi_xy_z"] = max(0.0, math.fsum(terms))
        out["interaction"] = out["mi_xy_z"] - out["mi_xz"] - out["mi_yz"]
        cmi = (_cond_h(table, (0,), (2,)) + _cond_h(table, (1,), (2,))
               - _cond_h(table, (0, 1), (2,)))
        out["cmi_xy_given_z"] = cmi
        out["interaction_conditional"] = cmi - out["mi_xy"]
        h_xyz = out["h_xyz"]
        out["disr_term"] = 0.0 if h_xyz <= 0.0 else out["mi_xy_z"] / h_xyz
    return out


def sample_stream(counts) -> tuple:
    """Symbol streams realizing an integer count table exactly.

    Returns one array per axis; the stream has ``counts.sum()`` samples and
    cell ``idx`` appears exactly ``counts[idx]`` times.
    """
    c = np.asarray(counts)
    if c.dtype.kind not in "iu" or np.any(c < 0):
        raise ValueError("counts must be non-negative integers")
    cells = np.repeat(np.arange(c.size), c.ravel())
    return tuple(a.astype(np.int64) for a in np.unravel_index(cells, c.shape))
