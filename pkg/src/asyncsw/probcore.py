"""Finite-alphabet probability arithmetic.

Entropies, divergences, variational distance, the rho-tilted
distributions used by Gallager-type exponents, and the single-letter
exponent functions E^(1), E^(2), E^(3).  Every public quantity is in bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PMF_TOL = 1e-12
IDENTITY_TOL = 1e-9


def _validate(probs: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(probs)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(probs < 0):
        cell = tuple(int(i) for i in np.argwhere(probs < 0)[0])
        raise ValueError(f"{what} has a negative entry at {cell}")
    total = float(probs.sum())
    if abs(total - 1.0) > PMF_TOL:
        raise ValueError(f"{what} sums to {total!r}, not 1")
    return probs


@dataclass(frozen=True, eq=False)
class Pmf:
    """PMF over {0, ..., K-1}."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("empty PMF")
        _validate(p, "PMF")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __repr__(self):
        return f"Pmf({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint PMF P_XY stored as an |X| x |Y| matrix (rows index x)."""

    probs: np.ndarray
    px: np.ndarray = field(init=False, repr=False)
    py: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or 0 in p.shape:
            raise ValueError(f"joint PMF must be a non-empty matrix, got shape {p.shape}")
        _validate(p, "joint PMF")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        px = p.sum(axis=1)
        py = p.sum(axis=0)
        px.setflags(write=False)
        py.setflags(write=False)
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "py", py)

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @property
    def size_x(self) -> int:
        return self.probs.shape[0]

    @property
    def size_y(self) -> int:
        return self.probs.shape[1]

    def transpose(self) -> "JointPmf":
        """Swap the roles of X and Y."""
        return JointPmf(self.probs.T)

    def __repr__(self):
        return f"JointPmf({self.probs.tolist()})"


def dsbs(crossover: float) -> JointPmf:
    """Doubly symmetric binary source: X uniform, Y = X flipped w.p. `crossover`."""
    if not 0.0 <= crossover <= 1.0:
        raise ValueError("crossover must lie in [0, 1]")
    a = 0.5 * (1.0 - crossover)
    b = 0.5 * crossover
    return JointPmf([[a, b], [b, a]])


def random_joint(rng: np.random.Generator, size_x: int = 2, size_y: int = 2,
                 concentration: float = 1.0) -> JointPmf:
    """Dirichlet-distributed joint PMF; handy for randomized checks."""
    p = rng.dirichlet(np.full(size_x * size_y, concentration)).reshape(size_x, size_y)
    return JointPmf(p / p.sum())


def _arr(p) -> np.ndarray:
    if isinstance(p, (Pmf, JointPmf)):
        return p.probs
    return np.asarray(p, dtype=float)


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    return float(-_xlogx(_arr(p)).sum())


def conditional_entropy(cond: np.ndarray, weights: np.ndarray, axis: int = 0) -> float:
    """H(V|W) for a conditional PMF matrix `cond` and conditioning PMF `weights`.

    With ``axis=0`` the columns of `cond` are the conditional distributions
    (V(x|y) stored at [x, y]) and `weights` is indexed by the column.
    """
    cond = np.asarray(cond, dtype=float)
    per = -_xlogx(cond).sum(axis=axis)
    return float(np.dot(np.asarray(weights, dtype=float), per))


def joint_quantities(j: JointPmf) -> dict[str, float]:
    """H(X|Y), H(Y|X), H(X,Y), I(X;Y) and the marginal entropies, in bits."""
    hxy = entropy(j.probs)
    hx = entropy(j.px)
    hy = entropy(j.py)
    return {
        "H(X|Y)": hxy - hy,
        "H(Y|X)": hxy - hx,
        "H(X,Y)": hxy,
        "I(X;Y)": max(hx + hy - hxy, 0.0),
        "H(X)": hx,
        "H(Y)": hy,
    }


_H_KEYS = {1: "H(X|Y)", 2: "H(Y|X)", 3: "H(X,Y)"}


def h_index(j: JointPmf, index: int) -> float:
    """H_1 = H(X|Y), H_2 = H(Y|X), H_3 = H(X,Y)."""
    if index not in _H_KEYS:
        _bad_index(index)
    return joint_quantities(j)[_H_KEYS[index]]


def _bad_index(index):
    raise ValueError(f"index must be 1, 2 or 3, got {index!r}")


def kl_divergence(p, q) -> float:
    """D(p||q) in bits.  Raises ValueError if p is not absolutely continuous w.r.t. q."""
    pa, qa = _arr(p), _arr(q)
    if pa.shape != qa.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    bad = (pa > 0) & (qa <= 0)
    if np.any(bad):
        cell = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"divergence undefined: p > 0 but q = 0 at cell {cell}")
    pos = pa > 0
    return float(np.sum(pa[pos] * (np.log2(pa[pos]) - np.log2(qa[pos]))))


def variational_distance(p, q) -> float:
    """L1 distance sum |p - q| (lies in [0, 2])."""
    pa, qa = _arr(p), _arr(q)
    if pa.shape != qa.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {qa.shape}")
    return float(np.abs(pa - qa).sum())


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return rho


def _power(p: np.ndarray, s: float) -> np.ndarray:
    # zeros stay zero for any exponent s > 0
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = np.exp(s * np.log(p[pos]))
    return out


def _normalize_columns(m: np.ndarray, axis: int) -> np.ndarray:
    tot = m.sum(axis=axis, keepdims=True)
    safe = np.where(tot > 0, tot, 1.0)
    return m / safe


@dataclass(frozen=True, eq=False)
class TiltedTriple:
    """The rho-tilted objects built from one joint PMF.

    Conditional matrices keep the joint's layout: ``cond_x_given_y[x, y]``
    and ``cond_y_given_x[x, y]``.  Columns (rows) whose conditioning symbol
    has zero probability are left at zero; they carry no weight anywhere.
    """

    rho: float
    tilted_x: np.ndarray
    tilted_y: np.ndarray
    cond_x_given_y: np.ndarray
    cond_y_given_x: np.ndarray
    bar_x: np.ndarray
    bar_y: np.ndarray
    tilted_joint: np.ndarray

    def product_bar_y(self) -> np.ndarray:
        """bar P_Y^(rho) x P_{X|Y}^(rho) as an |X| x |Y| matrix."""
        return self.cond_x_given_y * self.bar_y[None, :]

    def product_bar_x(self) -> np.ndarray:
        """bar P_X^(rho) x P_{Y|X}^(rho) as an |X| x |Y| matrix."""
        return self.cond_y_given_x * self.bar_x[:, None]


def tilt_pmf(p, rho: float) -> np.ndarray:
    """p^(1/(1+rho)) renormalized."""
    rho = _check_rho(rho)
    w = _power(_arr(p), 1.0 / (1.0 + rho))
    return w / w.sum()


def tilt(j: JointPmf, rho: float) -> TiltedTriple:
    rho = _check_rho(rho)
    s = 1.0 / (1.0 + rho)
    p = j.probs
    w = _power(p, s)
    col = w.sum(axis=0)
    row = w.sum(axis=1)
    bar_y = _power(col, 1.0 + rho)
    bar_x = _power(row, 1.0 + rho)
    return TiltedTriple(
        rho=rho,
        tilted_x=tilt_pmf(j.px, rho),
        tilted_y=tilt_pmf(j.py, rho),
        cond_x_given_y=_normalize_columns(w, axis=0),
        cond_y_given_x=_normalize_columns(w, axis=1),
        bar_x=bar_x / bar_x.sum(),
        bar_y=bar_y / bar_y.sum(),
        tilted_joint=w / w.sum(),
    )


def gallager_E(index: int, rho: float, j) -> float:
    """Single-letter Gallager function in bits.

    E^(1) = log sum_y (sum_x P(x,y)^(1/(1+rho)))^(1+rho), E^(2) mirrors it,
    and E^(3) = (1+rho) log sum P^(1/(1+rho)) taken over every cell of `j`
    (a marginal Pmf or a joint).
    """
    rho = _check_rho(rho)
    s = 1.0 / (1.0 + rho)
    if index == 3:
        w = _power(_arr(j), s)
        return float((1.0 + rho) * np.log2(w.sum()))
    if not isinstance(j, JointPmf):
        j = JointPmf(j)
    w = _power(j.probs, s)
    if index == 1:
        inner = w.sum(axis=0)
    elif index == 2:
        inner = w.sum(axis=1)
    else:
        _bad_index(index)
    return float(np.log2(_power(inner, 1.0 + rho).sum()))


def gallager_identity_residual(index: int, rho: float, j) -> float:
    """rho*H(tilted) - E^(i) - D(tilted || original); zero up to rounding.

    Index 1 and 2 use the conditional entropy of the tilted conditional
    under the barred marginal; index 3 applies to whatever PMF is given
    (marginal or joint, the latter taken as one distribution over cells).
    """
    rho = _check_rho(rho)
    if index == 3:
        p = _arr(j)
        t = tilt_pmf(p, rho)
        return rho * entropy(t) - gallager_E(3, rho, p) - kl_divergence(t, p)
    if not isinstance(j, JointPmf):
        j = JointPmf(j)
    tt = tilt(j, rho)
    if index == 1:
        h = conditional_entropy(tt.cond_x_given_y, tt.bar_y, axis=0)
        d = kl_divergence(tt.product_bar_y(), j.probs)
    elif index == 2:
        h = conditional_entropy(tt.cond_y_given_x, tt.bar_x, axis=1)
        d = kl_divergence(tt.product_bar_x(), j.probs)
    else:
        _bad_index(index)
    return rho * h - gallager_E(index, rho, j) - d


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return entropy([p, 1.0 - p])
