"""Closed-form upper and lower bounds on expected Wasserstein risk, plus multinomial tools."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from . import errors
from .metric import FiniteMetricSpace
from .partitions import packing_radii
from .reports import BoundReport, make_report

LOG2 = math.log(2.0)

THEOREM1_VARIANTS = ("canonical", "main", "appendix")
THEOREM2_VARIANTS = ("statement", "proof")


def _check_n(n):
    if int(n) != n or n < 1:
        raise errors.ValidationError(f"sample size n must be a positive integer, got {n!r}")


def _check_r(r):
    if not (r >= 1 and math.isfinite(r)):
        raise errors.NonpositiveOrder(f"order r must be a finite real >= 1, got {r!r}")


def _eps_list(eps_seq, allow_empty=False):
    eps = [float(e) for e in eps_seq]
    if not eps and not allow_empty:
        raise errors.ValidationError("eps sequence is empty")
    if any(not (e >= 0 and math.isfinite(e)) for e in eps):
        raise errors.ValidationError("eps values must be finite and nonnegative")
    for a, b in zip(eps, eps[1:]):
        if b > a:
            raise errors.NotNonIncreasing(f"eps sequence increases: {a!r} -> {b!r}")
    return eps


# --------------------------------------------------------------------------
# bounded spaces


def theorem1_bound(
    eps_seq: Sequence[float],
    covering: Sequence[int],
    n: int,
    r: float,
    diameter: float,
    variant: str = "canonical",
) -> BoundReport:
    """Multi-resolution upper bound on ``E W_r^r(P, P_n)`` for a bounded space.

    ``eps_k^r + n^{-1/2} sum_k res_{k-1}^r sqrt(N(eps_k) - 1)`` with
    ``res_0 = diameter`` and, for ``k >= 1``:

    * ``"canonical"``: ``res_k = sum_{j=k}^K 2^{j-k} eps_j`` (the recursion
      ``Res_k <= eps_k + 2 Res_{k+1}``);
    * ``"main"``: ``res_k = sum_{j=k}^K 2^{K-j} eps_j``;
    * ``"appendix"``: ``res_k = sum_{j=k-1}^K 2^{j-k} eps_j`` with ``eps_0 = diameter``.

    ``eps`` values of 0 are allowed, giving the limit form.
    """
    eps = _eps_list(eps_seq)
    K = len(eps)
    counts = [int(c) for c in covering]
    if len(counts) != K or any(c < 1 for c in counts) or any(int(c) != c for c in covering):
        raise errors.BadCounts(f"need {K} positive integer covering counts, got {list(covering)!r}")
    _check_n(n)
    _check_r(r)
    if variant not in THEOREM1_VARIANTS:
        raise errors.ValidationError(f"unknown variant {variant!r}")
    if not (diameter >= 0):
        raise errors.ValidationError("diameter must be nonnegative")
    e = [float(diameter)] + eps  # e[j] = eps_j, e[0] = Diam

    def res(k):
        if k == 0:
            return float(diameter)
        if variant == "canonical":
            return math.fsum(2.0 ** (j - k) * e[j] for j in range(k, K + 1))
        if variant == "main":
            return math.fsum(2.0 ** (K - j) * e[j] for j in range(k, K + 1))
        return math.fsum(2.0 ** (j - k) * e[j] for j in range(k - 1, K + 1))

    terms = [("truncation", eps[-1] ** r)]
    for k in range(1, K + 1):
        terms.append((f"level {k}", res(k - 1) ** r * math.sqrt((counts[k - 1] - 1) / n)))
    params = {"n": n, "r": r, "eps": eps, "covering": counts, "K": K, "diameter": diameter, "variant": variant}
    return make_report(terms, params)


def theorem1_limit_form(space: FiniteMetricSpace, n: int, r: float) -> BoundReport:
    """``K = 1`` with ``eps_1 -> 0``: ``Diam^r sqrt((|Omega| - 1) / n)``."""
    return theorem1_bound([0.0], [space.size], n, r, space.diameter())


# --------------------------------------------------------------------------
# unbounded spaces


def theorem2_bound(
    w_seq: Sequence[float],
    eps_seq: Sequence[float],
    shell_covers,
    moment: float,
    ell: float,
    n: int,
    r: float,
    eps0: Optional[float] = None,
    tail: str = "bounded",
    variant: str = "statement",
) -> BoundReport:
    """Shell upper bound on ``E W_r^r(P, P_n)`` under an ``ell``-th moment condition.

    ``w_seq = (w_0 = 0, w_1, ..., w_K)`` gives shells ``k = 0..K-1`` with
    supplied covering counts ``shell_covers[k][j-1] = N(B_k, eps_j)``.  Each
    shell contributes

    ``q_k eps_J^r + 2^r w_k^r min(2 q_k, sqrt(q_k / n))
    + sum_j res_j^r min(2 q_k, sqrt(q_k N(B_k, eps_j) / n))``

    with ``q_k = min(1, w_k^-ell)``; the total is multiplied by ``moment**ell``.
    ``res_j = sum_{t=j}^J 2^{J-t} eps_t`` (``"statement"``) or
    ``(2^{j+1} - 1) eps_j`` (``"proof"``).  With ``J = 0`` the truncation
    resolution is ``eps0``.

    ``tail="bounded"`` asserts nothing lies beyond ``w_K``.  ``tail="geometric"``
    continues with ``w_{K+t} = 2^t w_K`` and bounds each further shell by
    ``q_k (eps_J^r + 2^{r+1} w_k^r + 2 sum_j res_j^r)``, summed in closed form
    (needs ``ell > r``).
    """
    w = np.asarray(w_seq, dtype=float)
    if w.ndim != 1 or w.size < 2 or w[0] != 0 or (np.diff(w) <= 0).any() or not np.isfinite(w).all():
        raise errors.BadShellTable("w_seq must start at 0 and increase strictly")
    K = w.size - 1
    eps = _eps_list(eps_seq, allow_empty=True)
    J = len(eps)
    if J:
        table = np.asarray(shell_covers, dtype=float)
        if table.shape != (K, J):
            raise errors.BadShellTable(f"shell_covers must have shape ({K}, {J}), got {table.shape}")
    else:
        table = np.zeros((K, 0))
    if (table < 0).any() or not np.isfinite(table).all():
        raise errors.BadShellTable("covering counts must be finite and nonnegative")
    if not (moment >= 1):
        raise errors.MomentBelowOne(f"moment must be >= 1, got {moment!r}")
    if not (ell > 0):
        raise errors.NonpositiveOrder(f"moment order must be positive, got {ell!r}")
    _check_n(n)
    _check_r(r)
    if tail not in ("bounded", "geometric"):
        raise errors.ValidationError(f"unknown tail mode {tail!r}")
    if variant not in THEOREM2_VARIANTS:
        raise errors.ValidationError(f"unknown variant {variant!r}")
    if J == 0:
        eps_J = 0.0 if eps0 is None else float(eps0)
    else:
        eps_J = eps[-1]
    if variant == "statement":
        res = [math.fsum(2.0 ** (J - t) * eps[t - 1] for t in range(j, J + 1)) for j in range(1, J + 1)]
    else:
        res = [(2.0 ** (j + 1) - 1) * eps[j - 1] for j in range(1, J + 1)]

    def q(wk):
        return 1.0 if wk <= 1 else wk ** (-ell)

    factor = moment**ell
    terms = []
    for k in range(K):
        qk = q(w[k])
        terms.append((f"shell {k} truncation", factor * qk * eps_J**r))
        terms.append((f"shell {k} mass", factor * 2.0**r * w[k] ** r * min(2 * qk, math.sqrt(qk / n))))
        for j in range(1, J + 1):
            val = res[j - 1] ** r * min(2 * qk, math.sqrt(qk * table[k, j - 1] / n))
            terms.append((f"shell {k} level {j}", factor * val))
    if tail == "geometric":
        if not ell > r:
            raise errors.ValidationError(f"geometric tail needs ell > r (ell={ell}, r={r})")
        lead = eps_J**r + 2 * math.fsum(x**r for x in res)
        total, wk = 0.0, float(w[K])
        while wk <= 1:  # q capped at 1; sum these shells explicitly
            total += lead + 2.0 ** (r + 1) * wk**r
            wk *= 2
        # remaining shells: q = wk^-ell, geometric in wk
        total += lead * wk ** (-ell) / (1 - 2.0 ** (-ell))
        total += 2.0 ** (r + 1) * wk ** (r - ell) / (1 - 2.0 ** (r - ell))
        terms.append(("tail", factor * total))
    params = {
        "n": n, "r": r, "ell": ell, "moment": moment, "w": w.tolist(), "eps": eps, "J": J, "K": K,
        "eps0": eps0, "shell_covers": table.tolist(), "tail": tail, "variant": variant,
    }
    return make_report(terms, params)


# --------------------------------------------------------------------------
# lower bounds


def theorem3_constant(r: float) -> float:
    """``c_r = 3 log 2 / 2^(r + 12)``."""
    return 3 * LOG2 / 2.0 ** (r + 12)


def theorem3_lower_bound(radii: Mapping[int, float], n: int, r: float) -> BoundReport:
    """Packing-radius lower bound ``c_r max_k R(k)^r sqrt((k - 1) / n)``.

    Only ``2 <= k <= 32 n`` with finite ``R(k)`` are used; the report's
    ``params["argmax"]`` records the maximizing ``k``.
    """
    _check_n(n)
    _check_r(r)
    c = theorem3_constant(r)
    terms = []
    for k in sorted(radii):
        R = float(radii[k])
        if k < 2 or k > 32 * n or not math.isfinite(R):
            continue
        terms.append((f"k={k}", c * R**r * math.sqrt((k - 1) / n)))
    if not terms:
        raise errors.NoFiniteRadii("no finite packing radius with 2 <= k <= 32n")
    rep = make_report(terms, {"n": n, "r": r, "c_r": c}, combine="max")
    best = max(terms, key=lambda t: t[1])[0]
    rep.params["argmax"] = int(best[2:])
    return rep


def theorem3_for_space(space: FiniteMetricSpace, n: int, r: float, mode: Optional[str] = None) -> BoundReport:
    """Theorem-3 lower bound with packing radii computed on ``space``."""
    if mode is None:
        mode = "exact" if space.size <= 20 else "greedy"
    kmax = min(32 * n, space.size)
    return theorem3_lower_bound(packing_radii(space, kmax, mode), n, r)


# --------------------------------------------------------------------------
# multinomial


def multinomial_l1_bound(K: int, n: int) -> float:
    """``sqrt((K - 1) / n)``, bounding ``E ||X/n - p||_1`` for ``X ~ Mult(n, p)`` over K cells."""
    if K < 1:
        raise errors.ValidationError("K must be >= 1")
    _check_n(n)
    return math.sqrt((K - 1) / n)


def binomial_mad_bound(n: int, p: float) -> float:
    """``n min(2p, sqrt(p / n))``, bounding ``E|X - np|`` for ``X ~ Bin(n, p)``."""
    _check_n(n)
    if not 0 <= p <= 1:
        raise errors.ValidationError(f"p must lie in [0, 1], got {p!r}")
    return n * min(2 * p, math.sqrt(p / n))


def multinomial_minimax_lower(k: int, n: int) -> float:
    """``(3 log 2 / 4096) sqrt((k - 1) / n)``, valid for ``2 <= k <= 32 n``."""
    _check_n(n)
    if k < 2:
        raise errors.ValidationError("k must be >= 2")
    if k > 32 * n:
        raise errors.KTooLargeForN(f"k = {k} exceeds 32n = {32 * n}")
    return 3 * LOG2 / 4096 * math.sqrt((k - 1) / n)


def kl_categorical(p, q) -> float:
    """``sum_j p_j log(p_j / q_j)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise errors.ValidationError("p and q have different lengths")
    pos = p > 0
    if (q[pos] <= 0).any():
        raise errors.AbsoluteContinuityViolation("q vanishes where p is positive")
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])))


@dataclass(frozen=True, eq=False)
class HardInstanceFamily:
    """Perturbations ``p_tau = p0 + (c/k) sum_j tau_j phi_j`` of the uniform vector.

    ``phi_j`` is ``+1`` on coordinate ``2j``, ``-1`` on ``2j + 1``; ``codes``
    holds the sign patterns ``tau`` (one row per member).
    """

    k: int
    n: int
    c: float
    base: np.ndarray
    codes: np.ndarray
    members: np.ndarray
    min_pairwise_l1: float
    min_hamming: int
    generator: str = field(default="lexicode")

    @property
    def pairs(self) -> int:
        return self.k // 2

    def __len__(self):
        return self.members.shape[0]

    def fano_average(self) -> float:
        """``(1/|T|) sum_tau n KL(p_tau, p0)``."""
        return float(np.mean([self.n * kl_categorical(m, self.base) for m in self.members]))

    def fano_budget(self) -> float:
        """``(1/16) log |T|``."""
        return math.log(len(self)) / 16

    def invariant_violations(self, tol: float = 1e-12) -> list:
        """Names of the invariants that fail (empty list when all hold)."""
        bad = []
        I = self.pairs
        if (self.members < -tol).any() or np.abs(self.members.sum(axis=1) - 1).max() > 1e-12:
            bad.append("members are probability vectors")
        T = len(self)
        for a, b in combinations(range(T), 2):
            omega = int(np.sum(self.codes[a] != self.codes[b]))
            l1 = float(np.abs(self.members[a] - self.members[b]).sum())
            if abs(l1 - 4 * self.c * omega / self.k) > 1e-12:
                bad.append(f"l1 identity for pair ({a}, {b})")
                break
            if omega < I / 8:
                bad.append(f"hamming separation for pair ({a}, {b})")
                break
        if math.log(T) < I * LOG2 / 8 - 1e-12:
            bad.append("code size")
        return bad


def _code_target(I: int) -> int:
    return max(1, math.ceil(2.0 ** (I / 8) - 1e-9))


def _lexicode(I: int, d: int, max_size: int) -> np.ndarray:
    """Greedy lexicographic code in ``{0,1}^I`` with minimum distance ``d``."""
    size = 1 << I
    forbidden = np.zeros(size, dtype=bool)
    masks = np.array([sum(1 << b for b in bits) for w in range(d) for bits in combinations(range(I), w)], dtype=np.int64)
    words = []
    nxt = 0
    while nxt < size and len(words) < max_size:
        words.append(nxt)
        forbidden[nxt ^ masks] = True
        free = np.flatnonzero(~forbidden[nxt:])
        if free.size == 0:
            break
        nxt += int(free[0])
    return np.array(words, dtype=np.int64)


def _random_code(I: int, d: int, target: int, seed: int, max_tries: int = 200000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    words = np.zeros((0, I), dtype=bool)
    tries = 0
    while words.shape[0] < target:
        tries += 1
        if tries > max_tries:
            raise errors.ValidationError(f"random code search failed to reach {target} words")
        cand = rng.random(I) < 0.5
        if words.shape[0] == 0 or (words != cand).sum(axis=1).min() >= d:
            words = np.vstack([words, cand])
    return words


#: Above this many pairs the code is searched randomly instead of lexicographically.
LEXICODE_MAX_PAIRS = 16
#: Upper limit on family size; keeps pairwise checks quadratic-cheap.
MAX_MEMBERS = 256


def hard_instance_family(k: int, n: int, seed: int = 0, max_members: int = MAX_MEMBERS) -> HardInstanceFamily:
    """Well-separated perturbations of the uniform k-vector for the multinomial lower bound.

    The sign code has pairwise Hamming distance at least ``floor(k/2)/8`` and
    at least ``2^(floor(k/2)/8)`` words.  Odd ``k`` leaves the last coordinate
    unperturbed.
    """
    _check_n(n)
    if k < 2:
        raise errors.ValidationError("k must be >= 2")
    if k > 32 * n:
        raise errors.KTooLargeForN(f"k = {k} exceeds 32n = {32 * n}")
    I = k // 2
    d = max(1, math.ceil(I / 8))
    target = _code_target(I)
    if target > max_members:
        raise errors.ValidationError(f"a family for k = {k} needs {target} members (limit {max_members})")
    if I <= LEXICODE_MAX_PAIRS:
        words = _lexicode(I, d, max_size=max(target, max_members))
        bits = (words[:, None] >> np.arange(I)[None, :]) & 1
        generator = "lexicode"
    else:
        bits = _random_code(I, d, target, seed).astype(int)
        generator = f"random-greedy(seed={seed})"
    codes = np.where(bits == 1, 1, -1).astype(int)
    c = math.sqrt((k - 1) / n * LOG2) / 16
    base = np.full(k, 1.0 / k)
    members = np.tile(base, (codes.shape[0], 1))
    members[:, 0 : 2 * I : 2] += c / k * codes
    members[:, 1 : 2 * I : 2] -= c / k * codes
    T = codes.shape[0]
    if T > 1:
        diff = codes[:, None, :] != codes[None, :, :]
        ham = diff.sum(axis=2)[np.triu_indices(T, 1)]
        min_ham = int(ham.min())
        l1 = np.abs(members[:, None, :] - members[None, :, :]).sum(axis=2)[np.triu_indices(T, 1)]
        min_l1 = float(l1.min())
    else:
        min_ham, min_l1 = I, math.inf
    base.setflags(write=False)
    return HardInstanceFamily(k, n, c, base, codes, members, min_l1, min_ham, generator)


def taylor_gap(c: float) -> float:
    """``2c^2 - [(1-c) log(1-c) + (1+c) log(1+c)]``; positive on (0, 1/2)."""
    return 2 * c * c - ((1 - c) * math.log1p(-c) + (1 + c) * math.log1p(c))
