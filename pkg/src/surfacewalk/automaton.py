"""The ShortLex geodesic automaton of Gamma_g (and of the free group).

A word w is a ShortLex normal form when no other word v reaches the same
element while being shorter, or of equal length and lexicographically
smaller.  In a hyperbolic Cayley graph such a competitor v stays within a
bounded distance of w when both are read in step (v may pause, which is how
a shorter competitor keeps pace).  The acceptor therefore tracks, after
each prefix of w, the set of possible competitors as triples

    (d, order, pauses):  d = w_i^-1 v_j in the ball B(K),
                         order = how v_j compares with w_i so far,
                         pauses = i - j in {0, 1, 2}.

w a is rejected when some competitor arrives at d = 1 with two pauses
(a geodesic two letters shorter) or with no pause and order "less".  The
subset construction over these sets is finite; it is then minimized, and
its states are the cone types.  K is the signature radius: the automaton
is accepted once building at K and K + 1 gives isomorphic results.
"""
from collections import deque
from dataclasses import dataclass, field
import json

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .group.ball import ball_enumerate
from .group.presentation import GroupPresentation, inverse_letter
from .group.rep import matinv_np, matmul_np, matrix_keys_np

EQ, LESS, MORE = 0, 1, 2


class ConstructionError(RuntimeError):
    """Signatures did not stabilize up to the largest K tried."""


class AssumptionViolation(RuntimeError):
    """More than one recurrent class."""


class ValidationError(RuntimeError):
    pass


class _Differences:
    """Lazy tables of a^-1 d b and a^-1 d for d in B(K) (-1 outside B(K)).

    Rows are filled only for the differences the construction visits.
    """

    def __init__(self, pres, K):
        ball = ball_enumerate(pres, K, with_operator=False, store_words=False)
        self.ball = ball
        self.L = pres.ngens
        self.mats = ball.mats.astype(np.int64)
        self.gens = ball.rep.gens_array
        self.ginv = matinv_np(self.gens)
        self._step = {}
        self._pause = {}

    def _lookup(self, M):
        return self.ball.find_keys(matrix_keys_np(M))

    def rows(self, d):
        if d not in self._step:
            L = self.L
            left = matmul_np(self.ginv, np.repeat(self.mats[d:d + 1], L, axis=0))
            self._pause[d] = self._lookup(left)
            prod = matmul_np(np.repeat(left, L, axis=0), np.tile(self.gens, (L, 1)))
            self._step[d] = self._lookup(prod).reshape(L, L)
        return self._step[d], self._pause[d]


def _advance(state, a, diffs):
    """Competitor set after reading letter a; None when w a is rejected."""
    L = diffs.L
    out = set()
    for d, order, lag in state:
        step, pause = diffs.rows(d)
        # v takes a letter b
        for b in range(L):
            nd = int(step[a, b])
            if nd < 0:
                continue
            if lag == 0:
                if order == EQ:
                    no = EQ if b == a else (LESS if b < a else MORE)
                else:
                    no = order
            else:
                no = EQ
            if nd == 0 and ((lag == 0 and no == LESS) or lag == 2):
                return None
            out.add((nd, no, lag))
        # v pauses
        if lag < 2:
            nd = int(pause[a])
            if nd >= 0:
                if nd == 0 and lag + 1 == 2:
                    return None
                out.add((nd, EQ, lag + 1))
    return frozenset(out)


def _subset_construction(pres, K, max_states=200000):
    diffs = _Differences(pres, K)
    L = pres.ngens
    start = frozenset({(0, EQ, 0)})
    index = {start: 0}
    trans = []
    queue = deque([start])
    while queue:
        s = queue.popleft()
        row = [-1] * L
        for a in range(L):
            t = _advance(s, a, diffs)
            if t is None:
                continue
            if t not in index:
                if len(index) >= max_states:
                    raise ConstructionError(f"more than {max_states} subset states at K = {K}")
                index[t] = len(index)
                queue.append(t)
            row[a] = index[t]
        trans.append(row)
    return np.asarray(trans, dtype=np.int64)


def minimize(trans, start=0):
    """Moore partition refinement of a complete-by-(-1) DFA, all states accepting.

    Returns the transition table of the minimal automaton, relabelled in
    breadth-first order from the start (a canonical form, so equal tables
    mean isomorphic automata).
    """
    n, L = trans.shape
    cls = np.zeros(n, dtype=np.int64)
    while True:
        nxt = np.where(trans >= 0, cls[np.maximum(trans, 0)], -1)
        sig = np.concatenate([cls[:, None], nxt], axis=1)
        _, new = np.unique(sig, axis=0, return_inverse=True)
        new = new.reshape(-1)
        if len(np.unique(new)) == len(np.unique(cls)):
            cls = new
            break
        cls = new
    k = int(cls.max()) + 1
    small = np.full((k, L), -1, dtype=np.int64)
    for s in range(n):
        small[cls[s]] = np.where(trans[s] >= 0, cls[np.maximum(trans[s], 0)], -1)
    # canonical breadth-first relabelling
    order = {int(cls[start]): 0}
    q = deque([int(cls[start])])
    while q:
        s = q.popleft()
        for a in range(L):
            t = int(small[s, a])
            if t >= 0 and t not in order:
                order[t] = len(order)
                q.append(t)
    out = np.full((len(order), L), -1, dtype=np.int64)
    for s, i in order.items():
        out[i] = [order[int(t)] if t >= 0 else -1 for t in small[s]]
    return out


@dataclass
class GeodesicAutomaton:
    pres: GroupPresentation
    K: int
    trans: np.ndarray                 # (states, 4g) target state or -1
    start: int = 0
    certificate: dict = field(default_factory=dict)

    @property
    def n_states(self):
        return int(self.trans.shape[0])

    def edges(self):
        s, a = np.nonzero(self.trans >= 0)
        return [(int(x), int(y), int(self.trans[x, y])) for x, y in zip(s, a)]

    def accepts(self, w):
        s = self.start
        for a in w:
            s = int(self.trans[s, a])
            if s < 0:
                return False
        return True

    def path_counts(self, mmax):
        """Number of accepted words of each length 0..mmax (exact integers)."""
        v = [0] * self.n_states
        v[self.start] = 1
        out = [1]
        for _ in range(mmax):
            nv = [0] * self.n_states
            for s, c in enumerate(v):
                if c:
                    for t in self.trans[s]:
                        if t >= 0:
                            nv[t] += c
            v = nv
            out.append(sum(v))
        return out

    def words(self, m):
        """All accepted words of length m, in ShortLex order."""
        level = [((), self.start)]
        for _ in range(m):
            level = [(w + (a,), int(self.trans[s, a])) for w, s in level
                     for a in range(self.pres.ngens) if self.trans[s, a] >= 0]
        return [w for w, _ in level]

    def random_path(self, m, rng):
        w, s = [], self.start
        for _ in range(m):
            opts = np.nonzero(self.trans[s] >= 0)[0]
            if len(opts) == 0:
                break
            a = int(rng.choice(opts))
            w.append(a)
            s = int(self.trans[s, a])
        return tuple(w)

    def incidence(self):
        A = np.zeros((self.n_states, self.n_states), dtype=np.int64)
        for s, _, t in self.edges():
            A[s, t] += 1
        return A

    def to_json(self):
        rec = recurrent_class(self)
        return json.dumps({
            "group": self.pres.name(), "K": self.K, "start": self.start,
            "states": self.n_states,
            "edges": [{"src": s, "label": self.pres.format((a,)), "letter": a, "dst": t}
                      for s, a, t in self.edges()],
            "recurrent": sorted(rec.recurrent), "transient": sorted(rec.transient),
            "certificate": self.certificate,
        }, indent=1)

    def to_dot(self):
        """Graphviz DOT text."""
        lines = ["digraph automaton {", f'  start [shape=point]; start -> s{self.start};']
        rec = recurrent_class(self)
        for s in range(self.n_states):
            shape = "doublecircle" if s in rec.recurrent else "circle"
            lines.append(f"  s{s} [shape={shape}];")
        for s, a, t in self.edges():
            lines.append(f'  s{s} -> s{t} [label="{self.pres.format((a,))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_automaton(pres, K=None, validate_radius=None, counts=None, K_max=None,
                    max_states=200000):
    """Minimal ShortLex acceptor, stable in the signature radius K.

    K=None starts at 2g for surface groups (competitors going round one
    relator disc separate by half its length) and 1 for free groups, and
    raises K until the minimized automata at K and K + 1 coincide and, if
    validate_radius is given, the path counts match the BFS sphere counts
    (counts may be passed in, e.g. from a lumped ball).
    """
    k0 = K if K is not None else (2 * pres.genus if pres.surface else 1)
    K_max = K_max if K_max is not None else k0 + 2
    last = None
    for k in range(k0, K_max + 1):
        t = minimize(_subset_construction(pres, k, max_states))
        nxt = minimize(_subset_construction(pres, k + 1, max_states))
        if not (t.shape == nxt.shape and np.array_equal(t, nxt)):
            last = f"K={k}: {t.shape[0]} vs {nxt.shape[0]} states"
            continue
        aut = GeodesicAutomaton(pres, k, t, 0, {"stable_between": [k, k + 1]})
        check_axioms(aut)
        if validate_radius:
            try:
                validate_counts(aut, validate_radius, counts)
            except ValidationError as e:
                last = f"K={k}: {e}"
                continue
        return aut
    raise ConstructionError(f"no stable, valid automaton up to K = {K_max} ({last})")


def check_axioms(aut):
    """(A) no edge into the start, (B) everything reachable from the start."""
    tr = aut.trans
    if np.any(tr == aut.start):
        raise ValidationError("axiom A: an edge enters the start state")
    seen = {aut.start}
    q = deque([aut.start])
    while q:
        s = q.popleft()
        for t in tr[s]:
            if t >= 0 and int(t) not in seen:
                seen.add(int(t))
                q.append(int(t))
    if len(seen) != aut.n_states:
        raise ValidationError("axiom B: unreachable states")
    aut.certificate["axioms_AB"] = True


def validate_counts(aut, radius, counts=None):
    """Path counts of every length <= radius against BFS sphere counts."""
    if counts is None:
        ball = ball_enumerate(aut.pres, radius, lumped=aut.pres.surface and aut.pres.genus >= 2,
                              store_words=False, with_operator=False)
        counts = ball.sphere_counts()
    counts = [int(c) for c in counts[:radius + 1]]
    mine = aut.path_counts(radius)
    if mine != counts:
        raise ValidationError(f"path counts {mine} differ from sphere counts {counts}")
    aut.certificate["validated_radius"] = radius
    aut.certificate["sphere_counts"] = counts
    return counts


def validate_bijection(aut, ball, m):
    """Axiom D on S_m: accepted words of length m are exactly the canonical words."""
    if ball.lumped or ball.words is None:
        raise ValueError("needs an explicit ball with words")
    lo, hi = ball.sphere_ptr[m], ball.sphere_ptr[m + 1]
    canon = [ball.word(i) for i in range(lo, hi)]
    ok = aut.words(m) == canon
    aut.certificate.setdefault("bijection_radii", []).append(m)
    if not ok:
        raise ValidationError(f"axiom D fails on S_{m}")
    return True


@dataclass
class Classification:
    components: np.ndarray
    recurrent: set
    transient: set
    n_recurrent_classes: int
    entropy: float


def recurrent_class(aut):
    """SCCs; recurrent = states on a cycle in a closed... class with a cycle.

    A vertex is recurrent when it lies in a nontrivial strongly connected
    component (it can be revisited).  Exactly one such class is expected.
    """
    A = aut.incidence()
    n = aut.n_states
    ncomp, lab = connected_components(csr_matrix(A), directed=True, connection="strong")
    rec = set()
    classes = set()
    for c in range(ncomp):
        members = np.nonzero(lab == c)[0]
        sub = A[np.ix_(members, members)]
        if len(members) > 1 or sub[0, 0] > 0:
            rec.update(int(m) for m in members)
            classes.add(c)
    trans = set(range(n)) - rec
    if len(classes) != 1:
        raise AssumptionViolation(f"{len(classes)} recurrent classes")
    members = sorted(rec)
    sub = A[np.ix_(members, members)].astype(np.float64)
    lam = float(np.max(np.abs(np.linalg.eigvals(sub))))
    return Classification(lab, rec, trans, len(classes), float(np.log(lam)))


def transient_prefix_bound(aut):
    """Every path spends at most |T| steps in transient states (pigeonhole)."""
    rec = recurrent_class(aut)
    T = rec.transient
    # longest path inside the transient part (a DAG)
    memo = {}

    def longest(s):
        if s in memo:
            return memo[s]
        best = 0
        for t in aut.trans[s]:
            if t >= 0 and int(t) in T:
                best = max(best, 1 + longest(int(t)))
        memo[s] = best
        return best

    return max((longest(s) for s in T), default=0) + (1 if T else 0), len(T)


@dataclass
class GrowthData:
    counts: list
    zeta: float            # Perron root of the recurrent incidence matrix
    C: float
    ratios: list
    residuals: list


def growth(aut, mmax=None, counts=None, fit_from=6):
    """Perron root and the constant of |S_m| ~ C zeta^m."""
    rec = recurrent_class(aut)
    zeta = float(np.exp(rec.entropy))
    mmax = mmax or aut.certificate.get("validated_radius", 12)
    counts = counts or aut.path_counts(mmax)
    m = np.arange(len(counts))
    tail = m >= min(fit_from, len(counts) - 1)
    C = float(np.mean(np.asarray(counts, dtype=float)[tail] / zeta ** m[tail]))
    ratios = [counts[i + 1] / counts[i] for i in range(len(counts) - 1)]
    resid = [float(c / (C * zeta ** i)) for i, c in enumerate(counts)]
    return GrowthData(list(counts), zeta, C, ratios, resid)


def free_automaton(genus):
    """Tree automaton of F_2g: the start plus one state per last letter."""
    L = 4 * genus
    tr = np.full((L + 1, L), -1, dtype=np.int64)
    tr[0] = np.arange(1, L + 1)
    for s in range(L):
        for a in range(L):
            if a != inverse_letter(s):
                tr[s + 1, a] = a + 1
    return GeodesicAutomaton(GroupPresentation(genus, surface=False), 1, tr, 0,
                             {"construction": "tree"})
