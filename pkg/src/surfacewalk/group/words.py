"""Free reduction and Dehn's algorithm on letter tuples."""
from .presentation import WordError, inverse_word


def free_reduce(w):
    out = []
    for l in w:
        if out and out[-1] == l ^ 1:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


def _find_long_piece(w, succ, limit):
    """First maximal run of w that reads along r or r^-1 with length > limit.

    Returns (start, length, side) or None.  side 0 means the run follows r,
    side 1 means r^-1.
    """
    n = len(w)
    for side in (0, 1):
        s = succ[side]
        i = 0
        while i < n:
            j = i
            while j + 1 < n and s[w[j]] == w[j + 1]:
                j += 1
            run = j - i + 1
            if run > limit:
                return i, run, side
            i = j + 1
    return None


def dehn_reduce(w, pres):
    """Dehn's algorithm: shorten by relator pieces until none longer than 2g.

    For g >= 2 the surface presentation is small cancellation C'(1/6), so the
    result is empty exactly when w represents the identity.  The output is
    freely reduced and contains no subword of a cyclic rotation of r^{+-1}
    of length > 2g, but it need not be a geodesic.
    """
    pres.check(w)
    w = free_reduce(w)
    if not pres.surface:
        return w
    L = len(pres.relator)
    half = L // 2
    succ = pres.successor_tables()
    rels = (pres.relator, inverse_word(pres.relator))
    while True:
        hit = _find_long_piece(w, succ, half)
        if hit is None:
            return w
        i, run, side = hit
        rel = rels[side]
        if run >= L:
            # a whole cyclic relator: delete it
            w = free_reduce(w[:i] + w[i + L:])
            continue
        start = rel.index(w[i])
        # w[i:i+run] = rel[start:start+run] cyclically; replace it by the
        # inverse of the complementary piece
        comp = tuple(rel[(start + run + k) % L] for k in range(L - run))
        w = free_reduce(w[:i] + inverse_word(comp) + w[i + run:])


def is_identity(w, pres):
    if not pres.surface:
        return len(free_reduce(w)) == 0
    if pres.genus == 1:
        # Z^2: count exponents
        ea = sum(1 if l == 0 else -1 if l == 1 else 0 for l in w)
        eb = sum(1 if l == 2 else -1 if l == 3 else 0 for l in w)
        return ea == 0 and eb == 0
    return len(dehn_reduce(w, pres)) == 0


def parse_word(text, pres):
    try:
        return pres.parse(text)
    except WordError:
        raise
