"""Plain-Python reference formulas used as test oracles."""
import math


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def vectors(tokens, table):
    return [table[t] for t in tokens if t in table]


def mean_vec(vs):
    return [sum(col) / len(vs) for col in zip(*vs)]


def embedding_average(cand, ref, table):
    c, r = vectors(cand, table), vectors(ref, table)
    if not c or not r:
        return None
    return cos(mean_vec(c), mean_vec(r))


def greedy_matching(cand, ref, table):
    c, r = vectors(cand, table), vectors(ref, table)
    if not c or not r:
        return None
    one = sum(max(cos(x, y) for y in r) for x in c) / len(c)
    two = sum(max(cos(y, x) for x in c) for y in r) / len(r)
    return (one + two) / 2


def extrema_vec(vs):
    out = []
    for col in zip(*vs):
        best = col[0]
        for x in col[1:]:
            if abs(x) > abs(best) or (abs(x) == abs(best) and x > best):
                best = x
        out.append(best)
    return out


def vector_extrema(cand, ref, table):
    c, r = vectors(cand, table), vectors(ref, table)
    if not c or not r:
        return None
    return cos(extrema_vec(c), extrema_vec(r))


def distinct_n(replies, n):
    grams = []
    for rep in replies:
        for i in range(len(rep) - n + 1):
            grams.append(tuple(rep[i : i + n]))
    if not grams:
        return None
    return len(set(grams)) / len(grams)
