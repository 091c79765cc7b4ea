"""Deliberately naive reference implementations used as test oracles.

Everything here is written with explicit Python loops over scalars so it
shares no vectorized code paths with the package under test.
"""

import math


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def hmfm_loop(x, p):
    """Scalar-loop recomputation of the encoder forward pass."""
    N, A = len(x), len(x[0])
    D = p.mod_W.shape[1]
    out = []
    for i in range(N):
        lin = [sum(x[i][k] * p.imp_W[k][a] for k in range(A)) + p.imp_b[a] for a in range(A)]
        mu = sum(lin) / A
        var = sum((v - mu) ** 2 for v in lin) / A
        ln = [(v - mu) / math.sqrt(var + 1e-5) * p.ln_gain[a] + p.ln_bias[a]
              for a, v in enumerate(lin)]
        xw = [x[i][a] * _sig(ln[a]) for a in range(A)]
        row_cos, row_sin = [], []
        for j in range(D):
            f = _sig(sum(xw[a] * p.mod_W[a][j] for a in range(A)) + p.mod_b[j])
            b = 2 * math.pi * p.sigma_prime * j / D
            proj = xw[j] if p.proj_W is None else sum(xw[a] * p.proj_W[a][j] for a in range(A))
            e = b * f * proj
            row_cos.append(math.cos(e))
            row_sin.append(math.sin(e))
        out.append(row_cos + row_sin)
    return out


def class_loss_loop(P, Y, c):
    """Class-energy hinge with count scaling, as nested loops."""
    N, M = len(Y), len(Y[0])
    total = 0.0
    for j in range(M):
        n_pos = sum(Y[i][j] for i in range(N))
        p_j = n_pos / N
        energy = sum(P[i][j] for i in range(N)) / N
        total += n_pos * max(0.0, energy - (1 + c * p_j)) ** 2
        total += (N - n_pos) * max(0.0, c * (1 - p_j) - energy) ** 2
    return total


def col_loss_loop(P, Y):
    """Squared Frobenius gap between predicted and true label Gram matrices / N."""
    N, M = len(Y), len(Y[0])
    total = 0.0
    for a in range(M):
        for b in range(M):
            g = 0.0
            for i in range(N):
                g += P[i][a] * P[i][b] - Y[i][a] * Y[i][b]
            total += (g / N) ** 2
    return total


def stt_loss_loop(P, S, tau):
    N = len(P)
    total = 0.0
    for i in range(N):
        for k in range(N):
            if i == k:
                continue
            dot = sum(a * b for a, b in zip(S[i], S[k]))
            na = math.sqrt(sum(a * a for a in S[i]))
            nb = math.sqrt(sum(b * b for b in S[k]))
            sim = dot / (na * nb) if na > 0 and nb > 0 else 0.0
            if sim > tau:
                total += math.sqrt(sum((a - b) ** 2 for a, b in zip(P[i], P[k])))
    return total / N ** 2


def auroc_pairs(scores, labels):
    """Probability a random positive outranks a random negative, ties count 1/2."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    if not pos or not neg:
        return None
    wins = 0.0
    for sp in pos:
        for sn in neg:
            wins += 1.0 if sp > sn else 0.5 if sp == sn else 0.0
    return wins / (len(pos) * len(neg))
