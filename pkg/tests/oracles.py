"""Independent reference implementations used only by the tests.

Everything here is written with explicit Python loops over samples, heads
and set members so that it shares no code path with the vectorized
implementation it checks.
"""

import math

import numpy as np


def cos(a, b):
    return float(np.dot(a, b) / (math.sqrt(np.dot(a, a)) * math.sqrt(np.dot(b, b))))


# --- encoder ---------------------------------------------------------------


def tokens_of(enc, x):
    T, chunk, d = enc.tokenizer.shape
    out = np.zeros((T, d))
    for t in range(T):
        for c in range(chunk):
            out[t] += x[t * chunk + c] * enc.tokenizer[t, c]
    return out


def _ln(v):
    m = sum(v) / len(v)
    var = sum((vi - m) ** 2 for vi in v) / len(v)
    return np.array([(vi - m) / math.sqrt(var + 1e-6) for vi in v])


def _gelu(u):
    return 0.5 * u * (1 + math.tanh(math.sqrt(2 / math.pi) * (u + 0.044715 * u**3)))


def forward_reference(enc, x, prompt=None):
    """Straight-line forward pass of one sample."""
    toks = tokens_of(enc, np.asarray(x, dtype=float))
    h = toks if prompt is None else np.vstack([np.asarray(prompt, dtype=float), toks])
    cfg = enc.config
    if cfg.variant == "affine-reference":
        m = h.sum(0) / len(h)
        return np.array([sum(enc.affine[i, j] * m[j] for j in range(len(m))) for i in range(len(m))])
    S, d = h.shape
    H = cfg.num_heads
    dh = d // H
    for blk in enc.blocks:
        a = np.array([_ln(row) for row in h])
        q, k, v = a @ blk.wq, a @ blk.wk, a @ blk.wv
        heads_out = np.zeros((S, d))
        for hd in range(H):
            sl = slice(hd * dh, (hd + 1) * dh)
            for i in range(S):
                scores = [float(q[i, sl] @ k[j, sl]) / math.sqrt(dh) for j in range(S)]
                mx = max(scores)
                w = [math.exp(s - mx) for s in scores]
                tot = sum(w)
                for j in range(S):
                    heads_out[i, sl] += (w[j] / tot) * v[j, sl]
        h = h + heads_out @ blk.wo
        b = np.array([_ln(row) for row in h])
        u = b @ blk.w1
        g = np.vectorize(_gelu)(u)
        h = h + g @ blk.w2
    return h.sum(0) / S


def central_difference(fn, p, step=1e-5):
    """Gradient of scalar ``fn`` at array ``p`` by central differences."""
    p = np.array(p, dtype=float)
    grad = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        plus, minus = p.copy(), p.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (fn(plus) - fn(minus)) / (2 * step)
    return grad


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


# --- contrastive loss ------------------------------------------------------


def contrastive_reference(Z, labels, protos, weights, tau):
    """Mean over anchors of the prompt contrastive loss, term by term."""
    B = len(labels)
    total = 0.0
    for i in range(B):
        y = int(labels[i])
        alpha, beta = weights[y]
        pos = [j for j in range(B) if j != i and labels[j] == y]
        neg = [j for j in range(B) if labels[j] != y]
        own = math.exp(cos(Z[i], protos[y]) / tau)
        gamma1 = sum(math.exp(cos(Z[i], protos[int(labels[j])]) / tau) for j in neg)
        lam1 = own / (own + gamma1)
        term = alpha * math.log(lam1)
        if pos:
            denom = sum(math.exp(cos(Z[i], Z[j]) / tau) for j in pos)
            gamma2 = sum(math.exp(cos(Z[i], Z[k]) / tau) for k in neg)
            acc = 0.0
            for j in pos:
                lam2 = math.exp(cos(Z[i], Z[j]) / tau) / (denom + gamma2)
                acc += math.log(lam2)
            term += beta / len(pos) * acc
        total += -term
    return total / B


# --- classifiers -----------------------------------------------------------


def brute_force_best(vectors, class_ids, z):
    """Class with highest cosine to z; first in ascending class id on ties."""
    best, best_c = -2.0, None
    for v, c in sorted(zip(vectors, class_ids), key=lambda t: t[1]):
        s = float(np.dot(v, z) / (np.linalg.norm(v) * np.linalg.norm(z)))
        if s > best:
            best, best_c = s, c
    return best_c


def brute_force_ranking(vectors, class_ids, z):
    sims = [(float(np.dot(v, z) / (np.linalg.norm(v) * np.linalg.norm(z))), c) for v, c in zip(vectors, class_ids)]
    return [c for _, c in sorted(sims, key=lambda t: (-t[0], t[1]))]


# --- metrics ---------------------------------------------------------------


def A_direct(T, n):
    return sum(T[n - 1][tau - 1] for tau in range(1, n + 1)) / n


def F_direct(T, n):
    acc = 0.0
    for tau in range(1, n):
        best = max(T[tp - 1][tau - 1] for tp in range(tau, n))
        acc += best - T[n - 1][tau - 1]
    return acc / (n - 1)


# --- Adam ------------------------------------------------------------------


def adam_recurrence(x0, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    x, m, v = float(x0), 0.0, 0.0
    xs = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        xs.append(x)
    return xs
