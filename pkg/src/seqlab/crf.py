"""Linear-chain CRF output layer with exact likelihood, Viterbi decoding,
and an exhaustive enumeration oracle."""

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import numeric as nm
from .numeric import Parameter, Tensor, glorot_uniform, param_rng

MASK = -1e4  # stand-in for -inf that keeps gradients defined
BRUTE_FORCE_GUARD = 10 ** 6


class CrfError(ValueError):
    pass


@dataclass
class PathScore:
    labels: list
    score: float
    log_prob: float


class CRFLayer:
    """Emission projection plus label-transition matrix with virtual
    START/STOP states at indices L and L+1."""

    def __init__(self, d_in, n_labels, seed, prefix):
        self.d_in = d_in
        self.n_labels = n_labels
        self.proj_w = Parameter(
            glorot_uniform((d_in, n_labels), d_in, n_labels,
                           param_rng(seed, prefix + ".proj_w")),
            prefix + ".proj_w",
        )
        self.proj_b = Parameter(np.zeros(n_labels), prefix + ".proj_b")
        L = n_labels
        trans = glorot_uniform((L + 2, L + 2), L + 2, L + 2,
                               param_rng(seed, prefix + ".transitions"))
        trans[:, L] = MASK      # nothing enters START
        trans[L + 1, :] = MASK  # nothing leaves STOP
        self.transitions = Parameter(trans, prefix + ".transitions")

    @property
    def start(self):
        return self.n_labels

    @property
    def stop(self):
        return self.n_labels + 1

    def parameters(self):
        return [self.proj_w, self.proj_b, self.transitions]

    def emissions(self, h):
        """(B, T, 2H) hidden states -> (B, T, L) emission scores."""
        B, T, _ = h.shape
        flat = nm.add(nm.matmul(h.reshape(B * T, self.d_in), self.proj_w), self.proj_b)
        return flat.reshape(B, T, self.n_labels)


def _check_gold(gold, n_labels):
    gold = np.asarray(gold)
    if gold.size and (gold.min() < 0 or gold.max() >= n_labels):
        raise CrfError("gold label id out of range [0, %d)" % n_labels)
    return gold


def crf_log_z(emissions, layer):
    """Forward algorithm in log space; (B, T, L) emissions -> (B,) logZ."""
    B, T, L = emissions.shape
    trans = layer.transitions
    alpha = nm.add(emissions[:, 0, :], trans[layer.start, :L])  # (B, L)
    block = trans[:L, :L]
    for t in range(1, T):
        scores = nm.add(
            nm.add(alpha.reshape(B, L, 1), block.reshape(1, L, L)),
            emissions[:, t, :].reshape(B, 1, L),
        )
        alpha = nm.logsumexp(scores, axis=1)
    final = nm.add(alpha, trans[:L, layer.stop].reshape(1, L))
    return nm.logsumexp(final, axis=1)


def crf_gold_score(emissions, gold, layer):
    """Unnormalized score of the gold paths; (B, T, L), (B, T) -> (B,)."""
    B, T, L = emissions.shape
    gold = _check_gold(gold, L)
    b_idx = np.repeat(np.arange(B), T)
    t_idx = np.tile(np.arange(T), B)
    emit = nm.gather_nd(emissions, b_idx, t_idx, gold.reshape(-1)).reshape(B, T)
    score = nm.tsum(emit, axis=1)
    starts = np.full(B, layer.start)
    stops = np.full(B, layer.stop)
    prev = np.concatenate([starts.reshape(B, 1), gold], axis=1)
    nxt = np.concatenate([gold, stops.reshape(B, 1)], axis=1)
    trans = nm.gather_nd(layer.transitions, prev.reshape(-1), nxt.reshape(-1))
    return nm.add(score, nm.tsum(trans.reshape(B, T + 1), axis=1))


def crf_nll_batch(h, gold, layer):
    """Mean per-sentence negative log-likelihood over a batch."""
    emissions = layer.emissions(h)
    nll = nm.add(crf_log_z(emissions, layer), nm.mul(crf_gold_score(emissions, gold, layer), -1.0))
    return nm.mul(nm.tsum(nll), 1.0 / h.shape[0])


def crf_nll(h, gold, layer):
    """Negative log-likelihood of one sentence; h is (T, 2H)."""
    if len(gold) != h.shape[0]:
        raise CrfError("gold length %d != sequence length %d" % (len(gold), h.shape[0]))
    h3 = h.reshape(1, *h.shape) if isinstance(h, Tensor) else Tensor(np.asarray(h)[None])
    return crf_nll_batch(h3, np.asarray(gold)[None], layer)


def softmax_nll_batch(h, gold, layer):
    """Per-step softmax ablation: transitions ignored."""
    emissions = layer.emissions(h)
    B, T, L = emissions.shape
    gold = _check_gold(gold, L)
    lse = nm.logsumexp(emissions, axis=2)  # (B, T)
    b_idx = np.repeat(np.arange(B), T)
    t_idx = np.tile(np.arange(T), B)
    picked = nm.gather_nd(emissions, b_idx, t_idx, gold.reshape(-1)).reshape(B, T)
    nll = nm.tsum(nm.add(lse, nm.mul(picked, -1.0)), axis=1)
    return nm.mul(nm.tsum(nll), 1.0 / B)


def _emission_matrix(h, layer):
    h = h.data if isinstance(h, Tensor) else np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise CrfError("expected (T, d) hidden states, got shape %s" % (h.shape,))
    return h @ layer.proj_w.data + layer.proj_b.data


def viterbi_decode(h, layer):
    """Best label sequence for one sentence; ties break toward the lower
    label id at each backtrack step."""
    e = _emission_matrix(h, layer)
    T, L = e.shape
    trans = layer.transitions.data
    delta = trans[layer.start, :L] + e[0]
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans[:L, :L] + e[t][None, :]
        back[t] = np.argmax(scores, axis=0)  # first max = lowest label id
        delta = scores[back[t], np.arange(L)]
    final = delta + trans[:L, layer.stop]
    last = int(np.argmax(final))
    path = [last]
    for t in range(T - 1, 0, -1):
        last = int(back[t, last])
        path.append(last)
    path.reverse()
    score = float(final[path[-1]])
    log_z = _log_z_numpy(e, layer)
    return PathScore(path, score, score - log_z)


def _log_z_numpy(e, layer):
    T, L = e.shape
    trans = layer.transitions.data
    alpha = trans[layer.start, :L] + e[0]
    for t in range(1, T):
        scores = alpha[:, None] + trans[:L, :L] + e[t][None, :]
        m = scores.max(axis=0)
        alpha = np.log(np.exp(scores - m[None, :]).sum(axis=0)) + m
    final = alpha + trans[:L, layer.stop]
    m = final.max()
    return float(np.log(np.exp(final - m).sum()) + m)


def brute_force(h, layer):
    """Enumerate all L^T label sequences: exact logZ, argmax, distribution."""
    e = _emission_matrix(h, layer)
    T, L = e.shape
    if L ** T > BRUTE_FORCE_GUARD:
        raise CrfError("brute force guard exceeded: %d^%d paths" % (L, T))
    trans = layer.transitions.data
    paths = np.array(list(product(range(L), repeat=T)), dtype=np.int64)  # (P, T)
    scores = e[np.arange(T)[None, :], paths].sum(axis=1)
    scores += trans[layer.start, paths[:, 0]] + trans[paths[:, -1], layer.stop]
    for t in range(1, T):
        scores += trans[paths[:, t - 1], paths[:, t]]
    m = scores.max()
    log_z = float(np.log(np.exp(scores - m).sum()) + m)
    best = int(np.argmax(scores))
    distribution = {tuple(p): float(s - log_z) for p, s in zip(paths, scores)}
    return log_z, list(paths[best]), distribution
