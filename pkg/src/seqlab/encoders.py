"""Token representations (word embedding + char-CNN + optional contextual
vector) and bi-directional LSTM encoding."""

from dataclasses import dataclass

import numpy as np

from . import numeric as nm
from .numeric import Parameter, Tensor, glorot_uniform, param_rng


class EncoderError(ValueError):
    pass


@dataclass
class DropoutSpec:
    input_rate: float = 0.33
    blstm_output_rate: float = 0.5

    def __post_init__(self):
        for rate in (self.input_rate, self.blstm_output_rate):
            if not 0.0 <= rate < 1.0:
                raise EncoderError("dropout rate %r outside [0, 1)" % rate)


class CharCNN:
    """Character convolution with tanh and max-pooling over time."""

    def __init__(self, n_chars, d_char, window, n_filters, seed, prefix="repr.char_cnn"):
        if window % 2 != 1:
            raise EncoderError("window size must be odd")
        self.d_char = d_char
        self.window = window
        self.n_filters = n_filters
        self.emb = Parameter(
            glorot_uniform((n_chars, d_char), n_chars, d_char,
                           param_rng(seed, prefix + ".emb")),
            prefix + ".emb",
        )
        self.filters = Parameter(
            glorot_uniform((window, d_char, n_filters), window * d_char, n_filters,
                           param_rng(seed, prefix + ".filters")),
            prefix + ".filters",
        )
        self.bias = Parameter(np.zeros(n_filters), prefix + ".bias")

    def parameters(self):
        return [self.emb, self.filters, self.bias]

    def encode(self, char_ids):
        """(N, max_word_len) char ids -> (N, n_filters) word vectors.

        Words are padded on both sides with floor(window/2) PAD characters;
        a 1-char word still yields one valid convolution position. Positions
        past a word's own padded extent are masked out of the max-pool, so
        extra trailing PAD columns cannot change the output.
        """
        char_ids = np.asarray(char_ids)
        n, length = char_ids.shape
        lengths = np.maximum((char_ids != 0).sum(axis=1), 1)
        half = self.window // 2
        padded = np.zeros((n, length + 2 * half), dtype=np.int64)
        padded[:, half : half + length] = char_ids
        x = nm.gather(self.emb, padded)  # (N, P+2h, d_char)
        positions = length + 2 * half - self.window + 1
        conv = None
        for k in range(self.window):
            piece = x[:, k : k + positions, :]
            flat = nm.matmul(piece.reshape(n * positions, self.d_char), self.filters[k])
            term = flat.reshape(n, positions, self.n_filters)
            conv = term if conv is None else nm.add(conv, term)
        conv = nm.tanh(nm.add(conv, self.bias))
        valid = (np.arange(positions)[None, :] < lengths[:, None]).astype(float)
        mask = valid[:, :, None]
        conv = nm.add(nm.mul(conv, Tensor(mask)), Tensor((1.0 - mask) * -1e4))
        return nm.tmax(conv, axis=1)


class BLSTM:
    """Single-layer bi-directional LSTM; output is [forward; backward]."""

    def __init__(self, d_in, hidden, seed, prefix):
        self.d_in = d_in
        self.hidden = hidden
        self.prefix = prefix
        self._dirs = {}
        for direction in ("fwd", "bwd"):
            name = "%s.%s" % (prefix, direction)
            wx = Parameter(
                glorot_uniform((d_in, 4 * hidden), d_in, 4 * hidden,
                               param_rng(seed, name + ".W_x")),
                name + ".W_x",
            )
            wh = Parameter(
                glorot_uniform((hidden, 4 * hidden), hidden, 4 * hidden,
                               param_rng(seed, name + ".W_h")),
                name + ".W_h",
            )
            b = np.zeros(4 * hidden)
            b[hidden : 2 * hidden] = 1.0  # forget-gate bias
            self._dirs[direction] = (wx, wh, Parameter(b, name + ".b"))

    def parameters(self):
        return [p for triple in self._dirs.values() for p in triple]

    def _run(self, x, direction):
        wx, wh, b = self._dirs[direction]
        B, T, _ = x.shape
        H = self.hidden
        xw = nm.add(nm.matmul(x.reshape(B * T, self.d_in), wx), b).reshape(B, T, 4 * H)
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        steps = range(T) if direction == "fwd" else range(T - 1, -1, -1)
        outputs = [None] * T
        for t in steps:
            gates = nm.add(xw[:, t, :], nm.matmul(h, wh))
            i = nm.sigmoid(gates[:, 0 * H : 1 * H])
            f = nm.sigmoid(gates[:, 1 * H : 2 * H])
            g = nm.tanh(gates[:, 2 * H : 3 * H])
            o = nm.sigmoid(gates[:, 3 * H : 4 * H])
            c = nm.add(nm.mul(f, c), nm.mul(i, g))
            h = nm.mul(o, nm.tanh(c))
            outputs[t] = h
        return nm.stack(outputs, axis=1)  # (B, T, H)

    def forward(self, x, dropout=None, mode="eval", rng=None):
        """(B, T, d_in) -> (B, T, 2H); output dropout applied in train mode."""
        if x.shape[-1] != self.d_in:
            raise EncoderError(
                "input dimension %d != layer input size %d" % (x.shape[-1], self.d_in)
            )
        out = nm.concat([self._run(x, "fwd"), self._run(x, "bwd")], axis=2)
        if mode == "train" and dropout is not None and dropout.blstm_output_rate > 0:
            out = nm.dropout(out, dropout.blstm_output_rate, rng)
        return out


class WordRepresentation:
    """Concatenation of word embedding, char-CNN vector, and optional
    contextual vector per token."""

    def __init__(self, vocab, embedding_matrix, char_cnn, elmo_weights=None,
                 contextual_store=None, dropout=None, elmo_trainable=True):
        self.vocab = vocab
        self.char_cnn = char_cnn
        self.elmo_weights = elmo_weights
        self.elmo_trainable = elmo_trainable
        self.contextual_store = contextual_store
        self.dropout = dropout or DropoutSpec()
        self.trainable_embeddings = embedding_matrix.trainable
        self.word_emb = Parameter(embedding_matrix.matrix.copy(), "repr.word_emb")
        self.d_word = embedding_matrix.d_word

    @property
    def d_repr(self):
        d = self.d_word + self.char_cnn.n_filters
        if self.contextual_store is not None:
            d += self.contextual_store.dim
        return d

    def parameters(self):
        params = []
        if self.trainable_embeddings:
            params.append(self.word_emb)
        params.extend(self.char_cnn.parameters())
        if (self.elmo_weights is not None and self.contextual_store is not None
                and self.elmo_trainable):
            params.extend(self.elmo_weights.parameters())
        return params

    def forward(self, batch, mode="eval", rng=None):
        """Batch -> (B, T, d_repr) with input dropout in train mode."""
        from .embeddings import elmo_combine

        B, T = batch.token_ids.shape
        words = nm.gather(self.word_emb, batch.token_ids)  # (B, T, d_word)
        chars = self.char_cnn.encode(batch.char_ids.reshape(B * T, -1))
        chars = chars.reshape(B, T, self.char_cnn.n_filters)
        parts = [words, chars]
        if self.contextual_store is not None:
            ctx_rows = []
            for tokens in batch.tokens:
                layers = self.contextual_store.lookup(tokens)
                ctx_rows.append(elmo_combine(layers, self.elmo_weights))
            parts.append(nm.stack(ctx_rows, axis=0))  # (B, T, d_ctx)
        out = nm.concat(parts, axis=2)
        if mode == "train" and self.dropout.input_rate > 0:
            out = nm.dropout(out, self.dropout.input_rate, rng)
        return out
