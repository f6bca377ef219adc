"""Model assembly for the four topologies and per-task forward routing."""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import numeric as nm
from .crf import CRFLayer, crf_nll_batch, softmax_nll_batch, viterbi_decode
from .embeddings import ElmoWeights, random_embeddings
from .encoders import BLSTM, CharCNN, DropoutSpec, WordRepresentation
from .lm import LMHead, joint_loss, lm_losses
from .numeric import Tensor

TOPOLOGIES = ("single", "embedding_shared", "rnn_shared", "hierarchical")
LM_MODES = ("none", "shared", "unshared")


class SpecError(ValueError):
    pass


@dataclass
class ModelSpec:
    topology: str = "single"
    main_task: str = "main"
    aux_task: str = None
    lm_mode: str = "none"
    hidden: int = 256
    d_word: int = 300
    d_char: int = 30
    char_window: int = 3
    char_filters: int = 30
    input_dropout: float = 0.33
    blstm_dropout: float = 0.5
    lam: float = 0.05
    use_contextual: bool = False
    ctx_layers: int = 2
    ctx_dim: int = 1024
    elmo_frozen: bool = True
    embeddings_trainable: bool = True
    crf_enabled: bool = True  # per-step softmax ablation when False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.topology not in TOPOLOGIES:
            raise SpecError("unknown topology %r" % self.topology)
        if self.lm_mode not in LM_MODES:
            raise SpecError("unknown lm_mode %r" % self.lm_mode)
        if self.topology != "single" and not self.aux_task:
            raise SpecError("topology %r requires an aux_task" % self.topology)
        if self.topology == "single" and self.aux_task:
            raise SpecError("single topology takes no aux_task")
        if self.lm_mode == "unshared" and self.topology == "single":
            raise SpecError("unshared lm_mode requires a multi-task topology")

    @property
    def tasks(self):
        return (self.main_task,) if self.topology == "single" else (
            self.main_task, self.aux_task)

    def level_of(self, task):
        """BLSTM level feeding the CRF head of `task`."""
        if self.topology == "rnn_shared":
            return "shared"
        if self.topology == "single":
            return "main"
        return "main" if task == self.main_task else "aux"

    @property
    def levels(self):
        if self.topology == "rnn_shared":
            return ("shared",)
        if self.topology == "single":
            return ("main",)
        return ("aux", "main")


@dataclass
class ForwardResult:
    states: Tensor              # post-dropout hidden states fed to the CRF
    loss: Tensor = None         # joint loss (task + weighted LM terms)
    task_loss: Tensor = None
    lm_fwd: Tensor = None
    lm_bwd: Tensor = None


class Model:
    """Shared representation stack, BLSTM level(s), per-task CRF heads,
    and optional LM head(s)."""

    def __init__(self, spec, vocab, word_repr, blstms, crf_heads, lm_heads):
        self.spec = spec
        self.vocab = vocab
        self.word_repr = word_repr
        self.blstms = blstms
        self.crf_heads = crf_heads
        self.lm_heads = lm_heads
        self.dropout = word_repr.dropout

    def parameters(self):
        params = list(self.word_repr.parameters())
        for level in self.spec.levels:
            params.extend(self.blstms[level].parameters())
        for task in sorted(self.crf_heads):
            params.extend(self.crf_heads[task].parameters())
        for key in sorted(self.lm_heads):
            params.extend(self.lm_heads[key].parameters())
        return params

    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _lm_head_for(self, task):
        if self.spec.lm_mode == "shared":
            return self.lm_heads["shared"], "base"
        if self.spec.lm_mode == "unshared":
            level = self.spec.level_of(task)
            return self.lm_heads[level], level
        return None, None

    def forward_task(self, batch, task, mode="eval", rng=None, with_loss=True):
        """Run the forward pass of one task over a batch.

        Returns the CRF-ready hidden states and, when the batch carries gold
        labels and `with_loss`, the joint loss per the configured lm_mode.
        """
        spec = self.spec
        if task not in spec.tasks:
            raise SpecError("task %r not present in %s model" % (task, spec.topology))
        train = mode == "train"
        raw = self.word_repr.forward(batch, mode="eval")
        x = nm.dropout(raw, self.dropout.input_rate, rng) if train else raw

        level_states = {}
        level = spec.level_of(task)
        if spec.topology == "hierarchical":
            aux_states = self.blstms["aux"].forward(x, self.dropout, mode, rng)
            level_states["aux"] = aux_states
            if task == spec.main_task:
                x2 = nm.concat([raw, aux_states], axis=2)
                if train:
                    x2 = nm.dropout(x2, self.dropout.input_rate, rng)
                level_states["main"] = self.blstms["main"].forward(
                    x2, self.dropout, mode, rng)
        else:
            level_states[level] = self.blstms[level].forward(x, self.dropout, mode, rng)
        states = level_states[level]

        result = ForwardResult(states=states)
        if not with_loss or task not in batch.label_ids:
            return result
        gold = batch.label_ids[task]
        head = self.crf_heads[task]
        nll = crf_nll_batch if spec.crf_enabled else softmax_nll_batch
        result.task_loss = nll(states, gold, head)
        lm_head, placement = self._lm_head_for(task)
        if lm_head is not None:
            if placement == "base":
                # shared LM reads the lowest/shared level's states
                lm_states = level_states.get("aux", states)
            else:
                lm_states = level_states[placement]
            H = spec.hidden
            result.lm_fwd, result.lm_bwd = lm_losses(
                lm_states[:, :, :H], lm_states[:, :, H:], batch.lm_ids, lm_head)
            result.loss = joint_loss(result.task_loss, result.lm_fwd,
                                     result.lm_bwd, spec.lam)
        else:
            result.loss = result.task_loss
        return result

    def decode(self, batch, task):
        """Viterbi label-id sequences for every sentence in the batch."""
        result = self.forward_task(batch, task, mode="eval", with_loss=False)
        head = self.crf_heads[task]
        out = []
        for b in range(batch.size):
            if self.spec.crf_enabled:
                out.append(viterbi_decode(result.states.data[b], head).labels)
            else:
                e = result.states.data[b] @ head.proj_w.data + head.proj_b.data
                out.append([int(i) for i in np.argmax(e, axis=1)])
        return out

    def predict_labels(self, batch, task):
        names = self.vocab.label_names(task)
        return [[names[i] for i in seq] for seq in self.decode(batch, task)]


def build_model(spec, vocab, embedding_matrix=None, contextual_store=None):
    """Construct the full parameter set for a ModelSpec.

    Parameter initialization is keyed on (seed, parameter name), so a
    parameter's initial value does not depend on which other parameters
    exist in the model.
    """
    spec.validate()
    for task in spec.tasks:
        if task not in vocab.label_to_id:
            raise SpecError("vocabulary has no label set for task %r" % task)
    if spec.use_contextual and contextual_store is None:
        raise SpecError("use_contextual requires a contextual vector store")
    if embedding_matrix is None:
        embedding_matrix = random_embeddings(vocab, spec.d_word, spec.seed)
    embedding_matrix.trainable = spec.embeddings_trainable
    char_cnn = CharCNN(vocab.n_chars, spec.d_char, spec.char_window,
                       spec.char_filters, spec.seed)
    elmo = None
    if spec.use_contextual:
        elmo = (ElmoWeights.frozen_top_layer(spec.ctx_layers) if spec.elmo_frozen
                else ElmoWeights(spec.ctx_layers))
    dropout = DropoutSpec(spec.input_dropout, spec.blstm_dropout)
    word_repr = WordRepresentation(vocab, embedding_matrix, char_cnn,
                                   elmo_weights=elmo,
                                   contextual_store=contextual_store,
                                   dropout=dropout)
    if spec.elmo_frozen and elmo is not None:
        word_repr.elmo_trainable = False
    d_repr = word_repr.d_repr
    blstms = {}
    for level in spec.levels:
        d_in = d_repr + 2 * spec.hidden if (
            spec.topology == "hierarchical" and level == "main") else d_repr
        blstms[level] = BLSTM(d_in, spec.hidden, spec.seed, "%s.blstm" % level)
    crf_heads = {
        task: CRFLayer(2 * spec.hidden, len(vocab.labels_for(task)), spec.seed,
                       "%s.crf" % ("main" if task == spec.main_task else "aux"))
        for task in spec.tasks
    }
    lm_heads = {}
    if spec.lm_mode == "shared":
        lm_heads["shared"] = LMHead(spec.hidden, vocab.n_lm_words, spec.seed, "lm.shared")
    elif spec.lm_mode == "unshared":
        for level in spec.levels:
            lm_heads[level] = LMHead(spec.hidden, vocab.n_lm_words, spec.seed,
                                     "lm.%s" % level)
    return Model(spec, vocab, word_repr, blstms, crf_heads, lm_heads)


# -- checkpoints ------------------------------------------------------------


def vocab_hash(vocab):
    payload = json.dumps(vocab.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def save_checkpoint(model, directory):
    """Write manifest.json + params.bin (little-endian float64) atomically."""
    os.makedirs(directory, exist_ok=True)
    params = model.parameters()
    manifest = {
        "format": "seqlab-checkpoint-v1",
        "spec": asdict(model.spec),
        "vocab_sha256": vocab_hash(model.vocab),
        "vocab": model.vocab.to_dict(),
        "params": [{"name": p.name, "shape": list(p.shape)} for p in params],
    }
    payload = b"".join(np.ascontiguousarray(p.data, dtype="<f8").tobytes()
                       for p in params)
    for name, data in (("manifest.json", json.dumps(manifest, sort_keys=True).encode()),
                       ("params.bin", payload)):
        tmp = os.path.join(directory, name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, os.path.join(directory, name))


def load_checkpoint(directory, contextual_store=None):
    """Rebuild a Model from a checkpoint; every name and shape is validated."""
    from .corpus import Vocabulary

    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "seqlab-checkpoint-v1":
        raise SpecError("unrecognized checkpoint format")
    vocab = Vocabulary.from_dict(manifest["vocab"])
    if vocab_hash(vocab) != manifest["vocab_sha256"]:
        raise SpecError("vocabulary hash mismatch in checkpoint")
    spec = ModelSpec(**manifest["spec"])
    model = build_model(spec, vocab, contextual_store=contextual_store)
    params = model.parameters()
    recorded = manifest["params"]
    if len(recorded) != len(params):
        raise SpecError("checkpoint has %d parameters, model has %d"
                        % (len(recorded), len(params)))
    with open(os.path.join(directory, "params.bin"), "rb") as fh:
        payload = fh.read()
    offset = 0
    for p, rec in zip(params, recorded):
        if p.name != rec["name"] or list(p.shape) != rec["shape"]:
            raise SpecError("checkpoint parameter mismatch: %r %s vs %r %s"
                            % (rec["name"], rec["shape"], p.name, list(p.shape)))
        n = p.size * 8
        p.data[...] = np.frombuffer(payload[offset : offset + n],
                                    dtype="<f8").reshape(p.shape)
        offset += n
    if offset != len(payload):
        raise SpecError("checkpoint payload size mismatch")
    return model
