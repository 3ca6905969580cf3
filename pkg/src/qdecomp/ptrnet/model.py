"""Augmented pointer network over the question plus two operator tokens.

The encoder is a one-layer GRU over the augmented question. The decoder is a
one-layer GRU whose input at each step is the encoder state of the position
pointed to at the previous step (a learned start vector at step one). Each
step scores every encoder position with a bilinear form and the softmax of
those scores is the pointer distribution.
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from qdecomp.decomp import Op, Program, TokenizedQuestion
from qdecomp.errors import EmptyQuestion, InvalidLabel, ParseError, ShapeMismatch
from qdecomp.ptrnet import autodiff as ad
from qdecomp.ptrnet.autodiff import Tensor

COMP_TOKEN = "Comp"
CONJ_TOKEN = "Conj"
UNK_TOKEN = "<unk>"
FORMAT_VERSION = 1
MASK_PENALTY = -1e9


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    embed_dim: int = 50
    dropout: float = 0.25
    learning_rate: float = 0.01
    l2: float = 1e-4
    epochs: int = 30
    batch_size: int = 20
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.hidden_dim <= 0 or self.embed_dim <= 0 or self.batch_size <= 0:
            raise ValueError("dimensions and batch size must be positive")


@dataclass(frozen=True)
class AugmentedQuestion:
    base: TokenizedQuestion
    tokens: tuple[str, ...]

    @property
    def comp_position(self) -> int:
        return len(self.base)

    @property
    def conj_position(self) -> int:
        return len(self.base) + 1


def augment(q: TokenizedQuestion) -> AugmentedQuestion:
    if len(q) < 1:
        raise EmptyQuestion("cannot augment an empty question")
    return AugmentedQuestion(q, tuple(q.tokens) + (COMP_TOKEN, CONJ_TOKEN))


@dataclass
class Vocab:
    """Token ids: pre-trained (frozen) tokens first, then learned ones."""

    known: list[str] = field(default_factory=list)
    unknown: list[str] = field(default_factory=lambda: [UNK_TOKEN, COMP_TOKEN, CONJ_TOKEN])

    def __post_init__(self) -> None:
        for special in (UNK_TOKEN, COMP_TOKEN, CONJ_TOKEN):
            if special not in self.unknown:
                self.unknown.append(special)
        self._index = {t: i for i, t in enumerate(self.known)}
        off = len(self.known)
        self._index.update({t: off + i for i, t in enumerate(self.unknown)})

    def __len__(self) -> int:
        return len(self.known) + len(self.unknown)

    @staticmethod
    def key(token: str) -> str:
        return token if token in (COMP_TOKEN, CONJ_TOKEN) else token.lower()

    def id(self, token: str) -> int:
        return self._index.get(self.key(token), self._index[UNK_TOKEN])

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    @classmethod
    def build(cls, questions: Iterable[Sequence[str]], store=None) -> "Vocab":
        known, unknown, seen = [], [], set()
        for tokens in questions:
            for tok in tokens:
                k = cls.key(tok)
                if k in seen:
                    continue
                seen.add(k)
                if store is not None and store.get(k) is not None:
                    known.append(k)
                else:
                    unknown.append(k)
        return cls(known, [UNK_TOKEN, COMP_TOKEN, CONJ_TOKEN] + [u for u in unknown if u not in (UNK_TOKEN,)])


class PointerNet:
    """Parameters plus the frozen pre-trained embedding rows."""

    PARAM_NAMES = (
        "emb_unk",
        "enc_W",
        "enc_U",
        "enc_b",
        "dec_W",
        "dec_U",
        "dec_b",
        "att_W",
        "go",
    )

    def __init__(self, config: ModelConfig, vocab: Vocab, fixed: np.ndarray, params: dict[str, np.ndarray]):
        self.config = config
        self.vocab = vocab
        if fixed.shape != (len(vocab.known), config.embed_dim):
            raise ShapeMismatch(f"fixed embeddings {fixed.shape} do not match vocabulary")
        self.fixed = Tensor(fixed)
        self.params = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
        self._check_shapes()

    @classmethod
    def initialize(cls, config: ModelConfig, vocab: Vocab, store=None) -> "PointerNet":
        rng = np.random.default_rng([config.seed, 1])
        h, e, s = config.hidden_dim, config.embed_dim, config.init_scale
        fixed = np.zeros((len(vocab.known), e))
        for i, tok in enumerate(vocab.known):
            fixed[i] = store.get(tok)

        def u(*shape):
            return rng.uniform(-s, s, size=shape)

        params = {
            "emb_unk": u(len(vocab.unknown), e),
            "enc_W": u(e, 3 * h),
            "enc_U": u(h, 3 * h),
            "enc_b": np.zeros(3 * h),
            "dec_W": u(h, 3 * h),
            "dec_U": u(h, 3 * h),
            "dec_b": np.zeros(3 * h),
            "att_W": u(h, h),
            "go": u(h),
        }
        return cls(config, vocab, fixed, params)

    def _check_shapes(self) -> None:
        h, e = self.config.hidden_dim, self.config.embed_dim
        want = {
            "emb_unk": (len(self.vocab.unknown), e),
            "enc_W": (e, 3 * h),
            "enc_U": (h, 3 * h),
            "enc_b": (3 * h,),
            "dec_W": (h, 3 * h),
            "dec_U": (h, 3 * h),
            "dec_b": (3 * h,),
            "att_W": (h, h),
            "go": (h,),
        }
        if set(self.params) != set(want):
            raise ShapeMismatch(f"parameter names {sorted(self.params)} != {sorted(want)}")
        for name, shape in want.items():
            if self.params[name].shape != shape:
                raise ShapeMismatch(f"{name} has shape {self.params[name].shape}, expected {shape}")

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def l2_norm_sq(self) -> Tensor:
        terms = [ad.tsum(p * p) for p in self.params.values()]
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        return total

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.params.values())

    # -- serialization -------------------------------------------------

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": FORMAT_VERSION,
            "config": asdict(self.config),
            "vocab_known": self.vocab.known,
            "vocab_unknown": self.vocab.unknown,
        }
        arrays = {f"param__{k}": v.value for k, v in self.params.items()}
        arrays["fixed"] = self.fixed.value
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
        # fixed member timestamps keep the file byte-identical across runs
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name in sorted(arrays):
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "PointerNet":
        with np.load(path, allow_pickle=False) as data:
            try:
                meta = json.loads(str(data["meta"]))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"model file lacks metadata: {exc}") from exc
            if meta.get("format_version") != FORMAT_VERSION:
                raise ParseError(
                    f"model format version {meta.get('format_version')!r} != {FORMAT_VERSION}"
                )
            params = {
                k[len("param__") :]: np.array(data[k]) for k in data.files if k.startswith("param__")
            }
            fixed = np.array(data["fixed"])
        vocab = Vocab(meta["vocab_known"], meta["vocab_unknown"])
        return cls(ModelConfig(**meta["config"]), vocab, fixed, params)


def gru_step(h: Tensor, x: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    """One GRU update for a batch: rows of ``h`` (B, H) and ``x`` (B, D).

    Gates are packed as [update | reset | candidate] along the last axis.
    1-D ``h`` and ``x`` are treated as a batch of one.
    """
    if h.value.ndim == 1:
        out = gru_step(ad.reshape(h, (1, -1)), ad.reshape(x, (1, -1)), W, U, b)
        return ad.reshape(out, (out.shape[1],))
    H = h.shape[-1]
    if W.shape[1] != 3 * H or U.shape != (H, 3 * H) or x.shape[-1] != W.shape[0]:
        raise ShapeMismatch(f"GRU shapes h={h.shape} x={x.shape} W={W.shape} U={U.shape}")
    xw = ad.matmul(x, W) + b
    hu = ad.matmul(h, U[:, : 2 * H])
    z = ad.sigmoid(xw[:, :H] + hu[:, :H])
    r = ad.sigmoid(xw[:, H : 2 * H] + hu[:, H:])
    cand = ad.tanh(xw[:, 2 * H :] + ad.matmul(r * h, U[:, 2 * H :]))
    return h + z * (cand - h)


@dataclass
class Batch:
    ids: np.ndarray  # (B, T) vocabulary ids, padded with 0
    mask: np.ndarray  # (B, T) 1 for real positions
    lengths: np.ndarray  # (B,) augmented lengths
    base_lengths: np.ndarray  # (B,) |q|
    targets: np.ndarray | None = None  # (B, 3) pointer targets


def target_positions(program: Program, n: int) -> tuple[int, int, int]:
    """Pointer targets over the augmented question of a length-``n`` question.

    A missing Conj copy index points at the Conj token itself.
    """
    if program.op is Op.SIMPQA or not program.is_valid(n):
        raise InvalidLabel(f"label {program} is not a valid Comp/Conj program for length {n}")
    if program.op is Op.COMP:
        return n, program.i, program.j
    return n + 1, program.i, n + 1 if program.j == -1 else program.j


def make_batch(
    net: PointerNet, questions: Sequence[TokenizedQuestion], labels: Sequence[Program] | None = None
) -> Batch:
    aug = [augment(q) for q in questions]
    T = max(len(a.tokens) for a in aug)
    B = len(aug)
    ids = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T))
    for b, a in enumerate(aug):
        ids[b, : len(a.tokens)] = net.vocab.ids(a.tokens)
        mask[b, : len(a.tokens)] = 1.0
    lengths = np.array([len(a.tokens) for a in aug])
    targets = None
    if labels is not None:
        targets = np.array([target_positions(p, len(q)) for p, q in zip(labels, questions)])
    return Batch(ids, mask, lengths, lengths - 2, targets)


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rng is None or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep


def encode(net: PointerNet, batch: Batch, rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
    """Encoder states (B, T, H) and the final state at each row's last real position.

    Passing ``rng`` turns on training-time dropout on the input embeddings.
    """
    p = net.params
    table = ad.concat([net.fixed, p["emb_unk"]], axis=0)
    x = ad.take_rows(table, batch.ids)
    x = _dropout(x, net.config.dropout, rng)
    B, T = batch.ids.shape
    h = Tensor(np.zeros((B, net.config.hidden_dim)))
    states = []
    for t in range(T):
        h_new = gru_step(h, x[:, t, :], p["enc_W"], p["enc_U"], p["enc_b"])
        m = batch.mask[:, t : t + 1]
        h = h_new if m.all() else h + (h_new - h) * m
        states.append(h)
    return ad.stack(states, axis=1), h


def attention_scores(net: PointerNet, enc: Tensor, s: Tensor, mask: np.ndarray) -> Tensor:
    """Bilinear scores s·W·h_k for every encoder position; padding gets a large penalty."""
    proj = ad.matmul(s, net.params["att_W"])
    B, H = proj.shape
    scores = ad.tsum(enc * ad.reshape(proj, (B, 1, H)), axis=-1)
    if not mask.all():
        scores = scores + (1.0 - mask) * MASK_PENALTY
    return scores


def decode_distribution(net: PointerNet, enc: Tensor, s: Tensor, mask: np.ndarray) -> np.ndarray:
    """Pointer probabilities over encoder positions for decoder states ``s``."""
    return ad.softmax(attention_scores(net, enc, s, mask).value)


def _decoder_input(net: PointerNet, enc: Tensor, prev: np.ndarray | None, B: int) -> Tensor:
    if prev is None:
        go = net.params["go"]
        return ad.reshape(go, (1, go.shape[0])) * np.ones((B, 1))
    return ad.pick_rows(enc, prev)


def sequence_nll(net: PointerNet, batch: Batch, rng: np.random.Generator | None = None) -> Tensor:
    """Per-example negative log-likelihood of the three pointer targets (B,)."""
    if batch.targets is None:
        raise InvalidLabel("batch has no targets")
    enc, s = encode(net, batch, rng)
    p = net.params
    B = batch.ids.shape[0]
    total = None
    prev = None
    for step in range(3):
        x = _dropout(_decoder_input(net, enc, prev, B), net.config.dropout, rng)
        s = gru_step(s, x, p["dec_W"], p["dec_U"], p["dec_b"])
        logp = ad.log_softmax(attention_scores(net, enc, s, batch.mask))
        nll = -ad.pick(logp, batch.targets[:, step])
        total = nll if total is None else total + nll
        prev = batch.targets[:, step]
    return total


def loss(net: PointerNet, batch: Batch, rng: np.random.Generator | None = None) -> Tensor:
    """Mean sequence NLL over the batch plus ``l2 * ||theta||^2``."""
    data = ad.mean(sequence_nll(net, batch, rng))
    if net.config.l2 == 0.0:
        return data
    return data + net.l2_norm_sq() * net.config.l2


def _step_mask(step: int, op: np.ndarray, first: np.ndarray, n: np.ndarray, T: int) -> np.ndarray:
    """Validity mask (B, T) for decoding step ``step`` given earlier choices."""
    B = len(n)
    pos = np.arange(T)[None, :]
    nb = n[:, None]
    if step == 0:
        # Conj needs a split 1 <= i < n, impossible for one-token questions
        return (pos == nb) | ((pos == nb + 1) & (nb >= 2))
    is_comp = (op == n)[:, None]
    if step == 1:
        return np.where(is_comp, pos < nb, (pos >= 1) & (pos < nb))
    i = first[:, None]
    comp_ok = (pos >= i) & (pos < nb)
    conj_ok = (pos < i) | (pos == nb + 1)
    return np.where(is_comp, comp_ok, conj_ok).reshape(B, T)


def predict_batch(net: PointerNet, questions: Sequence[TokenizedQuestion]) -> list[Program]:
    """Greedy decoding restricted to structurally valid programs."""
    if not questions:
        return []
    batch = make_batch(net, questions)
    enc, s = encode(net, batch)
    p = net.params
    B, T = batch.ids.shape
    n = batch.base_lengths
    chosen: list[np.ndarray] = []
    prev = None
    for step in range(3):
        x = _decoder_input(net, enc, prev, B)
        s = gru_step(s, x, p["dec_W"], p["dec_U"], p["dec_b"])
        scores = attention_scores(net, enc, s, batch.mask).value
        op = chosen[0] if chosen else None
        first = chosen[1] if len(chosen) > 1 else None
        valid = _step_mask(step, op, first, n, T) & (batch.mask > 0)
        masked = np.where(valid, scores, -np.inf)
        pick = masked.argmax(axis=1)
        chosen.append(pick)
        prev = pick
    out = []
    for b in range(B):
        nb = int(n[b])
        op, i, j = int(chosen[0][b]), int(chosen[1][b]), int(chosen[2][b])
        if op == nb:
            out.append(Program.comp(i, j))
        else:
            out.append(Program.conj(i, -1 if j == nb + 1 else j))
    return out


def predict(net: PointerNet, q: TokenizedQuestion) -> Program:
    return predict_batch(net, [q])[0]
