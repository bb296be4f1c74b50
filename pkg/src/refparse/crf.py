"""Linear-chain CRF: scoring, exact log-space inference, and batch training.

The tag set is O plus B-f/I-f for every field in the model's label subset,
with ids ordered O first, then B/I per canonical field order. Transitions
into I-f from anything other than B-f/I-f carry -inf and are never treated
as parameters, so decoded output is IOB2-valid by construction.

All recursions work in log space. Inside one forward/backward step the
log-sum-exp is computed as max-shift + exp + matmul against exp(transitions),
which is safe for |weights| <= 50 and keeps the per-step work in BLAS.
"""

from __future__ import annotations

import base64
import gzip
import io
import json
import logging
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy import sparse

from . import optim
from .errors import DataError, NumericError, StructuralError, UsageError
from .features import FeatureConfig, FeatureIndex, build_index, corpus_features, extract
from .labels import (
    OUT,
    LabeledReference,
    make_tag,
    sort_fields,
    tag_field,
    tag_kind,
)
from .tokenizer import DEFAULT_TOKENIZER, TokenizerConfig, tokenize

if TYPE_CHECKING:
    from .corpus import Corpus

log = logging.getLogger(__name__)

MODEL_FORMAT = "refparse-model-v1"

NEG_INF = float("-inf")

# exponent cap used when factoring exp(a+b) as exp(a)*exp(b) in the pairwise
# expectation; keeps the product below float64 overflow for |weights| <= 50
_EXP_CAP = 600.0


def tags_for_labels(labels: Sequence[str]) -> tuple[str, ...]:
    """["O", "B-f1", "I-f1", "B-f2", ...] in canonical field order."""
    ordered = sort_fields(labels)
    tags: list[str] = [OUT]
    for f in ordered:
        tags.append(make_tag("B", f))
        tags.append(make_tag("I", f))
    return tuple(tags)


def _structure_masks(tags: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """(transition mask, begin mask): True where the weight is a free
    parameter, False where it is structurally -inf."""
    n = len(tags)
    trans = np.ones((n, n), dtype=bool)
    begin = np.ones(n, dtype=bool)
    for j, tj in enumerate(tags):
        if tag_kind(tj) != "I":
            continue
        fj = tag_field(tj)
        begin[j] = False
        for i, ti in enumerate(tags):
            if tag_kind(ti) == "O" or tag_field(ti) != fj:
                trans[i, j] = False
    return trans, begin


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 1.0
    max_epochs: int = 200
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.l2 < 0:
            raise UsageError(f"l2 strength must be >= 0, got {self.l2}")
        if self.tol <= 0:
            raise UsageError(f"tolerance must be > 0, got {self.tol}")

    def to_dict(self) -> dict:
        return {
            "l2": self.l2,
            "max_epochs": self.max_epochs,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CrfModel:
    """Immutable trained model. Weights are dense numpy arrays; the -inf
    structure of transition/begin never changes after construction."""

    labels: tuple[str, ...]
    tags: tuple[str, ...]
    emission: np.ndarray  # (F, L)
    transition: np.ndarray  # (L, L), -inf on forbidden entries
    begin: np.ndarray  # (L,), -inf on I tags
    end: np.ndarray  # (L,)
    feature_index: FeatureIndex
    feature_config: FeatureConfig
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER

    def __post_init__(self) -> None:
        n = len(self.tags)
        if self.emission.shape != (len(self.feature_index), n):
            raise StructuralError("emission weight shape does not match index/tags")
        if self.transition.shape != (n, n) or self.begin.shape != (n,) or self.end.shape != (n,):
            raise StructuralError("transition weight shapes do not match tag set")
        finite = [self.emission, self.end]
        for arr in finite:
            if not np.all(np.isfinite(arr)):
                raise StructuralError("non-finite value in model weights")
        tmask, bmask = _structure_masks(self.tags)
        if not np.all(np.isfinite(self.transition[tmask])) or np.any(
            self.transition[~tmask] != NEG_INF
        ):
            raise StructuralError("transition weights violate the IOB2 structure")
        if not np.all(np.isfinite(self.begin[bmask])) or np.any(
            self.begin[~bmask] != NEG_INF
        ):
            raise StructuralError("begin weights violate the IOB2 structure")

    @property
    def tag_ids(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tags)}


def empty_model(
    labels: Sequence[str],
    feature_index: FeatureIndex,
    feature_config: FeatureConfig,
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER,
) -> CrfModel:
    """All-zero weights over the given label subset (structure applied)."""
    tags = tags_for_labels(labels)
    n = len(tags)
    tmask, bmask = _structure_masks(tags)
    transition = np.where(tmask, 0.0, NEG_INF)
    begin = np.where(bmask, 0.0, NEG_INF)
    return CrfModel(
        labels=sort_fields(labels),
        tags=tags,
        emission=np.zeros((len(feature_index), n)),
        transition=transition,
        begin=begin,
        end=np.zeros(n),
        feature_index=feature_index,
        feature_config=feature_config,
        tokenizer_config=tokenizer_config,
    )


# ---------------------------------------------------------------------------
# vectorized instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorizedInstance:
    """Feature ids per position plus optional gold tag ids."""

    feats: tuple[np.ndarray, ...]
    gold: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.feats)


def vectorize(
    surfaces: Sequence[str],
    model: CrfModel,
    gold_tags: Sequence[str] | None = None,
    name: str = "<instance>",
) -> VectorizedInstance:
    """Map one token sequence (and optionally its gold tags) onto the model's
    feature and tag ids. Unknown features are dropped; unknown gold tags are
    a data error naming the instance."""
    gaz = model.feature_config.resolved_gazetteers()
    feats = tuple(
        np.array(
            model.feature_index.lookup_many(
                extract(surfaces, t, model.feature_config, gazetteers=gaz)
            ),
            dtype=np.int64,
        )
        for t in range(len(surfaces))
    )
    gold = None
    if gold_tags is not None:
        if len(gold_tags) != len(surfaces):
            raise StructuralError(f"{name}: gold tag count != token count")
        ids = model.tag_ids
        try:
            gold = np.array([ids[t] for t in gold_tags], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"{name}: tag {exc.args[0]!r} not in model tag set") from None
    return VectorizedInstance(feats=feats, gold=gold)


def emission_scores(inst: VectorizedInstance, model: CrfModel) -> np.ndarray:
    """(T, L) emission score matrix."""
    n_tags = len(model.tags)
    out = np.zeros((len(inst), n_tags))
    for t, ids in enumerate(inst.feats):
        if len(ids):
            out[t] = model.emission[ids].sum(axis=0)
    return out


# ---------------------------------------------------------------------------
# single-instance inference
# ---------------------------------------------------------------------------

def score_path(inst: VectorizedInstance, tags: Sequence[str], model: CrfModel) -> float:
    """Sum of emission and transition weights along one tag path."""
    if len(tags) != len(inst):
        raise StructuralError(f"{len(tags)} tags for {len(inst)} positions")
    ids = model.tag_ids
    try:
        path = [ids[t] for t in tags]
    except KeyError as exc:
        raise StructuralError(f"tag {exc.args[0]!r} not in model tag set") from None
    e = emission_scores(inst, model)
    total = model.begin[path[0]] + e[0, path[0]]
    for t in range(1, len(path)):
        total += model.transition[path[t - 1], path[t]] + e[t, path[t]]
    total += model.end[path[-1]]
    return float(total)


def _forward(e: np.ndarray, model: CrfModel) -> np.ndarray:
    """Forward table alpha (T, L) in log space."""
    exp_trans = np.exp(model.transition)
    alpha = np.empty_like(e)
    alpha[0] = model.begin + e[0]
    with np.errstate(divide="ignore"):
        for t in range(1, len(e)):
            prev = alpha[t - 1]
            m = prev.max()
            alpha[t] = m + np.log(np.exp(prev - m) @ exp_trans) + e[t]
    return alpha


def _backward(e: np.ndarray, model: CrfModel) -> np.ndarray:
    """Backward table beta (T, L) in log space; beta[T-1] = end weights."""
    exp_trans_t = np.exp(model.transition).T
    beta = np.empty_like(e)
    beta[-1] = model.end
    with np.errstate(divide="ignore"):
        for t in range(len(e) - 2, -1, -1):
            v = beta[t + 1] + e[t + 1]
            m = v.max()
            beta[t] = m + np.log(np.exp(v - m) @ exp_trans_t)
    return beta


def _logsumexp(v: np.ndarray) -> float:
    m = v.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.exp(v - m).sum()))


def log_partition(inst: VectorizedInstance, model: CrfModel) -> float:
    """log of the summed exponentiated scores over all tag paths."""
    if len(inst) == 0:
        raise StructuralError("log_partition of a zero-length instance")
    alpha = _forward(emission_scores(inst, model), model)
    return _logsumexp(alpha[-1] + model.end)


def marginals(inst: VectorizedInstance, model: CrfModel) -> np.ndarray:
    """(T, L) per-position tag posteriors; rows sum to 1."""
    if len(inst) == 0:
        raise StructuralError("marginals of a zero-length instance")
    e = emission_scores(inst, model)
    alpha = _forward(e, model)
    beta = _backward(e, model)
    logz = _logsumexp(alpha[-1] + model.end)
    return np.exp(alpha + beta - logz)


def viterbi(inst: VectorizedInstance, model: CrfModel) -> tuple[str, ...]:
    """Highest-scoring tag path; ties break toward the lowest tag id."""
    if len(inst) == 0:
        raise StructuralError("viterbi of a zero-length instance")
    e = emission_scores(inst, model)
    v = model.begin + e[0]
    backptr = np.zeros((len(e), len(model.tags)), dtype=np.int64)
    for t in range(1, len(e)):
        scores = v[:, None] + model.transition
        backptr[t] = scores.argmax(axis=0)  # first max -> lowest id
        v = scores[backptr[t], np.arange(scores.shape[1])] + e[t]
    last = int((v + model.end).argmax())
    path = [last]
    for t in range(len(e) - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return tuple(model.tags[i] for i in path)


def predict_tags(model: CrfModel, surfaces: Sequence[str]) -> tuple[str, ...]:
    """Decode one token sequence; empty input decodes to ()."""
    if not surfaces:
        return ()
    return viterbi(vectorize(surfaces, model), model)


def decode(model: CrfModel, raw: str) -> LabeledReference:
    """Tokenize raw text with the model's tokenizer config and decode."""
    tokens = tokenize(raw, model.tokenizer_config)
    tags = predict_tags(model, tuple(t.surface for t in tokens))
    return LabeledReference(raw=raw, tokens=tokens, tags=tags)


# ---------------------------------------------------------------------------
# batch NLL and gradient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CrfGradient:
    emission: np.ndarray
    transition: np.ndarray  # zeros on structurally forbidden entries
    begin: np.ndarray
    end: np.ndarray


class _Batch:
    """Padded, CSR-backed view of a list of vectorized gold instances."""

    def __init__(self, instances: Sequence[VectorizedInstance], model: CrfModel):
        if not instances:
            raise UsageError("batch must be non-empty")
        for inst in instances:
            if inst.gold is None:
                raise UsageError("batch instances need gold tags")
            if len(inst) == 0:
                raise StructuralError("zero-length instance in batch")
        n_tags = len(model.tags)
        self.n_tags = n_tags
        self.lengths = np.array([len(i) for i in instances], dtype=np.int64)
        self.n = len(instances)
        self.max_t = int(self.lengths.max())

        # flat position -> (t, n) and CSR feature matrix over flat positions
        pos_t: list[int] = []
        pos_n: list[int] = []
        indptr = [0]
        indices: list[np.ndarray] = []
        gold_flat: list[np.ndarray] = []
        for ni, inst in enumerate(instances):
            for t, ids in enumerate(inst.feats):
                pos_t.append(t)
                pos_n.append(ni)
                indices.append(ids)
                indptr.append(indptr[-1] + len(ids))
            gold_flat.append(inst.gold)  # type: ignore[arg-type]
        self.pos_t = np.array(pos_t, dtype=np.int64)
        self.pos_n = np.array(pos_n, dtype=np.int64)
        all_indices = (
            np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64)
        )
        self.x = sparse.csr_matrix(
            (
                np.ones(len(all_indices)),
                all_indices,
                np.array(indptr, dtype=np.int64),
            ),
            shape=(len(self.pos_t), len(model.feature_index)),
        )
        self.gold = np.concatenate(gold_flat)

        # observed transition / begin / end counts
        self.trans_counts = np.zeros((n_tags, n_tags))
        self.begin_counts = np.zeros(n_tags)
        self.end_counts = np.zeros(n_tags)
        for inst in instances:
            g = inst.gold
            self.begin_counts[g[0]] += 1
            self.end_counts[g[-1]] += 1
            if len(g) > 1:
                np.add.at(self.trans_counts, (g[:-1], g[1:]), 1.0)

        # active[t] = boolean over instances with length > t
        self.active = np.arange(self.max_t)[:, None] < self.lengths[None, :]

    def pad(self, flat: np.ndarray) -> np.ndarray:
        """Scatter (P, L) position-major values into (maxT, N, L)."""
        out = np.zeros((self.max_t, self.n, flat.shape[1]))
        out[self.pos_t, self.pos_n] = flat
        return out


def _batch_nll_grad(
    batch: _Batch, model: CrfModel, l2: float
) -> tuple[float, CrfGradient]:
    n_tags = batch.n_tags
    tmask, bmask = _structure_masks(model.tags)
    e_flat = batch.x @ model.emission  # (P, L)
    e_pad = batch.pad(e_flat)  # (maxT, N, L)
    exp_trans = np.exp(model.transition)

    # forward
    alphas = np.empty_like(e_pad)
    a = np.broadcast_to(model.begin, (batch.n, n_tags)) + e_pad[0]
    alphas[0] = a
    with np.errstate(divide="ignore"):
        for t in range(1, batch.max_t):
            m = a.max(axis=1, keepdims=True)
            a_new = m + np.log(np.exp(a - m) @ exp_trans) + e_pad[t]
            a = np.where(batch.active[t][:, None], a_new, a)
            alphas[t] = a
    final = a + model.end
    m = final.max(axis=1, keepdims=True)
    logz = (m[:, 0] + np.log(np.exp(final - m).sum(axis=1)))  # (N,)

    # backward; rows restart at `end` on each instance's last position
    betas = np.empty_like(e_pad)
    b = np.broadcast_to(model.end, (batch.n, n_tags)).copy()
    betas[batch.max_t - 1] = b
    last_pos = batch.lengths - 1
    exp_trans_t = exp_trans.T
    with np.errstate(divide="ignore"):
        for t in range(batch.max_t - 2, -1, -1):
            v = b + e_pad[t + 1]
            m = v.max(axis=1, keepdims=True)
            b_new = m + np.log(np.exp(v - m) @ exp_trans_t)
            b = np.where((last_pos == t)[:, None], model.end, b_new)
            betas[t] = b

    # per-position posteriors, flattened back to position-major order;
    # the exponent is <= 0 up to rounding, and clipping also neutralizes
    # garbage values at padded positions
    mu_pad = np.exp(np.minimum(alphas + betas - logz[None, :, None], 0.0))
    mu_flat = mu_pad[batch.pos_t, batch.pos_n]

    # expected transition counts: sum_t exp(alpha[t-1,i]) exp(trans) exp(c[t,j])
    d = np.zeros((n_tags, n_tags))
    for t in range(1, batch.max_t):
        act = batch.active[t]
        a_prev = alphas[t - 1]
        s1 = a_prev.max(axis=1, keepdims=True)
        c = e_pad[t] + betas[t] - logz[:, None] + s1
        left = np.exp(a_prev - s1)
        right = np.exp(np.minimum(c, _EXP_CAP))
        left[~act] = 0.0
        d += left.T @ right
    expected_trans = d * exp_trans

    # gold path score
    p_idx = np.arange(len(batch.gold))
    gold_score = float(e_flat[p_idx, batch.gold].sum())
    gold_score += float((model.transition[tmask] * batch.trans_counts[tmask]).sum())
    gold_score += float((model.begin[bmask] * batch.begin_counts[bmask]).sum())
    gold_score += float((model.end * batch.end_counts).sum())

    nll = float(logz.sum()) - gold_score

    # gradients: expected - observed (+ l2 * w)
    residual = mu_flat
    residual[p_idx, batch.gold] -= 1.0
    grad_emission = np.asarray(batch.x.T @ residual)
    grad_trans = expected_trans - batch.trans_counts
    grad_trans[~tmask] = 0.0
    grad_begin = mu_pad[0].sum(axis=0) - batch.begin_counts
    grad_begin[~bmask] = 0.0
    mu_last = mu_pad[last_pos, np.arange(batch.n)]
    grad_end = mu_last.sum(axis=0) - batch.end_counts

    if l2:
        nll += 0.5 * l2 * (
            float((model.emission**2).sum())
            + float((model.transition[tmask] ** 2).sum())
            + float((model.begin[bmask] ** 2).sum())
            + float((model.end**2).sum())
        )
        grad_emission += l2 * model.emission
        grad_trans[tmask] += l2 * model.transition[tmask]
        grad_begin[bmask] += l2 * model.begin[bmask]
        grad_end += l2 * model.end

    return nll, CrfGradient(
        emission=grad_emission,
        transition=grad_trans,
        begin=grad_begin,
        end=grad_end,
    )


def nll_and_gradient(
    instances: Sequence[VectorizedInstance], model: CrfModel, l2: float = 0.0
) -> tuple[float, CrfGradient]:
    """Regularized negative log-likelihood of the batch and its gradient."""
    return _batch_nll_grad(_Batch(instances, model), model, l2)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _pack(model: CrfModel, tmask: np.ndarray, bmask: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [
            model.emission.ravel(),
            model.transition[tmask],
            model.begin[bmask],
            model.end,
        ]
    )


def _unpack(
    x: np.ndarray, model: CrfModel, tmask: np.ndarray, bmask: np.ndarray
) -> CrfModel:
    n_tags = len(model.tags)
    n_em = model.emission.size
    n_tr = int(tmask.sum())
    n_bg = int(bmask.sum())
    emission = x[:n_em].reshape(model.emission.shape)
    transition = np.full((n_tags, n_tags), NEG_INF)
    transition[tmask] = x[n_em : n_em + n_tr]
    begin = np.full(n_tags, NEG_INF)
    begin[bmask] = x[n_em + n_tr : n_em + n_tr + n_bg]
    end = x[n_em + n_tr + n_bg :].copy()
    return replace(model, emission=emission, transition=transition, begin=begin, end=end)


def _grad_vector(grad: CrfGradient, tmask: np.ndarray, bmask: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [grad.emission.ravel(), grad.transition[tmask], grad.begin[bmask], grad.end]
    )


def train(
    corpus: "Corpus",
    feature_config: FeatureConfig | None = None,
    train_config: TrainConfig | None = None,
    tokenizer_config: TokenizerConfig = DEFAULT_TOKENIZER,
    training_log: list[tuple[int, float]] | None = None,
) -> CrfModel:
    """Fit a model on a labeled corpus over its declared label subset.

    Deterministic given the corpus order and configs (weights start at zero
    and the optimizer has no stochastic component). Appends (step, NLL) pairs
    to `training_log` when given, and logs them at INFO level.
    """
    feature_config = feature_config or FeatureConfig()
    train_config = train_config or TrainConfig()
    usable = [inst for inst in corpus.instances if len(inst.tokens) > 0]
    if not usable:
        raise UsageError("corpus has no usable (non-empty) instances")

    surfaces = [inst.surfaces() for inst in usable]
    index = build_index(
        corpus_features(surfaces, feature_config), feature_config.min_count
    )
    model = empty_model(corpus.labels, index, feature_config, tokenizer_config)
    vec = [
        vectorize(s, model, gold_tags=inst.tags, name=f"instance {i}")
        for i, (s, inst) in enumerate(zip(surfaces, usable))
    ]
    batch = _Batch(vec, model)
    tmask, bmask = _structure_masks(model.tags)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        m = _unpack(x, model, tmask, bmask)
        nll, grad = _batch_nll_grad(batch, m, train_config.l2)
        g = _grad_vector(grad, tmask, bmask)
        if np.isnan(nll) or np.isnan(g.dot(g)):
            raise NumericError(
                f"NaN in objective/gradient at |x|={np.abs(x).max():.3g}"
            )
        return nll, g

    x0 = _pack(model, tmask, bmask)
    result = optim.minimize(
        objective,
        x0,
        max_iter=train_config.max_epochs,
        rel_tol=train_config.tol,
    )
    for step, value in result.log:
        log.info("epoch %d: nll %.6f", step, value)
        if training_log is not None:
            training_log.append((step, value))
    return _unpack(result.x, model, tmask, bmask)


# ---------------------------------------------------------------------------
# model file I/O
# ---------------------------------------------------------------------------

def _encode_array(arr: np.ndarray) -> dict:
    finite = np.where(np.isfinite(arr), arr, 0.0)
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(finite.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return data.reshape(obj["shape"]).astype(np.float64)


def save_model(model: CrfModel, path) -> None:
    """Write a gzip-compressed JSON container (stable bytes for equal models)."""
    payload = {
        "format": MODEL_FORMAT,
        "labels": list(model.labels),
        "tags": list(model.tags),
        "tokenizer_config": model.tokenizer_config.to_dict(),
        "feature_config": model.feature_config.to_dict(),
        "feature_names": list(model.feature_index.names),
        "emission": _encode_array(model.emission),
        "transition": _encode_array(model.transition),
        "begin": _encode_array(model.begin),
        "end": _encode_array(model.end),
    }
    raw = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0) as fh:
        fh.write(raw)
    with open(path, "wb") as out:
        out.write(buf.getvalue())


def load_model(path) -> CrfModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] == b"\x1f\x8b":
        blob = gzip.decompress(blob)
    try:
        payload = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"not a model file: {exc}") from None
    if payload.get("format") != MODEL_FORMAT:
        raise DataError(
            f"unsupported model format {payload.get('format')!r}, expected {MODEL_FORMAT}"
        )
    tags = tuple(payload["tags"])
    tmask, bmask = _structure_masks(tags)
    transition = _decode_array(payload["transition"])
    transition[~tmask] = NEG_INF
    begin = _decode_array(payload["begin"])
    begin[~bmask] = NEG_INF
    return CrfModel(
        labels=tuple(payload["labels"]),
        tags=tags,
        emission=_decode_array(payload["emission"]),
        transition=transition,
        begin=begin,
        end=_decode_array(payload["end"]),
        feature_index=FeatureIndex(names=tuple(payload["feature_names"])),
        feature_config=FeatureConfig.from_dict(payload["feature_config"]),
        tokenizer_config=TokenizerConfig.from_dict(payload["tokenizer_config"]),
    )
