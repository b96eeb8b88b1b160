"""End-to-end training, generation, evaluation and checkpointing."""
from __future__ import annotations

import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from . import corpus as C
from . import lda as L
from .decoder import decode, init_decoder, teacher_forced
from .encoder import EMBEDDING, encode, init_encoder
from .keyword import (classifier_loss, classify_emotion, init_classifier, init_keyword, keyword_loss,
                      predict_emotion_keyword, predict_topic_keyword, support_mask)
from .metrics import EmbeddingTable, MetricReport, score_corpus
from .numcore import Adam, Graph, Gradients, ParamStore, dumps_container, loads_container
from .selector import assemble, init_selector, select_direction, selector_loss

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

JOINT_PREFIXES = (EMBEDDING, "enc.", "kw.", "s1.", "s2.", "s3a.", "s3b.")
CLASSIFIER_PREFIX = "emo."
SELECTOR_PREFIX = "dir."


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class Config:
    corpus: str | None = None
    emotion_dict: str | None = None
    topic_dict: str | None = None
    stopwords: str | None = None
    workdir: str = "run"
    seed: int = 0
    emb_dim: int = 64
    hidden_dim: int = 64
    cat_dim: int = 16
    att_dim: int = 32
    max_middle_len: int = 10
    max_side_len: int = 10
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 1
    clip_norm: float = 5.0
    classifier_epochs: int = 20
    classifier_lr: float = 1e-2
    selector_epochs: int = 20
    selector_lr: float = 1e-2
    lda_topics: int = 10
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_iterations: int = 200
    lda_infer_sweeps: int = 20
    lda_high_freq: float = 0.01
    lda_restarts: int = 1
    val_size: int = 0
    test_size: int = 0

    def validate(self) -> "Config":
        for name in ("emb_dim", "hidden_dim", "cat_dim", "att_dim", "batch_size", "lda_topics"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("max_middle_len", "max_side_len", "epochs", "classifier_epochs", "selector_epochs",
                     "lda_iterations", "lda_infer_sweeps", "val_size", "test_size", "lda_restarts"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.lda_topics < 2:
            raise ConfigError("lda_topics must be >= 2")
        for name in ("lr", "classifier_lr", "selector_lr", "clip_norm"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, **overrides) -> "Config":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls.from_dict(data)
        # relative paths are relative to the config file
        for name in ("corpus", "emotion_dict", "topic_dict", "stopwords", "workdir"):
            value = getattr(cfg, name)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg, name, str((path.parent / value).resolve()))
        return cfg

    def require_inputs(self) -> None:
        for name in ("corpus", "emotion_dict", "topic_dict"):
            value = getattr(self, name)
            if value is None or not Path(value).is_file():
                raise ConfigError(f"{name} path not found: {value}")
        if self.stopwords is not None and not Path(self.stopwords).is_file():
            raise ConfigError(f"stopwords path not found: {self.stopwords}")


# ---------------------------------------------------------------------------
# model container


@dataclass
class GenerationResult:
    reply: list[str]
    trace: dict


class Model:
    """Everything generation needs: weights, vocabulary, dictionaries and the topic model."""

    def __init__(self, config: Config, vocab: C.Vocab, ed: C.EmotionDictionary, td: C.TopicDictionary,
                 lda: L.LdaModel, topic_map: Sequence[int], params: ParamStore):
        self.config = config
        self.vocab = vocab
        self.ed = ed
        self.td = td
        self.lda = lda
        self.topic_map = list(topic_map)
        self.params = params
        V = len(vocab)
        self.et_mask = support_mask(V, [vocab.stoi[w] for w in ed.words() if w in vocab])
        self.tp_mask = support_mask(V, [vocab.stoi[w] for w in td.words() if w in vocab])

    # training pieces -------------------------------------------------------
    def ids(self, tokens: Sequence[str]) -> list[int]:
        return self.vocab.encode(tokens)

    def joint_loss(self, g: Graph, m: C.MarkedPair):
        """(total loss node, decoder token loss nodes) for one marked pair, teacher forced."""
        v = self.vocab
        enc = encode(g, self.ids(m.pair.post))
        w_tp, w_et = v.id(m.topic_keyword), v.id(m.emotion_keyword)
        dec = teacher_forced(g, enc, w_tp, w_et, self.ids(m.left), self.ids(m.middle), self.ids(m.right))
        kw = [keyword_loss(g, enc, "et", m.emotion_category, w_et, self.et_mask),
              keyword_loss(g, enc, "tp", m.topic_category, w_tp, self.tp_mask)]
        tokens = dec.losses
        return g.add_n(tokens + kw), tokens

    def selector_example(self, m: C.MarkedPair):
        y_f, y_b = assemble(self.ids(m.left), self.vocab.id(m.topic_keyword), self.ids(m.middle),
                            self.vocab.id(m.emotion_keyword), self.ids(m.right))
        return y_f, y_b, m.direction

    # inference -------------------------------------------------------------
    def topic_category(self, post: Sequence[str]) -> tuple[int, int, np.ndarray]:
        k, dist = L.infer_topic(self.lda, post, sweeps=self.config.lda_infer_sweeps, seed=self.config.seed)
        return self.topic_map[k], k, dist

    def predict_keywords(self, post: Sequence[str]):
        ids = self.ids(post)
        g = Graph(self.params)
        enc = encode(g, ids)
        emo_cat, emo_dist = classify_emotion(self.params, ids)
        tp_cat, lda_topic, tp_dist = self.topic_category(post)
        et = predict_emotion_keyword(g, enc, emo_cat, self.et_mask)
        tp = predict_topic_keyword(g, enc, tp_cat, self.tp_mask)
        return g, enc, (emo_cat, emo_dist), (tp_cat, lda_topic, tp_dist), et, tp

    def generate(self, post: Sequence[str]) -> GenerationResult:
        if len(post) == 0:
            raise ValueError("post must be non-empty")
        g, enc, (emo_cat, emo_dist), (tp_cat, lda_topic, tp_dist), et, tp = self.predict_keywords(post)
        dec = decode(g, enc, tp.token, et.token, self.config.max_middle_len, self.config.max_side_len)
        y_f, y_b = assemble(dec.sides.left, tp.token, dec.middle.tokens, et.token, dec.sides.right)
        verdict = select_direction(self.params, y_f, y_b)
        words = self.vocab.decode
        reply = words(verdict.tokens)
        trace = {
            "post": list(post),
            "categories": {
                "emotion": C.EMOTIONS[emo_cat],
                "emotion_id": emo_cat,
                "emotion_distribution": emo_dist.tolist(),
                "topic": tp_cat,
                "lda_topic": lda_topic,
                "topic_distribution": tp_dist.tolist(),
            },
            "keywords": {"emotion": self.vocab.itos[et.token], "topic": self.vocab.itos[tp.token]},
            "segments": {
                "left": words(dec.sides.left),
                "topic": self.vocab.itos[tp.token],
                "middle": words(dec.middle.tokens),
                "emotion": self.vocab.itos[et.token],
                "right": words(dec.sides.right),
            },
            "draft": words(dec.draft.tokens),
            "direction": {"score": verdict.score, "chosen": verdict.chosen},
            "attention": [row.weights.tolist() for row in dec.middle.attention],
            "reply": reply,
        }
        return GenerationResult(reply, trace)

    def embedding_table(self) -> EmbeddingTable:
        return EmbeddingTable.from_matrix(self.vocab.itos, self.params[EMBEDDING], skip=C.RESERVED)

    # persistence -----------------------------------------------------------
    def to_bytes(self) -> bytes:
        lda_tensors, lda_meta = self.lda.to_tensors()
        tensors = dict(self.params.entries)
        tensors.update(lda_tensors)
        meta = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "vocab": self.vocab.to_list(),
            "emotion_dictionary": self.ed.category,
            "topic_dictionary": {str(k): v for k, v in sorted(self.td.lists.items())},
            "topic_map": self.topic_map,
            "lda": lda_meta,
            "step_count": self.params.step_count,
        }
        return dumps_container(tensors, meta)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Model":
        tensors, meta = loads_container(data)
        if meta.get("format_version") != FORMAT_VERSION:
            raise DataError(f"unsupported checkpoint format {meta.get('format_version')}")
        params = ParamStore(step_count=int(meta["step_count"]))
        lda_tensors = {}
        for name, arr in tensors.items():
            if name.startswith("lda."):
                lda_tensors[name] = arr
            else:
                params.entries[name] = arr
        config = Config.from_dict(meta["config"])
        td = C.TopicDictionary({int(k): list(v) for k, v in meta["topic_dictionary"].items()})
        return cls(config, C.Vocab.from_list(meta["vocab"]), C.EmotionDictionary(dict(meta["emotion_dictionary"])),
                   td, L.LdaModel.from_tensors(lda_tensors, meta["lda"]), meta["topic_map"], params)

    @classmethod
    def load(cls, path) -> "Model":
        return cls.from_bytes(Path(path).read_bytes())


def init_params(config: Config, vocab_size: int) -> ParamStore:
    rng = np.random.default_rng(config.seed)
    store = ParamStore()
    E, H = config.emb_dim, config.hidden_dim
    init_encoder(store, rng, vocab_size, E, H)
    init_keyword(store, rng, vocab_size, H, config.cat_dim)
    init_decoder(store, rng, vocab_size, E, H, config.att_dim)
    init_classifier(store, rng, vocab_size, E, H)
    init_selector(store, rng, vocab_size, E, H)
    return store


def names_with(params: ParamStore, prefixes: Sequence[str]) -> list[str]:
    return [n for n in params if any(n == p or n.startswith(p) for p in prefixes)]


def build_model(config: Config, train_pairs: Sequence[C.MarkedPair], ed: C.EmotionDictionary,
                td: C.TopicDictionary, lda: L.LdaModel) -> Model:
    """Untrained model whose vocabulary covers the training split."""
    vocab = C.Vocab.build([t for m in train_pairs for t in (m.pair.post, m.pair.reply)])
    params = init_params(config, len(vocab))
    return Model(config, vocab, ed, td, lda, L.align_topics(lda, td), params)


def mark_all(pairs: Sequence[C.ConversationPair], ed: C.EmotionDictionary,
             td: C.TopicDictionary) -> list[C.MarkedPair]:
    """Mark every pair against corpus-wide reply frequencies, dropping unmarkable ones."""
    freq = C.reply_frequencies(pairs)
    marked = (C.mark_pair(p, ed, td, freq) for p in pairs)
    return [m for m in marked if m is not None]


def synthetic_model(seed: int = 0, n_pairs: int = 50, vocab_size: int = 120, **overrides):
    """Untrained model plus marked pairs for the template corpus.

    Defaults suit the toy scale: 32-dim layers, lr 0.01, and a sparse LDA
    prior with a few restarts.
    """
    settings = {"seed": seed, "emb_dim": 32, "hidden_dim": 32, "lr": 0.01, "lda_alpha": 0.1, "lda_restarts": 8}
    settings.update(overrides)
    config = Config(**settings).validate()
    sc = C.synth_corpus(seed, n_pairs, vocab_size)
    ed, td = sc.dictionaries()
    marked = mark_all(sc.pairs, ed, td)
    lda_model = fit_lda(config, marked, sc.stopwords, ed)
    return build_model(config, marked, ed, td, lda_model), marked


# ---------------------------------------------------------------------------
# training


def _run_epochs(model: Model, examples: Sequence, loss_fn: Callable, names: list[str], lr: float, epochs: int,
                stage: str, rng: np.random.Generator, history: list, stop: Callable | None = None) -> None:
    cfg = model.config
    opt = Adam(names, lr=lr)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(examples))
        total, tok_sum, tok_n = 0.0, 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            acc = Gradients()
            for idx in order[start : start + cfg.batch_size]:
                g = Graph(model.params)
                loss, toks = loss_fn(g, examples[idx])
                total += float(loss.value)
                tok_sum += sum(float(t.value) for t in toks)
                tok_n += len(toks)
                grads = g.backward(loss)
                acc.accumulate(Gradients({k: grads[k] for k in names}))
            acc.clip_(cfg.clip_norm)
            opt.step(model.params, acc)
        entry = {"stage": stage, "epoch": epoch, "loss": total / len(examples),
                 "token_loss": tok_sum / tok_n if tok_n else None}
        history.append(entry)
        log.info("%s epoch %d loss %.4f token_loss %s", stage, epoch, entry["loss"], entry["token_loss"])
        if stop is not None and stop(entry):
            break


def joint_token_loss(model: Model, pairs: Sequence[C.MarkedPair]) -> float:
    """Mean teacher-forced decoder token cross-entropy, no parameter update."""
    s, n = 0.0, 0
    for m in pairs:
        _, toks = model.joint_loss(Graph(model.params), m)
        s += sum(float(t.value) for t in toks)
        n += len(toks)
    return s / n


def train_classifier(model: Model, pairs: Sequence[C.MarkedPair], rng: np.random.Generator,
                     history: list, epochs: int | None = None) -> None:
    cfg = model.config

    def loss(g, m):
        return classifier_loss(g, model.ids(m.pair.post), m.emotion_category), []

    _run_epochs(model, pairs, loss, names_with(model.params, [CLASSIFIER_PREFIX]), cfg.classifier_lr,
                cfg.classifier_epochs if epochs is None else epochs, "classifier", rng, history)


def train_joint(model: Model, pairs: Sequence[C.MarkedPair], rng: np.random.Generator, history: list,
                epochs: int | None = None, stop_token_loss: float | None = None) -> None:
    """Encoder, keyword predictors and all decoder stages, teacher forced on gold keywords."""
    cfg = model.config
    history.append({"stage": "joint", "epoch": 0, "loss": None, "token_loss": joint_token_loss(model, pairs)})
    stop = None
    if stop_token_loss is not None:
        stop = lambda e: e["token_loss"] is not None and e["token_loss"] < stop_token_loss
    _run_epochs(model, pairs, model.joint_loss, names_with(model.params, JOINT_PREFIXES), cfg.lr,
                cfg.epochs if epochs is None else epochs, "joint", rng, history, stop)


def train_selector(model: Model, pairs: Sequence[C.MarkedPair], rng: np.random.Generator, history: list,
                   epochs: int | None = None) -> None:
    cfg = model.config
    examples = [model.selector_example(m) for m in pairs]

    def loss(g, ex):
        return selector_loss(g, *ex), []

    _run_epochs(model, examples, loss, names_with(model.params, [SELECTOR_PREFIX]), cfg.selector_lr,
                cfg.selector_epochs if epochs is None else epochs, "selector", rng, history)


def train_model(model: Model, train_pairs: Sequence[C.MarkedPair], epochs: int | None = None,
                stop_token_loss: float | None = None) -> list[dict]:
    """Classifier, then the joint generator, then the direction selector."""
    if not train_pairs:
        raise DataError("no marked training pairs")
    rng = np.random.default_rng([model.config.seed, 1])
    history: list[dict] = []
    train_classifier(model, train_pairs, rng, history)
    train_joint(model, train_pairs, rng, history, epochs, stop_token_loss)
    train_selector(model, train_pairs, rng, history)
    return history


# ---------------------------------------------------------------------------
# file-driven stages


def workdir(config: Config) -> Path:
    path = Path(config.workdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_inputs(config: Config):
    config.require_inputs()
    try:
        pairs = C.read_corpus(config.corpus)
        ed, td = C.load_dictionaries(C.read_dictionary_file(config.emotion_dict),
                                     C.read_dictionary_file(config.topic_dict))
    except (C.CorpusFormatError, C.CorpusDataError) as exc:
        raise DataError(str(exc)) from exc
    stop = C.read_stopwords(config.stopwords) if config.stopwords else set()
    return pairs, ed, td, stop


def prepare(config: Config) -> tuple[C.CorpusSplit, dict]:
    pairs, ed, td, _ = load_inputs(config)
    try:
        split = C.filter_and_split(pairs, ed, td, config.seed, config.val_size, config.test_size)
    except C.CorpusDataError as exc:
        raise DataError(str(exc)) from exc
    C.write_manifest(workdir(config) / "manifest.json", split)
    return split, split.stats


def load_split(config: Config):
    """Re-mark the corpus and pick the manifest's split membership."""
    pairs, ed, td, stop = load_inputs(config)
    manifest_path = Path(config.workdir) / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"no split manifest at {manifest_path}; run prepare first")
    manifest = C.read_manifest(manifest_path)
    freq = C.reply_frequencies(pairs)
    split = {}
    for name, idx in manifest["splits"].items():
        marked = [C.mark_pair(pairs[i], ed, td, freq) for i in idx]
        if any(m is None for m in marked):
            raise DataError(f"manifest split {name!r} lists an unmarkable pair")
        split[name] = marked
    return split, ed, td, stop


def lda_documents(pairs: Sequence[C.MarkedPair | C.ConversationPair], stopwords,
                  high_freq: float, ed: C.EmotionDictionary | None = None) -> list[list[str]]:
    """Post and reply joined into one document; stopwords, emotion words and the most frequent types removed."""
    docs = []
    for p in pairs:
        pair = p.pair if isinstance(p, C.MarkedPair) else p
        docs.append(list(pair.post) + list(pair.reply))
    drop = set(stopwords) | (set(ed.category) if ed is not None else set())
    return L.filter_docs(docs, drop, high_freq)


def fit_lda(config: Config, pairs, stopwords, ed) -> L.LdaModel:
    docs = lda_documents(pairs, stopwords, config.lda_high_freq, ed)
    return L.gibbs_train_restarts(docs, restarts=config.lda_restarts, seed=config.seed, K=config.lda_topics,
                                  alpha=config.lda_alpha, beta=config.lda_beta, iterations=config.lda_iterations)


def train_lda_stage(config: Config) -> tuple[L.LdaModel, dict]:
    split, ed, td, stop = load_split(config)
    try:
        model = fit_lda(config, split["train"], stop, ed)
    except L.LdaError as exc:
        raise DataError(str(exc)) from exc
    model.save(Path(config.workdir) / "lda.bin")
    extracted = L.extract_topic_dictionary(model, stop)
    report = {"topics": model.K, "vocabulary": model.V, "documents": len(model.docs),
              "log_likelihood": L.log_likelihood(model),
              "topic_map": L.align_topics(model, td),
              "top_words": {str(k): ws[:10] for k, ws in extracted.lists.items()},
              "dictionary_truncated": extracted.truncated}
    return model, report


def train_stage(config: Config) -> tuple[Model, list[dict]]:
    split, ed, td, stop = load_split(config)
    if not split["train"]:
        raise DataError("training split is empty")
    lda_path = Path(config.workdir) / "lda.bin"
    if lda_path.is_file():
        lda_model = L.LdaModel.load(lda_path)
    else:
        lda_model, _ = train_lda_stage(config)
    model = build_model(config, split["train"], ed, td, lda_model)
    history = train_model(model, split["train"])
    model.save(Path(config.workdir) / "checkpoint.bin")
    return model, history


def evaluate(model: Model, pairs: Sequence[C.MarkedPair | C.ConversationPair], echo: bool = False,
             table: EmbeddingTable | None = None) -> MetricReport:
    """Generate for every post and score against the references; ``echo`` scores references against themselves."""
    if not pairs:
        raise DataError("nothing to evaluate")
    refs, cands = [], []
    for p in pairs:
        pair = p.pair if isinstance(p, C.MarkedPair) else p
        refs.append(list(pair.reply))
        cands.append(list(pair.reply) if echo else model.generate(pair.post).reply)
    return score_corpus(cands, refs, table or model.embedding_table())


def chat(model: Model, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout, trace: bool = False,
         prompt: TextIO | None = sys.stderr) -> int:
    while True:
        if prompt is not None:
            prompt.write("> ")
            prompt.flush()
        line = stdin.readline()
        if not line:
            return 0
        tokens = C.tokenize(line)
        if not tokens:
            continue
        result = model.generate(tokens)
        stdout.write(" ".join(result.reply) + "\n")
        if trace:
            stdout.write(json.dumps({"keywords": result.trace["keywords"],
                                     "direction": result.trace["direction"],
                                     "segments": result.trace["segments"]}, sort_keys=True) + "\n")
        stdout.flush()
