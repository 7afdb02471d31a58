"""Gold-condition instance expansion, the joint objective and the training loop."""

from __future__ import annotations

import copy
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .config import TrainConfig
from .encoder import Vocabulary
from .layers import NumericError
from .model import CascadeModel
from .schema import AnnotatedSentence, Corpus, EventSchema, Span
from .spans import boundary_labels

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7
CHECKPOINT_VERSION = 1


@dataclass
class TriggerInstance:
    type_index: int
    spans: list[Span]
    start: list[int]
    end: list[int]


@dataclass
class ArgumentInstance:
    type_index: int
    trigger: Span
    role_spans: dict[int, list[Span]]
    start: list[list[int]]  # [R][N]
    end: list[list[int]]


@dataclass
class TrainingInstance:
    sentence: AnnotatedSentence
    token_ids: list[int]
    type_labels: list[int]
    triggers: list[TriggerInstance] = field(default_factory=list)
    arguments: list[ArgumentInstance] = field(default_factory=list)


def build_instance(sentence: AnnotatedSentence, schema: EventSchema, vocab: Vocabulary) -> TrainingInstance:
    n = len(sentence.tokens)
    n_roles = len(schema.roles)
    type_labels = [0] * len(schema.types)
    by_type: dict[int, list[Span]] = {}
    by_trigger: dict[tuple[int, Span], dict[int, set[Span]]] = {}
    for ev in sentence.events:
        ti = schema.type_index[ev.type]
        type_labels[ti] = 1
        spans = by_type.setdefault(ti, [])
        if ev.trigger not in spans:
            spans.append(ev.trigger)
        roles = by_trigger.setdefault((ti, ev.trigger), {})
        for role, span in ev.arguments:
            roles.setdefault(schema.role_index[role], set()).add(span)
    inst = TrainingInstance(sentence, vocab.encode(sentence.tokens), type_labels)
    for ti in sorted(by_type):
        spans = sorted(by_type[ti])
        start, end = boundary_labels(spans, n)
        inst.triggers.append(TriggerInstance(ti, spans, start, end))
    for (ti, trig) in sorted(by_trigger):
        role_spans = {r: sorted(s) for r, s in by_trigger[(ti, trig)].items()}
        starts, ends = [], []
        for r in range(n_roles):
            s, e = boundary_labels(role_spans.get(r, []), n)
            starts.append(s)
            ends.append(e)
        inst.arguments.append(ArgumentInstance(ti, trig, role_spans, starts, ends))
    return inst


def build_instances(corpus: Corpus, vocab: Vocabulary) -> list[TrainingInstance]:
    """One type instance per sentence, one trigger instance per gold type and
    one argument instance per gold (type, trigger)."""
    return [build_instance(s, corpus.schema, vocab) for s in corpus.sentences]


@dataclass
class Batch:
    ids: torch.Tensor            # [B, N]
    mask: torch.Tensor           # [B, N] bool
    type_labels: torch.Tensor    # [B, T]
    trig_sent: torch.Tensor      # [K]
    trig_type: torch.Tensor      # [K]
    trig_start: torch.Tensor     # [K, N]
    trig_end: torch.Tensor       # [K, N]
    arg_cond: torch.Tensor       # [M] index into the K trigger conditions
    arg_span_start: torch.Tensor  # [M]
    arg_span_end: torch.Tensor    # [M]
    arg_start: torch.Tensor      # [M, R, N]
    arg_end: torch.Tensor        # [M, R, N]

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    def to_dtype(self, dtype) -> "Batch":
        out = copy.copy(self)
        for name in ("type_labels", "trig_start", "trig_end", "arg_start", "arg_end"):
            setattr(out, name, getattr(self, name).to(dtype))
        return out


def _pad(rows: list[list[int]], n: int) -> list[list[int]]:
    return [r + [0] * (n - len(r)) for r in rows]


def collate(instances: list[TrainingInstance], n_roles: int, dtype=torch.float32,
            negative_types: int = 0, sample_conditions: bool = False, rng: random.Random | None = None) -> Batch:
    n = max(len(i.token_ids) for i in instances)
    ids = torch.tensor(_pad([i.token_ids for i in instances], n), dtype=torch.long)
    mask = torch.tensor([[1] * len(i.token_ids) + [0] * (n - len(i.token_ids)) for i in instances],
                        dtype=torch.bool)
    type_labels = torch.tensor([i.type_labels for i in instances], dtype=dtype)
    trig_sent, trig_type, trig_start, trig_end = [], [], [], []
    arg_cond, arg_s, arg_e, arg_start, arg_end = [], [], [], [], []
    for b, inst in enumerate(instances):
        length = len(inst.token_ids)
        triggers = list(inst.triggers)
        arguments = list(inst.arguments)
        if negative_types and rng is not None:
            absent = [t for t, y in enumerate(inst.type_labels) if not y]
            for t in rng.sample(absent, min(negative_types, len(absent))):
                triggers.append(TriggerInstance(t, [], [0] * length, [0] * length))
        if sample_conditions and rng is not None:
            if arguments:
                arguments = [rng.choice(arguments)]
                keep = arguments[0].type_index
                triggers = [t for t in triggers if t.type_index == keep]
            elif triggers:
                triggers = [rng.choice(triggers)]
        cond_of_type = {}
        for t in triggers:
            cond_of_type[t.type_index] = len(trig_sent)
            trig_sent.append(b)
            trig_type.append(t.type_index)
            trig_start.append(t.start + [0] * (n - length))
            trig_end.append(t.end + [0] * (n - length))
        for a in arguments:
            arg_cond.append(cond_of_type[a.type_index])
            arg_s.append(a.trigger.start)
            arg_e.append(a.trigger.end)
            arg_start.append(_pad(a.start, n))
            arg_end.append(_pad(a.end, n))
    long = torch.long
    return Batch(
        ids, mask, type_labels,
        torch.tensor(trig_sent, dtype=long), torch.tensor(trig_type, dtype=long),
        torch.tensor(trig_start, dtype=dtype).reshape(-1, n), torch.tensor(trig_end, dtype=dtype).reshape(-1, n),
        torch.tensor(arg_cond, dtype=long), torch.tensor(arg_s, dtype=long), torch.tensor(arg_e, dtype=long),
        torch.tensor(arg_start, dtype=dtype).reshape(-1, n_roles, n),
        torch.tensor(arg_end, dtype=dtype).reshape(-1, n_roles, n),
    )


def forward_batch(model: CascadeModel, batch: Batch) -> dict:
    return model.forward_conditions(batch.ids, batch.mask, batch.trig_sent, batch.trig_type,
                                    batch.arg_cond, batch.arg_span_start, batch.arg_span_end)


def bernoulli_nll(p: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    p = p.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    return -(y * torch.log(p) + (1 - y) * torch.log(1 - p))


def _per_sentence(values: torch.Tensor, owner: torch.Tensor, size: int) -> torch.Tensor:
    out = torch.zeros(size, dtype=values.dtype)
    return out.index_add(0, owner, values) if values.numel() else out


def type_loss(out: dict, batch: Batch) -> torch.Tensor:
    """Summed type cross-entropy per sentence [B]."""
    return bernoulli_nll(out["type_probs"], batch.type_labels).sum(-1)


def trigger_loss(out: dict, batch: Batch) -> torch.Tensor:
    dtype = out["type_probs"].dtype
    if not batch.trig_sent.numel():
        return torch.zeros(batch.size, dtype=dtype)
    m = batch.mask[batch.trig_sent].to(dtype)
    per = ((bernoulli_nll(out["trigger_start"], batch.trig_start)
            + bernoulli_nll(out["trigger_end"], batch.trig_end)) * m).sum(-1)
    return _per_sentence(per, batch.trig_sent, batch.size)


def argument_loss(out: dict, batch: Batch) -> torch.Tensor:
    dtype = out["type_probs"].dtype
    if not batch.arg_cond.numel():
        return torch.zeros(batch.size, dtype=dtype)
    owner = batch.trig_sent[batch.arg_cond]
    m = batch.mask[owner].to(dtype).unsqueeze(1)
    per = ((bernoulli_nll(out["argument_start"], batch.arg_start)
            + bernoulli_nll(out["argument_end"], batch.arg_end)) * m).sum((-1, -2))
    return _per_sentence(per, owner, batch.size)


def _reduce(model: CascadeModel, per: torch.Tensor) -> torch.Tensor:
    return per.sum() if model.config.loss_reduction == "sum" else per.mean()


def subtask_losses(model: CascadeModel, batch: Batch) -> dict[str, torch.Tensor]:
    out = forward_batch(model, batch)
    return {
        "type": _reduce(model, type_loss(out, batch)),
        "trigger": _reduce(model, trigger_loss(out, batch)),
        "argument": _reduce(model, argument_loss(out, batch)),
    }


def joint_loss(model: CascadeModel, batch: Batch) -> torch.Tensor:
    """Negative joint log-likelihood: per-sentence sum of all three subtasks, reduced over the batch
    (mean by default)."""
    out = forward_batch(model, batch)
    per = type_loss(out, batch) + trigger_loss(out, batch) + argument_loss(out, batch)
    loss = _reduce(model, per)
    if not torch.isfinite(loss):
        bad = [i for i, v in enumerate(per.tolist()) if not math.isfinite(v)]
        raise NumericError(f"non-finite joint loss; offending batch rows {bad}")
    return loss


# ---------------------------------------------------------------- optimization

def _no_decay(name: str) -> bool:
    return name.endswith("bias") or "norm" in name or name.endswith(".gain")


def make_optimizer(model: CascadeModel, config: TrainConfig) -> torch.optim.Optimizer:
    groups = []
    for group, params in model.parameter_groups().items():
        lr = config.encoder_lr if group == "encoder" else config.decoder_lr
        decay = [p for n, p in params if not _no_decay(n)]
        plain = [p for n, p in params if _no_decay(n)]
        groups.append({"params": decay, "lr": lr, "weight_decay": config.weight_decay, "group": group})
        groups.append({"params": plain, "lr": lr, "weight_decay": 0.0, "group": group})
    return torch.optim.AdamW(groups)


def warmup_linear(total_steps: int, warmup: float):
    warm = int(total_steps * warmup)

    def factor(step: int) -> float:
        if warm and step < warm:
            return (step + 1) / warm
        return max(0.0, (total_steps - step) / max(1, total_steps - warm))
    return factor


@dataclass
class TrainResult:
    model: CascadeModel
    history: list[dict]
    best_epoch: int
    best_state: dict


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    torch.manual_seed(seed)


def train(config: TrainConfig, train_corpus: Corpus, dev_corpus: Corpus | None = None,
          vocab: Vocabulary | None = None, checkpoint_path=None, history_path=None,
          model: CascadeModel | None = None, log_every: int = 0) -> TrainResult:
    """Jointly train all decoders; keeps the parameters with the best validation AC F1."""
    from .evaluation import score
    from .inference import predict_corpus

    _seed_everything(config.seed)
    schema = train_corpus.schema
    if vocab is None:
        vocab = Vocabulary.build(s.tokens for s in train_corpus.sentences)
    if model is None:
        model = CascadeModel(schema, vocab, config)
    instances = build_instances(train_corpus, vocab)
    steps_per_epoch = math.ceil(len(instances) / config.batch_size) if instances else 0
    optimizer = make_optimizer(model, config)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, warmup_linear(max(1, steps_per_epoch * config.epochs), config.warmup))
    rng = random.Random(config.seed)
    history: list[dict] = []
    best_state = copy.deepcopy(model.state_dict())
    best_rank, best_epoch = None, 0
    if history_path:
        Path(history_path).write_text("", encoding="utf-8")
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model, config, best_state)

    for epoch in range(1, config.epochs + 1):
        model.train()
        order = list(range(len(instances)))
        rng.shuffle(order)
        total, count = 0.0, 0
        for step in range(steps_per_epoch):
            chunk = [instances[i] for i in order[step * config.batch_size:(step + 1) * config.batch_size]]
            batch = collate(chunk, len(schema.roles), negative_types=config.negative_types,
                            sample_conditions=config.sample_conditions, rng=rng)
            try:
                loss = joint_loss(model, batch)
            except NumericError:
                model.load_state_dict(best_state)
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, model, config, best_state)
                raise
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            total += loss.item() * len(chunk)
            count += len(chunk)
            if log_every and (step + 1) % log_every == 0:
                log.info("epoch %d step %d loss %.4f", epoch, step + 1, loss.item())
        record = {"epoch": epoch, "train_loss": total / max(1, count)}
        if dev_corpus is not None and len(dev_corpus):
            model.eval()
            preds = predict_corpus(model, dev_corpus, config.thresholds, strict_roles=config.strict_roles)
            report = score(preds, dev_corpus)
            for metric in ("TI", "TC", "AI", "AC"):
                record[f"dev_{metric}_f1"] = report.overall[metric].f1
        history.append(record)
        log.info("epoch %d: %s", epoch, record)
        if history_path:
            with open(history_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        # dev AC first; ties (common early, when nothing is extracted yet) fall to TC, then train loss
        rank = (record.get("dev_AC_f1", 0.0), record.get("dev_TC_f1", 0.0), -record["train_loss"])
        if best_rank is None or rank > best_rank:
            best_rank, best_epoch = rank, epoch
            best_state = copy.deepcopy(model.state_dict())
            if checkpoint_path:
                save_checkpoint(checkpoint_path, model, config, best_state)

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model, history, best_epoch, best_state)


# ---------------------------------------------------------------- checkpoints

class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: CascadeModel, config: TrainConfig, state: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "schema_hash": model.schema.fingerprint(),
        "schema": model.schema.to_dict(),
        "config": config.to_dict(),
        "vocab": list(model.vocab.itos),
        "state_dict": state if state is not None else model.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path, schema: EventSchema | None = None) -> CascadeModel:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('format_version')}")
    stored = EventSchema.from_dict(payload["schema"])
    if schema is not None and schema.fingerprint() != payload["schema_hash"]:
        raise CheckpointError("checkpoint was trained against a different event schema")
    config = TrainConfig.from_dict(payload["config"])
    vocab = Vocabulary()
    for tok in payload["vocab"][3:]:
        vocab.add(tok)
    model = CascadeModel(stored, vocab, config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
