import json

import pytest
import torch

from cascade_events.encoder import SequenceTooLongError, Vocabulary
from cascade_events.inference import (
    check_cascade, extract_events, predict_corpus, predict_tokens, save_predictions,
)
from cascade_events.model import CascadeModel
from cascade_events.schema import load_corpus


@pytest.fixture
def model(tiny_corpus, tiny_config):
    vocab = Vocabulary.build(s.tokens for s in tiny_corpus.sentences)
    torch.manual_seed(11)
    return CascadeModel(tiny_corpus.schema, vocab, tiny_config).eval()


ALL = (0.0,) * 5


def test_no_type_above_threshold_gives_nothing(model, tiny_corpus):
    toks = tiny_corpus.sentences[0].tokens
    assert extract_events(toks, model, (1.0, 0.5, 0.5, 0.5, 0.5)) == []
    with torch.no_grad():
        model.type_detector.v.weight.zero_()
    assert extract_events(toks, model, (0.5, 0.0, 0.0, 0.0, 0.0)) == []


def test_zero_thresholds_open_every_condition(model, tiny_corpus):
    sent = tiny_corpus.sentences[0]
    n, schema = len(sent.tokens), tiny_corpus.schema
    events = extract_events(sent.tokens, model, ALL)
    # every type passes, every token opens and closes a single-token trigger
    assert len(events) == len(schema.types) * n
    keys = [(schema.type_index[e.record.type], e.record.trigger.start, e.record.trigger.end) for e in events]
    assert keys == sorted(keys)
    for e in events:
        assert len(e.record.arguments) == len(schema.roles) * n
        assert check_cascade(e, ALL) == []


def test_cascade_consistency_and_recorded_probs(model, tiny_corpus):
    sent = tiny_corpus.sentences[1]
    ids = torch.tensor([model.vocab.encode(sent.tokens)])
    mask = torch.ones_like(ids, dtype=torch.bool)
    with torch.no_grad():
        H, cls_state = model.encode(ids, mask)
        probs = model.type_detector(H, mask, cls_state)[0]
    th = (0.3, 0.4, 0.4, 0.45, 0.45)
    events = extract_events(sent.tokens, model, th)
    for e in events:
        assert check_cascade(e, th) == []
        assert e.type_prob == pytest.approx(probs[model.schema.type_index[e.record.type]].item(), abs=1e-6)
    assert events
    events[0].type_prob = 0.1
    assert check_cascade(events[0], th)


def test_batched_equals_single(model, tiny_corpus):
    sents = tiny_corpus.sentences[:6]
    th = (0.3, 0.45, 0.45, 0.45, 0.45)
    batched = predict_tokens(model, [s.tokens for s in sents], th)
    for s, got in zip(sents, batched):
        alone = extract_events(s.tokens, model, th)
        assert [e.record for e in got] == [e.record for e in alone]
        for a, b in zip(got, alone):
            assert a.score == pytest.approx(b.score, rel=1e-5)


def test_deterministic_in_eval(model, tiny_corpus):
    toks = tiny_corpus.sentences[2].tokens
    a = [e.to_dict() for e in extract_events(toks, model, (0.3,) * 5)]
    b = [e.to_dict() for e in extract_events(toks, model, (0.3,) * 5)]
    assert a == b


def test_high_thresholds_shrink_output(model, tiny_corpus):
    for s in tiny_corpus.sentences[:10]:
        low = extract_events(s.tokens, model, (0.4,) * 5)
        high = extract_events(s.tokens, model, (0.6,) * 5)
        low_keys = {(e.record.type, e.record.trigger.start) for e in low}
        assert {(e.record.type, e.record.trigger.start) for e in high} <= low_keys
        assert len(high) <= len(low)


def test_overlength_raises(model):
    with pytest.raises(SequenceTooLongError):
        extract_events(["w"] * (model.max_len + 1), model)


def test_strict_roles_filters_illegal(model, tiny_corpus):
    schema = tiny_corpus.schema
    for s in tiny_corpus.sentences[:5]:
        loose = extract_events(s.tokens, model, ALL)
        strict = extract_events(s.tokens, model, ALL, strict_roles=True)
        assert [e.record.trigger for e in loose] == [e.record.trigger for e in strict]
        for e in strict:
            assert all(r in schema.legal_roles[e.record.type] for r, _ in e.record.arguments)
        assert sum(len(e.record.arguments) for e in strict) < sum(len(e.record.arguments) for e in loose)


def test_argumentless_events_kept_unless_dropped(model, tiny_corpus):
    th = (0.0, 0.0, 0.0, 1.0, 1.0)
    kept = predict_corpus(model, tiny_corpus.subset(tiny_corpus.sentences[:3]), th)
    assert all(s.events and not any(e.arguments for e in s.events) for s in kept)
    dropped = predict_corpus(model, tiny_corpus.subset(tiny_corpus.sentences[:3]), th, drop_empty=True)
    assert all(not s.events for s in dropped)
    assert [s.id for s in dropped] == [s.id for s in tiny_corpus.sentences[:3]]


def test_prediction_file_format(model, tiny_corpus, tmp_path):
    preds = predict_corpus(model, tiny_corpus.subset(tiny_corpus.sentences[:4]), (0.3, 0.45, 0.45, 0.45, 0.45), batch_size=3)
    path = tmp_path / "pred.jsonl"
    save_predictions(preds, path)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["id"] for r in records] == [s.id for s in preds]
    for r in records:
        for ev in r["events"]:
            assert {"type", "trigger", "args", "confidence"} <= set(ev)
            assert 0 < ev["confidence"]["score"] <= 1
            for a in ev["args"]:
                assert set(a["confidence"]) == {"start", "end"}
    again = load_corpus(path, tiny_corpus.schema)
    assert [s.events for s in again.sentences] == [s.events for s in preds]
