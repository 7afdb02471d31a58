import json

import pytest
import torch

from cascade_events.schema import AnnotatedSentence, EventRecord, EventSchema, Span


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


@pytest.fixture
def fin_schema():
    return EventSchema(
        types=["Investment", "ShareTransfer", "ShareReduction"],
        roles=["subject", "object", "target", "amount", "date"],
        legal_roles={
            "Investment": ["subject", "object", "amount", "date"],
            "ShareTransfer": ["subject", "object", "target", "amount"],
            "ShareReduction": ["subject", "target", "amount", "date"],
        },
    )


@pytest.fixture
def overlap_sentence():
    # one trigger span for two types; span (5, 6) is object of the first event and subject of the second
    return AnnotatedSentence("s1", list("ABCDEFGHIJ"), [
        EventRecord("Investment", Span(3, 4), [("subject", Span(0, 1)), ("object", Span(5, 6))]),
        EventRecord("ShareTransfer", Span(3, 4), [("subject", Span(5, 6)), ("target", Span(8, 9))]),
    ])


@pytest.fixture
def write_jsonl(tmp_path):
    def _write(name, records):
        path = tmp_path / name
        path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
        return path
    return _write


@pytest.fixture(scope="session")
def tiny_corpus():
    from cascade_events.synthetic import GeneratorConfig, generate
    return generate(GeneratorConfig(vocab_size=80, n_types=3, n_roles=4, legal_density=0.75, min_len=5,
                                    max_len=8, n_sentences=40, mix=(0.25, 0.25, 0.25, 0.25), seed=5,
                                    max_span_len=2))


@pytest.fixture
def tiny_config():
    from cascade_events.config import TrainConfig
    return TrainConfig(dim=8, layers=1, heads=2, max_len=12, pos_dim=4, max_distance=4, dropout=0.0,
                       batch_size=4, epochs=2, encoder_lr=1e-3, decoder_lr=1e-3, seed=3)
