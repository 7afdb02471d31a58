import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_events.schema import (
    P1, P2, P3, AnnotatedSentence, Corpus, CorpusParseError, EventRecord, EventSchema,
    SchemaValidationError, Span, classify_overlap, dumps_corpus, load_corpus, split_corpus, split_sizes,
)


def record(sid, n=6, events=()):
    return {"id": sid, "tokens": [f"t{i}" for i in range(n)], "events": list(events)}


def event(type_, trig, *args):
    return {"type": type_, "trigger": {"span": list(trig)}, "args": [{"role": r, "span": list(s)} for r, s in args]}


def test_schema_invariants():
    with pytest.raises(ValueError):
        EventSchema(["A", "A"], ["r"], {"A": ["r"]})
    with pytest.raises(ValueError):
        EventSchema(["A"], ["r", "r"], {"A": ["r"]})
    with pytest.raises(ValueError):
        EventSchema(["A"], ["r"], {"A": []})
    with pytest.raises(ValueError):
        EventSchema(["A"], ["r"], {"A": ["q"]})


def test_schema_file_without_roles_key(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text('{"types": ["A", "B"], "legal_roles": {"A": ["x", "y"], "B": ["y", "z"]}}')
    schema = EventSchema.load(path)
    assert schema.roles == ["x", "y", "z"]


def test_load_corpus_roundtrip(fin_schema, write_jsonl, tmp_path):
    path = write_jsonl("c.jsonl", [
        record("a", events=[event("Investment", (1, 1), ("subject", (0, 0)), ("amount", (3, 4)))]),
        record("b", n=3),
    ])
    corpus = load_corpus(path, fin_schema)
    assert len(corpus) == 2 and corpus.n_events == 1
    again = tmp_path / "again.jsonl"
    again.write_text(dumps_corpus(corpus), encoding="utf-8")
    reloaded = load_corpus(again, fin_schema)
    assert reloaded.sentences == corpus.sentences


def test_empty_file(fin_schema, tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert len(load_corpus(path, fin_schema)) == 0


def test_parse_error_has_line_number(fin_schema, tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "tokens": ["x"], "events": []}\n{not json\n')
    with pytest.raises(CorpusParseError) as err:
        load_corpus(path, fin_schema)
    assert err.value.line_no == 2


@pytest.mark.parametrize("bad_event, needle", [
    (event("Investment", (1, 1), ("target", (0, 0))), "not legal"),
    (event("Nope", (1, 1)), "unknown event type"),
    (event("Investment", (1, 9)), "out of bounds"),
    (event("Investment", (1, 1), ("color", (0, 0))), "unknown role"),
    (event("Investment", (1, 1), ("subject", (0, 0)), ("subject", (0, 0))), "duplicate argument"),
])
def test_validation_errors_name_sentence(fin_schema, write_jsonl, bad_event, needle):
    path = write_jsonl("c.jsonl", [record("bad-one", events=[bad_event])])
    with pytest.raises(SchemaValidationError, match=needle) as err:
        load_corpus(path, fin_schema)
    assert err.value.sentence_id == "bad-one"


def test_duplicate_events_rejected(fin_schema, write_jsonl):
    ev = event("Investment", (1, 1), ("subject", (0, 0)))
    with pytest.raises(SchemaValidationError, match="duplicate event"):
        load_corpus(write_jsonl("c.jsonl", [record("d", events=[ev, ev])]), fin_schema)


def test_duplicate_ids_rejected(fin_schema, write_jsonl):
    with pytest.raises(SchemaValidationError, match="duplicate sentence id"):
        load_corpus(write_jsonl("c.jsonl", [record("x"), record("x")]), fin_schema)


def test_classify_overlap_figure_style(overlap_sentence):
    assert classify_overlap(overlap_sentence) == {P1, P2}


def test_classify_overlap_normal_and_p3():
    normal = AnnotatedSentence("n", list("abcdef"), [EventRecord("A", Span(0, 0), [("x", Span(2, 3))])])
    assert classify_overlap(normal) == set()
    p3 = AnnotatedSentence("p", list("abcdef"), [
        EventRecord("ShareReduction", Span(4, 4), [("subject", Span(0, 1)), ("target", Span(0, 1))])])
    assert classify_overlap(p3) == {P3}


def test_partially_overlapping_spans_are_not_shared():
    s = AnnotatedSentence("n", list("abcdef"), [
        EventRecord("A", Span(0, 0), [("x", Span(2, 3))]),
        EventRecord("B", Span(5, 5), [("y", Span(3, 4))]),
    ])
    assert classify_overlap(s) == set()


def _corpus(n):
    schema = EventSchema(["A"], ["x"], {"A": ["x"]})
    return Corpus([AnnotatedSentence(f"s{i}", ["w"]) for i in range(n)], schema)


def test_split_sizes_examples():
    assert split_sizes(10, (0.8, 0.1, 0.1)) == (8, 1, 1)
    # 7.2 / 0.9 / 0.9 floor to 7 / 0 / 0; the two leftovers go to the larger fractional parts
    assert split_sizes(9, (0.8, 0.1, 0.1)) == (7, 1, 1)
    assert split_sizes(8982, (0.8, 0.1, 0.1)) == (7186, 898, 898)


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.1), (1.0, 0.0, 0.0), (0.9, 0.1), (-0.2, 0.6, 0.6)])
def test_split_rejects_bad_ratios(ratios):
    with pytest.raises(ValueError):
        split_corpus(_corpus(10), ratios)


def test_split_deterministic():
    c = _corpus(10)
    a = [[s.id for s in part] for part in split_corpus(c, seed=3)]
    b = [[s.id for s in part] for part in split_corpus(c, seed=3)]
    assert a == b
    assert [len(p) for p in a] == [8, 1, 1]


@settings(max_examples=60, deadline=None)
@given(n=st.integers(0, 200), seed=st.integers(0, 10_000),
       r=st.tuples(st.integers(1, 20), st.integers(1, 20), st.integers(1, 20)))
def test_split_is_partition(n, seed, r):
    total = sum(r)
    ratios = (r[0] / total, r[1] / total, 1 - r[0] / total - r[1] / total)
    parts = split_corpus(_corpus(n), ratios, seed)
    ids = [s.id for p in parts for s in p]
    assert sorted(ids) == sorted(f"s{i}" for i in range(n))
    assert len(set(ids)) == n
