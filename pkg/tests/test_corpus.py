import json
import random
import string

import pytest

from codecurate.corpus import (CorpusError, Dataset, Message, Sample, dedup, full_text,
                               instruction_text, load_dataset, write_dataset)

from conftest import make_dataset, make_sample


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoad:
    def test_instruction_response_mapping(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps({"instruction": "write add", "output": "def add..."})])
        ds, report = load_dataset(p, "instruction-response")
        assert len(ds.samples) == 1
        s = ds.samples[0]
        assert [m.role for m in s.messages] == ["user", "assistant"]
        assert s.messages[0].content == "write add"
        assert s.id == "d:1"
        assert report.rejected == []

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_text("")
        ds, report = load_dataset(p, "conversation")
        assert ds.samples == []
        assert report.loaded == 0

    def test_malformed_line_rejected_load_continues(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [
            json.dumps({"instruction": "a", "output": "b"}),
            "{not json",
            json.dumps({"instruction": "c", "output": "d"}),
        ])
        ds, report = load_dataset(p, "instruction-response")
        assert len(ds.samples) == 2
        assert len(report.rejected) == 1
        assert report.rejected[0]["line"] == 2
        assert "byte_offset" in report.rejected[0]

    def test_role_alternation_violation_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        write_lines(p, [json.dumps({"messages": [
            {"role": "assistant", "content": "starts wrong"}]})])
        ds, report = load_dataset(p, "conversation")
        assert ds.samples == []
        assert len(report.rejected) == 1

    def test_unknown_schema(self, tmp_path):
        with pytest.raises(CorpusError):
            load_dataset(tmp_path / "x.jsonl", "alpaca")


class TestInvariants:
    def test_first_message_must_be_user(self):
        with pytest.raises(CorpusError):
            Sample(id="x", source="s", messages=(Message("assistant", "hi"),))

    def test_empty_content_rejected(self):
        with pytest.raises(CorpusError):
            Message("user", "   ")

    def test_duplicate_ids_rejected(self):
        s = make_sample("same", "a")
        with pytest.raises(CorpusError):
            Dataset(name="d", samples=[s, make_sample("same", "b")])


class TestTextViews:
    def test_single_turn_instruction(self):
        s = make_sample("x", "only question")
        assert instruction_text(s) == "only question"

    def test_two_user_turns_joined(self):
        s = Sample(id="x", source="s", messages=(
            Message("user", "a"), Message("assistant", "r1"),
            Message("user", "b"), Message("assistant", "r2")))
        assert instruction_text(s) == "a\nb"

    def test_three_turn_pairs(self):
        msgs = []
        for i in range(3):
            msgs += [Message("user", f"q{i}"), Message("assistant", f"a{i}")]
        s = Sample(id="x", source="s", messages=tuple(msgs))
        assert instruction_text(s) == "q0\nq1\nq2"
        assert "a0" not in instruction_text(s)

    def test_full_text_prefixes(self):
        s = make_sample("x", "q", "a")
        assert full_text(s) == "USER: q\nASSISTANT: a"

    def test_pure_functions(self):
        s = make_sample("x", "q", "a")
        assert instruction_text(s) == instruction_text(s)
        assert full_text(s) == full_text(s)


class TestDedup:
    def test_identical_pair_keeps_first(self):
        d = Dataset(name="d", samples=[make_sample("a", "same q", "same a"),
                                       make_sample("b", "same q", "same a")])
        out = dedup(d)
        assert [s.id for s in out.samples] == ["a"]

    def test_no_duplicates_identity(self):
        d = make_dataset(["one", "two", "three"])
        assert [s.id for s in dedup(d).samples] == [s.id for s in d.samples]

    def test_whitespace_normalized_duplicates(self):
        d = Dataset(name="d", samples=[
            make_sample("a", "x  y", "z"),
            make_sample("b", "x y", "z"),
            make_sample("c", "unique", "z"),
            make_sample("d", "P  Q", "r"),
            make_sample("e", "p q", "r"),
        ])
        out = dedup(d)
        assert [s.id for s in out.samples] == ["a", "c", "d"]

    def test_idempotent(self):
        d = make_dataset(["a", "b", "a"])
        once = dedup(d)
        assert [s.id for s in dedup(once).samples] == [s.id for s in once.samples]

    def test_subset_of_original_ids(self):
        d = make_dataset(["a", "b", "a", "c"])
        out = dedup(d)
        assert set(s.id for s in out.samples) <= set(s.id for s in d.samples)
        assert len(out.samples) <= len(d.samples)


class TestRoundTrip:
    def test_round_trip_conversation(self, tmp_path):
        d = make_dataset(["alpha", "beta"])
        p = tmp_path / "out.jsonl"
        write_dataset(d, p)
        back, _ = load_dataset(p, "conversation")
        assert [(s.id, s.messages) for s in back.samples] == \
               [(s.id, s.messages) for s in d.samples]

    def test_empty_dataset(self, tmp_path):
        p = tmp_path / "out.jsonl"
        write_dataset(Dataset(name="e", samples=[]), p)
        back, _ = load_dataset(p, "conversation")
        assert back.samples == []

    def test_large_random_round_trip(self, tmp_path):
        rng = random.Random(7)
        texts = ["".join(rng.choices(string.ascii_letters + " ", k=rng.randint(5, 60))).strip() or "x"
                 for _ in range(1000)]
        d = make_dataset(texts, name="big")
        p = tmp_path / "big.jsonl"
        write_dataset(d, p)
        back, report = load_dataset(p, "conversation")
        assert report.rejected == []
        assert [(s.id, s.source, s.messages) for s in back.samples] == \
               [(s.id, s.source, s.messages) for s in d.samples]
