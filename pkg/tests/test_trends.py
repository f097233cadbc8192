import csv
import logging
from pathlib import Path

import numpy as np
import pytest

from topic_trends.corpus import DEFAULT_WINDOW
from topic_trends.errors import DataError, ModelMismatchError, OutOfWindowError
from topic_trends.lda import LdaConfig, LdaModel
from topic_trends.textprep import Document
from topic_trends.trends import (
    TrendTable,
    build_trends,
    export,
    join_case_counts,
    load_case_counts,
    pearson,
    render_svg,
    top_n_topics,
    write_case_join,
    write_topics_csv,
)

FIXTURES = Path(__file__).parent / "fixtures"


def model_for(dominant, K=3, vocab_hash="h"):
    theta = np.full((len(dominant), K), 0.1 / (K - 1))
    for d, k in enumerate(dominant):
        theta[d, k] = 0.9
    phi = np.full((K, 4), 0.25)
    return LdaModel(phi, theta, LdaConfig(K=K, iterations=2, burn_in=0), vocab_hash, ("a", "b", "c", "d"))


def doc(i, week, countries=()):
    return Document(f"d{i}", week, ((0, 1),), frozenset(countries))


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestBuild:
    def test_single_doc(self):
        t = build_trends([doc(0, 3, {"US"})], model_for([2]), 14)
        assert dict(t.global_counts) == {(3, 2): 1}
        assert dict(t.country_counts) == {("US", 3, 2): 1}

    def test_multi_country_counted_in_each(self):
        t = build_trends([doc(0, 3, {"GB", "CA"})], model_for([2]), 14)
        assert dict(t.global_counts) == {(3, 2): 1}
        assert dict(t.country_counts) == {("CA", 3, 2): 1, ("GB", 3, 2): 1}

    def test_empty(self):
        t = build_trends([], model_for([0]), 14)
        assert not t.global_counts and not t.country_counts and not t.topic_totals

    def test_conservation_and_totals(self):
        rng = np.random.default_rng(0)
        dominant = rng.integers(0, 3, size=200).tolist()
        docs = [doc(i, int(rng.integers(1, 15)), ["US"] if i % 3 else []) for i in range(200)]
        t = build_trends(docs, model_for(dominant), 14)
        assert sum(t.topic_totals.values()) == sum(t.global_counts.values()) == 200
        for k in range(3):
            assert t.topic_totals[k] == sum(t.weekly_series(k))

    def test_vocab_mismatch(self):
        with pytest.raises(ModelMismatchError):
            build_trends([doc(0, 1)], model_for([0], vocab_hash="x"), 14, docs_vocab_hash="y")

    def test_doc_count_mismatch(self):
        with pytest.raises(ModelMismatchError):
            build_trends([doc(0, 1), doc(1, 1)], model_for([0]), 14)

    def test_week_out_of_range(self):
        with pytest.raises(OutOfWindowError):
            build_trends([doc(0, 15)], model_for([0]), 14)

    def test_deterministic_and_mergeable(self):
        docs = [doc(i, 1 + i % 14, ["US", "CA"][: i % 3]) for i in range(60)]
        m = model_for([i % 3 for i in range(60)])
        whole = build_trends(docs, m, 14)
        assert whole == build_trends(docs, m, 14)
        halves = build_trends(docs[:30], model_for([i % 3 for i in range(30)]), 14).merge(
            build_trends(docs[30:], model_for([i % 3 for i in range(30, 60)]), 14))
        assert halves.global_counts == whole.global_counts
        assert halves.country_counts == whole.country_counts
        assert halves.topic_totals == whole.topic_totals


class TestTopN:
    def table(self):
        t = TrendTable(14, 5)
        for topic, n in [(0, 3), (1, 5), (2, 5), (3, 1), (4, 2)]:
            for _ in range(n):
                t.add(1, topic, ["US"])
        t.add(2, 4, ["GB"])
        return t

    def test_ranking_with_ties(self):
        assert top_n_topics(self.table(), "US") == [1, 2, 0, 4]

    def test_single_topic(self):
        assert top_n_topics(self.table(), "GB", n=4) == [4]

    def test_unknown_country_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert top_n_topics(self.table(), "CN") == []
        assert "CN" in caplog.text

    def test_rejects_n0(self):
        with pytest.raises(ValueError):
            top_n_topics(self.table(), "US", 0)


class TestCases:
    def test_pearson(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
        assert pearson([3, 2, 1], [2, 4, 6]) == pytest.approx(-1.0, abs=1e-15)
        assert pearson([5, 5, 5], [1, 2, 3]) is None
        assert pearson([1], [1]) is None

    def test_identical_series(self):
        t = TrendTable(3, 1)
        for w, n in [(1, 4), (2, 9), (3, 1)]:
            for _ in range(n):
                t.add(w, 0)
        rows = join_case_counts(t, {1: 4, 2: 9, 3: 1})
        assert [r[4] for r in rows] == pytest.approx([1.0] * 3)

    def test_missing_weeks_are_blank(self, tmp_path):
        t = TrendTable(3, 2)
        t.add(1, 0)
        t.add(2, 0)
        t.add(2, 1)
        t.add(3, 1)
        rows = join_case_counts(t, {1: 10, 3: 30})
        assert [(r[0], r[1], r[2], r[3]) for r in rows] == [
            (1, 0, 1, 10), (2, 0, 1, None), (3, 0, 0, 30), (1, 1, 0, 10), (2, 1, 1, None), (3, 1, 1, 30)]
        write_case_join(rows, tmp_path / "j.csv")
        got = read(tmp_path / "j.csv")
        assert got[1]["case_count"] == "" and got[0]["case_count"] == "10"

    def test_constant_topic_blank_correlation(self, tmp_path):
        t = TrendTable(3, 1)
        for w in (1, 2, 3):
            t.add(w, 0)
        rows = join_case_counts(t, {1: 1, 2: 5, 3: 9})
        assert all(r[4] is None for r in rows)
        write_case_join(rows, tmp_path / "j.csv")
        assert {r["correlation"] for r in read(tmp_path / "j.csv")} == {""}

    def test_load_sums_days_per_week(self, tmp_path):
        p = tmp_path / "cases.csv"
        p.write_text("date,region,confirmed\n2020-03-23,WORLD,5\n2020-03-29,WORLD,7\n2020-03-30,WORLD,1\n"
                     "2020-03-23,US,100\n2019-01-01,WORLD,999\n2020-06-23,world,2\n", encoding="utf-8")
        assert load_case_counts(p, DEFAULT_WINDOW) == {1: 12, 2: 1, 14: 2}
        assert load_case_counts(p, DEFAULT_WINDOW, "US") == {1: 100}

    @pytest.mark.parametrize("body", ["date,confirmed\n2020-03-23,1\n", "date,region,confirmed\nbad,WORLD,1\n",
                                      "date,region,confirmed\n2020-03-23,WORLD,-1\n"])
    def test_load_errors(self, tmp_path, body):
        (tmp_path / "c.csv").write_text(body, encoding="utf-8")
        with pytest.raises(DataError):
            load_case_counts(tmp_path / "c.csv", DEFAULT_WINDOW)


class TestExport:
    def table(self):
        t = TrendTable(14, 4)
        t.add(1, 0, ["US"])
        t.add(2, 2, ["US", "GB"])
        t.add(14, 2)
        return t

    def test_csv_shapes(self, tmp_path):
        export(self.table(), tmp_path, ["csv"])
        trends = read(tmp_path / "trends.csv")
        assert len(trends) == 14 * 2  # weeks x topics present
        assert sum(int(r["count"]) for r in trends) == 3
        totals = read(tmp_path / "topic_totals.csv")
        assert [(r["topic_id"], r["total"]) for r in totals] == [("0", "1"), ("1", "0"), ("2", "2"), ("3", "0")]
        country = read(tmp_path / "trends_country.csv")
        assert {r["country"] for r in country} == {"GB", "US"}
        assert list(country[0]) == ["country", "week", "topic_id", "count"]

    def test_gnuplot_blocks(self, tmp_path):
        export(self.table(), tmp_path, ["gnuplot_dat"])
        text = (tmp_path / "trends.dat").read_text()
        assert text.count("# topic") == 2 and "\n\n\n# topic 2" in text

    def test_svg(self, tmp_path):
        paths = export(self.table(), tmp_path, ["svg_lines"])
        assert sorted(p.name for p in paths) == ["trends.svg", "trends_GB.svg", "trends_US.svg"]
        svg = (tmp_path / "trends.svg").read_text()
        assert svg.count("<polyline") == 2 and ">week<" in svg and ">tweets<" in svg

    def test_svg_deterministic(self):
        s = {0: [1, 2, 3], 4: [0, 0, 9]}
        assert render_svg(s, "x") == render_svg(dict(reversed(list(s.items()))), "x")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            export(self.table(), tmp_path, ["png"])

    def test_unwritable(self, tmp_path):
        (tmp_path / "file").write_text("x")
        with pytest.raises(DataError):
            export(self.table(), tmp_path / "file" / "sub", ["csv"])

    def test_topics_csv(self, tmp_path):
        m = LdaModel(np.array([[0.1, 0.6, 0.3], [0.5, 0.25, 0.25]]), np.ones((1, 2)) / 2,
                     LdaConfig(K=2, iterations=2, burn_in=0), terms=("a", "b", "c"))
        write_topics_csv(m, tmp_path / "t.csv", n_terms=2)
        assert (tmp_path / "t.csv").read_text().splitlines() == [
            "topic_id,rank,term,phi_weight", "0,1,b,0.60000000", "0,2,c,0.30000000",
            "1,1,a,0.50000000", "1,2,b,0.25000000"]


def test_golden_svgs_on_bundled_corpus(demo_bundle):
    assert (demo_bundle / "trends.svg").read_bytes() == (FIXTURES / "golden_trends.svg").read_bytes()
    assert (demo_bundle / "trends_US.svg").read_bytes() == (FIXTURES / "golden_trends_US.svg").read_bytes()


def test_bundle_conservation(demo_bundle):
    totals = sum(int(r["total"]) for r in read(demo_bundle / "topic_totals.csv"))
    weekly = sum(int(r["count"]) for r in read(demo_bundle / "trends.csv"))
    n_docs = sum(1 for _ in open(demo_bundle / "docs.jsonl")) - 1
    assert totals == weekly == n_docs
