import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from lxml import etree

from checker import (
    EXIT_CLEAN,
    EXIT_FAILED,
    EXIT_ISSUES,
    SVG_NS,
    Flag,
    IssueReport,
    build_dataset,
    build_report,
    check,
    collect_layouts,
    evaluate,
    labeled_predictions,
    overlay,
    per_class_confusion,
    recommend,
    report_json,
    report_text,
    train_on_corpus,
)
from gcn_model import GcnConfig, Prediction
from synth_corpus import CorpusSpec, generate
from utils.errors import InvalidClass, LengthMismatch

NS = {"svg": SVG_NS}


def test_recommendations():
    assert recommend(0) == "increase touch target to ≥24×24 px"
    assert recommend(1) == "increase spacing between adjacent targets"
    assert recommend(2) == "raise foreground/background contrast to ≥4.5:1"
    assert recommend(3) == "make alert text explicit and visually prominent"


@pytest.mark.parametrize("index", [4, -1, 9])
def test_no_recommendation_outside_issue_classes(index):
    with pytest.raises(InvalidClass):
        recommend(index)


class TestEvaluate:
    def test_worked_example(self):
        pairs = [(0, 0)] * 8 + [(4, 4)] * 27 + [(1, 4)] * 4 + [(4, 2)] * 3
        predicted, gold = zip(*pairs)
        metrics = evaluate(predicted, gold)
        assert (metrics.tp, metrics.tn, metrics.fp, metrics.fn) == (8, 27, 4, 3)
        assert metrics.to_dict()["precision"] == 0.667
        assert metrics.to_dict()["recall"] == 0.727
        assert metrics.to_dict()["f1"] == 0.696

    def test_different_issue_classes_still_count_as_hits(self):
        metrics = evaluate([0, 1, 2, 3], [3, 2, 1, 0])
        assert metrics.tp == 4
        assert metrics.precision == metrics.recall == metrics.f1 == 1.0

    def test_no_predicted_issues_is_not_a_number(self):
        metrics = evaluate([4, 4, 4], [4, 4, 4])
        assert metrics.to_dict()["precision"] == "n/a"
        assert metrics.to_dict()["recall"] == "n/a"
        assert metrics.to_dict()["f1"] == "n/a"

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            evaluate([0, 1], [0])

    def test_class_out_of_range(self):
        with pytest.raises(InvalidClass):
            evaluate([0, 7], [0, 1])

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), max_size=60))
    def test_counts_match_a_plain_loop(self, pairs):
        predicted = [p for p, _ in pairs]
        gold = [g for _, g in pairs]
        metrics = evaluate(predicted, gold)
        tp = sum(1 for p, g in pairs if p != 4 and g != 4)
        fp = sum(1 for p, g in pairs if p != 4 and g == 4)
        fn = sum(1 for p, g in pairs if p == 4 and g != 4)
        assert (metrics.tp, metrics.fp, metrics.fn) == (tp, fp, fn)
        assert metrics.tp + metrics.tn + metrics.fp + metrics.fn == len(pairs)

    def test_confusion_rows_are_gold(self):
        matrix = per_class_confusion([4, 2, 2], [2, 2, 4])
        assert matrix[2][4] == 1
        assert matrix[2][2] == 1
        assert matrix[4][2] == 1
        assert sum(map(sum, matrix)) == 3


def _prediction(n_nodes: int, rows: dict) -> Prediction:
    probs = np.tile(np.eye(5)[4], (n_nodes, 1))
    for row, distribution in rows.items():
        probs[row] = distribution
    return Prediction(probs=probs, class_of=probs.argmax(axis=1), mask=np.zeros(n_nodes, dtype=bool))


def test_report_flags_argmax_issue(nav_graph):
    prediction = _prediction(37, {0: [0.1, 0.2, 0.5, 0.1, 0.1]})
    report = build_report(nav_graph, prediction, "nav.xml")
    assert report.n_components == 5
    assert len(report.flags) == 1
    flag = report.flags[0]
    assert (flag.resource_id, flag.component_type, flag.class_index) == ("app:id/title", "text", 2)
    assert flag.probability == 0.5
    assert flag.recommendation == recommend(2)
    assert report.counts["low color contrast"] == 1


class TestOverlay:
    def test_clean_report_draws_only_the_frame(self, nav_tree):
        svg = etree.fromstring(overlay(nav_tree, IssueReport("nav.xml", 5)))
        assert svg.get("width") == "1440" and svg.get("height") == "2560"
        assert len(svg.findall("svg:rect", NS)) == 1
        assert not svg.findall("svg:g", NS)

    def test_flag_rectangle_matches_bounds(self, nav_tree):
        flag = Flag("app:id/nav_home", "image", 0, 0.9, (0, 0, 23, 48))
        svg = etree.fromstring(overlay(nav_tree, IssueReport("nav.xml", 5, (flag,))))
        rects = svg.xpath("svg:rect[@class='flag']", namespaces=NS)
        assert len(rects) == 1
        assert [rects[0].get(k) for k in ("x", "y", "width", "height")] == ["0", "0", "23", "48"]
        assert rects[0].get("data-resource-id") == "app:id/nav_home"

    def test_legend_lists_each_present_class_once(self, nav_tree):
        flags = (
            Flag("a", "image", 0, 0.9, (0, 0, 20, 20)),
            Flag("b", "image", 0, 0.8, (40, 0, 60, 20)),
            Flag("c", "text", 2, 0.7, (0, 100, 300, 160)),
        )
        svg = etree.fromstring(overlay(nav_tree, IssueReport("nav.xml", 5, flags)))
        labels = svg.xpath("svg:g/svg:text[@class='legend-label']/text()", namespaces=NS)
        assert labels == ["small size", "low color contrast"]
        assert len(svg.xpath("svg:rect[@class='flag']", namespaces=NS)) == 3

    def test_byte_identical_for_identical_input(self, nav_tree):
        report = IssueReport("nav.xml", 5, (Flag("a", "image", 1, 0.6, (0, 0, 30, 30)),))
        assert overlay(nav_tree, report) == overlay(nav_tree, report)


class TestCheck:
    def test_clean_layout(self, nav_layout_path, make_constant_model):
        run = check([nav_layout_path], make_constant_model(4))
        assert run.exit_code == EXIT_CLEAN
        assert run.results[0].report.flags == ()

    def test_layout_with_issues(self, nav_layout_path, make_constant_model):
        run = check([nav_layout_path], make_constant_model(0))
        assert run.exit_code == EXIT_ISSUES
        report = run.results[0].report
        assert len(report.flags) == 5
        assert run.totals["small size"] == 5

    def test_broken_file_is_skipped(self, fixtures_dir, make_constant_model):
        run = check([fixtures_dir / "malformed.xml", fixtures_dir / "nav_layout.xml"], make_constant_model(4))
        assert [r.ok for r in run.results] == [False, True]
        assert run.results[0].error
        assert run.exit_code == EXIT_CLEAN

    def test_every_file_failing(self, fixtures_dir, tmp_path, make_constant_model):
        run = check([fixtures_dir / "malformed.xml", tmp_path / "missing.xml"], make_constant_model(4))
        assert run.exit_code == EXIT_FAILED

    def test_no_files(self, tmp_path, make_constant_model):
        assert check([tmp_path], make_constant_model(4)).exit_code == EXIT_FAILED

    def test_directories_are_expanded_in_sorted_order(self, fixtures_dir):
        names = [p.name for p in collect_layouts([fixtures_dir])]
        assert names == sorted(names)
        assert "nav_layout.xml" in names

    def test_json_report(self, fixtures_dir, make_constant_model):
        model = make_constant_model(0)
        paths = [fixtures_dir / "malformed.xml", fixtures_dir / "nav_layout.xml"]
        text = report_json(check(paths, model))
        assert text == report_json(check(paths, model))
        payload = json.loads(text)
        assert payload["exit_code"] == EXIT_ISSUES
        assert [f["status"] for f in payload["files"]] == ["error", "ok"]
        issue = payload["files"][1]["issues"][0]
        assert issue["recommendation"] == recommend(0)
        assert payload["summary"]["small size"] == 5

    def test_text_report(self, nav_layout_path, make_constant_model):
        text = report_text(check([nav_layout_path], make_constant_model(2)))
        assert "app:id/title (text) [40,40][640,120] low color contrast" in text
        assert text.rstrip().endswith("unclear alert information: 0")


def test_training_on_a_corpus():
    corpus = generate(CorpusSpec(n_guis=10, seed=2))
    cfg = GcnConfig(hidden_dims=(8, 6), fc_dim=6, epochs=3, seed=1)
    model, history, val_set = train_on_corpus(corpus, cfg)
    assert len(history) == 3
    assert len(val_set) == 2
    assert history[-1]["val_accuracy"] is not None

    predicted, gold = labeled_predictions(model, build_dataset(corpus))
    assert predicted.shape == gold.shape
    assert gold.size == sum(len(g.labels) for g in corpus)
