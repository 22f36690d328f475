import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from authorlink import bibcoupling as bc
from authorlink import evaluation as ev
from authorlink.model import CandidatePair, Decision, Method, Verdict
from tests.conftest import make_record


def _pair(i: int, gold: bool) -> CandidatePair:
    return CandidatePair(make_record(f"r{i}"), f"a{i}", gold=gold)


def _decision(i: int, verdict: Verdict) -> Decision:
    return Decision(record_id=f"r{i}", auid=f"a{i}", verdict=verdict, method=Method.BC)


class TestConfusion:
    def test_counts_all_four_cells(self):
        gold = [_pair(0, True), _pair(1, True), _pair(2, False), _pair(3, False)]
        decisions = [_decision(0, Verdict.YES), _decision(1, Verdict.NO),
                     _decision(2, Verdict.YES), _decision(3, Verdict.NO)]
        matrix = ev.confusion(decisions, gold)
        assert (matrix.tp, matrix.fn, matrix.fp, matrix.tn) == (1, 1, 1, 1)
        assert matrix.abstain_count == 0

    def test_abstain_counts_as_predicted_no(self):
        gold = [_pair(0, True), _pair(1, False)]
        decisions = [_decision(0, Verdict.ABSTAIN), _decision(1, Verdict.ABSTAIN)]
        matrix = ev.confusion(decisions, gold)
        assert (matrix.tp, matrix.fn, matrix.fp, matrix.tn) == (0, 1, 0, 1)
        assert matrix.abstain_count == 2

    def test_missing_decision_names_pair(self):
        with pytest.raises(ev.EvalError, match=r"r0.*a0"):
            ev.confusion([], [_pair(0, True)])

    def test_duplicate_decision_rejected(self):
        decisions = [_decision(0, Verdict.YES), _decision(0, Verdict.NO)]
        with pytest.raises(ev.EvalError, match="duplicate"):
            ev.confusion(decisions, [_pair(0, True)])

    def test_unlabeled_gold_pair_rejected(self):
        with pytest.raises(ev.EvalError, match="label"):
            ev.confusion([_decision(0, Verdict.YES)], [_pair(0, None)])

    def test_extra_decisions_ignored(self):
        gold = [_pair(0, True)]
        decisions = [_decision(0, Verdict.YES), _decision(99, Verdict.NO)]
        matrix = ev.confusion(decisions, gold)
        assert matrix.total == 1

    @settings(max_examples=60)
    @given(st.lists(st.tuples(st.booleans(), st.sampled_from(list(Verdict))),
                    max_size=40))
    def test_matches_naive_recount(self, rows):
        gold = [_pair(i, label) for i, (label, _) in enumerate(rows)]
        decisions = [_decision(i, verdict) for i, (_, verdict) in enumerate(rows)]
        matrix = ev.confusion(decisions, gold)
        tp = sum(1 for label, v in rows if label and v is Verdict.YES)
        fn = sum(1 for label, v in rows if label and v is not Verdict.YES)
        fp = sum(1 for label, v in rows if not label and v is Verdict.YES)
        tn = sum(1 for label, v in rows if not label and v is not Verdict.YES)
        abstain = sum(1 for _, v in rows if v is Verdict.ABSTAIN)
        assert (matrix.tp, matrix.fn, matrix.fp, matrix.tn,
                matrix.abstain_count) == (tp, fn, fp, tn, abstain)


class TestMetrics:
    def test_known_matrix(self):
        report = ev.metrics(ev.ConfusionMatrix(tp=383, fp=15, fn=11, tn=197))
        assert report.precision == pytest.approx(383 / 398)
        assert report.recall == pytest.approx(383 / 394)
        assert report.accuracy == pytest.approx(580 / 606)
        shown = report.display()
        assert shown == {"precision": "96.2", "recall": "97.2",
                         "f1": "96.7", "accuracy": "95.7"}

    def test_no_positive_predictions_is_degenerate(self):
        report = ev.metrics(ev.ConfusionMatrix(tp=0, fp=0, fn=5, tn=5))
        assert report.precision == 0.0 and report.f1 == 0.0
        assert report.degenerate

    def test_empty_matrix_is_degenerate(self):
        report = ev.metrics(ev.ConfusionMatrix(0, 0, 0, 0))
        assert report.accuracy == 0.0 and report.degenerate

    @settings(max_examples=80)
    @given(tp=st.integers(0, 300), fp=st.integers(0, 300),
           fn=st.integers(0, 300), tn=st.integers(0, 300))
    def test_f1_is_harmonic_mean(self, tp, fp, fn, tn):
        report = ev.metrics(ev.ConfusionMatrix(tp, fp, fn, tn))
        assert 0.0 <= report.f1 <= 1.0
        if report.precision > 0 and report.recall > 0:
            expected = 2 / (1 / report.precision + 1 / report.recall)
            assert report.f1 == pytest.approx(expected)
            assert min(report.precision, report.recall) <= report.f1
            assert report.f1 <= max(report.precision, report.recall)


class TestTables:
    def _rows(self):
        report = ev.metrics(ev.ConfusionMatrix(tp=383, fp=15, fn=11, tn=197))
        return [ev.MethodRow("lead", report, 12.5),
                ev.MethodRow("bc", report, None)]

    def test_text_table_layout(self):
        text = ev.format_table(self._rows())
        lines = text.splitlines()
        assert lines[0].split() == ["Method", "Precision", "Recall", "F1",
                                    "Accuracy", "Time", "(s)"]
        assert "lead" in lines[2] and "96.2" in lines[2] and "12.500" in lines[2]
        assert lines[3].rstrip().endswith("-")

    def test_csv_mirror(self):
        csv_text = ev.table_csv(self._rows())
        lines = csv_text.strip().splitlines()
        assert lines[0] == "method,precision,recall,f1,accuracy,time_s"
        assert lines[1] == "lead,96.2,97.2,96.7,95.7,12.500"
        assert lines[2] == "bc,96.2,97.2,96.7,95.7,"


class TestSweep:
    def _cells(self):
        w1, w2 = bc.TimeWindow(2016, 2023), bc.TimeWindow(2020, 2023)
        good = ev.metrics(ev.ConfusionMatrix(tp=9, fp=1, fn=1, tn=9))
        poor = ev.metrics(ev.ConfusionMatrix(tp=5, fp=5, fn=5, tn=5))
        return [ev.SweepCell(0.15, w1, good), ev.SweepCell(0.15, w2, poor),
                ev.SweepCell(0.25, w1, poor), ev.SweepCell(0.25, w2, good)]

    def test_grid_has_threshold_rows_and_window_columns(self):
        text = ev.format_sweep(self._cells())
        lines = text.splitlines()
        assert lines[0].split() == ["threshold", "2016:2023", "2020:2023"]
        assert lines[2].startswith("0.15")
        assert lines[3].startswith("0.25")

    def test_csv_columns(self):
        csv_text = ev.sweep_csv(self._cells())
        lines = csv_text.strip().splitlines()
        assert lines[0] == "threshold,window,precision,recall,f1,accuracy"
        assert lines[1].startswith("0.15,2016:2023,90.0,90.0,90.0,90.0")
        assert len(lines) == 5


class TestReadDecisions:
    def test_bad_line_reports_position(self, tmp_path):
        path = tmp_path / "decisions.jsonl"
        path.write_text('{"record_id": "r", "auid": "a", "verdict": "yes", '
                        '"method": "BC"}\n{"record_id": "r"}\n')
        with pytest.raises(ev.EvalError, match=":2:"):
            ev.read_decisions(path)
