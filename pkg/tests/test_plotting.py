from defaultpred.pd_segments import compare_pd
from defaultpred.plotting import metrics_figure, pd_figure

TABLE = {"NAIVE": {"pr": 0.5, "re": 0.3, "f1": 0.37, "bacc": 0.64}, "RF": {"pr": 0.6, "re": 0.2, "f1": 0.3, "bacc": 0.6}}


def test_metrics_figure_is_byte_identical(tmp_path):
    a = metrics_figure(TABLE, "loan_imbalanced", tmp_path / "a.png").read_bytes()
    b = metrics_figure(TABLE, "loan_imbalanced", tmp_path / "b.png").read_bytes()
    assert a[:8] == b"\x89PNG\r\n\x1a\n" and a == b


def test_pd_figure_is_byte_identical(tmp_path):
    rep = compare_pd({"A": 0.1, "B": 0.2}, {"A": 0.15, "B": 0.1}, {"A": 0.12, "B": 0.18})
    a = pd_figure(rep, tmp_path / "a.png").read_bytes()
    b = pd_figure(rep, tmp_path / "sub" / "b.png").read_bytes()
    assert a == b
