import pytest
from matplotlib.figure import Figure

from neuform.plotting import (
    plot_copy_reports,
    plot_loss_curve,
    plot_params,
    plot_sweep,
    save_figure,
)


def copy_rows(scale: float = 1.0):
    names = ("vuv", "log_f0", "f1", "f2", "f3", "f4", "tilt", "centroid", "energy")
    return [
        {"parameter": n, "mse": scale * (i + 1) / 10, "median_se": 0.1, "n_frames": 9}
        for i, n in enumerate(names)
    ]


def sweep_rows():
    rows = []
    for swept in ("log_f0", "f1"):
        for factor in (0.8, 1.2):
            for row in copy_rows(factor):
                rows.append({"manipulated": swept, "factor": factor, **row})
    return rows


class TestPlots:
    def test_copy_reports(self):
        figure = plot_copy_reports({"vocoder": copy_rows(), "nf": copy_rows(2.0)})
        assert isinstance(figure, Figure)
        (ax,) = figure.axes
        assert len(ax.patches) == 16

    def test_copy_reports_empty(self):
        with pytest.raises(ValueError, match="at least one report"):
            plot_copy_reports({})

    def test_sweep(self):
        figure = plot_sweep(sweep_rows())
        visible = [ax for ax in figure.axes if ax.get_visible()]
        assert [ax.get_title() for ax in visible] == ["log_f0 scaled", "f1 scaled"]
        assert len(visible[0].lines) == 8

    def test_sweep_no_rows(self):
        with pytest.raises(ValueError, match="no rows"):
            plot_sweep([])

    def test_params(self, params):
        figure = plot_params(params)
        assert len(figure.axes) == 9
        assert figure.axes[0].get_ylabel() == "vuv"

    def test_loss_curve(self):
        figure = plot_loss_curve([1.0, 0.5, 0.4, 0.3], {2: 0.6, 4: 0.35}, window=2)
        assert len(figure.axes[0].lines) == 3

    def test_save(self, tmp_path):
        figure = plot_loss_curve([1.0, 0.5])
        path = save_figure(figure, tmp_path / "plots" / "loss.png")
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
