"""Report renderer tests against synthetic CSV fixtures."""

import hashlib
import os

import numpy as np
import pytest

from forcekf_report.cli import main
from forcekf_report.render import ReportError, ReportSpec, render_report

EST_HEADER = (
    "t,qw,qx,qy,qz,px,py,pz,vx,vy,vz,bwx,bwy,bwz,bax,bay,baz,Fx,Fy,Fz,"
    + ",".join(f"cov_{n}_{a}" for n in ("att", "pos", "vel", "bg", "ba", "F") for a in "xyz")
)
GT_HEADER = "t,qw,qx,qy,qz,px,py,pz,vx,vy,vz,Fx,Fy,Fz"


def write_fixture(tmp_path, with_truth=True, with_nees=True):
    rng = np.random.default_rng(3)
    n = 50
    t = np.linspace(0.0, 5.0, n)
    results = tmp_path / "results"
    dataset = tmp_path / "dataset"
    results.mkdir(exist_ok=True)
    dataset.mkdir(exist_ok=True)

    rows = []
    for k in range(n):
        q = [1.0, 0.0, 0.0, 0.0]
        p = [np.sin(t[k]), np.cos(t[k]), 1.0]
        v = [0.1, 0.0, 0.0]
        bias = [0.0] * 6
        force = [0.5 * np.sin(t[k]), 0.0, -0.2]
        cov = [1e-4] * 18
        rows.append([t[k], *q, *p, *v, *bias, *force, *cov])
    with open(results / "estimate.csv", "w") as f:
        f.write(EST_HEADER + "\n")
        for row in rows:
            f.write(",".join("%.17g" % x for x in row) + "\n")

    if with_truth:
        with open(dataset / "groundtruth.csv", "w") as f:
            f.write(GT_HEADER + "\n")
            for k in range(n):
                row = [t[k], 1, 0, 0, 0, np.sin(t[k]), np.cos(t[k]), 1.0,
                       0.1, 0, 0, 0.5 * np.sin(t[k]), 0, -0.2]
                f.write(",".join("%.17g" % x for x in row) + "\n")

    if with_nees:
        with open(results / "nees.csv", "w") as f:
            f.write("t,nees_force\n")
            for k in range(n):
                f.write("%.17g,%.17g\n" % (t[k], 3.0 + np.sin(t[k])))
    return results, dataset


def test_render_writes_all_files(tmp_path):
    results, dataset = write_fixture(tmp_path)
    out = tmp_path / "report"
    spec = ReportSpec(str(results), str(dataset), str(out), "svg")
    files = render_report(spec)
    names = {os.path.basename(f) for f in files}
    assert names == {"force_xyz.svg", "trajectory_xy.svg", "nees.svg"}
    for f in files:
        assert os.path.getsize(f) > 0


def test_force_figure_has_six_curves(tmp_path):
    import matplotlib.pyplot as plt

    results, dataset = write_fixture(tmp_path)
    out = tmp_path / "report"

    # count Line2D artists while the figure is alive
    drawn = []
    orig_savefig = plt.Figure.savefig

    def spy(fig, path, **kw):
        if str(path).endswith("force_xyz.svg"):
            drawn.append(sum(len(ax.lines) for ax in fig.axes))
        return orig_savefig(fig, path, **kw)

    plt.Figure.savefig = spy
    try:
        render_report(ReportSpec(str(results), str(dataset), str(out), "svg"))
    finally:
        plt.Figure.savefig = orig_savefig
    assert drawn == [6]  # 3 estimate + 3 truth data curves


def test_render_without_truth(tmp_path):
    results, dataset = write_fixture(tmp_path, with_truth=False, with_nees=False)
    out = tmp_path / "report"
    files = render_report(ReportSpec(str(results), str(dataset), str(out), "svg"))
    names = {os.path.basename(f) for f in files}
    assert names == {"force_xyz.svg", "trajectory_xy.svg"}


def test_missing_estimate_raises_with_path(tmp_path):
    (tmp_path / "empty").mkdir()
    spec = ReportSpec(str(tmp_path / "empty"), None, str(tmp_path / "out"), "svg")
    with pytest.raises(ReportError, match="estimate"):
        render_report(spec)


def test_unsupported_format_rejected(tmp_path):
    results, dataset = write_fixture(tmp_path)
    with pytest.raises(ReportError, match="format"):
        render_report(ReportSpec(str(results), str(dataset), str(tmp_path / "o"), "pdf"))


def test_deterministic_svg_output(tmp_path):
    results, dataset = write_fixture(tmp_path)
    digests = []
    for tag in ("a", "b"):
        out = tmp_path / f"report_{tag}"
        files = render_report(ReportSpec(str(results), str(dataset), str(out), "svg"))
        h = hashlib.sha256()
        for f in sorted(files):
            h.update(open(f, "rb").read())
        digests.append(h.hexdigest())
    assert digests[0] == digests[1]


def test_cli_success_and_failure(tmp_path, capsys):
    results, dataset = write_fixture(tmp_path)
    out = tmp_path / "report"
    code = main(["--results", str(results), "--dataset", str(dataset),
                 "--out", str(out), "--format", "png"])
    assert code == 0
    assert (out / "force_xyz.png").is_file()

    empty = tmp_path / "none"
    empty.mkdir()
    code = main(["--results", str(empty), "--out", str(tmp_path / "r2")])
    assert code == 2
    assert "estimate" in capsys.readouterr().err

    assert main(["--results"]) == 1  # usage error
