"""Rendering tests: each stock figure draws from a real bundle produced by
the simulation CLI, and the PNG records the exact input bytes it consumed."""

import hashlib
import shutil
import subprocess
import sys

import pytest
from PIL import Image

from qjumps_figures import render
from qjumps_figures.cli import main
from qjumps_figures.recipes import FIGURES


def _qjumps(*args):
    exe = shutil.which("qjumps")
    cmd = [exe] if exe else [sys.executable, "-m", "qjumps.cli"]
    proc = subprocess.run([*cmd, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    # small but real bundles through the public CLI only
    root = tmp_path_factory.mktemp("fig_bundles")
    tla = root / "tla"
    vboth = root / "vboth"
    _qjumps("run", "--scenario", "fig3", "--out", str(tla), "--modes", "12",
            "--t-max", "0.8", "--stride", "4", "--trajectories", "60")
    _qjumps("run", "--scenario", "fig6", "--out", str(vboth), "--modes", "16",
            "--t-max", "0.8", "--stride", "4", "--trajectories", "40")
    return {"fig1": tla, "fig2": tla, "fig3": tla,
            "fig4": vboth / "nonsecular", "fig5": vboth / "secular",
            "fig6": vboth}


@pytest.mark.parametrize("figure", sorted(FIGURES))
def test_render_each_figure_and_embedded_hash(bundles, tmp_path, figure):
    out = tmp_path / f"{figure}.png"
    digest = render(figure, bundles[figure], out)
    assert out.stat().st_size > 2000
    img = Image.open(out)
    assert img.format == "PNG"
    assert img.text["input_sha256"] == digest
    assert img.text["figure"] == figure
    # the digest is exactly the hash of the files the recipe consumed
    h = hashlib.sha256()
    for rel in sorted(FIGURES[figure].requires):
        h.update(rel.encode())
        h.update(b"\0")
        h.update((bundles[figure] / rel).read_bytes())
    assert h.hexdigest() == digest


def test_hash_tracks_the_input_set(bundles, tmp_path):
    d1 = render("fig1", bundles["fig1"], tmp_path / "a.png")
    d2 = render("fig1", bundles["fig1"], tmp_path / "b.png")
    assert d1 == d2
    d3 = render("fig2", bundles["fig2"], tmp_path / "c.png")
    assert d3 != d1  # different file set from the same bundle


def test_missing_column_is_reported(bundles, tmp_path):
    broken = tmp_path / "broken"
    broken.mkdir()
    src = bundles["fig1"]
    shutil.copy(src / "currents.csv", broken / "currents.csv")
    rows = [line.split(",")
            for line in (src / "combined.csv").read_text().splitlines()]
    keep = [i for i, name in enumerate(rows[0]) if name != "current"]
    text = "\n".join(",".join(r[i] for i in keep) for r in rows) + "\n"
    (broken / "combined.csv").write_text(text)
    with pytest.raises(ValueError,
                       match=r"combined.csv lacks columns \['current'\]"):
        render("fig1", broken, tmp_path / "x.png")


def test_missing_file_is_reported(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError, match="missing file combined.csv"):
        render("fig1", tmp_path / "empty", tmp_path / "x.png")


def test_unknown_figure(tmp_path):
    with pytest.raises(ValueError, match="unknown figure"):
        render("fig9", tmp_path, tmp_path / "x.png")


def test_cli_render_list_and_errors(bundles, tmp_path, capsys):
    out = tmp_path / "f3.png"
    rc = main(["render", "--figure", "fig3", "--bundle", str(bundles["fig3"]),
               "--out", str(out)])
    assert rc == 0
    assert "input_sha256" in capsys.readouterr().out
    assert out.exists()
    assert main(["render", "--figure", "nope", "--bundle",
                 str(bundles["fig3"]), "--out", str(out)]) == 2
    assert main(["render", "--figure", "fig1", "--bundle",
                 str(tmp_path / "void"), "--out", str(out)]) == 2
    capsys.readouterr()
    assert main(["list"]) == 0
    listing = capsys.readouterr().out
    assert all(f"fig{i}" in listing for i in range(1, 7))


def test_cli_entry_point_installed(bundles, tmp_path):
    exe = shutil.which("qjfig")
    cmd = [exe] if exe else [sys.executable, "-m", "qjumps_figures.cli"]
    out = tmp_path / "cli.png"
    proc = subprocess.run([*cmd, "render", "--figure", "fig1", "--bundle",
                           str(bundles["fig1"]), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
