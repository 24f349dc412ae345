import filecmp
import os
import subprocess
import sys

import numpy as np
import pytest

from lidd.cli import main
from lidd.config import load_config
from lidd.groundstate import resample
from lidd.pipeline import (FIG3_HEADER, PipelineError, cache_entries, clear_cache, convergence_study,
                           diffusion_limit, prepare_density, radiation_pressure_limit, read_csv, run,
                           solve_ground_state, worker_count)
from lidd.plots import emit_plot_scripts
from lidd.ramannath import fit_width, momentum_distribution
from lidd.units import rb87_defaults

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


@pytest.fixture
def bundle(tiny_config):
    return run(tiny_config)


def test_reference_lines():
    sp = rb87_defaults()
    assert radiation_pressure_limit(sp) == pytest.approx(5.6e4, rel=0.01)
    assert diffusion_limit(sp, 300e-9) > 0


def test_outputs_written(bundle):
    d = bundle.directory
    for name in ("fig2_left.csv", "fig2_right.csv", "fig3.csv", "manifest.json", "raman_nath.json"):
        assert os.path.exists(os.path.join(d, name))
    fig3 = read_csv(os.path.join(d, "fig3.csv"))
    assert list(fig3) == FIG3_HEADER
    np.testing.assert_array_equal(fig3["angle_deg"], [0, 55, 90])
    tot = np.hypot(fig3["sigma_x_coherent"], fig3["sigma_x_incoherent"])
    np.testing.assert_allclose(fig3["sigma_x_total"], tot, rtol=1e-12)
    right = read_csv(os.path.join(d, "fig2_right.csv"))
    np.testing.assert_array_equal(right["tf_radius_um"], [0.3, 0.45])
    # fixed peak density: N ~ rho^2, loosely on this coarse grid
    assert right["atom_number"][1] == pytest.approx(right["atom_number"][0] * 1.5**2, rel=0.1)
    left = read_csv(os.path.join(d, "fig2_left.csv"))
    assert set(left["tf_radius_um"]) == {0.3, 0.45}


def test_deterministic_and_manifest_reproduces(bundle, tmp_path, cache_dir):
    d = bundle.directory
    cfg = load_config(os.path.join(d, "manifest.json"))
    again = run(cfg, str(tmp_path / "again"))
    for name in ("fig3.csv", "fig2_right.csv", "fig2_left.csv"):
        assert filecmp.cmp(os.path.join(d, name), os.path.join(again.directory, name), shallow=False)


def test_manifest_contents(bundle):
    import json
    with open(bundle.files["manifest"]) as fh:
        m = json.load(fh)
    assert m["derived"]["dipole_Debye"] == pytest.approx(5.37, rel=0.01)
    assert m["seeds"]["scatter"] == 12345
    assert {"numpy", "scipy", "python", "lidd"} <= set(m["versions"])
    assert m["resolved_si"]["flash"]["intensity_sat"] == 1120.0
    assert m["config"]["flash"]["detuning_MHz"] == 100.0


def test_parallel_points_match_serial(tiny_config, tmp_path, monkeypatch):
    serial = run(tiny_config, str(tmp_path / "s"), do_fig2=False)
    monkeypatch.setenv("LIDD_WORKERS", "2")
    assert worker_count(tiny_config) == 2
    par = run(tiny_config, str(tmp_path / "p"), do_fig2=False)
    assert filecmp.cmp(serial.files["fig3"], par.files["fig3"], shallow=False)
    assert len(os.listdir(os.path.join(par.directory, "points"))) == 3


def test_dark_flash_gives_ground_state_widths(tiny_config, tmp_path):
    cfg = tiny_config.with_overrides(flash={"intensity_sat": 0.0})
    out = run(cfg, str(tmp_path / "dark"), do_fig2=False)
    fig3 = read_csv(out.files["fig3"])
    wf, _ = solve_ground_state(cfg)
    r = cfg.sweep["fig3_radius"]
    psi = prepare_density(cfg, wf, cfg.interaction_grid(r), r)
    spec = momentum_distribution(psi, cfg.flash_params().k)
    for ax in "xy":
        np.testing.assert_allclose(fig3[f"sigma_{ax}_coherent"], fit_width(spec, ax).sigma_coherent, rtol=1e-12)
        np.testing.assert_array_equal(fig3[f"sigma_{ax}_incoherent"], 0.0)
    assert not np.any(fig3["peak_abs_potential_y_Hz"])


def test_stage_error_keeps_partial_results(tiny_config, tmp_path):
    cfg = tiny_config.with_overrides(grid={"points": [16, 16, 16]}, sweep={"tf_radii": [0.1e-6]})
    out = str(tmp_path / "partial")
    with pytest.raises(PipelineError) as err:
        run(cfg, out)
    assert err.value.stage == "density"
    assert os.path.exists(os.path.join(out, "fig2_right.csv"))
    assert not os.path.exists(os.path.join(out, "fig3.csv"))


def test_plot_scripts(bundle, tmp_path):
    paths = emit_plot_scripts(bundle.directory)
    first = [open(p).read() for p in paths]
    emit_plot_scripts(bundle.directory)
    assert [open(p).read() for p in paths] == first
    fig3 = [t for p, t in zip(paths, first) if p.endswith("plot_fig3.py")][0]
    assert "coherent" in fig3 and "incoherent" in fig3 and "lidd" not in fig3
    pytest.importorskip("matplotlib")
    for p in paths:
        subprocess.run([sys.executable, p], check=True, cwd=tmp_path)
    assert os.path.exists(os.path.join(bundle.directory, "fig3.png"))
    with pytest.raises(FileNotFoundError, match="fig2_left.csv"):
        emit_plot_scripts(str(tmp_path))


def test_cli(tiny_config, tmp_path, capsys):
    assert main(["config"]) == 0
    assert "[flash]" in capsys.readouterr().out
    assert main(["plot", str(tmp_path)]) == 11
    assert "missing CSV" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text("[flash]\ndetuning = 1\n")
    assert main(["run", "-c", str(bad)]) == 3
    good = tmp_path / "tiny.toml"
    good.write_text(tiny_config.to_toml())
    assert main(["run", "-c", str(good), "-o", str(tmp_path / "cli")]) == 0
    assert os.path.exists(tmp_path / "cli" / "plot_fig3.py")
    assert main(["converge", "stack_M", "4", "8", "-c", str(good), "-o", str(tmp_path / "conv.csv")]) == 0
    assert os.path.exists(tmp_path / "conv.csv")
    assert main(["cache", "inspect", "-c", str(good)]) == 0
    assert "atom_number" in capsys.readouterr().out


def test_cache(tiny_config, tmp_path):
    cfg = tiny_config.with_overrides(output={"cache_dir": str(tmp_path / "c")})
    a, ra = solve_ground_state(cfg)
    assert len(cache_entries(str(tmp_path / "c"))) == 1
    b, rb = solve_ground_state(cfg)
    np.testing.assert_array_equal(a.values, b.values)
    assert ra.to_dict() == rb.to_dict()
    assert clear_cache(str(tmp_path / "c")) == 3
    assert cache_entries(str(tmp_path / "c")) == []


def test_convergence_study(tiny_config):
    rep = convergence_study(tiny_config, "stack_M", [8, 16])
    change = rep["rows"][1]["rel_change_peak_abs_potential_y_Hz"]
    assert change <= tiny_config.stack["convergence_tol"] * 10
    rep = convergence_study(tiny_config, "padding", [2.0, 3.0])
    # zero padding to 2x is already an exact linear convolution
    assert rep["rows"][1]["rel_change_peak_abs_potential_y_Hz"] <= 1e-10
    with pytest.raises(ValueError):
        convergence_study(tiny_config, "colour", [1])
