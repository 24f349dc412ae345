import pytest

from lidd.config import from_toml_dict

# PASS/FAIL lines from test_acceptance.py, echoed after the run
ACCEPTANCE = []

TINY = {
    "gpe": {"radial_points": 32, "axial_points": 16},
    "grid": {"points": [0, 0, 16]},
    "stack": {"pancakes_per_side": 4, "check_convergence": False},
    "scatter": {"samples": 2000},
    "sweep": {"tf_radius_um": [0.3, 0.45], "polarization_angle_deg": [0.0, 55.0, 90.0],
              "fig3_tf_radius_um": 0.3},
}


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("gs-cache"))


@pytest.fixture
def tiny_config(tmp_path, cache_dir):
    data = {k: dict(v) for k, v in TINY.items()}
    data["output"] = {"directory": str(tmp_path / "out"), "cache_dir": cache_dir}
    return from_toml_dict(data)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
