import csv
import json
import math

import pytest
import yaml

from cascade_cls import cli
from cascade_cls.config import TASKS, build_config, load_config
from cascade_cls.errors import ConfigError, QuadratureError

SMALL = {"task": "mu_bar_surface", "species": ["Rb"], "height_mm": [0.01, 0.02],
         "radius_um": [1.0, 2.0], "density_per_cm3": 1e11, "seeds": 3,
         "mc": {"max_atoms": 100}}

GOLDEN_HEADER = [
    "task", "species", "height_mm", "radius_um", "density_per_cm3", "n_atoms", "H", "A",
    "mu_bar[quadrature]", "enhancement[quadrature]", "enhancement[mc_circular].mean",
    "enhancement[mc_circular].stderr", "enhancement[mc_circular].n_seeds",
    "decay_rate_per_s[quadrature]", "cls_hz[closed_form]", "cls_hz[cutoff_integral]",
    "cls_hz[full_integral]", "cls_hz[discrete_sum].mean", "cls_hz[discrete_sum].stderr",
    "cls_hz[discrete_sum].n_seeds", "crossing_radius_um[brent]", "lambda_re_per_gamma3[input]",
    "lambda_im_per_gamma3[input]", "idler_center_per_gamma3[lorentzian_fit]",
    "idler_fwhm_per_gamma3[lorentzian_fit]", "idler_offset_per_gamma3[lorentzian_fit]",
    "oracle_rel_l2[ode_vs_pipeline]", "oracle_norm_error[ode]", "oracle_gamma_idler[calibrated]",
    "redshift_positive", "version", "config_hash",
]


def write(tmp_path, doc, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return comments, rows[0], rows[1:]


class TestConfig:
    def test_defaults_and_sections(self):
        cfg = build_config({"task": "cls_surface", "cutoffs": {"k_M_per_m": 1e11},
                            "oracle": {"n_signal": 11}})
        assert cfg.k_M_per_m == 1e11
        assert cfg.oracle_n_signal == 11
        assert cfg.height_mm == (3.0,)

    @pytest.mark.parametrize("doc, path", [
        ({"task": "cls_surface", "radius_um": []}, "radius_um"),
        ({"task": "cls_surface", "height_mm": [1.0, -2.0]}, "height_mm[1]"),
        ({"task": "cls_surface", "spectrum": {"points": 2.5}}, "spectrum.points"),
        ({"task": "cls_surface", "spectrum": {"bogus": 1}}, "spectrum.bogus"),
        ({"task": "cls_surface", "species": ["Rb", "Xx"]}, "species[1]"),
        ({"task": "cls_surface", "density_per_cm3": "dense"}, "density_per_cm3"),
        ({"task": "cls_surface", "cutoffs": {"full_integral": 1}}, "cutoffs.full_integral"),
        ({"task": "nope"}, "task"),
        ({"height_mm": [1.0]}, "task"),
        ({"task": "cls_surface", "color": "red"}, "color"),
    ])
    def test_errors_name_the_field(self, doc, path):
        with pytest.raises(ConfigError) as info:
            build_config(doc)
        assert info.value.path == path
        assert str(info.value).startswith(path)

    def test_hash_tracks_parameters_not_output(self):
        a = build_config(dict(SMALL))
        b = build_config(dict(SMALL, out="elsewhere"))
        c = build_config(dict(SMALL, seeds=4))
        assert a.config_hash() == b.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 64

    @pytest.mark.parametrize("task", TASKS)
    def test_builtin_configs_load(self, task):
        assert load_config(f"builtin:{task}").task == task

    def test_unreadable_and_malformed(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "missing.yaml"))
        bad = tmp_path / "bad.yaml"
        bad.write_text("task: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(str(bad))
        with pytest.raises(ConfigError):
            load_config("builtin:nonexistent")

    def test_overrides_win(self):
        cfg = build_config(dict(SMALL), {"seeds": 7, "task": None})
        assert cfg.seeds == 7 and cfg.task == "mu_bar_surface"


def test_csv_output_golden_columns(tmp_path):
    out = tmp_path / "res"
    assert cli.main(["--config", write(tmp_path, SMALL), "--out", str(out)]) == 0
    comments, header, rows = read_csv(f"{out}.csv")
    assert header == GOLDEN_HEADER
    assert len(rows) == 4
    cfg = build_config(dict(SMALL))
    assert comments[0] == f"# config_hash: {cfg.config_hash()}"
    assert comments[1].startswith("# generated: ")
    rec = dict(zip(header, rows[0]))
    assert rec["task"] == "mu_bar_surface" and rec["species"] == "Rb"
    assert rec["enhancement[mc_circular].n_seeds"] == "3"
    assert rec["cls_hz[closed_form]"] == ""
    assert rec["redshift_positive"] == "true"
    n = int(rec["n_atoms"])
    mb = float(rec["mu_bar[quadrature]"])
    assert float(rec["enhancement[quadrature]"]) == n * mb + 1
    assert "wall" not in ",".join(header)


def test_csv_is_reproducible():
    cfg = build_config(dict(SMALL))
    a = cli.to_csv(cli.run(cfg), cfg, timestamp="T")
    b = cli.to_csv(cli.run(cfg, threads=3), cfg, timestamp="T")
    assert a == b


def test_json_round_trip(tmp_path):
    cfg = build_config(dict(SMALL, seeds=1))
    recs = cli.run(cfg)
    text = cli.to_json(recs, cfg)
    back = cli.records_from_json(text)
    assert len(back) == len(recs)
    for r0, r1 in zip(recs, back):
        assert r1.inputs == r0.inputs
        for k, v in r0.outputs.items():
            assert r1.outputs[k] == v or (math.isnan(v) and math.isnan(r1.outputs[k]))
        assert r1.config_hash == r0.config_hash
    doc = json.loads(text)
    assert doc["config"]["height_mm"] == [0.01, 0.02]
    out = tmp_path / "j"
    assert cli.main(["--config", write(tmp_path, SMALL), "--out", str(out), "--format", "json",
                     "--seeds", "1"]) == 0
    assert len(cli.records_from_json((tmp_path / "j.json").read_text())) == 4


def test_cls_task_columns():
    cfg = build_config({"task": "cls_vs_radius_species", "species": ["Na", "Cs"],
                        "height_mm": [3.0], "radius_um": [10.0]})
    recs = cli.run(cfg)
    assert [r.inputs["species"] for r in recs] == ["Na", "Cs"]
    for r in recs:
        assert r.outputs["cls_hz[closed_form]"] > 0
        assert r.outputs["crossing_radius_um[brent]"] > 10.0


def test_spectrum_task_matches_eigenvalue():
    rec = cli.run(load_config("builtin:spectrum_demo"))[0].outputs
    assert rec["idler_fwhm_per_gamma3[lorentzian_fit]"] == pytest.approx(
        -2 * rec["lambda_re_per_gamma3[input]"], rel=1e-3)
    assert rec["idler_offset_per_gamma3[lorentzian_fit]"] == pytest.approx(
        rec["lambda_im_per_gamma3[input]"], rel=1e-3, abs=1e-6)


def test_exit_code_for_config_error(tmp_path, capsys):
    doc = dict(SMALL, radius_um=[])
    assert cli.main(["--config", write(tmp_path, doc), "--out", str(tmp_path / "x")]) == 2
    assert "radius_um" in capsys.readouterr().err
    assert cli.main(["--config", write(tmp_path, SMALL), "--threads", "0"]) == 2


def test_exit_code_for_numerical_error(tmp_path, monkeypatch, capsys):
    def boom(cfg, seeds, item):
        raise QuadratureError("did not converge")

    monkeypatch.setitem(cli._TASK_FNS, "mu_bar_surface", boom)
    assert cli.main(["--config", write(tmp_path, SMALL), "--out", str(tmp_path / "x")]) == 3
    assert "QuadratureError" in capsys.readouterr().err
