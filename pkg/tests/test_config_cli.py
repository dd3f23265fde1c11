from pathlib import Path

import numpy as np
import pytest

from anomap import cli, config, fileio

REPO = Path(__file__).resolve().parent.parent


def test_defaults_validate():
    cfg = config.RunConfig().validate()
    assert cfg.variant == "fq"
    assert cfg.resolved_t_test() == 750
    assert config.RunConfig(profile="t2_like").resolved_t_test() == 500
    assert config.RunConfig(t_test=123).resolved_t_test() == 123


def test_variant_resolves_alpha_and_air():
    assert config.RunConfig(variant="l1").resolved_alpha() == 0.0
    assert config.RunConfig(variant="ssim").resolved_alpha() == 1.0
    assert config.RunConfig(variant="fq").resolved_alpha() == 0.84
    assert config.RunConfig(variant="fq_air").uses_air()
    assert not config.RunConfig(variant="fq").uses_air()


def test_parse_sections_and_values():
    cfg = config.parse("""
[dataset]
profile = t2_like
n_train = 12
lesion_gap = 0.15
[train]
epochs = 7
[eval]
blur_sigma = none
[run]
seed = 42
""")
    assert cfg.profile == "t2_like"
    assert cfg.n_train == 12
    assert cfg.lesion_gap == 0.15
    assert cfg.epochs == 7
    assert cfg.blur_sigma is None
    assert cfg.seed == 42


def test_parse_reports_line_numbers():
    with pytest.raises(config.ConfigError, match=":2: unknown section"):
        config.parse("\n[nope]\n")
    with pytest.raises(config.ConfigError, match=":3: unknown key"):
        config.parse("\n[train]\nbogus = 1\n")
    with pytest.raises(config.ConfigError, match=":1: key outside"):
        config.parse("epochs = 1\n")
    with pytest.raises(config.ConfigError, match=":2: expected key"):
        config.parse("[train]\nepochs\n")
    with pytest.raises(config.ConfigError, match="bad value"):
        config.parse("[train]\nepochs = many\n")


def test_validation_errors():
    with pytest.raises(ValueError):
        config.RunConfig(variant="l2").validate()
    with pytest.raises(ValueError):
        config.RunConfig(dataset_kind="disk").validate()
    with pytest.raises(ValueError):
        config.RunConfig(profile="ct").validate()
    with pytest.raises(ValueError):
        config.RunConfig(size=16).validate()
    with pytest.raises(ValueError):
        config.RunConfig(lesion_gap=-0.1).validate()


def test_render_parse_roundtrip():
    cfg = config.RunConfig(profile="t2_like", n_train=3, lesion_gap=0.2,
                           epochs=11, blur_sigma=2.5, variant="fq_air",
                           seed=9, out="elsewhere")
    again = config.parse(config.render(cfg))
    assert again == cfg


def test_shipped_configs_parse():
    default = config.parse_file(REPO / "configs" / "default.cfg")
    assert default.variant == "fq"
    ablate = config.parse_file(REPO / "configs" / "ablate_flair.cfg")
    assert ablate.blur_sigma == 4.0
    assert ablate.folds == 5
    assert ablate.lesion_gap == 0.1


def _write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text, encoding="utf-8")
    return str(p)


TINY = """
[dataset]
size = 32
n_train = 2
n_val = 2
n_test = 2
[train]
epochs = 2
[run]
folds = 1
"""


def test_cli_phantom_writes_dataset(tmp_path, capsys):
    cfgp = _write_cfg(tmp_path, TINY)
    out = tmp_path / "ds"
    rc = cli.main(["phantom", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    assert (out / "dataset.tsv").exists()
    assert "wrote 6 samples" in capsys.readouterr().out


def test_cli_run_emits_reports(tmp_path, capsys):
    cfgp = _write_cfg(tmp_path, TINY)
    out = tmp_path / "run_out"
    rc = cli.main(["run", "--config", cfgp, "--out", str(out)])
    assert rc == 0
    assert (out / "report.csv").exists()
    assert (out / "per_sample.csv").exists()
    assert (out / "config_echo.cfg").exists()
    assert "dice" in capsys.readouterr().out
    echoed = config.parse_file(out / "config_echo.cfg")
    assert echoed.size == 32


def test_cli_dump_maps(tmp_path):
    cfgp = _write_cfg(tmp_path, TINY)
    out = tmp_path / "maps_out"
    rc = cli.main(["run", "--config", cfgp, "--out", str(out), "--dump-maps"])
    assert rc == 0
    dumped = sorted((out / "maps" / "fold0").glob("*.f32r"))
    assert len(dumped) == 2


def test_cli_iqa_compares_rasters(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = tmp_path / "a.f32r"
    b = tmp_path / "b.f32r"
    fileio.write_f32r(a, rng.uniform(0, 1, (16, 16)))
    fileio.write_f32r(b, rng.uniform(0, 1, (16, 16)))
    mp = tmp_path / "map.f32r"
    rc = cli.main(["iqa", str(a), str(b), "--map", str(mp)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "ssim_loss" in out and "fusion_loss" in out
    assert fileio.read_f32r(mp).shape == (16, 16)


def test_cli_iqa_rejects_size_mismatch(tmp_path, capsys):
    a = tmp_path / "a.f32r"
    b = tmp_path / "b.f32r"
    fileio.write_f32r(a, np.zeros((4, 4)))
    fileio.write_f32r(b, np.zeros((5, 5)))
    assert cli.main(["iqa", str(a), str(b)]) == 1
    assert "size mismatch" in capsys.readouterr().err


def test_cli_stats_reports_flip(tmp_path, capsys):
    cfgp = _write_cfg(tmp_path, TINY)
    ds_dir = tmp_path / "ds2"
    assert cli.main(["phantom", "--config", cfgp, "--out", str(ds_dir)]) == 0
    capsys.readouterr()
    csv_out = tmp_path / "stats.csv"
    rc = cli.main(["stats", str(ds_dir), "--out", str(csv_out)])
    assert rc == 0
    text = csv_out.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "mu_n,mu_a,air_before,air_after,flip"
    assert capsys.readouterr().out == text


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfgp = _write_cfg(tmp_path, "[train]\nbogus = 1\n")
    assert cli.main(["run", "--config", cfgp]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_seed_override(tmp_path):
    cfgp = _write_cfg(tmp_path, TINY)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cli.main(["run", "--config", cfgp, "--out", str(out_a), "--seed", "5"])
    cli.main(["run", "--config", cfgp, "--out", str(out_b), "--seed", "6"])
    ra = (out_a / "report.csv").read_text(encoding="utf-8")
    rb = (out_b / "report.csv").read_text(encoding="utf-8")
    assert ra != rb
