import csv
import io
import json
import xml.etree.ElementTree as ET

import pytest

import rwrs.experiment as ex
from rwrs.cli import main
from rwrs.errors import ConfigurationError
from rwrs.reports import FAIL, INCONCLUSIVE, PASS

BASE = """
[experiment]
master_seed = 7
model = srw2d
replicas = 2
output_dir = out
max_steps = 1e5
"""


def write(tmp_path, body, name="exp.ini"):
    path = tmp_path / name
    path.write_text(BASE + body)
    return path


@pytest.fixture(autouse=True)
def no_env_cache(monkeypatch):
    monkeypatch.delenv(ex.CACHE_ENV, raising=False)


# k = 1 is L_n(1) = n, exactly on target: a check that always passes
PASSING = """
[check:moment]
n_list = 1e3, 1e4
k_list = 1
"""

FAILING = """
[check:range_law strict]
n_list = 1e3, 1e4
band = 0.999, 1.0
"""


def test_parse_config(tmp_path):
    cfg = ex.load_config(write(tmp_path, PASSING + "[tolerances]\nmoment.band = 0.5, 1.5\n"))
    assert cfg.master_seed == 7 and cfg.replicas == 2 and cfg.max_steps == 100_000
    (chk,) = cfg.checks
    assert chk.params == {"n_list": [1000, 10000], "k_list": [1], "band": [0.5, 1.5],
                          "replicas": 2}
    assert cfg.output_dir == tmp_path / "out"


@pytest.mark.parametrize("body", [
    "[check:no_such_check]\nn_list = 10\n",
    "[check:range_law]\nn_list = 10\nbogus = 1\n",
    "[check:moment]\nn_list = 10\n",
    "[check:range_law]\nn_list = 1.5\n",
    "[check:complexity]\nn_list = 100\neps = 0.1\nprobs = 0.5 0.5\nreplicas = 3\n",
    "[other]\nx = 1\n",
    "",
])
def test_bad_configs(tmp_path, body):
    with pytest.raises(ConfigurationError):
        ex.load_config(write(tmp_path, body))


def test_bad_budget_and_model(tmp_path):
    p = tmp_path / "a.ini"
    p.write_text("[experiment]\nmax_steps = 0\n" + PASSING)
    with pytest.raises(ConfigurationError):
        ex.load_config(p)
    p.write_text("[experiment]\nmodel = nope\n" + PASSING)
    with pytest.raises(ConfigurationError):
        ex.load_config(p)


def test_cache_rerun_is_free(tmp_path, monkeypatch):
    cfg = ex.load_config(write(tmp_path, PASSING + FAILING))
    first, _ = ex.run_config(cfg)
    blob = (cfg.output_dir / "reports.json").read_text()
    assert len(list((cfg.output_dir / "cache").glob("*.json"))) == 2

    def boom(*a, **k):
        raise AssertionError("recomputed")

    monkeypatch.setattr(ex, "run_check", boom)
    second, _ = ex.run_config(ex.load_config(write(tmp_path, PASSING + FAILING)))
    assert [r.to_dict() for r in second] == [r.to_dict() for r in first]
    assert (cfg.output_dir / "reports.json").read_text() == blob


def test_cache_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(ex.CACHE_ENV, str(tmp_path / "elsewhere"))
    cfg = ex.load_config(write(tmp_path, PASSING))
    ex.run_config(cfg)
    assert len(list((tmp_path / "elsewhere").glob("*.json"))) == 1


def test_pass_and_fail_exit_nonzero(tmp_path):
    reports, code = ex.run_config(ex.load_config(write(tmp_path, PASSING + FAILING)))
    assert code == 1
    assert [r.verdict for r in reports] == [PASS, FAIL]
    rows = list(csv.DictReader(io.StringIO((tmp_path / "out" / "reports.csv").read_text())))
    assert {r["verdict"] for r in rows} == {PASS, FAIL}
    assert len(rows) == 4


def test_budget_inconclusive(tmp_path):
    body = PASSING + "[check:moment big]\nn_list = 1e4, 1e6\nk_list = 1\n"
    reports, code = ex.run_config(ex.load_config(write(tmp_path, body)))
    assert code == 0
    assert reports[0].verdict == PASS
    assert reports[1].verdict == INCONCLUSIVE
    assert "max_steps" in reports[1].params["inconclusive_reason"]
    # budget records are not cached: raising the budget recomputes
    assert len(list((tmp_path / "out" / "cache").glob("*.json"))) == 1


def test_time_limit_inconclusive(tmp_path):
    body = "[check:range_law]\nn_list = 1e4, 1e5\n"
    path = tmp_path / "t.ini"
    path.write_text(BASE.replace("max_steps = 1e5", "max_steps = 1e5\ntime_limit_s = 0.01")
                    + body)
    reports, code = ex.run_config(ex.load_config(path))
    assert reports[0].verdict == INCONCLUSIVE and code == 0
    assert "time limit" in reports[0].params["inconclusive_reason"]


def test_unwritable_output_dir(tmp_path):
    (tmp_path / "file").write_text("")
    path = tmp_path / "u.ini"
    path.write_text(BASE.replace("output_dir = out", "output_dir = file/out") + PASSING)
    with pytest.raises(ConfigurationError):
        ex.run_config(ex.load_config(path))


def test_byte_identical_outputs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for d in (a, b):
        d.mkdir()
        ex.run_config(ex.load_config(write(d, PASSING + FAILING)), use_cache=False)
    for name in ("reports.json", "reports.csv", "reports.svg"):
        assert (a / "out" / name).read_bytes() == (b / "out" / name).read_bytes()
    ET.fromstring((a / "out" / "reports.svg").read_text())


def test_same_name_checks_share_seed(tmp_path):
    body = FAILING + "[check:range_law again]\nn_list = 1e3, 1e4\nband = 0.5, 1.5\n"
    reports, _ = ex.run_config(ex.load_config(write(tmp_path, body)))
    assert [r.observed for r in reports[0].rows] == [r.observed for r in reports[1].rows]


def test_cache_key_canonical():
    k1 = ex.cache_key("range_law", "srw2d", {"a": 1, "b": [1, 2]}, 3)
    k2 = ex.cache_key("range_law", "srw2d", {"b": [1, 2], "a": 1}, 3)
    assert k1 == k2
    assert k1 != ex.cache_key("range_law", "srw2d", {"a": 1, "b": [1, 2]}, 4)
    assert len(k1) == 64


# -- CLI ----------------------------------------------------------------------


def test_cli_model_info(capsys):
    assert main(["model", "info", "lazy_srw2d"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["gamma_d"] == pytest.approx(3.141592653589793 / 2)


def test_cli_simulate(capsys):
    assert main(["simulate", "--model", "zeta1d", "--n", "1e3", "--seed", "3",
                 "--checkpoints", "100,1000"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[-1])["n"] == 1000


def test_cli_oracle_csv(capsys):
    assert main(["oracle", "return_prob", "--model", "zeta1d", "--m", "1,2"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["method", "parameter", "value", "est_error"]
    assert float(rows[2][2]) == pytest.approx(0.2, abs=1e-8)
    assert main(["oracle", "srw_return", "--m", "2"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[1][2]) == 0.25


def test_cli_check_exit_codes(capsys):
    assert main(["check", "range_law", "--model", "srw2d", "--n-list", "1e3,1e4",
                 "--replicas", "2", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("check,model,n,key,observed,target,ratio,verdict")
    assert main(["check", "shifted_moment", "--model", "srw2d", "--n-list", "1e3,1e4"]) == 2


def test_cli_complexity(capsys):
    assert main(["complexity", "--model", "srw2d", "--n-list", "1e3,1e4", "--seed", "1"]) in (0, 1)
    lines = capsys.readouterr().out.strip().splitlines()
    assert json.loads(lines[0])["n"] == 1000


def test_cli_report_exit_codes(tmp_path, capsys):
    assert main(["report", str(write(tmp_path, PASSING))]) == 0
    assert main(["report", str(write(tmp_path, PASSING + FAILING, "f.ini"))]) == 1
    assert main(["report", str(write(tmp_path, "[check:nope]\nn_list = 10\n", "g.ini"))]) == 2
    assert main(["report", str(tmp_path / "missing.ini")]) == 2
    assert main(["bogus"]) == 2
