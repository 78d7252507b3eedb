import pytest

from core.config_parser import ConfigParser, RunConfig, parse_complex, parse_suites, parse_tau_list, parse_tolerances
from core.errors import UsageError
from core.operator_grid import Grid
from core.verifier import SUITE_NAMES


def write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_missing_file_uses_defaults(tmp_path, logger):
    config = ConfigParser(str(tmp_path / "absent.yaml"), logger).get_config()
    assert config.tau_list == [1 + 0j]
    assert config.suites == list(SUITE_NAMES)
    assert config.grid is None
    assert config.workers == 4
    assert config.format == "json"


def test_load_yaml(tmp_path, logger):
    path = write_config(tmp_path, """
tau_list: [0.5, "0.866+0.5i"]
suites: [gamma-properties, theta]
grid: 1024x24
tolerances:
  theta: 10
seed: 7
workers: 2
logging:
  level: debug
  console_output: false
""")
    config = ConfigParser(path, logger).get_config()
    assert config.tau_list == [0.5 + 0j, 0.866 + 0.5j]
    assert config.suites == ["gamma-properties", "theta"]
    assert config.grid == Grid(1024, 24)
    assert config.tolerance_scale("theta") == 10.0
    assert config.tolerance_scale("gamma-properties") == 1.0
    assert (config.seed, config.workers) == (7, 2)
    assert config.log_level == "DEBUG"
    assert config.console_output is False


@pytest.mark.parametrize("text", [
    "suites: [nonsense]",
    "colour: blue",
    "format: xml",
    "workers: 0",
    "grid: 1000x24",
    "logging: {level: LOUD}",
    "- just\n- a list",
    "tau_list: [1, 2\n",
])
def test_invalid_config(tmp_path, logger, text):
    with pytest.raises(UsageError):
        ConfigParser(write_config(tmp_path, text), logger).get_config()


@pytest.mark.parametrize("text,expected", [
    ("1", 1 + 0j),
    ("0.5", 0.5 + 0j),
    ("2i", 2j),
    ("0.866+0.5i", 0.866 + 0.5j),
    ("1-0.2j", 1 - 0.2j),
    (" 3 ", 3 + 0j),
])
def test_parse_complex(text, expected):
    assert parse_complex(text) == expected


def test_parse_complex_keeps_inf():
    assert parse_complex("inf").real == float("inf")


@pytest.mark.parametrize("text", ["", "abc", "1+i+2"])
def test_parse_complex_rejects(text):
    with pytest.raises(UsageError):
        parse_complex(text)


def test_parse_tau_list():
    assert parse_tau_list("0.5,1,2") == [0.5, 1, 2]
    with pytest.raises(UsageError):
        parse_tau_list(",")


def test_parse_suites():
    assert parse_suites("all") == list(SUITE_NAMES)
    assert parse_suites("theta,params,theta") == ["theta", "params"]
    with pytest.raises(UsageError):
        parse_suites("theta,bogus")


def test_parse_tolerances():
    assert parse_tolerances("2") == {"all": 2.0}
    assert parse_tolerances(3) == {"all": 3.0}
    assert parse_tolerances("pentagon=10,theta=0.5") == {"pentagon": 10.0, "theta": 0.5}
    assert parse_tolerances(None) == {}
    for bad in ("pentagon=-1", "bogus=2", "pentagon=x", "pentagon=1,theta"):
        with pytest.raises(UsageError):
            parse_tolerances(bad)


def test_global_tolerance_scale():
    config = RunConfig(tolerances={"all": 4.0, "theta": 2.0})
    assert config.tolerance_scale("theta") == 2.0
    assert config.tolerance_scale("pentagon") == 4.0


def test_override_ignores_missing_flags():
    config = RunConfig(seed=3, workers=2)
    merged = config.override(seed=None, workers=8, output="out.json")
    assert (merged.seed, merged.workers, merged.output) == (3, 8, "out.json")
    assert config.workers == 2


def test_grid_for_tau():
    assert RunConfig().grid_for(4.0) == Grid.for_tau(4.0)
    fixed = Grid(1024, 24)
    assert RunConfig(grid=fixed).grid_for(4.0) is fixed
