import pytest

from flexonc.errors import ConfigurationError
from flexonc.scenario import BUNDLED, ScenarioError, dumps, loads, resolve

MINIMAL = """\
name = "tiny"
schemes = ["noncoding", "flexonc"]
seeds = [0, 1]

[topology]
kind = "grid"
rows = 1
cols = 3

[[flows]]
source = 0
destination = 2
interval = 0.1
duration = 5.0

[sweep]
"channel.ber" = [0.0, 1e-5]
"""


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_round_trip(name):
    scn = resolve(name)
    again = loads(dumps(scn), name=name)
    assert again.config == scn.config
    assert again == scn


def test_path_style_names_resolve():
    assert resolve("scenarios/8node.toml").name == "8node"
    assert resolve("scenarios/12node_switchrule.toml").name == "12node"


def test_runs_expand_the_product():
    scn = loads(MINIMAL)
    keys = [k for k, _ in scn.runs()]
    assert len(keys) == 2 * 2 * 2
    assert keys[0] == {"scheme": "noncoding", "channel.ber": 0.0, "seed": 0}
    cfgs = [c for _, c in scn.runs()]
    assert {c.channel.ber for c in cfgs} == {0.0, 1e-5}
    assert {c.seed for c in cfgs} == {0, 1}


def test_defaults_fill_in():
    scn = loads(MINIMAL)
    assert scn.config.duration == 5.0
    assert scn.config.flows[0].payload == 1000
    assert scn.config.flows[0].flow.number == 1


def test_overrides():
    scn = loads(MINIMAL, overrides=[("flows.interval", 0.2), ("channel.ber", 1e-6)])
    assert scn.config.flows[0].interval == 0.2 and scn.config.channel.ber == 1e-6


def test_unknown_key_is_named_with_line():
    text = MINIMAL.replace("cols = 3", "cols = 3\ncolumns = 3")
    with pytest.raises(ScenarioError) as err:
        loads(text, source="tiny.toml")
    assert err.value.field == "topology.columns"
    assert err.value.line == 9
    assert str(err.value).startswith("tiny.toml:9:")


def test_missing_destination():
    text = MINIMAL.replace("destination = 2\n", "")
    with pytest.raises(ScenarioError) as err:
        loads(text)
    assert err.value.field == "flows[0].destination"


def test_wrong_type():
    with pytest.raises(ScenarioError) as err:
        loads(MINIMAL.replace("rows = 1", 'rows = "one"'))
    assert err.value.field == "topology.rows"


def test_out_of_range_value():
    with pytest.raises(ConfigurationError):
        loads(MINIMAL, overrides=[("channel.ber", 2.0)])


def test_bad_sweep_path():
    with pytest.raises(ScenarioError):
        loads(MINIMAL.replace('"channel.ber"', '"channel.bogus"'))


def test_syntax_error_has_line():
    with pytest.raises(ScenarioError) as err:
        loads(MINIMAL.replace("rows = 1", "rows = "))
    assert err.value.line == 7


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError):
        resolve("nowhere")
