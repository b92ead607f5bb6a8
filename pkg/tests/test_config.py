import pytest

from spikesim import config
from spikesim.config import load_scenario, parse_scenario
from spikesim.errors import ConfigError
from spikesim.network import SpikeSource, build
from spikesim.neurons import IzhParams, McGregorParams


def _docstring_example():
    doc = config.__doc__
    body = doc.split("Example::", 1)[1].split("Neuron keys", 1)[0]
    return "\n".join(line[4:] for line in body.splitlines())


def test_docstring_example_parses_and_runs():
    sc = parse_scenario(_docstring_example())
    assert len(sc.topology.neurons) == 5
    assert sc.topology.neurons[1].params == McGregorParams(Th0=12.0)
    assert sc.topology.neurons[3].params == IzhParams(a=0.02, d=8.0)
    syn = sc.topology.synapses[1]
    assert (syn.pre, syn.post, syn.weight, syn.delay, syn.kernel.tau, syn.plastic) == (1, 2, 0.2, 1.0, 2.0, False)
    assert sc.probes == [2, (0, "E")]
    assert sc.weight_every is None
    assert SpikeSource(4, (5.0, 12.5, 30.0)) in sc.stimulus.spikes
    segs = [s for s in sc.stimulus.currents if s.neuron == 1]
    assert [(s.start, s.stop, s.amplitude) for s in segs] == [(0.0, 50.0, 17.0), (50.0, float("inf"), 5.0)]
    res = build(sc.topology, sc.sim).run(sc.stimulus, sc.probes)
    assert len(res.raster.events) > 0


MINIMAL = """
[sim]
duration = 10
seed = 4

[neurons]
0-1 = mcgregor excitatory

[synapses]
0 -> 1 = 0.5
"""


def test_overrides_win():
    sc = parse_scenario(MINIMAL, {"duration": 3.0, "seed": 9, "dt": None})
    assert sc.sim.duration == 3.0 and sc.sim.seed == 9 and sc.sim.dt == 0.1


def test_load_from_file(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(MINIMAL)
    assert load_scenario(p).sim.seed == 4
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario(tmp_path / "missing.ini")


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("[neurons]\n0 = foo excitatory\n", r"line 2: \[neurons\] 0: unknown model 'foo'"),
        ("[neurons]\n0 = mcgregor sideways\n", "polarity"),
        ("[neurons]\n0 = mcgregor excitatory Tmem=abc\n", "expected a number"),
        ("[neurons]\n0 = mcgregor excitatory bogus=1\n", "unknown parameter"),
        ("[neurons]\n1 = mcgregor excitatory\n", "without gaps"),
        ("[neurons]\n0 = mcgregor excitatory\n[synapses]\n0 - 1 = 0.5\n", "pre -> post"),
        ("[neurons]\n0 = mcgregor excitatory\n[synapses]\n0 -> 0 = 0.5 speed=3\n", "unknown option"),
        ("[neurons]\n0 = mcgregor excitatory\n[stimulus]\n0 = laser 3\n", "expected 'current AMP'"),
        ("[neurons]\n0 = mcgregor excitatory\n[sim]\ncolour = red\n", r"line 4: \[sim\] colour: unknown key"),
        ("[neurons]\n0 = mcgregor excitatory\n[sim]\ndt = fast\n", "expected a number"),
        ("[neurons]\n0 = mcgregor excitatory\n[sim]\nplasticity = hebb\n", "plasticity"),
        ("[neurons]\n0 = mcgregor excitatory\n[extra]\nx = 1\n", "unknown section"),
        ("[sim]\ndt = 0.1\n", r"needs a \[neurons\]"),
        ("[neurons\n", "malformed"),
        ("[neurons]\n0 = mcgregor excitatory\n0 = mcgregor excitatory\n", "malformed"),
    ],
)
def test_errors_are_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_scenario(text)


def test_probes_must_name_real_variables():
    sc = parse_scenario("[neurons]\n0 = mcgregor excitatory\n[sim]\nprobes = 0:v\n")
    with pytest.raises(ConfigError):
        build(sc.topology, sc.sim).run(sc.stimulus, sc.probes)
