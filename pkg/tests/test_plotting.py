import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spikesim.core import Raster
from spikesim.errors import ConfigError
from spikesim.plasticity import kernel_table, write_kernels_csv
from spikesim.plotting import emit_plot, write_kernel_svg, write_raster_svg, write_trace_svg

SVG = "{http://www.w3.org/2000/svg}"


def _group(root, gid):
    for g in root.iter(f"{SVG}g"):
        if g.get("id") == gid:
            return g
    return None


def _xs(path_d):
    return [float(x) for x in re.findall(r"[ML]\s*([-\d.]+)\s", path_d)]


def _axes_box(root):
    # the axes background is the patch drawn right after the figure patch
    d = _group(root, "patch_2").find(f"{SVG}path").get("d")
    xs = _xs(d)
    return min(xs), max(xs)


def test_empty_raster_svg(tmp_path):
    p = write_raster_svg(tmp_path / "r.svg", Raster(()), t_max=10, n_neurons=1)
    root = ET.parse(p).getroot()
    assert root.tag == f"{SVG}svg"
    assert _group(root, "axes_1") is not None
    spikes = _group(root, "spikes")
    assert spikes is None or len(spikes.findall(f"{SVG}path")) == 0


def test_three_ticks_proportional(tmp_path):
    times, t_max = [10.0, 20.0, 30.0], 50.0
    p = write_raster_svg(tmp_path / "r.svg", Raster.from_pairs([(0, t) for t in times]), t_max, 1)
    root = ET.parse(p).getroot()
    ticks = _group(root, "spikes").findall(f"{SVG}path")
    assert len(ticks) == 3
    left, right = _axes_box(root)
    xs = [_xs(t.get("d"))[0] for t in ticks]
    expected = [left + t / t_max * (right - left) for t in times]
    assert np.allclose(xs, expected, atol=0.01)


def test_kernel_plot_has_two_lines(tmp_path):
    p = write_kernel_svg(tmp_path / "k.svg", *kernel_table())
    root = ET.parse(p).getroot()
    for gid in ("kernel-stdp", "kernel-sapr"):
        g = _group(root, gid)
        assert g is not None
        assert len(_xs(g.find(f"{SVG}path").get("d"))) == 201


def test_trace_plot_lines(tmp_path):
    t = np.linspace(0, 1, 11)
    p = write_trace_svg(tmp_path / "t.svg", {(0, "V"): (t, t**2), (1, "E"): (t, -t)})
    root = ET.parse(p).getroot()
    assert _group(root, "trace-0-V") is not None and _group(root, "trace-1-E") is not None


def test_svg_byte_stable(tmp_path):
    r = Raster.from_pairs([(0, 1.0), (1, 2.5), (2, 7.0)])
    a = write_raster_svg(tmp_path / "a.svg", r).read_bytes()
    b = write_raster_svg(tmp_path / "b.svg", r).read_bytes()
    assert a == b
    assert b"<dc:date>" not in a


def test_emit_plot_kinds(tmp_path):
    raster_csv = tmp_path / "raster.csv"
    raster_csv.write_text(Raster.from_pairs([(0, 1.0)]).to_csv())
    emit_plot(raster_csv, "raster", tmp_path / "raster.svg")
    kernels = tmp_path / "kernels.csv"
    write_kernels_csv(kernels)
    emit_plot(kernels, "kernel", tmp_path / "kernels.svg")
    traces = tmp_path / "traces.csv"
    traces.write_text("t_ms,neuron_id,var,value\n0.1,0,E,1.0\n0.2,0,E,2.0\n")
    emit_plot(traces, "trace", tmp_path / "traces.svg")
    for name in ("raster.svg", "kernels.svg", "traces.svg"):
        ET.parse(tmp_path / name)


@pytest.mark.parametrize("kind", ["raster", "trace", "kernel"])
def test_schema_mismatch(tmp_path, kind):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        emit_plot(bad, kind, tmp_path / "out.svg")
    assert not (tmp_path / "out.svg").exists()


def test_unknown_kind(tmp_path):
    with pytest.raises(ConfigError):
        emit_plot(tmp_path / "x.csv", "histogram", tmp_path / "x.svg")
