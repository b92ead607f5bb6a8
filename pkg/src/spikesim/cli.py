"""Command-line front end.

Every command prints one ``key=value`` summary line on success and writes
its artifacts under ``--out``. Exit codes: 0 success, 1 usage error,
2 bad config or input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import demos, plotting
from .config import load_scenario
from .core import Raster, SpikeEvent, capacity_bound
from .errors import ConfigError, NumericError
from .network import build
from .plasticity import kernel_table, kernels_csv
from .recognition import irnn, srn
from .recognition.images import read_image
from .recognition.synthetic import bar_patterns, synthetic_faces

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_OUT = "spikesim-out"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _summary(**kv) -> str:
    return " ".join(f"{k}={v}" for k, v in kv.items())


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


# -- commands -------------------------------------------------------------


def cmd_simulate(args) -> str:
    overrides = {"dt": args.dt, "duration": args.duration, "seed": args.seed, "plasticity": args.rule}
    sc = load_scenario(args.config, overrides)
    engine = build(sc.topology, sc.sim)
    res = engine.run(sc.stimulus, sc.probes, weight_every=sc.weight_every)
    out = _out(args)
    paths = res.write(out)
    plotting.write_raster_svg(out / "raster.svg", res.raster, sc.sim.duration, len(sc.topology.neurons))
    if sc.sim.plasticity != "off" and len(engine.w):
        header = ["t_ms"] + [f"w{i}" for i in range(len(engine.w))]
        rows = [[f"{t:.6f}"] + [f"{w:.10f}" for w in ws] for t, ws in zip(res.weight_times, res.weight_history)]
        _write(out / "weights.csv", _csv_text(header, rows))
    return _summary(
        command="simulate",
        neurons=len(sc.topology.neurons),
        synapses=len(sc.topology.synapses),
        steps=len(res.times),
        spikes=len(res.raster),
        raster=paths["raster"].name,
    )


def _sim_kw(args) -> dict:
    kw = {}
    if args.dt is not None:
        kw["dt"] = args.dt
    if args.duration is not None:
        kw["duration"] = args.duration
    return kw


def demo_fig5(args) -> str:
    kw = _sim_kw(args)
    res = demos.run_fig5(seed=args.seed, **kw)
    doubled = demos.fig5_post_spikes(2 * demos.FIG5_INH_WEIGHT, seed=args.seed, **kw)
    out = _out(args)
    res.write(out, "fig5_")
    duration = kw.get("duration", demos.FIG5_DURATION)
    plotting.write_raster_svg(out / "fig5_raster.svg", res.raster, duration, 3)
    series = {k: (res.times, v) for k, v in res.traces.items() if k[1] in ("E", "Th")}
    plotting.write_trace_svg(out / "fig5_traces.svg", series)
    counts = res.raster.counts(3)
    return _summary(
        demo="fig5",
        pre_exc_spikes=counts[0],
        pre_inh_spikes=counts[1],
        post_spikes=counts[demos.FIG5_POST],
        post_spikes_double_inhibition=doubled,
    )


def demo_digit2(args) -> str:
    outputs = demos.digit2_outputs()
    _write(_out(args) / "digit2.csv", _csv_text(["fixture", "output"], outputs.items()))
    return _summary(demo="digit2", **outputs)


def demo_izhi(args) -> str:
    kw = {"duration": 500.0, **_sim_kw(args)}
    runs = demos.izhi_regimes(**kw)
    out = _out(args)
    rows = [[r.name, r.kind, _fmt(r.gamma), _fmt(r.current), len(r.spikes), _fmt(r.rate_hz)] for r in runs]
    _write(out / "izhi_regimes.csv", _csv_text(["regime", "kind", "gamma", "current", "spikes", "rate_hz"], rows))
    raster = Raster(tuple(SpikeEvent(i, t) for i, r in enumerate(runs) for t in r.spikes))
    raster.write_csv(out / "izhi_regimes_raster.csv")
    plotting.write_raster_svg(out / "izhi_regimes_raster.svg", raster, kw["duration"], len(runs))
    return _summary(demo="izhi-regimes", **{f"{r.name}_rate_hz": _fmt(r.rate_hz) for r in runs})


def demo_refractory(args) -> str:
    kw = {"duration": 500.0, **_sim_kw(args)}
    rows = demos.refractory_sweep(**kw)
    table = [[_fmt(r.current), r.model, r.n_spikes, f"{r.min_isi:.6f}"] for r in rows]
    _write(_out(args) / "refractory.csv", _csv_text(["current", "model", "spikes", "min_isi_ms"], table))
    return _summary(
        demo="refractory",
        min_isi_original=f"{demos.min_isi(rows, 'original'):.6f}",
        min_isi_bounded=f"{demos.min_isi(rows, 'bounded'):.6f}",
    )


DEMOS = {"fig5": demo_fig5, "digit2": demo_digit2, "izhi-regimes": demo_izhi, "refractory": demo_refractory}


def cmd_demo(args) -> str:
    return DEMOS[args.name](args)


def cmd_kernels(args) -> str:
    out = _out(args)
    _write(out / "kernels.csv", kernels_csv())
    dts, s, a = kernel_table()
    plotting.write_kernel_svg(out / "kernels.svg", dts, s, a)
    return _summary(command="kernels", rows=len(dts), file="kernels.csv")


def cmd_capacity(args) -> str:
    if args.n <= 1:
        raise ConfigError(f"N must exceed 1, got {args.n}")
    return str(capacity_bound(args.n))


def _load_images(paths):
    return [read_image(p) for p in paths]


def _labels(text: Optional[str], n: int):
    if text is None:
        return None
    labels = [s.strip() for s in text.split(",")]
    if len(labels) != n:
        raise ConfigError(f"--labels has {len(labels)} entries for {n} images")
    return labels


def cmd_irnn(args) -> str:
    out = _out(args)
    model_path = out / "irnn.model"
    if args.action == "train":
        if args.images:
            images = _load_images(args.images)
            labels = _labels(args.labels, len(images))
            if labels is None:
                raise ConfigError("irnn train needs --labels when images are given")
        else:
            faces = synthetic_faces(seed=args.seed)
            images, labels = faces + faces, [f"face{i}" for i in range(len(faces))] * 2
        specs = (irnn.WindowSpec(args.k, args.stride), irnn.WindowSpec(2, 2))
        model = irnn.irnn_train(images, labels, specs, args.theta)
        irnn.save_model(model_path, model)
        cmap = model.cluster_count_map(0)
        _write(out / "cluster_map.csv", _csv_text([f"col{j}" for j in range(cmap.shape[1])], cmap.tolist()))
        acc = np.mean([irnn.irnn_predict(model, im) == y for im, y in zip(images, labels)])
        return _summary(
            command="irnn-train",
            images=len(images),
            labels=len(model.labels),
            level1_clusters=int(cmap.sum()),
            accuracy=_fmt(acc),
        )
    if args.model is None:
        raise ConfigError(f"irnn {args.action} needs --model")
    model = irnn.load_model(args.model)
    images = _load_images(args.images)
    if args.action == "predict":
        preds = [irnn.irnn_classify(model, im) for im in images]
        rows = [[p, pr.label, f"{pr.margin:.6f}"] for p, pr in zip(args.images, preds)]
        _write(out / "irnn_predictions.csv", _csv_text(["image", "label", "margin"], rows))
        return _summary(command="irnn-predict", images=len(images), labels=",".join(str(p.label) for p in preds))
    updated = irnn.irnn_update(model, images, _labels(args.labels, len(images)))
    irnn.save_model(model_path, updated)
    return _summary(
        command="irnn-update",
        images=len(images),
        labeled=args.labels is not None,
        level1_clusters=int(updated.cluster_count_map(0).sum()),
    )


def cmd_srn(args) -> str:
    out = _out(args)
    if args.action == "train":
        images = _load_images(args.images) if args.images else bar_patterns()
        cfg = srn.SpikingRecognizerConfig(rule=args.rule or "sapr", seed=args.seed)
        if args.dt is not None:
            cfg = replace(cfg, dt=args.dt)
        if args.duration is not None:
            cfg = replace(cfg, presentation_ms=args.duration)
        net = srn.self_organize(cfg, images)
        srn.save_model(out / "srn.model", net)
        hist = [[i + 1, f"{d:.10f}"] for i, d in enumerate(net.history)]
        _write(out / "srn_history.csv", _csv_text(["epoch", "mean_abs_dw"], hist))
        acc = srn.accuracy(net, images, list(range(len(images))))
        kv = dict(
            command="srn-train",
            rule=cfg.rule,
            feature_epochs=net.feature_epochs,
            output_epochs=net.output_epochs,
            accuracy=_fmt(acc),
        )
        if args.compare:
            report = srn.compare_rules(cfg, images)
            rows = [[r, v["feature_epochs"], v["output_epochs"], _fmt(v["accuracy"])] for r, v in report.items()]
            _write(out / "rule_report.csv", _csv_text(["rule", "feature_epochs", "output_epochs", "accuracy"], rows))
            kv.update({f"{r}_accuracy": _fmt(v["accuracy"]) for r, v in report.items()})
        return _summary(**kv)
    if args.model is None:
        raise ConfigError("srn predict needs --model")
    net = srn.load_model(args.model)
    images = _load_images(args.images)
    eng = net.engine()
    results = [srn.spiking_recognize(net, im, args.duration, engine=eng) for im in images]
    rows = [[p, w, " ".join(str(c) for c in counts)] for p, (w, counts) in zip(args.images, results)]
    _write(out / "srn_predictions.csv", _csv_text(["image", "winner", "counts"], rows))
    return _summary(command="srn-predict", images=len(images), winners=",".join(str(w) for w, _ in results))


def cmd_plot(args) -> str:
    out = _out(args)
    target = out / (Path(args.csv).stem + ".svg")
    plotting.emit_plot(args.csv, args.kind, target)
    return _summary(command="plot", kind=args.kind, file=target.name)


# -- parser ---------------------------------------------------------------


def _add(p, *names):
    if "config" in names:
        p.add_argument("--config", metavar="FILE", required=True, help="scenario INI file")
    if "out" in names:
        p.add_argument("--out", metavar="DIR", default=DEFAULT_OUT, help=f"output directory (default {DEFAULT_OUT})")
    if "seed" in names:
        p.add_argument("--seed", metavar="N", type=int, default=0, help="random seed (default 0)")
    if "dt" in names:
        p.add_argument("--dt", metavar="MS", type=_positive, help="step size override")
    if "duration" in names:
        p.add_argument("--duration", metavar="MS", type=_nonneg, help="duration override")
    if "rule" in names:
        p.add_argument("--rule", choices=("stdp", "sapr"), help="plasticity rule override")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spikesim", description="Spiking neuron simulations, plasticity rules and recognition demos.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="run a scenario file")
    _add(p, "config", "out", "seed", "dt", "duration", "rule")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demo", help="run a canned scenario")
    p.add_argument("name", choices=tuple(DEMOS))
    _add(p, "out", "seed", "dt", "duration")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("kernels", help="dump the STDP and SAPR windows")
    _add(p, "out")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("capacity", help="print floor(N / (4 ln N))")
    p.add_argument("n", type=int, metavar="N")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("irnn", help="windowed clustering recognizer")
    p.add_argument("action", choices=("train", "predict", "update"))
    p.add_argument("images", nargs="*", help="PGM or matrix images (train defaults to synthetic faces)")
    p.add_argument("--labels", help="comma-separated labels, one per image")
    p.add_argument("--model", metavar="FILE", help="model to load for predict/update")
    p.add_argument("--theta", type=float, default=0.9, help="similarity threshold (default 0.9)")
    p.add_argument("--k", type=int, default=4, help="level-1 window side (default 4)")
    p.add_argument("--stride", type=int, default=4, help="level-1 window stride (default 4)")
    _add(p, "out", "seed")
    p.set_defaults(func=cmd_irnn)

    p = sub.add_parser("srn", help="spiking recognizer")
    p.add_argument("action", choices=("train", "predict"))
    p.add_argument("images", nargs="*", help="PGM or matrix images (train defaults to two bar patterns)")
    p.add_argument("--model", metavar="FILE", help="model to load for predict")
    p.add_argument("--compare", action="store_true", help="also train with both rules and write rule_report.csv")
    _add(p, "out", "seed", "dt", "duration", "rule")
    p.set_defaults(func=cmd_srn)

    p = sub.add_parser("plot", help="render a raster, trace or kernel CSV to SVG")
    p.add_argument("csv", metavar="CSV")
    p.add_argument("--kind", choices=plotting.PLOT_KINDS, required=True)
    _add(p, "out")
    p.set_defaults(func=cmd_plot)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        line = args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(line)
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
