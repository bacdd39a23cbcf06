"""Command-line entry point: gtvv simulate|estimate|infer|evaluate|traces.

Exit codes: 0 success, 2 configuration error, 3 run-time numerical error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import baselines, room
from .errors import ConfigError, GtvvError
from .experiment import (ExperimentConfig, dump_traces, run_experiment,
                         run_single, scene_geometry, write_results)
from .sh import build_dictionary, make_omni_beam, make_reference_beam
from .somp import somp
from .spectral import stft
from .velocity import EstimatorConfig, estimate_gtvv


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = ExperimentConfig(**{**_cfg_dict(cfg), "seed": args.seed})
    cfg.validate()
    return cfg


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    from dataclasses import asdict
    d = asdict(cfg)
    from .experiment import EstimatorSettings
    d["estimator"] = EstimatorSettings(**d["estimator"])
    return d


def _estimator_config(cfg: ExperimentConfig, reference) -> EstimatorConfig:
    return EstimatorConfig(reference, cfg.estimator.seg_count,
                           cfg.estimator.frames_per_seg,
                           cfg.estimator.diagonal_load)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    order = max(cfg.orders) if args.order is None else args.order
    for scene_idx in range(cfg.num_scenes):
        src, mic = scene_geometry(cfg, scene_idx)
        source = room.make_burst_source(
            cfg.duration, cfg.fs,
            np.random.SeedSequence([cfg.seed, scene_idx, 7]))
        for rt in cfg.rt60:
            scene = room.image_source_scene(
                cfg.room, src, mic, rt, cfg.max_reflection_order, cfg.fs)
            sig = room.encode_scene(scene, source, order)
            if not math.isinf(cfg.snr_db):
                sig = room.add_noise(
                    sig, cfg.snr_db,
                    np.random.SeedSequence([cfg.seed, scene_idx, 13]))
            stem = os.path.join(args.out, f"scene{scene_idx}_rt{rt:g}")
            with open(stem + "_truth.json", "w", encoding="utf-8") as fh:
                fh.write(scene.to_json())
            room.write_wav(stem + ".wav", sig)
            print(f"wrote {stem}.wav ({sig.channels.shape[0]} channels)")
    return 0


def _gtvv_from_wav(args, cfg: ExperimentConfig):
    sig = room.read_wav(args.wav)
    spec = stft(sig, cfg.win_len)
    order = int(round(math.sqrt(spec.channels))) - 1
    dictionary = build_dictionary(cfg.dict_size, order, cfg.dict_scheme,
                                  cfg.dict_file)
    v_h = baselines.h_tdvv(spec, _estimator_config(cfg, make_omni_beam(order)))
    if args.method == "htdvv":
        return v_h, dictionary, cfg.iter_cap(order)
    est_h = somp(v_h, dictionary, cfg.iter_cap(order))
    steered = make_reference_beam(est_h.directions[0], order)
    v_g = estimate_gtvv(spec, _estimator_config(cfg, steered))
    return v_g, dictionary, cfg.iter_cap(order)


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    v, _, _ = _gtvv_from_wav(args, cfg)
    dump_traces(v, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    v, dictionary, iters = _gtvv_from_wav(args, cfg)
    est = somp(v, dictionary, iters)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(est.to_json())
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    table, records = run_experiment(cfg)
    write_results(table, records, cfg, args.out)
    print(table.to_csv(), end="")
    print(f"results written to {args.out}")
    return 0


def cmd_traces(args) -> int:
    cfg = _load_config(args)
    order = max(cfg.orders) if args.order is None else args.order
    rt = cfg.rt60[-1]
    src, mic = scene_geometry(cfg, 0)
    scene = room.image_source_scene(cfg.room, src, mic, rt,
                                    cfg.max_reflection_order, cfg.fs)
    source = room.make_burst_source(
        cfg.duration, cfg.fs, np.random.SeedSequence([cfg.seed, 0, 7]))
    sig = room.encode_scene(scene, source, order)
    if not math.isinf(cfg.snr_db):
        sig = room.add_noise(sig, cfg.snr_db,
                             np.random.SeedSequence([cfg.seed, 0, 13]))
    spec = stft(sig, cfg.win_len)
    dictionary = build_dictionary(cfg.dict_size, order, cfg.dict_scheme,
                                  cfg.dict_file)
    v_h = baselines.h_tdvv(spec, _estimator_config(cfg, make_omni_beam(order)))
    est_h = somp(v_h, dictionary, cfg.iter_cap(order))
    steered = make_reference_beam(est_h.directions[0], order)
    v_g = estimate_gtvv(spec, _estimator_config(cfg, steered))
    os.makedirs(args.out, exist_ok=True)
    dump_traces(v_h, os.path.join(args.out, "trace_htdvv.csv"))
    dump_traces(v_g, os.path.join(args.out, "trace_gtvv.csv"))
    print(f"traces written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtvv",
        description="Velocity-vector multipath analysis of Ambisonic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None, out_help="output path"):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--out", default=out_default, help=out_help)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="generate scenes, truth JSON and WAVs")
    common(p, "sim_out", "output directory")
    p.add_argument("--order", type=int, default=None, choices=range(1, 9))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a GTVV trace from a WAV")
    common(p, "trace.csv", "trace CSV path")
    p.add_argument("--wav", required=True, help="multichannel Ambisonic WAV")
    p.add_argument("--method", choices=("gtvv", "htdvv"), default="gtvv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer", help="estimate wavefronts from a WAV")
    common(p, "estimate.json", "estimate JSON path")
    p.add_argument("--wav", required=True, help="multichannel Ambisonic WAV")
    p.add_argument("--method", choices=("gtvv", "htdvv"), default="gtvv")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="run the full sweep and write tables")
    common(p, "results", "output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("traces", help="dump paired H-TDVV/GTVV trace CSVs")
    common(p, "traces", "output directory")
    p.add_argument("--order", type=int, default=None, choices=range(1, 9))
    p.set_defaults(func=cmd_traces)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GtvvError, ValueError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
