#!/usr/bin/env python3
"""Contrast the lag-domain causality of the omni-referenced H-TDVV against
the GTVV with a beam steered at the direct path.

Simulates one reverberant scene, estimates both velocity vectors, prints
their negative-lag energy fractions and writes plot-ready trace CSVs
(time_s, per-channel magnitude, column 2-norm).

Usage: python3 scripts/causality_demo.py [out_dir] [--order L] [--rt60 T]
"""

import argparse
import math
import os

from gtvv.experiment import ExperimentConfig, dump_traces, scene_geometry
from gtvv.room import encode_scene, image_source_scene, make_burst_source
from gtvv.sh import make_omni_beam, make_reference_beam
from gtvv.spectral import stft
from gtvv.velocity import (EstimatorConfig, estimate_gtvv,
                           negative_lag_energy_fraction)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="traces")
    parser.add_argument("--order", type=int, default=3)
    parser.add_argument("--rt60", type=float, default=0.44)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    cfg = ExperimentConfig(seed=args.seed)
    src_pos, mic_pos = scene_geometry(cfg, 0)
    scene = image_source_scene(cfg.room, src_pos, mic_pos, args.rt60,
                               cfg.max_reflection_order, cfg.fs)
    source = make_burst_source(cfg.duration, cfg.fs, args.seed)
    spec = stft(encode_scene(scene, source, args.order), cfg.win_len)

    rel = sum(w.gain / scene.direct.gain for w in scene.wavefronts[1:])
    print(f"scene: rt60={args.rt60}s, order={args.order}, "
          f"sum of relative reflection gains = {rel:.2f}")

    os.makedirs(args.out, exist_ok=True)
    results = {}
    for name, weights in (
            ("htdvv", make_omni_beam(args.order)),
            ("gtvv", make_reference_beam(scene.direct.direction,
                                         args.order))):
        v = estimate_gtvv(spec, EstimatorConfig(weights))
        frac = negative_lag_energy_fraction(v)
        results[name] = frac
        path = os.path.join(args.out, f"trace_{name}.csv")
        dump_traces(v, path)
        ratio = math.sqrt(frac / (1.0 - frac))
        print(f"{name:6s}: negative-lag energy fraction {frac:.3f} "
              f"(norm ratio {ratio:.3f}) -> {path}")

    assert results["gtvv"] < results["htdvv"]
    print("steered reference is more causal, as expected")


if __name__ == "__main__":
    main()
