#!/usr/bin/env python3
"""Gradient-inversion success rate versus encryption ratio.

For each ratio and seed: build a fresh model, take one example's
gradient, hide the top-scoring fraction behind the mask, and try to
reconstruct the input from the visible remainder.  Writes a CSV and
prints a summary row per ratio.

Usage: python scripts/attack_eval.py OUT.csv [--ratios ...] [--seeds N]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from hefl.attack import AttackConfig, VisibleUpdate, attack_example
from hefl.model import (build_model, forward_backward, make_architecture,
                        make_toy_dataset)
from hefl.sensitivity import magnitude_map, select_top_r


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out", help="output CSV path")
    ap.add_argument("--ratios", default="0,0.1,0.25,0.5,0.75,0.9,1.0")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iterations", type=int, default=300)
    ap.add_argument("--restarts", type=int, default=5)
    args = ap.parse_args()

    arch = make_architecture("mlp2", (8, 8), 10)
    cfg = AttackConfig(iterations=args.iterations, restarts=args.restarts)
    rows = ["encryption_ratio,seed,visible_count,input_mse,psnr_db,success,"
            "label_inferred"]
    for ratio in (float(r) for r in args.ratios.split(",")):
        wins, mses = 0, []
        for seed in range(args.seeds):
            model = build_model(arch, seed)
            data = make_toy_dataset(1, 1000 + seed, split=0)
            x, y = data.x[0], int(data.y[0])
            _, grad = forward_backward(model, x[None], np.array([y]))
            mask = select_top_r(magnitude_map(grad), ratio)
            plain = mask.complement()
            visible = VisibleUpdate(plain, grad[plain], grad.size)
            res = attack_example(model, visible, x, y, cfg, seed=seed)
            wins += res.success
            mses.append(res.input_mse)
            rows.append(f"{ratio:.6f},{seed},{res.visible_count},"
                        f"{res.input_mse:.6e},{res.psnr_db:.3f},"
                        f"{int(res.success)},"
                        f"{'' if res.label_inferred is None else res.label_inferred}")
        print(f"ratio {ratio:g}: success {wins}/{args.seeds}, "
              f"median mse {np.median(mses):.2e}")
    Path(args.out).write_text("\r\n".join(rows) + "\r\n", newline="")
    print(f"rows -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
