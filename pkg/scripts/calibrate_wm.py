"""Detection rate of the watermark under edits at multiples of alpha^2.

    python3 scripts/calibrate_wm.py configs/wm_demo.json configs/model_uniform.json --mult 8 16 32 64
"""
import argparse
import json

from prcwm import config as cfg
from prcwm import lm
from prcwm import watermark as wm
from prcwm.core import Seed
from prcwm.experiment import watermark_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("params")
    ap.add_argument("model")
    ap.add_argument("--mult", type=float, nargs="+", default=[4, 16, 64, 128])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--strategy", default="iid-random")
    args = ap.parse_args()
    d = json.load(open(args.params))
    params, ip = cfg.wm_params_from_dict(d)
    fam = cfg.family_from_dict(cfg.inner_block(d, "wm"))
    model = lm.model_from_json(open(args.model).read())
    print("mult\trate\tdetected\tused\tmean_W")
    for c in args.mult:
        rate = c * params.alpha ** 2
        hits = used = 0
        stats = []
        for t in range(args.trials):
            s = Seed(t, f"calibrate-wm/{c:g}")
            key = wm.setup(params, ip, fam, s.child("key"))
            ok, stat = watermark_trial(key, params, model, rate, args.strategy, s)
            if ok is not None:
                used += 1
                hits += ok
                stats.append(stat)
        mean = sum(stats) / len(stats) if stats else float("nan")
        print(f"{c:g}\t{rate:.4g}\t{hits}\t{used}\t{mean:.1f}")


if __name__ == "__main__":
    main()
