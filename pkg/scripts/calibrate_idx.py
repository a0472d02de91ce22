"""Sweep edit rates for an indexing code and report the accept rate and margin over threshold.

Used to pick the calibrated rate of the edit-robustness check.

    python3 scripts/calibrate_idx.py configs/idx_demo.json --rates 0.1 0.2 0.3 0.4 --trials 40
"""
import argparse
import json

import numpy as np

from prcwm import channels as ch
from prcwm import config as cfg
from prcwm import prc_indexing as idx
from prcwm.core import Seed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("params")
    ap.add_argument("--rates", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.6, 1.0, 1.5])
    ap.add_argument("--trials", type=int, default=40)
    ap.add_argument("--strategy", default="iid-random")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    d = json.load(open(args.params))
    params, fam = cfg.idx_params_from_dict(d), cfg.family_from_dict(d["inner"])
    thr = params.inner.threshold
    print(f"m_out={params.m_out} q_out={params.q_out} threshold={thr:.1f}")
    print("rate\taccept\tmin_W\tmean_W")
    for rate in args.rates:
        spec = ch.ChannelSpec("edit", rate, args.strategy)
        W = []
        for t in range(args.trials):
            s = Seed(args.seed, f"calibrate/{rate:g}/{t}")
            key = idx.keygen_idx(params, fam, s.child("key"))
            z = idx.encode_idx_array(key, params, s.child("enc"))
            W.append(idx.decode_idx(key, params, ch.apply_channel_array(spec, z, params.q_out,
                                                                        s.child("chan").generator())).statistic)
        W = np.array(W)
        print(f"{rate:g}\t{np.mean(W > thr):.3f}\t{W.min()}\t{W.mean():.1f}")


if __name__ == "__main__":
    main()
