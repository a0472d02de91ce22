"""Run one or more experiment configs and write a CSV next to each.

    python3 scripts/run_experiment.py configs/exp_idx.json [--timing]
"""
import argparse
import json
from pathlib import Path

from prcwm import experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("configs", nargs="+", type=Path)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical reruns)")
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for path in args.configs:
        conf = json.loads(path.read_text())
        text = experiment.to_csv(experiment.run(conf, timing=args.timing), conf)
        out = args.out_dir / f"{path.stem}.csv"
        out.write_text(text)
        print(f"{path} -> {out}")
        print(text, end="")


if __name__ == "__main__":
    main()
