"""Seeded Monte Carlo sweeps of robustness and soundness, written as CSV.

Every trial draws from its own labelled stream, so rows depend only on the
config and its master seed.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import channels as ch
from . import config as cfg
from . import lm
from . import prc_indexing as idx
from . import prc_substitution as sub
from . import watermark as wm
from .core import Seed, SymbolString, as_generator
from .errors import ParamParse

CSV_HEADER = ("rate", "alpha", "n", "trials", "detect_rate", "fp_rate", "mean_stat", "wall_ms")


@dataclass
class Row:
    rate: float
    alpha: float | None
    n: int
    trials: int
    detect_rate: float
    fp_rate: float
    mean_stat: float
    wall_ms: float = 0.0

    def cells(self) -> list[str]:
        a = "" if self.alpha is None else f"{self.alpha:g}"
        return [f"{self.rate:g}", a, str(self.n), str(self.trials), f"{self.detect_rate:.6f}",
                f"{self.fp_rate:.6f}", f"{self.mean_stat:.6f}", f"{self.wall_ms:.1f}"]


# -- window selection --------------------------------------------------------

def qualifying_windows(model: lm.LanguageModel, params: wm.WatermarkParams, tok: SymbolString) -> np.ndarray:
    """For each start ``i``, the shortest end ``j`` with enough empirical entropy, or -1.

    A window ``[i, j)`` qualifies when its empirical entropy is at least
    ``beta(j - i) ln |Sigma|``.
    """
    lp = lm.token_logprobs(model, tok)
    H = np.concatenate(([0.0], np.cumsum(-lp)))
    ln_sigma = math.log(params.sigma_size)
    return _shortest_ends(H, 8.0 * params.n * ln_sigma, 6.0 * params.alpha * ln_sigma)


@numba.njit(cache=True)
def _shortest_ends(H, const, slope):
    L = H.size - 1
    ends = np.full(L, -1, dtype=np.int64)
    for i in range(L):
        for j in range(i + 1, L + 1):
            if H[j] - H[i] >= (const + slope * (j - i)) * (1.0 - 1e-12):
                ends[i] = j
                break
    return ends


def pick_window(ends: np.ndarray, rng: np.random.Generator) -> tuple[int, int] | None:
    starts = np.flatnonzero(ends >= 0)
    if starts.size == 0:
        return None
    i = int(starts[rng.integers(0, starts.size)])
    return i, int(ends[i])


# -- per-mode trials ---------------------------------------------------------

def _fixed_string(q: int, length: int, seed: Seed) -> np.ndarray:
    return as_generator(seed).integers(0, q, size=length, dtype=np.int64)


def _code_sweep(conf: dict, mode: str, master: Seed, timing: bool) -> list[Row]:
    block = conf["params"]
    fam = cfg.family_from_dict(cfg.inner_block(block, "sub" if mode == "substitution" else "idx"))
    if mode == "substitution":
        params = cfg.sub_params_from_dict(block)
        q, length, kind = 2, params.N, "substitution"
    else:
        params = cfg.idx_params_from_dict(block)
        q, length, kind = params.q_out, params.m_out, "edit"
    trials, fp_trials = int(conf.get("trials", 20)), int(conf.get("fp_trials", 20))
    strategy = conf.get("strategy", "iid-random")

    def keygen(seed):
        return sub.keygen(params, fam, seed) if mode == "substitution" else idx.keygen_idx(params, fam, seed)

    def encode(key, seed):
        return sub.encode_bits(key, params, seed) if mode == "substitution" else idx.encode_idx_array(key, params, seed)

    def decode(key, y):
        return sub.decode(key, params, y) if mode == "substitution" else idx.decode_idx(key, params, y)

    fixed = _fixed_string(q, length, master.child("fixed-string"))
    fp = sum(decode(keygen(master.child("fp-key", t)), fixed).accepted for t in range(fp_trials))
    rows = []
    for rate in conf["rates"]:
        t0 = time.perf_counter()
        spec = ch.ChannelSpec(kind, float(rate), strategy)
        acc, stats = 0, []
        for t in range(trials):
            s = master.child("rate", f"{rate:g}", t)
            key = keygen(s.child("key"))
            y = ch.apply_channel_array(spec, encode(key, s.child("enc")), q, as_generator(s.child("chan")))
            v = decode(key, y)
            acc += v.accepted
            stats.append(v.statistic)
        wall = (time.perf_counter() - t0) * 1000 if timing else 0.0
        n = params.N if mode == "substitution" else params.m_out
        rows.append(Row(float(rate), None, n, trials, acc / trials, fp / max(fp_trials, 1),
                        float(np.mean(stats)), wall))
    return rows


def watermark_trial(key, params, model, rate, strategy, seed: Seed) -> tuple[bool | None, int]:
    """Watermark, cut out a qualifying window, corrupt it, detect.

    Returns ``(None, 0)`` when the sampled text has no qualifying window.
    """
    tok = wm.wat(key, params, model, seed.child("wat"))
    win = pick_window(qualifying_windows(model, params, tok), as_generator(seed.child("window")))
    if win is None:
        return None, 0
    i, j = win
    spec = ch.ChannelSpec("edit", rate, strategy)
    piece = ch.apply_channel_array(spec, tok.symbols[i:j], params.sigma_size, as_generator(seed.child("chan")))
    r = wm.detect(key, params, piece)
    return r.detected, r.statistic


def _watermark_sweep(conf: dict, master: Seed, timing: bool) -> list[Row]:
    block = conf["params"]
    base, ip = cfg.wm_params_from_dict(block)
    fam = cfg.family_from_dict(cfg.inner_block(block, "wm"))
    model = lm.model_from_dict(conf["model"])
    trials, fp_trials = int(conf.get("trials", 20)), int(conf.get("fp_trials", 20))
    strategy = conf.get("strategy", "iid-random")
    fp_len = int(conf.get("fp_length", 2 * base.n))
    rows = []
    for alpha in conf.get("alphas", [base.alpha]):
        params = wm.WatermarkParams(base.n, float(alpha), base.sigma_size, base.L_max, base.profile)
        fixed = lm.sample_sequence(model, master.child("fixed-text"), fp_len)
        fp = 0
        for t in range(fp_trials):
            key = wm.setup(params, ip, fam, master.child("fp-key", f"{alpha:g}", t))
            fp += wm.detect(key, params, fixed).detected
        rates = conf.get("rates")
        if rates is None:
            rates = [c * float(alpha) ** 2 for c in conf.get("rate_multipliers", [0.0])]
        for rate in rates:
            t0 = time.perf_counter()
            hits, used, stats = 0, 0, []
            for t in range(trials):
                s = master.child("alpha", f"{alpha:g}", "rate", f"{rate:g}", t)
                key = wm.setup(params, ip, fam, s.child("key"))
                ok, stat = watermark_trial(key, params, model, float(rate), strategy, s)
                if ok is None:
                    continue
                used += 1
                hits += ok
                stats.append(stat)
            wall = (time.perf_counter() - t0) * 1000 if timing else 0.0
            rows.append(Row(float(rate), float(alpha), params.n, used, hits / used if used else math.nan,
                            fp / max(fp_trials, 1), float(np.mean(stats)) if stats else math.nan, wall))
    return rows


def run(conf: dict, timing: bool = False) -> list[Row]:
    try:
        mode = conf.get("mode", "watermark")
        master = Seed(int(conf.get("seed", 0)), "experiment")
        if mode == "watermark":
            return _watermark_sweep(conf, master, timing)
        if mode in ("substitution", "indexing"):
            return _code_sweep(conf, mode, master, timing)
    except KeyError as exc:
        raise ParamParse(f"experiment config is missing {exc}") from None
    raise ParamParse(f"unknown experiment mode {mode!r}")


def config_hash(conf: dict) -> str:
    return hashlib.sha256(json.dumps(conf, sort_keys=True).encode()).hexdigest()


def to_csv(rows: list[Row], conf: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    buf.write(f"# config-sha256 {config_hash(conf)}\n")
    return buf.getvalue()
