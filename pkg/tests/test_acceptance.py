"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

Lines are printed as each test finishes and repeated in the terminal summary.
Marked slow: the whole module takes several minutes on one core.
"""
import hashlib
import itertools
import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner
from scipy import stats

from prcwm import channels as ch
from prcwm import cli, lm, oracle
from prcwm import prc_indexing as idx
from prcwm import prc_substitution as sub
from prcwm import watermark as wm
from prcwm.core import Seed
from prcwm.experiment import pick_window, qualifying_windows
from prcwm.lm import FixedLengthUniformModel, MarkovModel, TokenDistribution
from prcwm.prf import LocalPrfFamily

pytestmark = pytest.mark.slow

SOUNDNESS_KEYS = 500


def c1_setup():
    n, m = 8, 1024
    params = sub.derive_params(n, 0.05, 0.1, profile="demo", m=m, N=3 * m * (n + 1) ** 2)
    return params, LocalPrfFamily(n, 3, 0.1)


def c4_setup():
    inner = sub.derive_params(64, 0.05, 0.0, profile="demo", m=2000, N=65 * 2000)
    return idx.IdxParams(inner, 8), LocalPrfFamily(64, 2)


def wm_setup():
    ip = idx.IdxParams(sub.derive_params(2, 0.05, 0.0, profile="demo", m=600, N=3 * 600), 2)
    params = wm.WatermarkParams(ip.m_out, 0.05, 1 << 20, 16_000)
    return params, ip, LocalPrfFamily(2, 1), FixedLengthUniformModel(1 << 20, 15_999)


def chi2_pooled(observed, expected, min_expected=5.0):
    """Chi-square p-value after merging cells (in order) until each expects at least ``min_expected``."""
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    obs[-1] += o_acc
    exp[-1] += e_acc
    return stats.chisquare(obs, exp).pvalue


@pytest.fixture(scope="module")
def wm_soundness():
    """Detector hits on one fixed uniform text of length 2n, over fresh keys; shared by criteria 2 and 8."""
    params, ip, fam, model = wm_setup()
    fixed = lm.sample_sequence(FixedLengthUniformModel(1 << 20, 10 ** 9), Seed(2, "fixed-text"), 2 * params.n)
    hits = sum(wm.detect(wm.setup(params, ip, fam, Seed(t, "c2-wm-key")), params, fixed).detected
               for t in range(SOUNDNESS_KEYS))
    return hits


def test_c1_substitution_roundtrip(report):
    params, fam = c1_setup()
    spec = ch.ChannelSpec("substitution", 0.05)
    t0 = time.perf_counter()
    acc = 0
    for t in range(200):
        s = Seed(t, "c1")
        key = sub.keygen(params, fam, s.child("key"))
        y = ch.apply_channel_array(spec, sub.encode_bits(key, params, s.child("enc")), 2, s.child("chan").generator())
        acc += sub.decode(key, params, y).accepted
    wall = time.perf_counter() - t0
    ok = acc / 200 >= 0.95 and wall < 60
    report(1, ok, f"sub roundtrip m={params.m} N={params.N} p=0.05: accept {acc}/200 (need >= 0.95), "
                  f"{wall:.1f}s (need < 60s)")
    assert ok


def test_c2_soundness(report, wm_soundness):
    rng = Seed(0, "c2").generator()
    sp, sfam = c1_setup()
    fixed = rng.integers(0, 2, sp.N)
    sub_hits = sum(sub.decode(sub.keygen(sp, sfam, Seed(t, "c2-sub-key")), sp, fixed).accepted
                   for t in range(SOUNDNESS_KEYS))
    ip, ifam = c4_setup()
    fixed = rng.integers(0, ip.q_out, ip.m_out)
    idx_hits = sum(idx.decode_idx(idx.keygen_idx(ip, ifam, Seed(t, "c2-idx-key")), ip, fixed).accepted
                   for t in range(SOUNDNESS_KEYS))

    # W under fresh keys against one fixed string
    m = 64
    wp = sub.derive_params(8, 0.05, 0.1, profile="demo", m=m, N=9 * m)
    wfam = LocalPrfFamily(8, 3, 0.1)
    fixed = rng.integers(0, 2, wp.N)
    W = np.array([sub.agreement_count(sub.keygen(wp, wfam, Seed(t, "c2-w-key")), wp, fixed)
                  for t in range(10_000)])
    expected = stats.binom.pmf(np.arange(m + 1), m, 0.5) * W.size
    pval = chi2_pooled(np.bincount(W, minlength=m + 1), expected)

    cap = 0.01 * SOUNDNESS_KEYS
    ok = sub_hits <= cap and idx_hits <= cap and wm_soundness <= cap and pval > 0.001
    report(2, ok, f"false accepts over {SOUNDNESS_KEYS} keys: sub {sub_hits}, idx {idx_hits}, wm {wm_soundness} "
                  f"(need <= {cap:g}); W ~ Bin(64,1/2) chi-square p={pval:.3g} (need > 0.001)")
    assert ok


def test_c3_perturb_difference_uniform(report):
    worst = Fraction(0)
    for n, m in itertools.product(range(1, 4), range(1, 3)):
        law = oracle.perturb_difference_exact_law(n, m)
        target = Fraction(1, n ** m)
        assert len(law) == n ** m
        worst = max(worst, max(abs(v - target) for v in law.values()))
    exact_ok = worst <= Fraction(1, 10 ** 12)

    n, m, draws = 4, 3, 10 ** 6
    g = Seed(0, "c3").generator()
    y0s = g.integers(0, 2, size=(draws, n))
    codes = np.empty(draws, dtype=np.int64)
    weights = n ** np.arange(m)
    for t in range(draws):
        codes[t] = idx.perturb_difference(n, m, y0s[t], g) @ weights
    pval = stats.chisquare(np.bincount(codes, minlength=n ** m)).pvalue
    ok = exact_ok and pval > 0.001
    report(3, ok, f"exact law n<=3, m<=2 max deviation {float(worst):.3g} (need <= 1e-12); "
                  f"n=4 m=3 {draws} draws chi-square p={pval:.3g} (need > 0.001)")
    assert ok


def test_c4_indexing_edit_robustness(report):
    ip, fam = c4_setup()
    good, bad = ch.ChannelSpec("edit", 0.2), ch.ChannelSpec("edit", 1.5)
    t0 = time.perf_counter()
    acc_good = acc_bad = 0
    for t in range(200):
        s = Seed(t, "c4")
        key = idx.keygen_idx(ip, fam, s.child("key"))
        z = idx.encode_idx_array(key, ip, s.child("enc"))
        acc_good += idx.decode_idx(key, ip, ch.apply_channel_array(good, z, ip.q_out, s.child("c1").generator())).accepted
        acc_bad += idx.decode_idx(key, ip, ch.apply_channel_array(bad, z, ip.q_out, s.child("c2").generator())).accepted
    wall = time.perf_counter() - t0
    ok = acc_good / 200 >= 0.95 and acc_bad / 200 <= 0.01 and wall < 300
    report(4, ok, f"idx m_out={ip.m_out} q={ip.q_out}: rate 0.2 accept {acc_good}/200 (need >= 0.95); "
                  f"rate 1.5 accept {acc_bad}/200 (need <= 0.01); {wall:.1f}s (need < 300s)")
    assert ok


def _ns_bruteforce_all(F, t, delta):
    """Noise sensitivity of every row of the truth-table matrix ``F`` at once."""
    size = 1 << t
    xs = np.arange(size)
    out = np.zeros(F.shape[0])
    for e in range(size):
        w = bin(e).count("1")
        out += delta ** w * (1 - delta) ** (t - w) * np.mean(F != F[:, xs ^ e], axis=1)
    return out


def _ns_fourier_all(F, t, delta):
    coeffs = oracle.walsh_hadamard(1.0 - 2.0 * F) / (1 << t)
    levels = np.array([bin(s).count("1") for s in range(1 << t)])
    return 0.5 * ((coeffs ** 2) * (1 - (1 - 2 * delta) ** levels)).sum(axis=1)


def test_c5_noise_sensitivity(report):
    g = Seed(0, "c5").generator()
    deltas = (0.0, 0.01, 0.1, 0.25, 0.4, 0.5)
    worst = 0.0
    for _ in range(100):
        f = g.integers(0, 2, 16)
        d = float(g.random() * 0.5)
        worst = max(worst, abs(oracle.noise_sensitivity_fourier(f, d) - oracle.noise_sensitivity_bruteforce(f, d)))

    # every function of tau <= 4 bits, both routes against the bound
    violations, checked = 0, 0
    for tau in range(5):
        size = 1 << tau
        F = ((np.arange(1 << size)[:, None] >> np.arange(size)) & 1).astype(np.int64)
        for d in deltas:
            bound = oracle.local_noise_bound(tau, d)
            a, b = _ns_bruteforce_all(F, tau, d), _ns_fourier_all(F, tau, d)
            worst = max(worst, float(np.abs(a - b).max()))
            violations += int(np.count_nonzero(a > bound + 1e-12) + np.count_nonzero(b > bound + 1e-12))
            checked += F.shape[0]
    ok = worst <= 1e-12 and violations == 0
    report(5, ok, f"Fourier vs brute force max |diff| {worst:.3g} (need <= 1e-12); local bound violations "
                  f"{violations} over {checked} (function, delta) pairs with tau <= 4")
    assert ok


def test_c6_tv_bound(report):
    violations, cases = 0, 0
    for N in range(1, 41):
        for k in range(N + 1):
            for t in range(N + 1):
                cases += 1
                violations += oracle.tvd_binomial_hypergeometric(N, k, t) > oracle.tvd_bound(N, t)
    spot = oracle.tvd_binomial_hypergeometric_exact(10, 5, 2)
    ok = violations == 0 and spot == Fraction(1, 18)
    report(6, ok, f"TV <= 2t/sqrt(N-t) violations {violations}/{cases} for N <= 40; "
                  f"TV(Bin(2,1/2), Hyp(10,5,2)) = {spot} (need 1/18)")
    assert ok


def _c7_marginals():
    g = Seed(0, "c7-marginal").generator()
    worst, count = 0.0, 0
    for s in range(1, 7):
        for K in range(1, 4):
            for phi in itertools.product(range(K), repeat=s):
                phi = np.array(phi)
                for _ in range(2):
                    w = g.random(s) * (g.random(s) < 0.8)
                    if w.sum() == 0:
                        w[0] = 1.0
                    p = TokenDistribution(s, w / w.sum())
                    exact = np.array([float(v) for v in oracle.exact_embed_marginal(p, phi, K)])
                    mixed = sum(wm.embed_token_distribution(x, p, phi, K) for x in range(K)) / K
                    worst = max(worst, float(np.abs(exact - p.probs).max()), float(np.abs(mixed - p.probs).max()))
                    count += 1
    return worst, count


def test_c7_embed_exactness(report):
    worst, count = _c7_marginals()

    # micro stack: code alphabet 4, block length 2, fresh key per sequence
    ip = idx.IdxParams(sub.derive_params(1, 0.1, 0.0, profile="demo", m=1, N=2), 2)
    fam = LocalPrfFamily(1, 0)
    model = MarkovModel([[0.4, 0.3, 0.2, 0.1], [0.2, 0.2, 0.4, 0.2],
                         [0.3, 0.3, 0.25, 0.15], [0, 0, 0, 1.0]], [0.35, 0.35, 0.3, 0.0])
    params = wm.WatermarkParams(ip.m_out, 0.5, 4, 3)
    g = Seed(0, "c7-e2e").generator()
    seqs = 10 ** 5
    weights = 5 ** np.arange(3)
    wat_codes = np.empty(seqs, dtype=np.int64)
    plain_codes = np.empty(seqs, dtype=np.int64)
    pad = np.full(3, 4)
    for t in range(seqs):
        a = wm.wat(wm.setup(params, ip, fam, g), params, model, g).symbols
        b = lm.sample_sequence(model, g, 3).symbols
        wat_codes[t] = np.concatenate((a, pad[a.size:])) @ weights
        plain_codes[t] = np.concatenate((b, pad[b.size:])) @ weights
    table = np.array([np.bincount(wat_codes, minlength=125), np.bincount(plain_codes, minlength=125)])
    table = table[:, table.sum(axis=0) > 0]
    pval = stats.chi2_contingency(table).pvalue
    ok = worst <= 1e-12 and pval > 0.001
    report(7, ok, f"embed marginal max |diff| {worst:.3g} over {count} (p, phi) with |Sigma| <= 6, K <= 3 "
                  f"(need <= 1e-12); wat vs plain {seqs} sequences, {table.shape[1]} outcomes, "
                  f"chi-square p={pval:.3g} (need > 0.001)")
    assert ok


def _c8_rate(params, ip, fam, model, rate, trials, label):
    hits = used = skipped = 0
    for t in range(trials):
        s = Seed(t, label)
        key = wm.setup(params, ip, fam, s.child("key"))
        tok = wm.wat(key, params, model, s.child("wat"))
        win = pick_window(qualifying_windows(model, params, tok), s.child("window").generator())
        if win is None:
            skipped += 1
            continue
        i, j = win
        # the window must meet the entropy threshold it was chosen by
        h = lm.empirical_entropy(model, tok, i, j)
        assert h >= wm.beta_threshold(params, j - i) * math.log(params.sigma_size) * (1 - 1e-12)
        piece = ch.apply_channel_array(ch.ChannelSpec("edit", rate), tok.symbols[i:j], params.sigma_size,
                                       s.child("chan").generator())
        used += 1
        hits += wm.detect(key, params, piece).detected
    return hits, used, skipped


def test_c8_end_to_end_watermark(report, wm_soundness):
    params, ip, fam, model = wm_setup()
    a2 = params.alpha ** 2
    parts, ok = [], True
    for c, trials in ((16.0, 100), (1 / 48, 50)):
        hits, used, skipped = _c8_rate(params, ip, fam, model, c * a2, trials, f"c8-{c:g}")
        rate_ok = used > 0 and hits / used >= 0.90
        ok &= rate_ok
        parts.append(f"rate {c * a2:.4g} detect {hits}/{used} (skipped {skipped})")
    fp_ok = wm_soundness <= 0.01 * SOUNDNESS_KEYS
    ok &= fp_ok
    report(8, ok, "; ".join(parts) + f" (need >= 0.90); false positives {wm_soundness}/{SOUNDNESS_KEYS} "
                  f"(need <= 0.01)")
    assert ok


# -- determinism of the command line ---------------------------------------------

C9_CONFIGS = {
    "sub": {"n": 4, "tau": 2, "q": 0.0, "p": 0.05, "profile": "demo", "m": 256, "N": 1280},
    "idx": {"inner": {"n": 8, "tau": 2, "q": 0.0, "p": 0.05, "profile": "demo", "m": 600}, "rho": 4},
    "wm": {"idx": {"inner": {"n": 2, "tau": 1, "q": 0.0, "p": 0.05, "profile": "demo", "m": 600}, "rho": 2},
           "alpha": 0.05, "sigma_size": 16384, "L_max": 2000},
    "model": {"kind": "fixed-length-uniform", "alphabet_size": 16384, "length": 1999},
    "chan": {"kind": "edit", "rate": 0.1, "strategy": "iid-random", "seed": 5, "alphabet": 32},
    "exp": {"mode": "indexing", "seed": 4, "trials": 3, "fp_trials": 3, "rates": [0.0, 0.1],
            "params": {"inner": {"n": 8, "tau": 2, "q": 0.0, "p": 0.05, "profile": "demo", "m": 600}, "rho": 4}},
}


def _cli_session(tmp):
    """Run every command once inside ``tmp``; return a digest per command."""
    for name, d in C9_CONFIGS.items():
        (tmp / f"{name}.json").write_text(json.dumps(d))
    runner = CliRunner()
    digests = {}

    def run(label, args, input=None, files=()):
        r = runner.invoke(cli.main, args, input=input)
        h = hashlib.sha256(f"{r.exit_code}\n".encode() + r.stdout_bytes)
        for f in files:
            h.update((tmp / f).read_bytes())
        digests[label] = h.hexdigest()
        return r.output

    for kind in ("sub", "idx", "wm"):
        run(f"keygen {kind}", ["keygen", kind, str(tmp / f"{kind}.json"), "--seed", "7",
                               "--out", str(tmp / f"{kind}.key")], files=[f"{kind}.key"])
    sub_word = run("encode sub", ["encode", str(tmp / "sub.key"), "--seed", "1"])
    idx_word = run("encode idx", ["encode", str(tmp / "idx.key"), "--seed", "1"])
    run("decode sub", ["decode", str(tmp / "sub.key")], input=sub_word)
    attacked = run("attack", ["attack", str(tmp / "chan.json"), "-q", "32"], input=idx_word)
    run("decode idx", ["decode", str(tmp / "idx.key")], input=attacked)
    text = run("wat", ["wat", str(tmp / "wm.key"), str(tmp / "model.json"), "--seed", "3"])
    run("detect", ["detect", str(tmp / "wm.key")], input=text)
    run("experiment", ["experiment", str(tmp / "exp.json"), "-o", str(tmp / "exp.csv")], files=["exp.csv"])
    run("oracle tvd", ["oracle", "tvd", "10", "5", "2"])
    run("oracle ns", ["oracle", "ns", "0110", "0.1"])
    run("oracle pd-law", ["oracle", "pd-law", "2", "2"])
    run("oracle embed-marginal", ["oracle", "embed-marginal", "0.5,0.25,0.25", "0,1,1"])
    return digests


def _subprocess_digest(tmp):
    # one real process pipeline per run: keygen then wat through the installed entry module
    cmd = [sys.executable, "-m", "prcwm.cli"]
    subprocess.run(cmd + ["keygen", "wm", str(tmp / "wm.json"), "--seed", "9", "--out", str(tmp / "p.key")],
                   check=True)
    out = subprocess.run(cmd + ["wat", str(tmp / "p.key"), str(tmp / "model.json"), "--seed", "2"],
                         check=True, capture_output=True).stdout
    return hashlib.sha256((tmp / "p.key").read_bytes() + out).hexdigest()


def test_c9_cli_determinism(report, tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    a, b = _cli_session(a_dir), _cli_session(b_dir)
    a["subprocess keygen+wat"] = _subprocess_digest(a_dir)
    b["subprocess keygen+wat"] = _subprocess_digest(b_dir)
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = not differing and a.keys() == b.keys()
    report(9, ok, f"{len(a)} commands rerun, sha256 identical for {len(a) - len(differing)}"
                  + (f"; differ: {differing}" if differing else ""))
    assert ok
