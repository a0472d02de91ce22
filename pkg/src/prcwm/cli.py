"""Command-line front end.

Keys, specs and configs are files; codewords and token streams travel on
stdin/stdout in the core text form. Exit codes: 0 success, 1 reject (decode or
detect said no), 2 usage or parameter error, 3 I/O or corrupt key file.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import channels as ch
from . import config as cfg
from . import experiment as exp
from . import lm
from . import oracle
from . import prc_indexing as idx
from . import prc_substitution as sub
from . import watermark as wm
from ._records import KNOWN_MAGICS
from .core import Seed, format_text, parse_text
from .errors import KeyFormatError, KeyKindMismatch, PrcError, TooLarge

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
# refuse to build keys whose largest array exceeds this many entries
SIZE_GUARD = 1 << 24


class _Abort(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise _Abort(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _read_text(path) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _Abort(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _write_bytes(path, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise _Abort(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None


def _load_json(path) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _Abort(f"{path}: not valid JSON ({exc})", EXIT_USAGE) from None


def _load_any_key(path):
    buf = _read_bytes(path)
    for magic, loader, kind in ((sub.SUB_MAGIC, sub.load_key, "sub"), (idx.IDX_MAGIC, idx.load_key, "idx"),
                                (wm.WM_MAGIC, wm.load_key, "wm")):
        if buf.startswith(magic):
            key, params = loader(buf)
            return kind, key, params
    raise KeyFormatError(f"{path}: unknown key format (expected one of {[m.decode() for m in KNOWN_MAGICS]})")


def _guard(sizes: dict, allow_large: bool):
    big = {k: v for k, v in sizes.items() if v > SIZE_GUARD}
    if big and not allow_large:
        raise TooLarge(f"key would hold {big}; above the {SIZE_GUARD} entry guard (pass --allow-large)")


def _run(fn):
    """Map library errors onto exit codes."""
    try:
        code = fn()
    except _Abort as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.code)
    except KeyFormatError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_IO)
    except PrcError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    sys.exit(code or EXIT_OK)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Pseudorandom codes and LM watermarks: keys, codecs, attacks, experiments."""


@main.command()
@click.argument("kind", type=click.Choice(["sub", "idx", "wm"]))
@click.argument("params_file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
@click.option("--allow-large", is_flag=True, help="Build keys above the size guard.")
def keygen(kind, params_file, seed, out, allow_large):
    """Generate a key from a JSON parameter file."""
    def go():
        d = _load_json(params_file)
        s = Seed(seed, f"keygen/{kind}")
        if kind == "sub":
            params = cfg.sub_params_from_dict(d)
            _guard({"N": params.N}, allow_large)
            data = sub.dump_key(sub.keygen(params, cfg.family_from_dict(d), s), params)
        elif kind == "idx":
            params = cfg.idx_params_from_dict(d)
            _guard({"N": params.n, "q_out": params.q_out}, allow_large)
            data = idx.dump_key(idx.keygen_idx(params, cfg.family_from_dict(d["inner"]), s), params)
        else:
            params, ip = cfg.wm_params_from_dict(d)
            _guard({"N": ip.n, "q_out": ip.q_out, "sigma": params.sigma_size}, allow_large)
            key = wm.setup(params, ip, cfg.family_from_dict(cfg.inner_block(d, "wm")), s)
            data = wm.dump_key(key, params)
        _write_bytes(out, data)
    _run(go)


@main.command()
@click.argument("key_file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def encode(key_file, seed):
    """Print one codeword for a sub or idx key."""
    def go():
        kind, key, params = _load_any_key(key_file)
        s = Seed(seed, "encode")
        if kind == "sub":
            click.echo(format_text(sub.encode(key, params, s)))
        elif kind == "idx":
            click.echo(format_text(idx.encode_idx(key, params, s)))
        else:
            raise KeyKindMismatch("encode needs a sub or idx key; use `wat` for watermark keys")
    _run(go)


@main.command()
@click.argument("key_file", type=click.Path(dir_okay=False))
@click.argument("input_file", required=False, type=click.Path(dir_okay=False, allow_dash=True))
def decode(key_file, input_file):
    """Decide whether a string (stdin by default) is a codeword."""
    def go():
        kind, key, params = _load_any_key(key_file)
        text = _read_text(input_file)
        if kind == "sub":
            v = sub.decode(key, params, parse_text(text, 2))
        elif kind == "idx":
            v = idx.decode_idx(key, params, parse_text(text, params.q_out))
        else:
            raise KeyKindMismatch("decode needs a sub or idx key; use `detect` for watermark keys")
        click.echo(f"{'ACCEPT' if v.accepted else 'REJECT'} W={v.statistic} threshold={v.threshold:.6f}")
        return EXIT_OK if v.accepted else EXIT_REJECT
    _run(go)


@main.command()
@click.argument("spec_file", type=click.Path(dir_okay=False))
@click.argument("input_file", required=False, type=click.Path(dir_okay=False, allow_dash=True))
@click.option("--alphabet", "-q", type=int, default=None,
              help="Alphabet size of the input (default: the channel file's, else 2).")
@click.option("--seed", type=int, default=None, help="Override the channel file's seed.")
def attack(spec_file, input_file, alphabet, seed):
    """Pass a string through a budgeted channel described by a JSON spec."""
    def go():
        text_spec = _read_text(spec_file)
        spec = ch.spec_from_json(text_spec, base_dir=Path(spec_file).parent)
        q = alphabet or int(json.loads(text_spec).get("alphabet", 2))
        x = parse_text(_read_text(input_file), q)
        y = ch.apply_channel(spec, x, None if seed is None else Seed(seed, "channel"))
        click.echo(format_text(y))
    _run(go)


@main.command("wat")
@click.argument("key_file", type=click.Path(dir_okay=False))
@click.argument("model_file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def wat_cmd(key_file, model_file, seed):
    """Sample watermarked tokens from a model spec."""
    def go():
        kind, key, params = _load_any_key(key_file)
        if kind != "wm":
            raise KeyKindMismatch("wat needs a watermark key")
        model = lm.model_from_json(_read_text(model_file))
        click.echo(format_text(wm.wat(key, params, model, Seed(seed, "wat"))))
    _run(go)


@main.command("detect")
@click.argument("key_file", type=click.Path(dir_okay=False))
@click.argument("input_file", required=False, type=click.Path(dir_okay=False, allow_dash=True))
def detect_cmd(key_file, input_file):
    """Scan a token stream for a watermarked window."""
    def go():
        kind, key, params = _load_any_key(key_file)
        if kind != "wm":
            raise KeyKindMismatch("detect needs a watermark key")
        tok = parse_text(_read_text(input_file), params.sigma_size)
        r = wm.detect(key, params, tok)
        if r.detected:
            i, j = r.witness
            click.echo(f"DETECTED window=[{i},{j}) W={r.statistic} threshold={r.threshold:.6f}")
            return EXIT_OK
        click.echo(f"NOT-DETECTED max_W={r.statistic} threshold={r.threshold:.6f} tokens={len(tok)}")
        return EXIT_REJECT
    _run(go)


@main.command("experiment")
@click.argument("config_file", type=click.Path(dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None)
@click.option("--timing", is_flag=True, help="Record wall-clock times (output is then not reproducible).")
def experiment_cmd(config_file, out, timing):
    """Run a seeded robustness sweep and emit CSV."""
    def go():
        conf = _load_json(config_file)
        text = exp.to_csv(exp.run(conf, timing=timing), conf)
        if out:
            _write_bytes(out, text.encode())
        else:
            click.echo(text, nl=False)
    _run(go)


@main.group("oracle")
def oracle_group():
    """Exact reference computations."""


@oracle_group.command("tvd")
@click.argument("N", type=int)
@click.argument("k", type=int)
@click.argument("t", type=int)
def oracle_tvd(n, k, t):
    """Exact TV(Bin(t, k/N), Hyp(N, k, t)) and its bound."""
    def go():
        v = oracle.tvd_binomial_hypergeometric_exact(n, k, t)
        click.echo(f"tv={v} ({float(v):.12g}) bound={oracle.tvd_bound(n, t):.12g}")
    _run(go)


@oracle_group.command("ns")
@click.argument("table")
@click.argument("delta", type=float)
def oracle_ns(table, delta):
    """Noise sensitivity of a truth table given as a 0/1 string."""
    def go():
        f = [int(c) for c in table]
        click.echo(f"bruteforce={oracle.noise_sensitivity_bruteforce(f, delta):.15g} "
                   f"fourier={oracle.noise_sensitivity_fourier(f, delta):.15g}")
    _run(go)


@oracle_group.command("pd-law")
@click.argument("n", type=int)
@click.argument("m", type=int)
def oracle_pd(n, m):
    """Exact law of the support-matching rewrite at tiny sizes."""
    def go():
        for s, pr in sorted(oracle.perturb_difference_exact_law(n, m).items()):
            click.echo(f"{' '.join(map(str, s))}\t{pr}")
    _run(go)


@oracle_group.command("embed-marginal")
@click.argument("probs")
@click.argument("phi")
def oracle_embed(probs, phi):
    """Exact embedded-token marginal; PROBS and PHI are comma-separated."""
    def go():
        p = [float(v) for v in probs.split(",")]
        f = [int(v) for v in phi.split(",")]
        click.echo(" ".join(str(v) for v in oracle.exact_embed_marginal(p, f)))
    _run(go)


if __name__ == "__main__":
    main()
