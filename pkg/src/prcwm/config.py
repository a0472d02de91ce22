"""JSON parameter files for keys and experiments.

A substitution block looks like::

    {"n": 8, "tau": 3, "q": 0.1, "p": 0.05, "profile": "demo", "m": 1024, "N": 248832,
     "prf_kind": "sparse-parity"}

``N`` may be omitted in the demo profile, meaning ``(n+1) m``. An indexing block
wraps one as ``{"inner": {...}, "rho": 8}`` and a watermark block wraps that as
``{"idx": {...}, "alpha": 0.05, "sigma_size": 1048576, "L_max": 20000}``.
"""
from __future__ import annotations

import functools
import json
from pathlib import Path

from . import prc_indexing as idx
from . import prc_substitution as sub
from . import watermark as wm
from .errors import ParamParse, PrcError
from .prf import LocalPrfFamily, max_locality


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParamParse(f"{path}: not valid JSON ({exc})") from None


def _wrap(fn):
    @functools.wraps(fn)
    def inner(d, *a, **kw):
        try:
            return fn(d, *a, **kw)
        except PrcError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParamParse(f"bad parameter block: {exc!r}") from None
    return inner


@_wrap
def family_from_dict(d: dict) -> LocalPrfFamily:
    n = int(d["n"])
    tau = int(d.get("tau", max_locality(n)))
    return LocalPrfFamily(n, tau, float(d.get("q", 0.0)), d.get("prf_kind", "sparse-parity"))


@_wrap
def sub_params_from_dict(d: dict) -> sub.SubParams:
    n, p, q = int(d["n"]), float(d["p"]), float(d.get("q", 0.0))
    profile = d.get("profile", "demo")
    if profile == "theory":
        return sub.derive_params(n, p, q, float(d.get("C0", 1.0)), "theory")
    m = int(d["m"])
    return sub.derive_params(n, p, q, float(d.get("C0", 1.0)), "demo", m, int(d.get("N", (n + 1) * m)))


@_wrap
def idx_params_from_dict(d: dict) -> idx.IdxParams:
    return idx.IdxParams(sub_params_from_dict(d["inner"]), int(d["rho"]))


@_wrap
def wm_params_from_dict(d: dict) -> tuple[wm.WatermarkParams, idx.IdxParams]:
    ip = idx_params_from_dict(d["idx"])
    params = wm.WatermarkParams(ip.m_out, float(d["alpha"]), int(d["sigma_size"]), int(d["L_max"]),
                                d.get("profile", "demo"))
    return params, ip


def inner_block(d: dict, kind: str) -> dict:
    """The substitution block inside a sub/idx/wm parameter dict."""
    if kind == "sub":
        return d
    if kind == "idx":
        return d["inner"]
    return d["idx"]["inner"]
