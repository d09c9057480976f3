"""JSON and CSV serialization.

Floats are written with 17 significant digits so every double round-trips
exactly; output is deterministic (key order as inserted, LF line endings).
Non-finite floats are written as ``null``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, ParseError
from .lti_core import (
    AffineParametricFamily,
    FrequencyGrid,
    GaussianParameter,
    RationalTransferFunction,
    StateSpaceModel,
    SystemEnsemble,
    instantiate,
    sample_ensemble,
)

__all__ = [
    "format_float",
    "dumps",
    "write_json",
    "read_json",
    "write_csv",
    "model_to_dict",
    "model_from_dict",
    "family_to_dict",
    "family_from_dict",
    "param_to_dict",
    "param_from_dict",
    "ensemble_to_dict",
    "ensemble_from_dict",
    "freq_ensemble_to_dict",
    "freq_ensemble_from_dict",
]


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    obj = _plain(obj)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        if all(not isinstance(_plain(v), (dict, list)) for v in obj):
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def read_json(path):
    """Load a JSON file; syntax errors become :class:`ParseError` with line/column."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# domain objects


def _matrix(d, key, ctx):
    if key not in d:
        raise InvalidArgument(f"{ctx}: missing field {key!r}")
    try:
        return np.array(d[key], dtype=float)
    except (TypeError, ValueError):
        raise InvalidArgument(f"{ctx}: field {key!r} is not a numeric array") from None


def model_to_dict(model: StateSpaceModel) -> dict:
    return {"A": model.A, "B": model.B, "C": model.C, "D": model.D}


def model_from_dict(d, ctx: str = "model"):
    """State-space ``{A, B, C[, D]}`` or transfer function ``{num, den}`` (ascending powers)."""
    if not isinstance(d, dict):
        raise InvalidArgument(f"{ctx}: expected an object")
    if "num" in d or "den" in d:
        return RationalTransferFunction(_matrix(d, "num", ctx), _matrix(d, "den", ctx))
    return StateSpaceModel(_matrix(d, "A", ctx), _matrix(d, "B", ctx), _matrix(d, "C", ctx), float(d.get("D", 0.0)))


def family_to_dict(family: AffineParametricFamily) -> dict:
    return {
        "base": model_to_dict(family.base),
        "directions": [{"A": A, "B": B, "C": C} for A, B, C in family.directions],
        "nominal_theta": family.nominal_theta,
    }


def family_from_dict(d, ctx: str = "family") -> AffineParametricFamily:
    if not isinstance(d, dict) or "base" not in d:
        raise InvalidArgument(f"{ctx}: expected an object with a 'base' model")
    base = model_from_dict(d["base"], ctx + ".base")
    if not isinstance(base, StateSpaceModel):
        base = StateSpaceModel(*base.to_ss()[:3], float(base.to_ss().D[0, 0]))
    dirs = []
    for k, t in enumerate(d.get("directions", [])):
        c = f"{ctx}.directions[{k}]"
        dirs.append((_matrix(t, "A", c), _matrix(t, "B", c), _matrix(t, "C", c)))
    theta = d.get("nominal_theta")
    return AffineParametricFamily(base, tuple(dirs), None if theta is None else np.array(theta, dtype=float))


def param_to_dict(param: GaussianParameter) -> dict:
    return {"mean": param.mean, "covariance": param.covariance}


def param_from_dict(d, ctx: str = "param") -> GaussianParameter:
    if not isinstance(d, dict):
        raise InvalidArgument(f"{ctx}: expected an object")
    return GaussianParameter(_matrix(d, "mean", ctx), _matrix(d, "covariance", ctx))


def ensemble_to_dict(ens: SystemEnsemble) -> dict:
    return {
        "seed": ens.seed,
        "family": family_to_dict(ens.family),
        "param": param_to_dict(ens.param),
        "samples": [{"theta": t, "A": m.A, "B": m.B, "C": m.C} for t, m in ens.samples],
    }


def ensemble_from_dict(d, ctx: str = "ensemble") -> SystemEnsemble:
    """Rebuild an ensemble; without a ``samples`` list it is drawn from ``N`` and ``seed``."""
    if not isinstance(d, dict):
        raise InvalidArgument(f"{ctx}: expected an object")
    family = family_from_dict(d.get("family"), ctx + ".family")
    param = param_from_dict(d.get("param"), ctx + ".param")
    seed = int(d.get("seed", 0))
    if "samples" not in d:
        if "N" not in d:
            raise InvalidArgument(f"{ctx}: needs either 'samples' or 'N'")
        return sample_ensemble(family, param, int(d["N"]), seed)
    thetas, models = [], []
    for i, s in enumerate(d["samples"]):
        c = f"{ctx}.samples[{i}]"
        theta = _matrix(s, "theta", c).ravel()
        m = instantiate(family, theta)
        for key in ("A", "B", "C"):
            if key in s and not np.allclose(_matrix(s, key, c).reshape(getattr(m, key).shape), getattr(m, key), rtol=1e-12, atol=1e-12):
                raise InvalidArgument(f"{c}: stored {key} does not match the family at theta")
        thetas.append(theta)
        models.append(m)
    if not models:
        raise InvalidArgument(f"{ctx}: 'samples' is empty")
    return SystemEnsemble(family, param, np.array(thetas).reshape(len(models), family.d), tuple(models), seed)


def freq_ensemble_to_dict(fe) -> dict:
    out = {"omegas": fe.omegas, "samples": {"re": fe.samples.real, "im": fe.samples.imag}}
    if fe.nominal is not None:
        out["nominal"] = {"re": fe.nominal.real, "im": fe.nominal.imag}
    return out


def freq_ensemble_from_dict(d, ctx: str = "frequency ensemble"):
    from .distances import FrequencyEnsemble

    if not isinstance(d, dict):
        raise InvalidArgument(f"{ctx}: expected an object")
    grid = FrequencyGrid(_matrix(d, "omegas", ctx))
    s = d.get("samples")
    if not isinstance(s, dict):
        raise InvalidArgument(f"{ctx}: 'samples' must be an object with 're' and 'im'")
    samples = _matrix(s, "re", ctx + ".samples") + 1j * _matrix(s, "im", ctx + ".samples")
    nominal = None
    if "nominal" in d:
        n = d["nominal"]
        nominal = _matrix(n, "re", ctx + ".nominal") + 1j * _matrix(n, "im", ctx + ".nominal")
    return FrequencyEnsemble(grid, samples, nominal)
