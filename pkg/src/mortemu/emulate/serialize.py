"""Versioned JSON format for fitted emulators.

Known trends of simple-kriging fits cannot be stored as code, so they are
saved by name and resolved through a ``trends`` mapping on load. Floats
go through ``repr`` round-tripping, so reloaded fits predict identically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .kriging import KernelSpec, KrigingFit, TrainingSet, fit_sk, fit_uk
from .splines import SplineFit

FORMAT = "mortemu-emulator"
VERSION = 1


def _arr(a):
    return None if a is None else np.asarray(a).tolist()


def to_dict(fit) -> dict:
    if isinstance(fit, KrigingFit):
        if fit.trend == "custom":
            raise ValueError("custom basis functions cannot be serialized")
        return {
            "format": FORMAT,
            "version": VERSION,
            "type": "kriging",
            "trend": fit.trend,
            "trend_name": fit.trend_name,
            "kernel": {"theta": list(fit.kernel.theta), "var": fit.kernel.var,
                       "power": fit.kernel.power, "loglik": fit.kernel.loglik},
            "sites": _arr(fit.train.sites),
            "y": _arr(fit.train.y),
            "noise": _arr(fit.train.noise),
            "beta": _arr(fit.beta),
            "weights": _arr(fit.weights),
        }
    if isinstance(fit, SplineFit):
        fields = ("centers", "alpha", "beta", "shift", "scale", "values", "second")
        out = {"format": FORMAT, "version": VERSION, "type": "spline", "kind": fit.kind,
               "lam": fit.lam, "df": fit.df, "dim": fit.dim, "gcv": fit.gcv}
        out.update({k: _arr(getattr(fit, k)) for k in fields})
        return out
    raise TypeError(f"cannot serialize {type(fit).__name__}")


def from_dict(data: dict, trends=None):
    if data.get("format") != FORMAT:
        raise ValueError("not an emulator file")
    if data.get("version") != VERSION:
        raise ValueError(f"unsupported emulator file version {data.get('version')}")
    if data["type"] == "spline":
        arrays = {k: None if data[k] is None else np.asarray(data[k], dtype=float)
                  for k in ("centers", "alpha", "beta", "shift", "scale", "values", "second")}
        return SplineFit(data["kind"], data["lam"], data["df"], data["dim"], gcv=data["gcv"],
                         **arrays)
    k = data["kernel"]
    kernel = KernelSpec(tuple(k["theta"]), k["var"], k["power"], loglik=k["loglik"])
    train = TrainingSet(np.asarray(data["sites"]), np.asarray(data["y"]),
                        np.asarray(data["noise"]))
    if data["trend"] == "known":
        name = data["trend_name"]
        if name == "zero":
            return fit_sk(train, kernel, None)
        if not trends or name not in trends:
            raise ValueError(f"trend {name!r} must be supplied to load this fit")
        return fit_sk(train, kernel, trends[name], name)
    return fit_uk(train, kernel, data["trend"])


def save(fit, path) -> None:
    Path(path).write_text(json.dumps(to_dict(fit), indent=1))


def load(path, trends=None):
    return from_dict(json.loads(Path(path).read_text()), trends)
