"""Experiment configuration: JSON schema, validation and object builders.

A configuration is one JSON document::

    {
      "name": "sharpening",
      "seed": 0,
      "condensate": {"n_a": 500, "n_b": 500, "k_a": [0, 0, 0], "k_b": [1, 0, 0],
                     "spinful": false,
                     "n_c": null, "k_c": null,
                     "layout": {"cell": 1.0, "regions": {"D": [4, 1, 1], "D'": [2, 1, [0, 1]]}}},
      "prior": {"kind": "uniform"}
             | {"kind": "coherent", "modulus": 3.0, "phase": 0.5}
             | {"kind": "coefficients", "path": "coeffs.csv"},
      "events": {"P": 100, "kind": "position" | "spin",
                 "policy": {"kind": "perpendicular", "theta0": 0, "delta": 0, "fallback": 0},
                 "candidates": 1024, "region": "D", "targets": ["D'", "D''"]},
      "grid": {"M": 4096},
      "allow_large_P": false,
      "oracle": {"N_values": [100, 1000, 10000], "P": 10},
      "sweep": {"P": [5, 50], "modulus": [2, 5], "seeds": 100}
    }

Angles are in radians.  Complex amplitudes are numbers or ``[re, im]``
pairs.  Layout amplitudes are rescaled so each mode is normalized.  Only
``condensate`` is required; everything else has defaults.  Spinful
condensates default to a shared orbital (``k_b = k_a = 0``).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import DEFAULT_CANDIDATES, DEFAULT_CANDIDATES_3, DEFAULT_M_2D, default_grid
from .errors import ConfigValidationError, FockPhaseError
from .model import CondensateSpec, PhaseDistribution, RegionLayout
from .priors import (
    CoherentSpec,
    coherent_prior,
    engine_prior,
    g_from_coefficients,
    load_coefficients_csv,
)
from .spin import AnglePolicy

POLICY_KINDS = ("fixed", "alternating", "perpendicular")
PRIOR_KINDS = ("uniform", "coherent", "coefficients")
EVENT_KINDS = ("position", "spin")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    spec: CondensateSpec
    layout: Optional[RegionLayout]
    prior: dict
    P: int
    kind: str
    policy: AnglePolicy
    candidates: int
    region: Optional[str]
    targets: tuple
    M: int
    allow_large_P: bool
    oracle: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict)

    def build_prior(self) -> PhaseDistribution:
        """Prior in the engine's phase variable."""
        return make_prior(self.prior, self.M, self.spec.modes - 1, self.base_dir)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Re-validate a copy of the raw document with top-level or dotted-path edits."""
        raw = copy.deepcopy(self.raw)
        for path, value in changes.items():
            node = raw
            keys = path.split(".")
            for k in keys[:-1]:
                node = node.setdefault(k, {})
            node[keys[-1]] = value
        return validate(raw, self.base_dir)


def make_prior(prior: dict, M: int, dim: int, base_dir: Path = Path(".")) -> PhaseDistribution:
    kind = prior.get("kind", "uniform")
    if kind == "uniform":
        return PhaseDistribution.uniform(M, dim)
    if kind == "coherent":
        spec = CoherentSpec(float(prior["modulus"]), float(prior.get("phase", 0.0)))
        return engine_prior(coherent_prior(spec, M))
    path = Path(prior["path"])
    if not path.is_absolute():
        path = base_dir / path
    return engine_prior(g_from_coefficients(load_coefficients_csv(path), M))


def _complex(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex values are numbers or [re, im] pairs")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _int(node, key, errors, path, default=None, minimum=None):
    val = node.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, int):
        errors.append((f"{path}.{key}", "must be an integer"))
        return None
    if minimum is not None and val < minimum:
        errors.append((f"{path}.{key}", f"must be >= {minimum}"))
        return None
    return val


def _float(node, key, errors, path, default=0.0):
    val = node.get(key, default)
    try:
        val = float(val)
    except (TypeError, ValueError):
        errors.append((f"{path}.{key}", "must be a number"))
        return default
    if not math.isfinite(val):
        errors.append((f"{path}.{key}", "must be finite"))
        return default
    return val


def _layout(node, errors):
    try:
        regions = {name: (int(w[0]), _complex(w[1]), _complex(w[2]))
                   for name, w in node.get("regions", {}).items()}
        if not regions:
            errors.append(("condensate.layout.regions", "at least one region required"))
            return None
        return RegionLayout.normalized(regions, float(node.get("cell", 1.0)))
    except (TypeError, ValueError, IndexError, ZeroDivisionError) as exc:
        errors.append(("condensate.layout", str(exc) or "malformed layout"))
        return None


def _condensate(node, errors):
    if not isinstance(node, dict):
        errors.append(("condensate", "required object"))
        return None, None
    n_a = _int(node, "n_a", errors, "condensate", minimum=0)
    n_b = _int(node, "n_b", errors, "condensate", minimum=0)
    n_c = _int(node, "n_c", errors, "condensate", minimum=0)
    if n_a is None or n_b is None:
        if "n_a" not in node or "n_b" not in node:
            errors.append(("condensate", "n_a and n_b are required"))
        return None, None
    if n_a + n_b + (n_c or 0) == 0:
        errors.append(("condensate", "empty condensate"))
        return None, None
    layout = _layout(node["layout"], errors) if node.get("layout") else None
    spinful = bool(node.get("spinful", False))
    try:
        spec = CondensateSpec(
            n_a, n_b, n_c=n_c,
            k_a=node.get("k_a", (0.0, 0.0, 0.0)),
            k_b=node.get("k_b", (0.0, 0.0, 0.0) if spinful else (1.0, 0.0, 0.0)),
            k_c=node.get("k_c", (0.0, 1.0, 0.0) if n_c is not None else None),
            pair=layout.mode_pair() if layout else None, spinful=spinful,
        )
    except (FockPhaseError, TypeError, ValueError) as exc:
        errors.append(("condensate", str(exc)))
        return None, layout
    return spec, layout


def validate(raw: dict, base_dir=".") -> ExperimentConfig:
    """Check every field and build an :class:`ExperimentConfig`.

    All problems are collected and raised together as a
    :class:`ConfigValidationError` listing ``(field path, message)`` pairs.
    Runs with ``P > N/10`` are rejected unless ``allow_large_P`` is set,
    since the phase engine is a large-N approximation.
    """
    errors = []
    base_dir = Path(base_dir)
    if not isinstance(raw, dict):
        raise ConfigValidationError([("", "configuration must be a JSON object")])
    spec, layout = _condensate(raw.get("condensate"), errors)

    prior = raw.get("prior", {"kind": "uniform"})
    if not isinstance(prior, dict) or prior.get("kind", "uniform") not in PRIOR_KINDS:
        errors.append(("prior.kind", f"must be one of {', '.join(PRIOR_KINDS)}"))
        prior = {"kind": "uniform"}
    elif prior.get("kind") == "coherent":
        mod = _float(prior, "modulus", errors, "prior", default=-1.0)
        if mod < 0:
            errors.append(("prior.modulus", "must be a nonnegative number"))
        _float(prior, "phase", errors, "prior")
    elif prior.get("kind") == "coefficients":
        p = prior.get("path")
        if not isinstance(p, str):
            errors.append(("prior.path", "coefficients prior needs a CSV path"))
        elif not (Path(p) if Path(p).is_absolute() else base_dir / p).is_file():
            errors.append(("prior.path", f"file not found: {p}"))

    ev = raw.get("events", {})
    if not isinstance(ev, dict):
        errors.append(("events", "must be an object"))
        ev = {}
    P = _int(ev, "P", errors, "events", default=0, minimum=0) or 0
    kind = ev.get("kind", "position")
    if kind not in EVENT_KINDS:
        errors.append(("events.kind", f"must be one of {', '.join(EVENT_KINDS)}"))
        kind = "position"
    pol = ev.get("policy", {})
    if not isinstance(pol, dict) or pol.get("kind", "perpendicular") not in POLICY_KINDS:
        errors.append(("events.policy.kind", f"must be one of {', '.join(POLICY_KINDS)}"))
        pol = {}
    policy = AnglePolicy(pol.get("kind", "perpendicular"),
                         _float(pol, "theta0", errors, "events.policy"),
                         _float(pol, "delta", errors, "events.policy"),
                         _float(pol, "fallback", errors, "events.policy"))
    three = spec is not None and spec.modes == 3
    cand = _int(ev, "candidates", errors, "events",
                default=DEFAULT_CANDIDATES_3 if three else DEFAULT_CANDIDATES, minimum=1)
    region = ev.get("region")
    targets = tuple(ev.get("targets", ()))
    if layout is not None:
        names = set(layout.regions)
        region = region or next(iter(layout.regions))
        for i, name in enumerate((region,) + targets):
            if name not in names:
                errors.append((f"events.{'region' if i == 0 else 'targets'}",
                               f"unknown region {name!r}"))
    if spec is not None:
        if kind == "spin" and not spec.spinful:
            errors.append(("events.kind", "spin events need condensate.spinful = true"))
        if three and kind != "position":
            errors.append(("events.kind", "three-mode condensates take position events"))
        if three and prior.get("kind", "uniform") != "uniform":
            errors.append(("prior.kind", "three-mode runs support a uniform prior only"))

    grid = raw.get("grid", {})
    M = _int(grid if isinstance(grid, dict) else {}, "M", errors, "grid", minimum=16)
    if M is None:
        M = DEFAULT_M_2D if three else default_grid(P)
    if not three and M < P + 1:
        errors.append(("grid.M", f"grid too coarse for P={P}: need M >= P+1"))

    allow = bool(raw.get("allow_large_P", False))
    if spec is not None and P > spec.N / 10 and not allow:
        errors.append(("events.P", f"approximation domain violated: P={P} > N/10={spec.N / 10:g}"))

    seed = _int(raw, "seed", errors, "", default=0, minimum=0)
    oracle = raw.get("oracle", {})
    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        errors.append(("sweep", "must be an object"))
        sweep = {}
    for key in ("P", "modulus"):
        vals = sweep.get(key)
        if vals is not None and (not isinstance(vals, list) or not vals):
            errors.append((f"sweep.{key}", "empty range"))
    _int(sweep, "seeds", errors, "sweep", minimum=1)
    if errors:
        raise ConfigValidationError([(p.lstrip("."), m) for p, m in errors])
    return ExperimentConfig(
        name=str(raw.get("name", "experiment")), seed=seed or 0, spec=spec, layout=layout,
        prior=dict(prior), P=P, kind=kind, policy=policy, candidates=cand, region=region,
        targets=targets, M=M, allow_large_P=allow, oracle=dict(oracle), sweep=dict(sweep),
        base_dir=base_dir, raw=copy.deepcopy(raw),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([("", f"not valid JSON: {exc}")]) from None
    return validate(raw, path.parent)


__all__ = ["ExperimentConfig", "validate", "load_config", "make_prior"]
