"""Field definitions as flat key-value mappings (config file sections).

Schema (all values are strings in the config file):

====================  =======================================================
key                   meaning
====================  =======================================================
id                    builtin identifier or ``user-defined``
d                     spatial dimension
d1                    noise dimension (builtins fix or default it)
mollify               optional level n; 0 or absent means the raw field
cutoff_radius         support radius of the cutoff bump (default 0.5)
drift_direction       comma-separated d-vector (log-singular-drift only)
delta                 ellipticity constant (user-defined only)
sigma_i_k             expression for row i, column k (user-defined only)
drift_i               expression for drift component i (user-defined only)
====================  =======================================================
"""

from __future__ import annotations

import numpy as np

from .core import BUILTIN_IDS, FieldError, builtin_field, mollify
from .expressions import field_from_expressions

__all__ = ["field_to_config", "field_from_config"]


def field_to_config(field):
    """Serialize a field definition to a flat dict of strings."""
    out = {"id": field.field_id, "d": str(field.d), "d1": str(field.d1)}
    if field.smoothness == "mollified":
        out["mollify"] = str(field.mollification_level)
    params = field.params
    if "cutoff_radius" in params:
        out["cutoff_radius"] = repr(float(params["cutoff_radius"]))
    if "drift_direction" in params:
        vec = np.asarray(params["drift_direction"], dtype=float)
        out["drift_direction"] = ",".join(repr(v) for v in vec)
    if field.field_id == "user-defined":
        out["delta"] = repr(field.delta)
        for i, row in enumerate(params["sigma_exprs"]):
            for k, expr in enumerate(row):
                out[f"sigma_{i}_{k}"] = expr
        for i, expr in enumerate(params["drift_exprs"]):
            out[f"drift_{i}"] = expr
    return out


def field_from_config(section):
    """Rebuild a field from a mapping produced by :func:`field_to_config`."""
    section = dict(section)
    field_id = section.get("id")
    if field_id not in BUILTIN_IDS:
        raise FieldError(f"unknown field id {field_id!r}")
    d = int(section["d"]) if "d" in section else None
    level = int(section.get("mollify", "0"))

    if field_id == "user-defined":
        if d is None or "d1" not in section:
            raise FieldError("user-defined fields need explicit d and d1")
        d1 = int(section["d1"])
        sigma_exprs = [
            [section[f"sigma_{i}_{k}"] for k in range(d1)] for i in range(d)
        ]
        drift_exprs = [section.get(f"drift_{i}", "0") for i in range(d)]
        base = field_from_expressions(
            d, d1, sigma_exprs, drift_exprs, delta=float(section.get("delta", "0.9"))
        )
    else:
        params = {}
        if "cutoff_radius" in section:
            params["cutoff_radius"] = float(section["cutoff_radius"])
        if "drift_direction" in section:
            params["drift_direction"] = [float(v) for v in section["drift_direction"].split(",")]
        if "d1" in section:
            params["d1"] = int(section["d1"])
        base = builtin_field(field_id, d=d, params=params)

    return mollify(base, level) if level > 0 else base
