"""Density-aware point-cloud selection engine."""

import json

from ._xrsel import (
    RNG_ALGORITHM,
    DensityField,
    XrselError,
    estimate_density,
    gen_clusters,
    gen_filaments,
    gen_shell,
    load_field,
)
from . import _xrsel

__all__ = [
    "RNG_ALGORITHM",
    "DensityField",
    "XrselError",
    "estimate_density",
    "gen_clusters",
    "gen_filaments",
    "gen_shell",
    "load_field",
    "surface_camera",
    "scripted_trace",
    "select",
]


def surface_camera(scene, field):
    """Projection setup for `scene` (dict) over the field's grid box."""
    return json.loads(_xrsel._camera(json.dumps(scene), field))


def scripted_trace(kind, points, labels, target, scene, seed):
    """Machine-drawn trace (dict) around the structure labelled `target`."""
    return json.loads(_xrsel._scripted_trace(kind, points, list(labels), target, json.dumps(scene), seed))


def select(field, points, trace, scene, technique="brush-lasso", radius=0.0):
    """Run one technique; returns (selection dict, OBJ text)."""
    doc, obj = _xrsel._select(field, points, json.dumps(trace), json.dumps(scene), technique, radius)
    return json.loads(doc), obj
