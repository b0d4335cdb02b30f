"""Bundled study configurations, one per headline rate regime.

Each preset is a plain config dict in the CLI schema, so a study is
reproducible with a single command (``l1tik rates --preset NAME``).

The power-decay preset keeps its delta grid comparatively high: the
truncation guard (model tail below 1% of the smallest delta) pins
delta_min near 0.1 for quadratic decay at N = 1000, so the usable noise
window sits between that floor and the scale of the exact data.
"""

from copy import deepcopy

__all__ = ["PRESETS", "preset_config"]

_DEFAULT_DELTAS = [10.0 ** e for e in (-1.0, -1.5, -2.0, -2.5, -3.0, -3.5, -4.0)]

PRESETS = {
    # Well-posed reference: identity operator, p = 1 closed form, l1 noise.
    # The reconstruction equals the data once alpha < 1, so the error is
    # exactly delta and the fitted slope is 1.
    "identity-p1-sdp": {
        "label": "identity-p1-sdp",
        "operator": {"kind": "identity"},
        "n": 50,
        "image_norm": "l1",
        "model": {
            "kind": "sparse",
            "indices": [1, 2, 3, 5, 8],
            "values": [1.5, -1.0, 0.8, -0.6, 1.2],
        },
        "p": 1,
        "rule": {"kind": "sdp", "tau": 1.5, "q": 0.5, "j_max": 60},
        "deltas": _DEFAULT_DELTAS,
        "repetitions": 5,
        "seed": 20260801,
        "solver": {"tol": 1e-10, "max_iter": 100000},
    },
    # Sparse truth under the ill-posed neighbor-sum operator: the linear
    # rate regime.
    "sparse-bidiagonal-sdp": {
        "label": "sparse-bidiagonal-sdp",
        "operator": {"kind": "bidiagonal-sum"},
        "n": 400,
        "image_norm": "l2",
        "model": {
            "kind": "sparse",
            "indices": [3, 10, 17, 30, 45],
            "values": [1.0, -0.8, 0.6, -0.4, 0.5],
        },
        "p": 2,
        "rule": {"kind": "sdp", "tau": 1.5, "q": 0.5, "j_max": 60},
        "deltas": _DEFAULT_DELTAS,
        "repetitions": 5,
        "seed": 20260802,
        "solver": {"tol": 1e-10, "max_iter": 100000},
        "profile": {"gamma": {"kind": "linear"}},
    },
    # Quadratic power decay under the neighbor-sum operator: the Holder
    # regime with predicted exponent 1/2.
    "power2-bidiagonal-sdp": {
        "label": "power2-bidiagonal-sdp",
        "operator": {"kind": "bidiagonal-sum"},
        "n": 1000,
        "image_norm": "l2",
        "model": {"kind": "power", "theta": 2.0, "scale": 1.0},
        "p": 2,
        "rule": {"kind": "sdp", "tau": 1.5, "q": 0.5, "j_max": 60},
        "deltas": [10.0 ** e for e in (-0.25, -0.375, -0.5, -0.625, -0.75, -0.875, -1.0)],
        "repetitions": 5,
        "seed": 20260803,
        "solver": {"tol": 1e-10, "max_iter": 100000},
        "profile": {"gamma": {"kind": "linear"}},
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return deepcopy(PRESETS[name])
