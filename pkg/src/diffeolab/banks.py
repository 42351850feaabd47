"""Standard experiment banks: named test fields and the 12-member diffeo bank.

Every entry is deterministic given the chart, so refinement sweeps rebuild
the same objects at each resolution.
"""

from __future__ import annotations

import numpy as np

from . import diffeo as df
from .fields import (
    BallRegion,
    Field,
    field_axpy,
    make_bump,
    make_vector_bump,
    sample_scalar,
    sample_vector,
)
from .geometry import ChartDomain, unit_torus


def _require_2d(chart: ChartDomain) -> None:
    if chart.dim != 2:
        raise ValueError("the standard banks are built for 2-D charts")


def standard_diffeo_bank(chart: ChartDomain) -> list[tuple[str, df.Diffeo]]:
    """Twelve representative compactly supported maps on a 2-D torus chart:
    contractions, point transports, rotation and stretch conjugations, a
    translation, and two compositions."""
    _require_2d(chart)
    rot = df.rotation_matrix_2d
    entries = [
        ("contract2", df.make_contraction(chart, 2, 0.5, (0.5, 0.5), 0.18)),
        ("contract3", df.make_contraction(chart, 3, 0.5, (0.35, 0.6), 0.16)),
        ("contract4", df.make_contraction(chart, 4, 0.4, (0.6, 0.4), 0.15)),
        (
            "transport_x",
            df.make_point_transport(
                chart, (0.40, 0.50), (0.60, 0.50), 0.32,
                df.transport_min_steps((0.40, 0.50), (0.60, 0.50), 0.32),
            ),
        ),
        (
            "transport_diag",
            df.make_point_transport(
                chart, (0.45, 0.42), (0.55, 0.58), 0.30,
                df.transport_min_steps((0.45, 0.42), (0.55, 0.58), 0.30),
            ),
        ),
        (
            "rot90",
            df.make_rotation_conjugation(
                chart, rot(np.pi / 2), BallRegion((0.5, 0.5), 0.30), 0.15
            ),
        ),
        (
            "rot2pi7",
            df.make_rotation_conjugation(
                chart, rot(2 * np.pi / 7), BallRegion((0.45, 0.55), 0.28), 0.14
            ),
        ),
        (
            "stretch_a",
            df.make_stretch(chart, (1.5, 1 / 1.5), BallRegion((0.5, 0.5), 0.30), 0.18),
        ),
        (
            "stretch_b",
            df.make_stretch(chart, (0.75, 1 / 0.75), BallRegion((0.55, 0.45), 0.26), 0.16),
        ),
        ("translate", df.make_translation(chart, (0.23, 0.11))),
        (
            "rot_contract",
            df.compose(
                df.make_rotation_conjugation(
                    chart, rot(np.pi / 3), BallRegion((0.5, 0.5), 0.30), 0.15
                ),
                df.make_contraction(chart, 2, 0.5, (0.5, 0.5), 0.15),
            ),
        ),
        (
            "transport_stretch",
            df.compose(
                df.make_point_transport(
                    chart, (0.46, 0.50), (0.54, 0.50), 0.28,
                    df.transport_min_steps((0.46, 0.50), (0.54, 0.50), 0.28),
                ),
                df.make_stretch(chart, (1.3, 1 / 1.3), BallRegion((0.5, 0.5), 0.28), 0.16),
            ),
        ),
    ]
    return entries


def scalar_field_bank(chart: ChartDomain) -> list[tuple[str, Field]]:
    _require_2d(chart)
    bump_pos = make_bump(chart, (0.5, 0.5), 0.30, 1.0)
    pair = field_axpy(
        1.0,
        make_bump(chart, (0.42, 0.55), 0.25, 1.0),
        -1.0,
        make_bump(chart, (0.60, 0.45), 0.22, 0.8),
    )
    sinmix = sample_scalar(
        chart,
        lambda p: 0.8 * np.sin(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1]),
    )
    return [("bump_pos", bump_pos), ("bump_pair", pair), ("sin_mix", sinmix)]


def vector_field_bank(chart: ChartDomain) -> list[tuple[str, Field]]:
    _require_2d(chart)
    vb = make_vector_bump(chart, (0.5, 0.5), 0.30, (0.8, 0.5))
    swirl = sample_vector(
        chart,
        lambda p: np.stack(
            [
                0.6 * np.sin(2 * np.pi * p[:, 1]) + 0.3 * np.cos(2 * np.pi * p[:, 0]),
                0.5 * np.cos(2 * np.pi * p[:, 0]),
            ],
            axis=-1,
        ),
    )
    two = field_axpy(
        1.0,
        make_vector_bump(chart, (0.42, 0.55), 0.24, (0.0, 0.9)),
        1.0,
        make_vector_bump(chart, (0.60, 0.45), 0.22, (-0.7, 0.3)),
    )
    return [("vbump", vb), ("vswirl", swirl), ("vpair", two)]


def _suite_diffeos(chart: ChartDomain) -> list[tuple[str, df.Diffeo]]:
    bank = dict(standard_diffeo_bank(chart))
    names = ["contract3", "transport_x", "rot90", "stretch_a"]
    return [(n, bank[n]) for n in names]


def scalar_suite_bank(level: int):
    chart = unit_torus(2, level)
    return _suite_diffeos(chart), scalar_field_bank(chart)


def vector_suite_bank(level: int):
    chart = unit_torus(2, level)
    return _suite_diffeos(chart), vector_field_bank(chart)


# -- record-driven builders (experiment configs) ------------------------------------


def build_field(chart: ChartDomain, rec: dict) -> Field:
    kind = rec["kind"]
    if kind == "bump":
        return make_bump(chart, rec["center"], rec["radius"], rec.get("amplitude", 1.0))
    if kind == "bump_pair":
        a = make_bump(chart, rec["center_a"], rec["radius_a"], rec.get("amplitude_a", 1.0))
        b = make_bump(chart, rec["center_b"], rec["radius_b"], rec.get("amplitude_b", 1.0))
        return field_axpy(1.0, a, -1.0, b)
    if kind == "sin_mix":
        amp = rec.get("amplitude", 0.8)
        waves = rec.get("waves", 1)
        return sample_scalar(
            chart,
            lambda p: amp
            * np.sin(2 * np.pi * waves * p[:, 0])
            * np.sin(2 * np.pi * waves * p[:, 1]),
        )
    if kind == "vector_bump":
        return make_vector_bump(chart, rec["center"], rec["radius"], rec["direction"])
    if kind == "vector_swirl":
        amp = rec.get("amplitude", 0.6)
        return sample_vector(
            chart,
            lambda p: np.stack(
                [
                    amp * np.sin(2 * np.pi * p[:, 1]) + 0.3 * np.cos(2 * np.pi * p[:, 0]),
                    0.5 * np.cos(2 * np.pi * p[:, 0]),
                ],
                axis=-1,
            ),
        )
    raise ValueError(f"unknown field kind {kind!r}")


def build_diffeo(chart: ChartDomain, rec: dict) -> df.Diffeo:
    return df.diffeo_from_json_dict(chart, rec)


def bank_records() -> dict:
    """JSON records reproducing the standard banks (used by default configs)."""
    diffeos = [
        {"name": "contract2", "kind": "contraction", "n": 2, "eps": 0.5,
         "center": [0.5, 0.5], "scale": 0.18},
        {"name": "contract3", "kind": "contraction", "n": 3, "eps": 0.5,
         "center": [0.35, 0.6], "scale": 0.16},
        {"name": "contract4", "kind": "contraction", "n": 4, "eps": 0.4,
         "center": [0.6, 0.4], "scale": 0.15},
        {"name": "transport_x", "kind": "point_transport", "x0": [0.40, 0.50],
         "x1": [0.60, 0.50], "rho": 0.32,
         "steps": df.transport_min_steps((0.40, 0.50), (0.60, 0.50), 0.32)},
        {"name": "transport_diag", "kind": "point_transport", "x0": [0.45, 0.42],
         "x1": [0.55, 0.58], "rho": 0.30,
         "steps": df.transport_min_steps((0.45, 0.42), (0.55, 0.58), 0.30)},
        {"name": "rot90", "kind": "rotation_conjugation",
         "w": df.rotation_matrix_2d(np.pi / 2).tolist(),
         "center": [0.5, 0.5], "radius": 0.30, "eps_blend": 0.15},
        {"name": "rot2pi7", "kind": "rotation_conjugation",
         "w": df.rotation_matrix_2d(2 * np.pi / 7).tolist(),
         "center": [0.45, 0.55], "radius": 0.28, "eps_blend": 0.14},
        {"name": "stretch_a", "kind": "stretch", "scales": [1.5, 1 / 1.5],
         "center": [0.5, 0.5], "radius": 0.30, "eps_blend": 0.18},
        {"name": "stretch_b", "kind": "stretch", "scales": [0.75, 1 / 0.75],
         "center": [0.55, 0.45], "radius": 0.26, "eps_blend": 0.16},
        {"name": "translate", "kind": "translation", "offset": [0.23, 0.11]},
        {"name": "rot_contract", "kind": "compose", "parts": [
            {"kind": "rotation_conjugation",
             "w": df.rotation_matrix_2d(np.pi / 3).tolist(),
             "center": [0.5, 0.5], "radius": 0.30, "eps_blend": 0.15},
            {"kind": "contraction", "n": 2, "eps": 0.5, "center": [0.5, 0.5],
             "scale": 0.15},
        ]},
        {"name": "transport_stretch", "kind": "compose", "parts": [
            {"kind": "point_transport", "x0": [0.46, 0.50], "x1": [0.54, 0.50],
             "rho": 0.28,
             "steps": df.transport_min_steps((0.46, 0.50), (0.54, 0.50), 0.28)},
            {"kind": "stretch", "scales": [1.3, 1 / 1.3], "center": [0.5, 0.5],
             "radius": 0.28, "eps_blend": 0.16},
        ]},
    ]
    scalar_fields = [
        {"name": "bump_pos", "kind": "bump", "center": [0.5, 0.5], "radius": 0.30,
         "amplitude": 1.0},
        {"name": "bump_pair", "kind": "bump_pair", "center_a": [0.42, 0.55],
         "radius_a": 0.25, "amplitude_a": 1.0, "center_b": [0.60, 0.45],
         "radius_b": 0.22, "amplitude_b": 0.8},
        {"name": "sin_mix", "kind": "sin_mix", "amplitude": 0.8},
    ]
    vector_fields = [
        {"name": "vbump", "kind": "vector_bump", "center": [0.5, 0.5], "radius": 0.30,
         "direction": [0.8, 0.5]},
        {"name": "vswirl", "kind": "vector_swirl"},
        {"name": "vpair2", "kind": "vector_bump", "center": [0.42, 0.55],
         "radius": 0.24, "direction": [0.0, 0.9]},
    ]
    return {"diffeos": diffeos, "scalar_fields": scalar_fields,
            "vector_fields": vector_fields}
