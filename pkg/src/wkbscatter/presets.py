"""Named potentials used by the experiment harness and the test-suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .field import CoefficientField, PotentialSegment

X_C = 0.5
X_D = 0.5 + 2.0**-5


def example1_field(barrier=1.5):
    """Piecewise-linear barrier, E = 1.5, V(0) = 0, V(1) = 0.2.

    Only V(0), V(1), x_c and x_d are fixed by the experiment description;
    the slopes are reconstructed. The whole structure follows the bias ramp
    V = 0.2 x, and the barrier adds a step of ``barrier`` on (x_c, x_d). With
    the default step, V - E runs from 0.1 to 0.10625 inside the barrier, and
    at eps = 0.01 the wave is partly transmitted but mainly reflected.
    """
    E = 1.5
    return CoefficientField(
        E,
        [
            PotentialSegment(0.0, X_C, (0.0, 0.2)),
            PotentialSegment(X_C, X_D, (barrier, 0.2)),
            PotentialSegment(X_D, 1.0, (0.0, 0.2)),
        ],
    )


def example2_constants(E=1.5, V1=0.2):
    c2 = -(E + math.sqrt(E * E - V1 * E)) / V1
    c1 = E / (c2 * c2)
    return c1, c2


def example2_field(E=1.5, V1=0.2):
    """a(x) = c1 (x + c2)^2 outside and -c1 (x + c2)^2 inside (x_c, x_d).

    The constants make V(0) = 0 and V(1) = V1.
    """
    c1, c2 = example2_constants(E, V1)
    quad = (c1 * c2 * c2, 2.0 * c1 * c2, c1)
    neg = tuple(-c for c in quad)
    return CoefficientField.from_a(E, [0.0, X_C, X_D, 1.0], [quad, neg, quad])


def fig1_field():
    """a(x) = (x + 1/2)^2 on [0, 1] (E = 1)."""
    return CoefficientField(1.0, [PotentialSegment(0.0, 1.0, (0.75, -1.0, -1.0))])


def step_two_zone_field(E=1.5, V_barrier=2.0, V_right=0.2, x_d=0.5):
    """Piecewise-constant evanescent/oscillatory field (beta = r = 0)."""
    return CoefficientField(
        E,
        [
            PotentialSegment(0.0, x_d, (V_barrier,)),
            PotentialSegment(x_d, 1.0, (V_right,)),
        ],
    )


def step_three_zone_field(E=1.5, V_left=0.0, V_barrier=2.5, V_right=0.2, x_c=X_C, x_d=X_D):
    """Piecewise-constant tunnelling barrier."""
    return CoefficientField(
        E,
        [
            PotentialSegment(0.0, x_c, (V_left,)),
            PotentialSegment(x_c, x_d, (V_barrier,)),
            PotentialSegment(x_d, 1.0, (V_right,)),
        ],
    )


def linear_two_zone_field():
    """Two-zone field with linear pieces: decreasing barrier then a ramp."""
    return CoefficientField(
        1.5,
        [
            PotentialSegment(0.0, 0.5, (2.3, -0.4)),
            PotentialSegment(0.5, 1.0, (0.0, 0.2)),
        ],
    )


@dataclass(frozen=True)
class Preset:
    name: str
    field_factory: object
    eps: tuple
    h_exponents: tuple
    description: str


PRESETS = {
    "fig1": Preset("fig1", fig1_field, (0.01,), (3,), "one-zone march, a=(x+1/2)^2"),
    "example1": Preset(
        "example1",
        example1_field,
        (1e-1, 1e-2, 1e-3),
        tuple(range(4, 13)),
        "piecewise-linear barrier (reconstructed slopes), three zones",
    ),
    "example2": Preset(
        "example2",
        example2_field,
        (1e-1, 1e-2, 1e-3),
        tuple(range(4, 13)),
        "piecewise-quadratic barrier a=+-c1 (x+c2)^2, three zones",
    ),
}
