"""Built-in benchmark problems.

Each preset bundles a geometry, boundary conditions, a volume source, the
frequency convention, and the quantity of interest used by the experiment
drivers.

``triangle``
    Interior problem on a right triangle driven by a unit volume load;
    Dirichlet bottom, sound-hard elsewhere.  Linear output: integral of
    the solution over the vertical leg.  This problem has a closed-form
    eigenfunction expansion (see :mod:`helmrom.analytic`).

``plate``
    Interior problem on a notched rectangle, driven through the bottom
    edge by an oscillating traction, clamped at the top.  Quadratic
    output: squared L2 norm of the trace on the driven edge.

``cavity``
    Sound-hard scattering of a horizontal plane wave by a thin C-shaped
    obstacle, first-order absorbing (impedance) conditions on the
    surrounding square.  Quadratic output: squared L2 norm of the total
    field on the walls of the trapping region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import BoundaryCondition, WaveProblem
from .geometry import Curve, cavity_geometry, plate_geometry, triangle_geometry

__all__ = ["Benchmark", "triangle_benchmark", "plate_benchmark",
           "cavity_benchmark", "get_benchmark", "BENCHMARKS"]


@dataclass(frozen=True)
class Benchmark:
    """A preset problem plus its output functional.

    ``output_kind`` is ``linear`` (integral of u over ``output_curve``) or
    ``quadratic`` (integral of ``|u|^2``).  ``trace_curve`` is the curve
    carrying the snapshot traces used by trace-based surrogates (always
    equal to ``output_curve`` for the built-in presets).
    """

    name: str
    problem: WaveProblem
    output_curve: Curve
    output_kind: str
    z_range: tuple[float, float]


def triangle_benchmark() -> Benchmark:
    geo = triangle_geometry()
    problem = WaveProblem(
        geometry=geo,
        conditions={
            "bottom": BoundaryCondition("dirichlet"),
            "right": BoundaryCondition("neumann"),
            "hypotenuse": BoundaryCondition("neumann"),
        },
        source=lambda z, pts: np.ones(len(pts), dtype=complex),
        convention="ksq",
    )
    return Benchmark("triangle", problem, Curve(("right",)), "linear", (1.0, 100.0))


def plate_benchmark() -> Benchmark:
    geo = plate_geometry()

    def traction(z, pts, normals):
        k = np.sqrt(complex(z))
        return -0.15j * k * np.exp(1.5j * np.sqrt(3.0) * k * pts[:, 0])

    problem = WaveProblem(
        geometry=geo,
        conditions={
            "bottom": BoundaryCondition("neumann", traction),
            "top": BoundaryCondition("dirichlet"),
            "right": BoundaryCondition("neumann"),
            "left_upper": BoundaryCondition("neumann"),
            "left_lower": BoundaryCondition("neumann"),
            "notch": BoundaryCondition("neumann"),
        },
        source=None,
        convention="ksq",
    )
    return Benchmark("plate", problem, Curve(("bottom",)), "quadratic", (10.0, 200.0))


def cavity_benchmark() -> Benchmark:
    geo = cavity_geometry()

    def incident_flux(z, pts, normals):
        # total field u satisfies du/dn = -d(u_inc)/dn on the scatterer,
        # with u_inc(x) = exp(i z x1) and n the outward normal of the
        # computational domain (pointing into the obstacle)
        return -1j * z * normals[:, 0] * np.exp(1j * z * pts[:, 0])

    problem = WaveProblem(
        geometry=geo,
        conditions={
            "outer": BoundaryCondition("robin"),
            "trap": BoundaryCondition("neumann", incident_flux),
            "hull": BoundaryCondition("neumann", incident_flux),
        },
        source=None,
        convention="k",
    )
    return Benchmark("cavity", problem, Curve(("trap",)), "quadratic", (10.0, 30.0))


BENCHMARKS = {
    "triangle": triangle_benchmark,
    "plate": plate_benchmark,
    "cavity": cavity_benchmark,
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}") from None
