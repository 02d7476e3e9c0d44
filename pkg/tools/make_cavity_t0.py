"""Generate the stored coarse triangulation of the cavity preset.

The unit square minus the thin C-shaped scatterer is triangulated once by
the conforming-Delaunay helper and the result is written to the package
data directory.  Rerun after changing the scatterer outline.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from helmrom.geometry import CAVITY_SCATTERER, conforming_triangulation  # noqa: E402


def main():
    outer = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    hole = np.array(CAVITY_SCATTERER)
    verts, tris = conforming_triangulation(outer, [hole],
                                           max_edge=0.13, seed_spacing=0.125)

    # quality report
    p = verts[tris]
    a = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    s = 0.5 * (a + b + c)
    area = np.sqrt(np.maximum(s * (s - a) * (s - b) * (s - c), 0.0))
    angles = []
    for (u, v, w) in ((a, b, c), (b, c, a), (c, a, b)):
        angles.append(np.arccos(np.clip((v**2 + w**2 - u**2) / (2 * v * w), -1, 1)))
    print(f"{len(tris)} triangles, {len(verts)} vertices")
    print(f"area sum {area.sum():.12f} (target {1.0 - _poly_area(hole):.12f})")
    print(f"min angle {np.degrees(np.min(angles)):.2f} deg")

    out = os.path.join(os.path.dirname(__file__), "..", "src", "helmrom",
                       "data", "cavity_t0.json")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as fh:
        json.dump({"vertices": verts.tolist(), "triangles": tris.tolist()}, fh)
    print(f"wrote {out}")


def _poly_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


if __name__ == "__main__":
    main()
