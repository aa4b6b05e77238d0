"""Generators for the model documents shipped in ``models/``."""

from __future__ import annotations

import numpy as np

MASONRY = {"young": 3.0e9, "poisson": 0.2, "density": 1800.0, "behavior": "masonry"}
STEEL = {"young": 2.1e11, "poisson": 0.3, "density": 7850.0, "behavior": "elastic"}


def beam_document(
    n_elements: int = 60,
    length: float = 6.0,
    depth: float = 0.4,
    width: float = 1.0,
    axial_load: float = 6.0e5,
    lateral_first: float = 9000.0,
    lateral_last: float = 15750.0,
    lateral_increments: int = 7,
    fibers: int = 20,
    shear: bool = True,
    rotary_inertia: bool = False,
    self_weight: bool = False,
    material: dict | None = None,
) -> dict:
    """Simply supported beam along x: pin at x=0, roller at x=length.

    Stage 1 applies the axial compression at the roller end (plus
    self-weight when ``self_weight`` is set); stage 2 brings the uniform lateral load (N/m, along -y) to
    ``lateral_first``; stage 3 ramps it to ``lateral_last`` so that stages 2
    and 3 together give ``lateral_increments`` equally spaced load levels.
    """
    nodes = [[k, length * k / n_elements, 0.0] for k in range(n_elements + 1)]
    elements = [
        {"id": k + 1, "type": "beam", "nodes": [k, k + 1], "section": "rect", "material": "masonry"}
        for k in range(n_elements)
    ]
    steps = [
        {
            "name": "precompression",
            "increments": 1,
            "self_weight": self_weight,
            "nodal": [{"node": n_elements, "fx": -axial_load}],
        },
        {
            "name": f"lateral_{lateral_first:g}",
            "increments": 1,
            "distributed": [{"elements": "all", "qy": -lateral_first}],
        },
    ]
    if lateral_increments > 1:
        steps.append(
            {
                "name": f"lateral_{lateral_last:g}",
                "increments": lateral_increments - 1,
                "distributed": [{"elements": "all", "qy": -(lateral_last - lateral_first)}],
            }
        )
    one_shot = [
        dict(steps[0]),
        {
            "name": f"lateral_{lateral_last:g}",
            "increments": 1,
            "distributed": [{"elements": "all", "qy": -lateral_last}],
        },
    ]
    return {
        "name": f"beam{n_elements}",
        "description": "simply supported masonry beam under axial precompression and lateral load",
        "materials": {"masonry": dict(material or MASONRY)},
        "sections": {
            "rect": {
                "width": width,
                "height": depth,
                "fibers": fibers,
                "gauss_points": 3,
                "shear": shear,
                "rotary_inertia": rotary_inertia,
            }
        },
        "nodes": nodes,
        "elements": elements,
        "constraints": {
            "fixed": [{"node": 0, "dofs": ["ux", "uy"]}, {"node": n_elements, "dofs": ["uy"]}],
        },
        "load_cases": {
            "staged": {"steps": steps},
            "one_shot": {"steps": one_shot},
            # without the axial thrust a no-tension beam cannot carry its own weight
            "self_weight": {"steps": [dict(steps[0], name="precompressed_self_weight", self_weight=True)]},
        },
    }


def toy2dof_document() -> dict:
    """Two masses on grounded springs: K = diag(4, 9), M = I."""
    return {
        "name": "toy2dof",
        "description": "two uncoupled unit masses on springs of stiffness 4 and 9",
        "materials": {"none": {"young": 1.0, "poisson": 0.0, "density": 1.0, "behavior": "elastic"}},
        "nodes": [[1, 0.0, 0.0], [2, 1.0, 0.0]],
        "elements": [
            {"id": 1, "type": "point_mass", "nodes": [1], "mass": 1.0},
            {"id": 2, "type": "point_mass", "nodes": [2], "mass": 1.0},
            {"id": 3, "type": "spring", "nodes": [1], "dof": "ux", "stiffness": 4.0},
            {"id": 4, "type": "spring", "nodes": [2], "dof": "ux", "stiffness": 9.0},
        ],
        "constraints": {"fixed": [{"node": 1, "dofs": ["uy"]}, {"node": 2, "dofs": ["uy"]}]},
        "load_cases": {"zero": {"steps": [{"name": "zero"}]}},
    }


# --------------------------------------------------------------------------
# quad meshing helpers


class _Mesh:
    def __init__(self):
        self.nodes = []
        self._index = {}
        self.elements = []

    def node(self, x, y):
        key = (round(x, 9), round(y, 9))
        if key not in self._index:
            nid = len(self.nodes) + 1
            self._index[key] = nid
            self.nodes.append([nid, float(x), float(y)])
        return self._index[key]

    def quad(self, xy, thickness, material):
        """Add a quad from four corner coordinates, fixing the winding."""
        xy = np.asarray(xy, dtype=float)
        area2 = np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
        if area2 < 0:
            xy = xy[::-1]
        ids = [self.node(x, y) for x, y in xy]
        self.elements.append(
            {
                "id": len(self.elements) + 1,
                "type": "quad",
                "nodes": ids,
                "thickness": thickness,
                "material": material,
            }
        )
        return self.elements[-1]["id"]

    def block(self, x0, x1, y0, y1, nx, ny, thickness, material):
        xs = np.linspace(x0, x1, nx + 1)
        ys = np.linspace(y0, y1, ny + 1)
        for j in range(ny):
            for i in range(nx):
                self.quad(
                    [[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]],
                    thickness,
                    material,
                )
        return xs, ys

    def find(self, x, y):
        return self._index[(round(x, 9), round(y, 9))]


def arch_document(
    span: float = 6.0,
    rise: float = 1.5,
    arch_thickness: float = 0.25,
    pier_width: float = 0.8,
    pier_height: float = 4.0,
    offset: float = 0.24,
    depth: float = 1.0,
    n_arch: int = 48,
    n_ring: int = 2,
    tie_area: float = 9.0e-4,
    magnitudes=(3.5e3, 4.0e3, 4.5e3, 5.0e3),
    n_positions: int = 7,
    first_position: float = 0.5,
) -> dict:
    """Segmental arch on two piers with a steel tie, plane-stress quads.

    The arch springs from the pier tops; its axis is offset from the pier
    axes by ``offset`` and the springing nodes follow the pier-top edge
    through linear master-slave ties.  Load positions are arch extrados
    nodes evenly spaced from ``first_position`` (measured from the left
    springing) to the crown.  The default magnitudes stay below the
    collapse load of the weakest position.
    """
    mesh = _Mesh()
    half = 0.5 * span
    radius = (half**2 + rise**2) / (2.0 * rise)
    phi0 = np.arcsin(half / radius)
    yc = pier_height + rise - radius  # center of the intrados circle family (mean radius)
    r_in = radius - 0.5 * arch_thickness
    r_out = radius + 0.5 * arch_thickness

    # piers: axes at x = -half - offset and x = half + offset
    nxp, nyp = 4, 16
    for sign in (-1.0, 1.0):
        xc = sign * (half + offset)
        mesh.block(xc - 0.5 * pier_width, xc + 0.5 * pier_width, 0.0, pier_height, nxp, nyp, depth, "masonry")

    # arch ring
    angles = np.linspace(-phi0, phi0, n_arch + 1)  # from left springing
    radii = np.linspace(r_in, r_out, n_ring + 1)
    pts = lambda a, r: (r * np.sin(a), yc + r * np.cos(a))
    for i in range(n_arch):
        for j in range(n_ring):
            corners = [
                pts(angles[i], radii[j]),
                pts(angles[i + 1], radii[j]),
                pts(angles[i + 1], radii[j + 1]),
                pts(angles[i], radii[j + 1]),
            ]
            mesh.quad(corners, depth, "masonry")

    # springing nodes tied to the pier top edge by linear interpolation
    ties = []
    top_x = {}
    for sign in (-1.0, 1.0):
        xc = sign * (half + offset)
        xs = np.linspace(xc - 0.5 * pier_width, xc + 0.5 * pier_width, nxp + 1)
        top_x[sign] = xs
    for sign, a in ((-1.0, angles[0]), (1.0, angles[-1])):
        xs = top_x[sign]
        for r in radii:
            x, y = pts(a, r)
            slave = mesh.find(x, y)
            k = int(np.clip(np.searchsorted(xs, x) - 1, 0, len(xs) - 2))
            t = (x - xs[k]) / (xs[k + 1] - xs[k])
            if not (-1e-9 <= t <= 1 + 1e-9):
                raise ValueError("springing node outside the pier top")
            a_id = mesh.find(xs[k], pier_height)
            b_id = mesh.find(xs[k + 1], pier_height)
            # rigid link: slave follows the pier top edge, lifted by (y - top)
            dy = y - pier_height
            rot = 1.0 / (xs[k + 1] - xs[k])  # edge rotation = (uy_b - uy_a)/dx
            for dof in ("ux", "uy"):
                masters = [[a_id, dof, 1.0 - t], [b_id, dof, t]]
                if dof == "ux" and abs(dy) > 1e-12:
                    masters += [[a_id, "uy", dy * rot], [b_id, "uy", -dy * rot]]
                ties.append({"slave": [slave, dof], "masters": masters})

    # steel tie rod between the arch springings, where the thrust arrives
    mid = radii[len(radii) // 2]
    left_s = mesh.find(*pts(angles[0], mid))
    right_s = mesh.find(*pts(angles[-1], mid))
    mesh.elements.append(
        {"id": len(mesh.elements) + 1, "type": "truss", "nodes": [left_s, right_s], "area": tie_area, "material": "steel"}
    )

    fixed = []
    for sign in (-1.0, 1.0):
        for x in top_x[sign]:
            fixed.append({"node": mesh.find(x, 0.0), "dofs": ["ux", "uy"]})

    # load positions on the left half of the extrados, measured from the
    # springing; a load right at the springing goes straight into the pier
    ext = np.array([pts(a, r_out) for a in angles])
    positions = []
    for x_target in np.linspace(first_position, half, n_positions) - half:
        i = int(np.argmin(np.abs(ext[:, 0] - x_target)))
        positions.append(mesh.find(*ext[i]))

    return {
        "name": "arch",
        "description": "tied segmental arch on piers, plane-stress surrogate",
        "materials": {"masonry": dict(MASONRY), "steel": dict(STEEL)},
        "nodes": mesh.nodes,
        "elements": mesh.elements,
        "constraints": {"fixed": fixed, "ties": ties},
        "load_cases": {
            "self_weight": {"steps": [{"name": "self_weight", "self_weight": True}]},
            "quarter": {
                "steps": [
                    {"name": "self_weight", "self_weight": True},
                    {"name": "P", "increments": 4, "nodal": [{"node": positions[3], "fy": -magnitudes[-1]}]},
                ]
            },
        },
        "sweep": {
            "base_load_case": "self_weight",
            "positions": positions,
            "labels": [f"X{k + 1}" for k in range(n_positions)],
            "magnitudes": list(magnitudes),
            "direction": [0.0, -1.0],
            "first_increments": 1,
        },
    }


def tower_document(
    height: float = 24.0,
    depth: float = 3.0,
    width: float = 3.0,
    lean_deg: float = 4.0,
    n_elements: int = 24,
    bell_masses=(4000.0, 2500.0),
    fibers: int = 20,
    material: dict | None = None,
) -> dict:
    """Leaning masonry cantilever tower with bells at the top.

    The lean puts the self-weight resultant outside the middle third of
    the base section, so the base cracks under gravity alone.  The bells
    are point masses of fixed weight, so mass and stiffness do not scale
    together when the masonry density and modulus change.
    """
    t = np.radians(lean_deg)
    s = np.linspace(0.0, height, n_elements + 1)
    nodes = [[k, float(z * np.sin(t)), float(z * np.cos(t))] for k, z in enumerate(s)]
    elements = [
        {"id": k + 1, "type": "beam", "nodes": [k, k + 1], "section": "shaft", "material": "masonry"}
        for k in range(n_elements)
    ]
    for m in bell_masses:
        elements.append({"id": len(elements) + 1, "type": "point_mass", "nodes": [n_elements], "mass": m})
    return {
        "name": "tower",
        "description": "synthetic leaning cantilever tower with bells",
        "materials": {"masonry": dict(material or {"young": 5.0e9, "poisson": 0.2, "density": 2000.0, "behavior": "masonry"})},
        "sections": {"shaft": {"width": width, "height": depth, "fibers": fibers, "gauss_points": 3, "shear": True}},
        "nodes": nodes,
        "elements": elements,
        "constraints": {"fixed": [{"node": 0, "dofs": ["ux", "uy", "rz"]}]},
        "load_cases": {"self_weight": {"steps": [{"name": "self_weight", "increments": 2, "self_weight": True}]}},
    }
