"""Model description: nodes, elements, materials, constraints and loads.

Models are read from a JSON document validated against
``model_schema.json``.  Node ids in the document are arbitrary integers;
after loading they are re-indexed densely in ascending id order and every
node carries ux, uy plus rz when a beam is attached to it.  Degrees of
freedom are numbered node-major in that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .constitutive import MaterialParams

DOF_NAMES = ("ux", "uy", "rz")
GRAVITY = 9.81


class ModelError(ValueError):
    """Invalid model document or inconsistent model data."""


@dataclass(frozen=True)
class RectSection:
    """Rectangular fiber section; fibers are layers through the height."""

    width: float
    height: float
    fibers: int = 20
    gauss_points: int = 3
    shear: bool = True
    shear_factor: float = 5.0 / 6.0
    rotary_inertia: bool = False

    def __post_init__(self):
        if self.fibers < 8:
            raise ModelError(f"section needs at least 8 fibers, got {self.fibers}")

    @property
    def fiber_offsets(self) -> np.ndarray:
        h = self.height
        return (np.arange(self.fibers) + 0.5) * h / self.fibers - 0.5 * h

    @property
    def fiber_areas(self) -> np.ndarray:
        return np.full(self.fibers, self.width * self.height / self.fibers)

    @property
    def area(self) -> float:
        return float(self.fiber_areas.sum())

    @property
    def inertia(self) -> float:
        """Second moment of the fiber discretisation."""
        return float(np.sum(self.fiber_areas * self.fiber_offsets**2))


@dataclass(frozen=True)
class Element:
    """One element record as read from the document.

    ``kind`` is beam | quad | truss | spring | point_mass; ``nodes`` are
    dense node indices.
    """

    id: int
    kind: str
    nodes: tuple
    material: str | None = None
    section: str | None = None
    thickness: float | None = None
    area: float | None = None
    dof: str | None = None
    stiffness: float | None = None
    mass: float | None = None


@dataclass(frozen=True)
class Tie:
    slave: tuple
    masters: tuple  # ((dof_index, coefficient), ...)


@dataclass(frozen=True)
class ConstraintSet:
    """Fixed dofs and master-slave rows, all as global dof indices."""

    fixed: tuple = ()
    ties: tuple = ()


@dataclass(frozen=True)
class LoadStep:
    name: str
    increments: int
    self_weight: bool
    nodal: tuple = ()  # ((dof_index, value), ...)
    distributed: tuple = ()  # ((element_positions, qx, qy), ...)
    prescribed: tuple = ()  # ((dof_index, value), ...) on fixed dofs


@dataclass(frozen=True)
class LoadCase:
    name: str
    steps: tuple

    def staged(self, increments: int | None = None) -> "LoadCase":
        """Copy with every step split into ``increments`` increments."""
        if increments is None:
            return self
        if increments < 1:
            raise ModelError("increments must be >= 1")
        return replace(self, steps=tuple(replace(s, increments=increments) for s in self.steps))


@dataclass(frozen=True)
class SweepSpec:
    base_load_case: str
    positions: tuple
    labels: tuple
    magnitudes: tuple
    direction: tuple = (0.0, -1.0)
    first_increments: int = 1


@dataclass
class Model:
    name: str
    coords: np.ndarray
    node_ids: np.ndarray
    node_dofs: list  # per node: dict name -> global dof index
    ndof: int
    elements: list
    materials: dict
    sections: dict
    constraints: ConstraintSet
    load_cases: dict
    gravity: float = GRAVITY
    sweep: SweepSpec | None = None
    document: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    def dof(self, node: int, name: str) -> int:
        try:
            return self.node_dofs[node][name]
        except KeyError:
            raise ModelError(f"node {self.node_ids[node]} has no dof {name!r}") from None

    def node_index(self, node_id: int) -> int:
        idx = np.searchsorted(self.node_ids, node_id)
        if idx >= len(self.node_ids) or self.node_ids[idx] != node_id:
            raise ModelError(f"unknown node id {node_id}")
        return int(idx)

    def direction_vector(self, direction: str) -> np.ndarray:
        """Rigid-translation influence vector for 'x' or 'y'."""
        name = {"x": "ux", "y": "uy"}.get(direction)
        if name is None:
            raise ModelError(f"direction must be 'x' or 'y', got {direction!r}")
        r = np.zeros(self.ndof)
        for d in self.node_dofs:
            r[d[name]] = 1.0
        return r

    def with_material(self, name: str, params: MaterialParams) -> "Model":
        mats = dict(self.materials)
        if name not in mats:
            raise ModelError(f"unknown material {name!r}")
        mats[name] = params
        return replace(self, materials=mats)

    def load_case(self, name: str | None = None) -> LoadCase:
        if name is None:
            if len(self.load_cases) != 1:
                raise ModelError(
                    f"model has {len(self.load_cases)} load cases; name one of {sorted(self.load_cases)}"
                )
            return next(iter(self.load_cases.values()))
        try:
            return self.load_cases[name]
        except KeyError:
            raise ModelError(f"unknown load case {name!r}") from None


def _schema():
    text = resources.files(__package__).joinpath("model_schema.json").read_text()
    return json.loads(text)


def validate_document(doc: dict) -> None:
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ModelError(f"schema violation at '{path}': {exc.message}") from None


def _material(spec: dict) -> MaterialParams:
    behavior = spec.get("behavior", "masonry")
    if "young" in spec:
        return MaterialParams.from_young(spec["young"], spec["poisson"], spec["density"], behavior)
    return MaterialParams(spec["mu"], spec["lambda"], spec["density"], behavior)


def load_model(source) -> Model:
    """Build a :class:`Model` from a path or an already parsed document."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"model file not found: {path}")
        doc = json.loads(path.read_text())
    else:
        doc = source
    validate_document(doc)

    if not doc["elements"]:
        raise ModelError("no elements")

    raw_nodes = doc["nodes"]
    ids = np.array([n[0] for n in raw_nodes], dtype=int)
    if len(np.unique(ids)) != len(ids):
        raise ModelError("duplicate node ids")
    order = np.argsort(ids, kind="stable")
    node_ids = ids[order]
    coords = np.array([[raw_nodes[i][1], raw_nodes[i][2]] for i in order], dtype=float)
    index = {int(nid): k for k, nid in enumerate(node_ids)}

    def node(nid):
        try:
            return index[nid]
        except KeyError:
            raise ModelError(f"dangling node id {nid}") from None

    materials = {name: _material(spec) for name, spec in doc["materials"].items()}
    sections = {}
    for name, spec in doc.get("sections", {}).items():
        sections[name] = RectSection(
            width=spec["width"],
            height=spec["height"],
            fibers=spec.get("fibers", 20),
            gauss_points=spec.get("gauss_points", 3),
            shear=spec.get("shear", True),
            shear_factor=spec.get("shear_factor", 5.0 / 6.0),
            rotary_inertia=spec.get("rotary_inertia", False),
        )

    elements = []
    has_rotation = np.zeros(len(node_ids), dtype=bool)
    for pos, e in enumerate(doc["elements"]):
        kind = e["type"]
        nodes = tuple(node(n) for n in e["nodes"])
        eid = e.get("id", pos + 1)
        mat = e.get("material")
        if mat is not None and mat not in materials:
            raise ModelError(f"element {eid}: unknown material {mat!r}")
        if kind == "beam":
            if e["section"] not in sections:
                raise ModelError(f"element {eid}: unknown section {e['section']!r}")
            has_rotation[list(nodes)] = True
        if kind in ("beam", "truss"):
            if np.linalg.norm(coords[nodes[1]] - coords[nodes[0]]) <= 0.0:
                raise ModelError(f"element {eid}: zero length")
        if kind == "quad":
            _check_quad(eid, coords[list(nodes)])
        elements.append(
            Element(
                id=eid,
                kind=kind,
                nodes=nodes,
                material=mat,
                section=e.get("section"),
                thickness=e.get("thickness"),
                area=e.get("area"),
                dof=e.get("dof"),
                stiffness=e.get("stiffness"),
                mass=e.get("mass"),
            )
        )
    for e in elements:
        if e.kind == "spring" and e.dof == "rz" and not all(has_rotation[list(e.nodes)]):
            raise ModelError(f"element {e.id}: rotational spring on a node without rz")

    node_dofs = []
    ndof = 0
    for k in range(len(node_ids)):
        names = DOF_NAMES if has_rotation[k] else DOF_NAMES[:2]
        node_dofs.append({n: ndof + i for i, n in enumerate(names)})
        ndof += len(names)

    def gdof(nid, name):
        k = node(nid)
        if name not in node_dofs[k]:
            raise ModelError(f"node {nid} has no dof {name!r}")
        return node_dofs[k][name]

    cdoc = doc.get("constraints", {})
    fixed = sorted({gdof(f["node"], d) for f in cdoc.get("fixed", []) for d in f["dofs"]})
    ties = tuple(
        Tie(
            slave=gdof(*t["slave"]),
            masters=tuple((gdof(m[0], m[1]), float(m[2])) for m in t["masters"]),
        )
        for t in cdoc.get("ties", [])
    )
    constraints = ConstraintSet(fixed=tuple(fixed), ties=ties)

    elem_pos = {e.id: k for k, e in enumerate(elements)}
    if len(elem_pos) != len(elements):
        raise ModelError("duplicate element ids")
    load_cases = {}
    for name, lc in doc.get("load_cases", {}).items():
        steps = []
        for k, st in enumerate(lc["steps"]):
            nodal = []
            for nl in st.get("nodal", []):
                for comp, dname in (("fx", "ux"), ("fy", "uy"), ("mz", "rz")):
                    if comp in nl and nl[comp] != 0.0:
                        nodal.append((gdof(nl["node"], dname), float(nl[comp])))
            dist = []
            for dl in st.get("distributed", []):
                if dl["elements"] == "all":
                    sel = tuple(i for i, e in enumerate(elements) if e.kind == "beam")
                else:
                    try:
                        sel = tuple(elem_pos[i] for i in dl["elements"])
                    except KeyError as exc:
                        raise ModelError(f"load case {name}: unknown element {exc.args[0]}") from None
                for i in sel:
                    if elements[i].kind != "beam":
                        raise ModelError(f"load case {name}: distributed load on non-beam element")
                dist.append((sel, float(dl.get("qx", 0.0)), float(dl.get("qy", 0.0))))
            presc = []
            for pr in st.get("prescribed", []):
                d = gdof(pr["node"], pr["dof"])
                if d not in fixed:
                    raise ModelError(f"load case {name}: prescribed dof of node {pr['node']} is not fixed")
                presc.append((d, float(pr["value"])))
            steps.append(
                LoadStep(
                    name=st.get("name", f"step{k + 1}"),
                    increments=st.get("increments", 1),
                    self_weight=st.get("self_weight", False),
                    nodal=tuple(nodal),
                    distributed=tuple(dist),
                    prescribed=tuple(presc),
                )
            )
        load_cases[name] = LoadCase(name=name, steps=tuple(steps))

    sweep = None
    if "sweep" in doc:
        sw = doc["sweep"]
        if sw["base_load_case"] not in load_cases:
            raise ModelError(f"sweep: unknown load case {sw['base_load_case']!r}")
        positions = tuple(node(n) for n in sw["positions"])
        labels = tuple(sw.get("labels", [f"X{k + 1}" for k in range(len(positions))]))
        sweep = SweepSpec(
            base_load_case=sw["base_load_case"],
            positions=positions,
            labels=labels,
            magnitudes=tuple(sw["magnitudes"]),
            direction=tuple(sw.get("direction", (0.0, -1.0))),
            first_increments=sw.get("first_increments", 1),
        )

    return Model(
        name=doc.get("name", "model"),
        coords=coords,
        node_ids=node_ids,
        node_dofs=node_dofs,
        ndof=ndof,
        elements=elements,
        materials=materials,
        sections=sections,
        constraints=constraints,
        load_cases=load_cases,
        gravity=doc.get("gravity", GRAVITY),
        sweep=sweep,
        document=doc,
    )


_GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


def _check_quad(eid, xy):
    for xi in _GAUSS2:
        for eta in _GAUSS2:
            dN = 0.25 * np.array(
                [
                    [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)],
                    [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)],
                ]
            )
            if np.linalg.det(dN @ xy) <= 0.0:
                raise ModelError(f"element {eid}: negative Jacobian (check counterclockwise node order)")
