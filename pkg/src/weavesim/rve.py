"""Microscale mesh generation: plain-weave cells and homogeneous bricks.

All meshes use 8-node hexahedra with the natural-coordinate node ordering
(-1,-1,-1), (1,-1,-1), (1,1,-1), (-1,1,-1), then the same square at the top
face.  The bounding box spans ``[0, L1] x [0, L2]`` in plane and
``[-(h+eps)/2, (h+eps)/2]`` through the thickness; the constrained-node set
lives on the four side faces of that box.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .contact import FacetContact, PlaneContact
from .errors import GeometryOverlap
from .materials import StVkMaterial

_SIDE_TOL = 1e-9


@dataclass(frozen=True)
class BoundingBox:
    l1: float
    l2: float
    h: float
    eps: float

    @property
    def volume(self):
        """Box volume including voids and the thickness clearance."""
        return self.l1 * self.l2 * (self.h + self.eps)


@dataclass
class RveMesh:
    nodes: np.ndarray  # (n, 3) reference coordinates, m
    hexes: np.ndarray  # (m, 8) connectivity
    elem_material: np.ndarray  # (m,) indices into material_table
    material_table: list
    constrained_nodes: np.ndarray  # sorted node ids on the side faces
    bbox: BoundingBox
    contact_pairs: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_dofs(self):
        return 3 * self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.hexes.shape[0]

    def material_params(self):
        """Per-element (lambda, mu) arrays."""
        lam = np.array([m.lame_lambda for m in self.material_table])
        mu = np.array([m.lame_mu for m in self.material_table])
        return lam[self.elem_material], mu[self.elem_material]

    def constrained_dofs(self):
        base = 3 * self.constrained_nodes
        return np.sort(np.concatenate([base, base + 1, base + 2]))

    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs()] = False
        return np.nonzero(mask)[0]

    # -- serialization ---------------------------------------------------

    def to_json(self):
        pairs = []
        for p in self.contact_pairs:
            if isinstance(p, FacetContact):
                pairs.append({"type": "facet", "node": int(p.node),
                              "facet": [int(i) for i in p.facet]})
            else:
                pairs.append({"type": "plane", "node": int(p.node),
                              "normal": list(map(float, p.normal)),
                              "offset": float(p.offset)})
        doc = {
            "nodes": self.nodes.tolist(),
            "hexes": self.hexes.tolist(),
            "materials": self.elem_material.tolist(),
            "material_table": [
                {"lame_lambda": m.lame_lambda, "lame_mu": m.lame_mu}
                for m in self.material_table
            ],
            "constrained": self.constrained_nodes.tolist(),
            "contact_pairs": pairs,
            "bbox": {"L1": self.bbox.l1, "L2": self.bbox.l2,
                     "h": self.bbox.h, "eps": self.bbox.eps},
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        pairs = []
        for p in doc["contact_pairs"]:
            if p["type"] == "facet":
                pairs.append(FacetContact(p["node"], tuple(p["facet"])))
            else:
                pairs.append(PlaneContact(p["node"], tuple(p["normal"]), p["offset"]))
        return cls(
            nodes=np.asarray(doc["nodes"], dtype=float),
            hexes=np.asarray(doc["hexes"], dtype=np.int64),
            elem_material=np.asarray(doc["materials"], dtype=np.int64),
            material_table=[
                StVkMaterial(m["lame_lambda"], m["lame_mu"])
                for m in doc["material_table"]
            ],
            constrained_nodes=np.asarray(doc["constrained"], dtype=np.int64),
            bbox=BoundingBox(doc["bbox"]["L1"], doc["bbox"]["L2"],
                             doc["bbox"]["h"], doc["bbox"]["eps"]),
            contact_pairs=pairs,
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def side_face_nodes(nodes, l1, l2, tol_scale=_SIDE_TOL):
    """Ids of nodes lying on any of the four in-plane box faces."""
    tol1 = tol_scale * l1
    tol2 = tol_scale * l2
    x, y = nodes[:, 0], nodes[:, 1]
    on_side = (
        (np.abs(x) <= tol1)
        | (np.abs(x - l1) <= tol1)
        | (np.abs(y) <= tol2)
        | (np.abs(y - l2) <= tol2)
    )
    return np.nonzero(on_side)[0]


def element_volumes(mesh):
    """Exact volumes by 2x2x2 Gauss integration of det(J)."""
    from .microfem import reference_gradients

    _, wdet = reference_gradients(mesh.nodes, mesh.hexes)
    return wdet.sum(axis=1)


def validate_mesh(mesh):
    """Check the structural invariants; returns a report dict or raises."""
    nodes = mesh.nodes
    box = mesh.bbox
    half = 0.5 * (box.h + box.eps)
    cons = mesh.constrained_nodes
    onside = set(side_face_nodes(nodes, box.l1, box.l2).tolist())
    stray = [int(i) for i in cons if int(i) not in onside]
    if stray:
        raise ValueError(f"constrained nodes not on side faces: {stray[:5]}")

    vols = element_volumes(mesh)
    if np.any(vols <= 0.0):
        raise ValueError("non-positive element volume")

    zmin, zmax = nodes[:, 2].min(), nodes[:, 2].max()
    if box.eps > 0.0:
        clearance = 0.5 * box.eps * (1.0 - 1e-9)
        if zmin < -half + clearance or zmax > half - clearance:
            raise ValueError("mesh violates the thickness clearance eps/2")
    else:
        if zmin < -half - _SIDE_TOL * box.h or zmax > half + _SIDE_TOL * box.h:
            raise ValueError("mesh extends beyond the bounding box")

    if mesh.contact_pairs:
        cons_set = set(cons.tolist())
        node_elems = {}
        for e, conn in enumerate(mesh.hexes):
            for n in conn:
                node_elems.setdefault(int(n), []).append(e)
        touched = set()
        for p in mesh.contact_pairs:
            ids = [p.node] + (list(p.facet) if isinstance(p, FacetContact) else [])
            for n in ids:
                for e in node_elems[int(n)]:
                    touched.update(int(k) for k in mesh.hexes[e])
        if touched & cons_set:
            raise ValueError("contact facets touch elements adjacent to "
                             "constrained nodes")

    return {
        "n_nodes": mesh.n_nodes,
        "n_elements": mesh.n_elements,
        "solid_volume": float(vols.sum()),
        "void_fraction": 1.0 - float(vols.sum()) / box.volume,
    }


def _structured_block(pos_fn, na, nb, nc):
    """Structured hex grid; pos_fn(ia, ib, ic) must be right-handed."""
    nodes = np.empty(((na + 1) * (nb + 1) * (nc + 1), 3))
    def nid(ia, ib, ic):
        return (ia * (nb + 1) + ib) * (nc + 1) + ic
    for ia in range(na + 1):
        for ib in range(nb + 1):
            for ic in range(nc + 1):
                nodes[nid(ia, ib, ic)] = pos_fn(ia, ib, ic)
    hexes = np.empty((na * nb * nc, 8), dtype=np.int64)
    e = 0
    for ia in range(na):
        for ib in range(nb):
            for ic in range(nc):
                hexes[e] = [
                    nid(ia, ib, ic), nid(ia + 1, ib, ic),
                    nid(ia + 1, ib + 1, ic), nid(ia, ib + 1, ic),
                    nid(ia, ib, ic + 1), nid(ia + 1, ib, ic + 1),
                    nid(ia + 1, ib + 1, ic + 1), nid(ia, ib + 1, ic + 1),
                ]
                e += 1
    return nodes, hexes


def gen_block_rve(l1, l2, h, nx, ny, nz, material, eps=0.0):
    """Homogeneous void-free brick filling the bounding box.

    With ``nx = ny = 1`` every node lies on the side faces, so the affine
    boundary data constrains the entire boundary and the affine field is
    the exact solution: the configuration used by the homogenization
    consistency oracle.
    """
    xs = np.linspace(0.0, l1, nx + 1)
    ys = np.linspace(0.0, l2, ny + 1)
    zs = np.linspace(-0.5 * h, 0.5 * h, nz + 1)
    nodes, hexes = _structured_block(
        lambda ia, ib, ic: (xs[ia], ys[ib], zs[ic]), nx, ny, nz
    )
    return RveMesh(
        nodes=nodes,
        hexes=hexes,
        elem_material=np.zeros(len(hexes), dtype=np.int64),
        material_table=[material],
        constrained_nodes=np.sort(side_face_nodes(nodes, l1, l2)),
        bbox=BoundingBox(l1, l2, h, eps),
    )


def gen_two_block_rve(l1, l2, block_h, gap, nx, ny, nz, material, eps=None):
    """Two stacked bricks separated by ``gap`` with contact at the interface.

    Contact pairs connect interior nodes of the lower block's top surface to
    interior facets of the upper block's bottom surface, keeping one element
    layer between the contact zone and the constrained side faces so contact
    forces never contribute to the reactions.
    """
    h = 2.0 * block_h + gap
    if eps is None:
        eps = 0.05 * h
    xs = np.linspace(0.0, l1, nx + 1)
    ys = np.linspace(0.0, l2, ny + 1)
    z_lo = np.linspace(-0.5 * h, -0.5 * h + block_h, nz + 1)
    z_hi = np.linspace(0.5 * h - block_h, 0.5 * h, nz + 1)
    nodes_lo, hexes_lo = _structured_block(
        lambda ia, ib, ic: (xs[ia], ys[ib], z_lo[ic]), nx, ny, nz
    )
    nodes_hi, hexes_hi = _structured_block(
        lambda ia, ib, ic: (xs[ia], ys[ib], z_hi[ic]), nx, ny, nz
    )
    offset = nodes_lo.shape[0]
    nodes = np.vstack([nodes_lo, nodes_hi])
    hexes = np.vstack([hexes_lo, hexes_hi + offset])

    def nid(ia, ib, ic):
        return (ia * (ny + 1) + ib) * (nz + 1) + ic

    # lower-block top nodes against upper-block bottom facets, keeping one
    # element layer between all contact participants and the side faces
    if nx < 5 or ny < 5:
        raise ValueError("two-block contact RVE needs nx, ny >= 5")
    pairs = []
    for ia in range(2, nx - 1):
        for ib in range(2, ny - 1):
            node = nid(ia, ib, nz)
            fa = min(max(ia, 2), nx - 3)
            fb = min(max(ib, 2), ny - 3)
            facet = (  # outward normal -z
                offset + nid(fa, fb, 0),
                offset + nid(fa, fb + 1, 0),
                offset + nid(fa + 1, fb + 1, 0),
                offset + nid(fa + 1, fb, 0),
            )
            pairs.append(FacetContact(node, facet))

    return RveMesh(
        nodes=nodes,
        hexes=hexes,
        elem_material=np.zeros(len(hexes), dtype=np.int64),
        material_table=[material],
        constrained_nodes=np.sort(side_face_nodes(nodes, l1, l2)),
        bbox=BoundingBox(l1, l2, h, eps),
        contact_pairs=pairs,
    )


@dataclass(frozen=True)
class WeaveParams:
    """Plain-weave geometry: two orthogonal yarn families, sinusoidal
    centerlines interleaved over/under.

    Yarns are swept rectangular cross-sections, so avoiding reference
    interpenetration at the corners of a crossing footprint requires
    ``2 a cos(pi w / (2 (w + gap))) >= thickness``; the defaults satisfy
    that with a small clearance.
    """

    yarns_per_direction: int = 2
    yarn_width: float = 0.4e-3
    yarn_thickness: float = 0.1e-3
    crimp_amplitude: float = 0.17e-3
    gap: float = 0.1e-3
    elems_axial: int = 8  # axial divisions per yarn span
    elems_width: int = 2
    elems_thickness: int = 1
    clearance_factor: float = 0.05  # eps = factor * h

    def __post_init__(self):
        if self.yarns_per_direction < 1:
            raise ValueError("need at least one yarn per direction")
        if self.yarn_width <= 0.0 or self.yarn_thickness <= 0.0:
            raise ValueError("yarn cross-section dimensions must be positive")
        if self.crimp_amplitude < 0.0 or self.gap < 0.0:
            raise ValueError("crimp amplitude and gap must be nonnegative")
        if min(self.elems_axial, self.elems_width, self.elems_thickness) < 1:
            raise ValueError("need at least one element per direction")


def gen_plain_weave_rve(params, material, overlap_tol=None):
    """Generate a plain-weave RVE of two orthogonal yarn families.

    Warp yarns run along x with centerline height
    ``z = +/- a sin(pi x / p)``; weft yarns run along y with the opposite
    phase, which interleaves the families over/under at every crossing.

    Raises
    ------
    GeometryOverlap
        If yarn solids interpenetrate in the reference configuration
        beyond ``overlap_tol`` (default: 1e-9 of the yarn thickness).
    """
    n = params.yarns_per_direction
    w, t, a, g = (params.yarn_width, params.yarn_thickness,
                  params.crimp_amplitude, params.gap)
    pitch = w + g
    span = n * pitch
    if overlap_tol is None:
        overlap_tol = 1e-9 * t

    # interpenetration check sampled over every crossing footprint
    samples = np.linspace(-0.5 * w, 0.5 * w, 9)
    z_flat_warp = 0.5 * t if a == 0.0 else 0.0
    z_flat_weft = -0.5 * t if a == 0.0 else 0.0
    for j in range(n):
        for k in range(n):
            xc = (k + 0.5) * pitch
            yc = (j + 0.5) * pitch
            zw = a * (-1) ** j * np.sin(np.pi * (xc + samples) / pitch) + z_flat_warp
            zf = -a * (-1) ** k * np.sin(np.pi * (yc + samples) / pitch) + z_flat_weft
            sep = np.abs(zw[:, None] - zf[None, :]).min()
            if sep < t - overlap_tol:
                raise GeometryOverlap(
                    f"yarns ({j},{k}) interpenetrate: separation "
                    f"{sep:.3e} < thickness {t:.3e}"
                )

    h = 2.0 * a + t if a > 0.0 else 2.0 * t
    eps = params.clearance_factor * h
    na, nw, nt = params.elems_axial, params.elems_width, params.elems_thickness

    all_nodes = []
    all_hexes = []
    blocks = []  # (family, offset, (ga, gb, gc))
    offset = 0

    axial = np.linspace(0.0, span, na + 1)
    across = np.linspace(-0.5 * w, 0.5 * w, nw + 1)
    through = np.linspace(-0.5 * t, 0.5 * t, nt + 1)

    for j in range(n):  # warp, along x
        yc = (j + 0.5) * pitch
        sign = (-1) ** j

        def pos(ia, ib, ic, yc=yc, sign=sign):
            x = axial[ia]
            z_c = a * sign * np.sin(np.pi * x / pitch) + z_flat_warp
            return (x, yc + across[ib], z_c + through[ic])

        nodes, hexes = _structured_block(pos, na, nw, nt)
        all_nodes.append(nodes)
        all_hexes.append(hexes + offset)
        blocks.append(("warp", offset, (na, nw, nt)))
        offset += nodes.shape[0]

    for k in range(n):  # weft, along y; grid axes a -> x (width), b -> y
        xc = (k + 0.5) * pitch
        sign = (-1) ** k

        def pos(ia, ib, ic, xc=xc, sign=sign):
            y = axial[ib]
            z_c = -a * sign * np.sin(np.pi * y / pitch) + z_flat_weft
            return (xc + across[ia], y, z_c + through[ic])

        nodes, hexes = _structured_block(pos, nw, na, nt)
        all_nodes.append(nodes)
        all_hexes.append(hexes + offset)
        blocks.append(("weft", offset, (nw, na, nt)))
        offset += nodes.shape[0]

    nodes = np.vstack(all_nodes)
    hexes = np.vstack(all_hexes)
    constrained = np.sort(side_face_nodes(nodes, span, span))

    pairs = _weave_contact_pairs(params, blocks, nodes, hexes, constrained)

    mesh = RveMesh(
        nodes=nodes,
        hexes=hexes,
        elem_material=np.zeros(len(hexes), dtype=np.int64),
        material_table=[material],
        constrained_nodes=constrained,
        bbox=BoundingBox(span, span, h, eps),
        contact_pairs=pairs,
    )
    return mesh


def _block_surface(offset, grid, top):
    """Node ids and facets of a structured block's top or bottom surface.

    Facet quads are ordered so their normal points away from the block
    (+z for the top surface, -z for the bottom).
    """
    ga, gb, gc = grid
    ic = gc if top else 0

    def nid(ia, ib):
        return offset + (ia * (gb + 1) + ib) * (gc + 1) + ic

    surf_nodes = [nid(ia, ib) for ia in range(ga + 1) for ib in range(gb + 1)]
    facets = []
    for ia in range(ga):
        for ib in range(gb):
            if top:
                quad = (nid(ia, ib), nid(ia + 1, ib),
                        nid(ia + 1, ib + 1), nid(ia, ib + 1))
            else:
                quad = (nid(ia, ib), nid(ia, ib + 1),
                        nid(ia + 1, ib + 1), nid(ia + 1, ib))
            facets.append(quad)
    return surf_nodes, facets


def _weave_contact_pairs(params, blocks, nodes, hexes, constrained):
    """Candidate node-to-facet pairs at every warp/weft crossing.

    Selection is geometric: nodes of the lower yarn's top surface within a
    crossing footprint are paired against the nearest bottom facet of the
    upper yarn.  Participants within one element of a constrained node are
    dropped so contact forces never reach the reaction rows.
    """
    n = params.yarns_per_direction
    w, g = params.yarn_width, params.gap
    pitch = w + g

    # nodes sharing an element with a constrained node are off limits
    cons = set(constrained.tolist())
    blocked = set(cons)
    for conn in hexes:
        conn_set = set(int(i) for i in conn)
        if conn_set & cons:
            blocked |= conn_set

    warps = [b for b in blocks if b[0] == "warp"]
    wefts = [b for b in blocks if b[0] == "weft"]
    pairs = []
    for j, (_, woff, wgrid) in enumerate(warps):
        for k, (_, foff, fgrid) in enumerate(wefts):
            warp_above = (-1) ** (j + k) > 0
            xc, yc = (k + 0.5) * pitch, (j + 0.5) * pitch
            half = 0.5 * w + 1e-12
            if warp_above:
                upper_off, upper_grid = woff, wgrid
                lower_off, lower_grid = foff, fgrid
            else:
                upper_off, upper_grid = foff, fgrid
                lower_off, lower_grid = woff, wgrid
            lower_nodes, _ = _block_surface(lower_off, lower_grid, top=True)
            _, upper_facets = _block_surface(upper_off, upper_grid, top=False)
            upper_facets = [
                f for f in upper_facets
                if abs(np.mean(nodes[list(f), 0]) - xc) <= half
                and abs(np.mean(nodes[list(f), 1]) - yc) <= half
                and not (set(f) & blocked)
            ]
            if not upper_facets:
                continue
            centroids = np.array(
                [nodes[list(f), :2].mean(axis=0) for f in upper_facets]
            )
            for node in lower_nodes:
                if node in blocked:
                    continue
                xy = nodes[node, :2]
                if abs(xy[0] - xc) > half or abs(xy[1] - yc) > half:
                    continue
                nearest = int(np.argmin(((centroids - xy) ** 2).sum(axis=1)))
                pairs.append(FacetContact(node, upper_facets[nearest]))
    return pairs
