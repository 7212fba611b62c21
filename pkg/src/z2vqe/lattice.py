"""Square-lattice geometry with surface-code-like boundary conditions.

Gauge degrees of freedom live on the links of a d x d lattice
(N = d^2 + (d-1)^2 links).  Plaquettes are the elementary faces
(N_p = d(d-1)); the faces on the top and bottom boundary rows consist of
only three links.  Vertex (star) operators act on the 3 or 4 links meeting
at an interior vertex.

Conventions (fixed once, used everywhere):
  * vertices sit at integer coordinates (col, row), col, row in 0..d
  * y-links point upward from vertex (c, r), for c in 0..d-1, r in 0..d-1
  * x-links point rightward from vertex (c, r), for c in 0..d-2, r in 1..d-1
  * plaquette (c, r) with c in 0..d-2, r in 0..d-1 is bounded by
    top x(c, r+1) [absent for r = d-1], right y(c+1, r),
    bottom x(c, r) [absent for r = 0], left y(c, r)
  * ids are assigned row-major; plaquette index = r*(d-1) + c

Dual ('t Hooft) strings run horizontally from the left boundary, crossing
the y-links of a single plaquette row.
"""

from dataclasses import dataclass, field

import numpy as np

Link = tuple[int, int, str]  # (col, row, orientation)


@dataclass
class LatticeGeometry:
    """Immutable index structures for one lattice size."""

    d: int
    links: list[Link]
    plaquettes: list[list[int]]  # ordered link ids, clockwise from top
    vertices: list[list[int]]
    link_adjacency: list[tuple[int, ...]]  # plaquettes containing each link
    incidence: np.ndarray  # shape (N, N_p), uint8, A[l, p] = 1 iff l in p
    dual_paths: list[list[int]]  # per plaquette: left boundary -> plaquette
    logical_x_path: list[int]
    plaq_coords: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_plaquettes(self) -> int:
        return len(self.plaquettes)

    def plaq_index(self, c: int, r: int) -> int:
        if not (0 <= c <= self.d - 2 and 0 <= r <= self.d - 1):
            raise IndexError(f"plaquette ({c}, {r}) outside lattice d={self.d}")
        return r * (self.d - 1) + c

    def link_plaq_mask(self, link_id: int) -> int:
        """Bitmask over plaquette indices adjacent to a link."""
        m = 0
        for p in self.link_adjacency[link_id]:
            m |= 1 << p
        return m

    def bulk_plaquettes(self) -> list[int]:
        """Plaquettes away from the 3-link boundary rows.

        For d = 2 every plaquette sits on a boundary row; fall back to all
        plaquettes so bulk averages remain defined.
        """
        bulk = [self.plaq_index(c, r)
                for r in range(1, self.d - 1)
                for c in range(self.d - 1)]
        return bulk if bulk else list(range(self.n_plaquettes))

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n_links": self.n_links,
            "n_plaquettes": self.n_plaquettes,
            "n_vertices": len(self.vertices),
            "links": [{"id": i, "n": [l[0], l[1]], "orientation": l[2]}
                      for i, l in enumerate(self.links)],
            "plaquettes": [{"id": i, "links": p, "coord": list(self.plaq_coords[i])}
                           for i, p in enumerate(self.plaquettes)],
            "vertices": [{"id": i, "links": v} for i, v in enumerate(self.vertices)],
            "logical_x_path": self.logical_x_path,
        }


def build_lattice(d: int) -> LatticeGeometry:
    """Construct the geometry for lattice distance ``d`` (d >= 2)."""
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValueError(f"lattice distance must be an integer >= 2, got {d!r}")
    d = int(d)

    links: list[Link] = []
    link_id: dict[Link, int] = {}
    for r in range(d):
        for c in range(d):
            link_id[(c, r, "y")] = len(links)
            links.append((c, r, "y"))
    for r in range(1, d):
        for c in range(d - 1):
            link_id[(c, r, "x")] = len(links)
            links.append((c, r, "x"))

    plaquettes: list[list[int]] = []
    plaq_coords: list[tuple[int, int]] = []
    for r in range(d):
        for c in range(d - 1):
            p = []
            if r < d - 1:
                p.append(link_id[(c, r + 1, "x")])  # top
            p.append(link_id[(c + 1, r, "y")])      # right
            if r > 0:
                p.append(link_id[(c, r, "x")])      # bottom
            p.append(link_id[(c, r, "y")])          # left
            plaquettes.append(p)
            plaq_coords.append((c, r))

    vertices: list[list[int]] = []
    for r in range(1, d):
        for c in range(d):
            v = [link_id[(c, r - 1, "y")], link_id[(c, r, "y")]]
            if c > 0:
                v.append(link_id[(c - 1, r, "x")])
            if c < d - 1:
                v.append(link_id[(c, r, "x")])
            vertices.append(v)

    n_links, n_plaq = len(links), len(plaquettes)
    incidence = np.zeros((n_links, n_plaq), dtype=np.uint8)
    for p, plinks in enumerate(plaquettes):
        for l in plinks:
            incidence[l, p] = 1
    link_adjacency = [tuple(np.nonzero(incidence[l])[0].tolist())
                      for l in range(n_links)]

    dual_paths = [[link_id[(cc, r, "y")] for cc in range(c + 1)]
                  for (c, r) in plaq_coords]
    logical_x_path = [link_id[(c, d // 2, "y")] for c in range(d)]

    return LatticeGeometry(
        d=d,
        links=links,
        plaquettes=plaquettes,
        vertices=vertices,
        link_adjacency=link_adjacency,
        incidence=incidence,
        dual_paths=dual_paths,
        logical_x_path=logical_x_path,
        plaq_coords=plaq_coords,
    )


def dual_path(geom: LatticeGeometry, n: int) -> list[int]:
    """Ordered link ids of the 't Hooft string from the left boundary to
    plaquette ``n``."""
    return list(geom.dual_paths[n])


def wilson_rectangle(geom: LatticeGeometry, l: int, m: int, anchor: int) -> int:
    """Bitmask of the l x m block of plaquettes whose lower-left corner is
    the plaquette ``anchor`` (l columns wide, m rows tall)."""
    if l < 1 or m < 1:
        raise ValueError("rectangle sides must be >= 1")
    c0, r0 = geom.plaq_coords[anchor]
    if c0 + l > geom.d - 1 or r0 + m > geom.d:
        raise ValueError(
            f"{l}x{m} rectangle at plaquette ({c0}, {r0}) does not fit in d={geom.d}")
    mask = 0
    for r in range(r0, r0 + m):
        for c in range(c0, c0 + l):
            mask |= 1 << geom.plaq_index(c, r)
    return mask


def loop_boundary_links(geom: LatticeGeometry, plaq_mask: int) -> set[int]:
    """Links carried by the Wilson loop for a plaquette mask: the GF(2) sum
    of the plaquette link sets (interior links cancel pairwise)."""
    counts = np.zeros(geom.n_links, dtype=np.int64)
    for p in range(geom.n_plaquettes):
        if plaq_mask >> p & 1:
            counts[geom.incidence[:, p].astype(bool)] += 1
    return set(np.nonzero(counts % 2)[0].tolist())
