"""Cartesian quad/hex lattices of arbitrary order and the anisotropic
Kershaw deformation of the unit cube.

Nodes live on a global tensor lattice with Gauss-Lobatto points inside each
element, so faces shared by neighboring elements carry one set of nodes.
Global node ordering is lexicographic with x fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fe import gauss_lobatto_points

__all__ = [
    "MeshConfigError",
    "MeshSpec",
    "Mesh",
    "build_box",
    "build_cartesian",
    "kershaw_right",
    "kershaw_left",
    "kershaw_step",
    "kershaw_transform",
    "apply_kershaw",
]


class MeshConfigError(ValueError):
    """Invalid mesh configuration (divisibility, dimension, order)."""


@dataclass(frozen=True)
class MeshSpec:
    """Element counts and order for a benchmark-ready unit square/cube mesh.

    The Kershaw deformation splits the x-axis into 6 layers and deforms
    y/z element pairs, so nx must be a multiple of 6 and ny, nz multiples
    of 2.  Use :func:`build_box` directly for free-form lattices.
    """

    dim: int
    nx: int
    ny: int
    nz: int = 1
    order: int = 1

    def validate(self) -> None:
        if self.dim not in (2, 3):
            raise MeshConfigError(f"dim must be 2 or 3, got {self.dim}")
        if self.order < 1:
            raise MeshConfigError(f"order must be >= 1, got {self.order}")
        if self.nx % 6 != 0:
            raise MeshConfigError(f"nx must be a multiple of 6, got nx={self.nx}")
        if self.ny % 2 != 0:
            raise MeshConfigError(f"ny must be a multiple of 2, got ny={self.ny}")
        if self.dim == 3 and self.nz % 2 != 0:
            raise MeshConfigError(f"nz must be a multiple of 2, got nz={self.nz}")

    @property
    def element_counts(self) -> tuple[int, ...]:
        return (self.nx, self.ny) if self.dim == 2 else (self.nx, self.ny, self.nz)


@dataclass
class Mesh:
    """A tensor-product mesh of the unit square/cube.

    coords       (dim, n_nodes) node coordinates, components stacked
    restriction  (n_elements, (order+1)^dim) global node ids per element,
                 lexicographic with the direction-1 index fastest
    fixed_mask   (dim, n_nodes) True where a displacement component is
                 constrained: component a is fixed for nodes on either
                 domain face with normal along axis a
    """

    dim: int
    order: int
    element_counts: tuple[int, ...]
    nodes_per_axis: tuple[int, ...]
    coords: np.ndarray
    restriction: np.ndarray
    fixed_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[1]

    @property
    def n_elements(self) -> int:
        return self.restriction.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.dim * self.n_nodes

    def dof_vector(self) -> np.ndarray:
        """Flat copy of the node coordinates, component-major."""
        return self.coords.ravel().copy()

    def with_coords(self, coords: np.ndarray) -> "Mesh":
        coords = np.asarray(coords, dtype=float).reshape(self.dim, self.n_nodes)
        return replace(self, coords=coords.copy())


def _axis_nodes(n_elements: int, order: int) -> np.ndarray:
    """1D lattice: n_elements cells with Gauss-Lobatto points inside each."""
    ref = gauss_lobatto_points(order + 1)
    pts = np.empty(n_elements * order + 1)
    for e in range(n_elements):
        pts[e * order: (e + 1) * order + 1] = (e + ref) / n_elements
    pts[0], pts[-1] = 0.0, 1.0
    return pts


def build_box(dim: int, counts: tuple[int, ...], order: int) -> Mesh:
    """Uniform Cartesian mesh of [0,1]^dim with the given per-axis element
    counts; no divisibility requirements."""
    if dim not in (2, 3):
        raise MeshConfigError(f"dim must be 2 or 3, got {dim}")
    if len(counts) != dim or any(c < 1 for c in counts):
        raise MeshConfigError(f"need {dim} positive element counts, got {counts}")
    if order < 1:
        raise MeshConfigError(f"order must be >= 1, got {order}")

    nd = tuple(c * order + 1 for c in counts)
    axes = [_axis_nodes(c, order) for c in counts]

    # coords[a][g], g lexicographic with x fastest
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel(order="F") for g in grids])

    # element -> global node table
    n = order + 1
    local = [np.arange(n)] * dim
    strides = np.cumprod((1,) + nd[:-1])
    per_axis_idx = []
    for a, c in enumerate(counts):
        e_idx = np.arange(c)[:, None] * order + local[a][None, :]  # (c, n)
        per_axis_idx.append(e_idx)
    if dim == 2:
        ex, ey = np.meshgrid(np.arange(counts[0]), np.arange(counts[1]), indexing="ij")
        gx = per_axis_idx[0][ex.ravel(order="F")]  # (Ne, n)
        gy = per_axis_idx[1][ey.ravel(order="F")]
        restriction = (gx[:, None, :] * strides[0]
                       + gy[:, :, None] * strides[1]).reshape(-1, n * n)
    else:
        ex, ey, ez = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
        gx = per_axis_idx[0][ex.ravel(order="F")]
        gy = per_axis_idx[1][ey.ravel(order="F")]
        gz = per_axis_idx[2][ez.ravel(order="F")]
        restriction = (gx[:, None, None, :] * strides[0]
                       + gy[:, None, :, None] * strides[1]
                       + gz[:, :, None, None] * strides[2]).reshape(-1, n ** dim)
    restriction = restriction.astype(np.int32)

    lattice = np.unravel_index(np.arange(int(np.prod(nd))), nd, order="F")
    fixed = np.stack([(lattice[a] == 0) | (lattice[a] == nd[a] - 1) for a in range(dim)])

    return Mesh(dim=dim, order=order, element_counts=tuple(counts),
                nodes_per_axis=nd, coords=coords, restriction=restriction,
                fixed_mask=fixed)


def build_cartesian(spec: MeshSpec) -> Mesh:
    """Benchmark-ready uniform mesh; enforces the MeshSpec divisibility rules."""
    spec.validate()
    return build_box(spec.dim, spec.element_counts, spec.order)


def _maybe_scalar(arr: np.ndarray):
    return arr.item() if arr.ndim == 0 else arr


def _check_eps(eps: float, name: str) -> None:
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"{name} must be in (0, 1], got {eps}")


def kershaw_right(eps: float, x):
    """1D squeeze toward the right boundary; identity for eps = 1."""
    _check_eps(eps, "eps")
    x = np.asarray(x, dtype=float)
    return _maybe_scalar(np.where(x <= 0.5, (2.0 - eps) * x, 1.0 + eps * (x - 1.0)))


def kershaw_left(eps: float, x):
    """Mirror image of :func:`kershaw_right`."""
    _check_eps(eps, "eps")
    x = np.asarray(x, dtype=float)
    return _maybe_scalar(1.0 - np.asarray(kershaw_right(eps, 1.0 - x)))


def kershaw_step(a, b, x):
    """Quintic smoothstep from a (x <= 0) to b (x >= 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    s = t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    return _maybe_scalar(a + (b - a) * s)


def kershaw_transform(epsy: float, epsz: float, x, y, z):
    """Map (x, y, z) in [0,1]^3 to the deformed Kershaw configuration.

    The x-axis splits into 6 layers; the outer layers apply the left/right
    1D squeezes and the middle layers blend between them with the quintic
    step.  The layer index truncates toward zero, so x = 1 lands in the
    final (right) branch.  Accepts scalars or broadcastable arrays.
    """
    _check_eps(epsy, "epsy")
    _check_eps(epsz, "epsz")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    x, y, z = np.broadcast_arrays(x, y, z)

    layer = np.trunc(x * 6.0)
    lam = (x - layer / 6.0) * 6.0

    def blend(eps, c):
        lo = np.asarray(kershaw_left(eps, c))
        hi = np.asarray(kershaw_right(eps, c))
        conds = [layer == 0,
                 (layer == 1) | (layer == 4),
                 layer == 2,
                 layer == 3]
        choices = [lo,
                   np.asarray(kershaw_step(lo, hi, lam)),
                   np.asarray(kershaw_step(hi, lo, lam / 2.0)),
                   np.asarray(kershaw_step(hi, lo, (1.0 + lam) / 2.0))]
        return np.select(conds, choices, default=hi)

    return (_maybe_scalar(x.copy()),
            _maybe_scalar(blend(epsy, y)),
            _maybe_scalar(blend(epsz, z)))


def apply_kershaw(mesh: Mesh, epsy: float, epsz: float) -> Mesh:
    """Deform every node of a 3D unit-cube mesh; connectivity and boundary
    masks are unchanged (the deformation maps each face onto itself)."""
    if mesh.dim != 3:
        raise MeshConfigError("the Kershaw transform is defined for 3D meshes only")
    lo, hi = mesh.coords.min(), mesh.coords.max()
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise MeshConfigError("expected node coordinates inside [0, 1]^3")
    new_x, new_y, new_z = kershaw_transform(
        epsy, epsz, mesh.coords[0], mesh.coords[1], mesh.coords[2])
    return mesh.with_coords(np.stack([new_x, new_y, new_z]))
