"""Plot-ready deformation field tables and a minimal SVG grid renderer."""
import numpy as np

from .classify import grid_points
from .errors import DimensionMismatch, NonFinite
from .fusion import (displacement_fusion, forward, fused_velocity,
                     jacobian_grid)

MODES = ("velocity", "displacement_fusion", "flow", "jacobian")

__all__ = ["MODES", "GridSpec", "field_rows", "export_field",
           "render_grid_svg"]


class GridSpec:
    """Axis-aligned 2-D sampling grid: ``min, max, count`` per axis."""

    def __init__(self, xmin, xmax, nx, ymin, ymax, ny):
        if nx < 2 or ny < 2:
            raise ValueError("need at least 2 samples per axis")
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("grid max must exceed min on both axes")
        self.xmin, self.xmax, self.nx = float(xmin), float(xmax), int(nx)
        self.ymin, self.ymax, self.ny = float(ymin), float(ymax), int(ny)

    @classmethod
    def parse(cls, text):
        parts = text.split(",")
        if len(parts) != 6:
            raise ValueError("grid spec is xmin,xmax,nx,ymin,ymax,ny")
        xmin, xmax, nx, ymin, ymax, ny = parts
        return cls(float(xmin), float(xmax), int(nx), float(ymin),
                   float(ymax), int(ny))

    def points(self):
        return grid_points(self.xmin, self.xmax, self.nx,
                           self.ymin, self.ymax, self.ny)

    @property
    def spacing(self):
        return min((self.xmax - self.xmin) / (self.nx - 1),
                   (self.ymax - self.ymin) / (self.ny - 1))


def field_rows(atlas, grid, mode="flow", h=None):
    """Rows ``(x, y, u, v[, detJ])`` for every grid point."""
    if atlas.dim != 2:
        raise DimensionMismatch("field export needs a 2-D atlas")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    P = grid.points()
    if mode == "velocity":
        U = fused_velocity(atlas, P)
    elif mode == "displacement_fusion":
        U = displacement_fusion(atlas, P) - P
    else:
        U = forward(atlas, P) - P
    cols = [P, U]
    if mode == "jacobian":
        step = h if h is not None else 1e-3 * grid.spacing
        cols.append(jacobian_grid(atlas, P, step)[:, None])
    rows = np.hstack(cols)
    if not np.all(np.isfinite(rows)):
        raise NonFinite("non-finite values in field export")
    return rows


def export_field(atlas, grid, path, mode="flow"):
    rows = field_rows(atlas, grid, mode)
    header = "x,y,u,v,detJ" if mode == "jacobian" else "x,y,u,v"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return rows


def render_grid_svg(atlas, grid, path, mode="flow", size=480, lines=21):
    """Draw the warped images of the grid lines as SVG polylines."""
    warp = displacement_fusion if mode == "displacement_fusion" else forward
    xs = np.linspace(grid.xmin, grid.xmax, lines)
    ys = np.linspace(grid.ymin, grid.ymax, lines)
    t = np.linspace(0.0, 1.0, 4 * lines)
    polylines = []
    for x in xs:
        pts = np.column_stack([np.full_like(t, x),
                               grid.ymin + t * (grid.ymax - grid.ymin)])
        polylines.append(warp(atlas, pts))
    for y in ys:
        pts = np.column_stack([grid.xmin + t * (grid.xmax - grid.xmin),
                               np.full_like(t, y)])
        polylines.append(warp(atlas, pts))
    allpts = np.vstack(polylines)
    lo, hi = allpts.min(0), allpts.max(0)
    scale = (size - 20) / max(float((hi - lo).max()), 1e-12)

    def to_px(p):
        return 10 + (p[:, 0] - lo[0]) * scale, size - 10 - (p[:, 1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
           f'height="{size}" viewBox="0 0 {size} {size}">',
           '<rect width="100%" height="100%" fill="white"/>']
    for poly in polylines:
        px, py = to_px(poly)
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        out.append(f'<polyline fill="none" stroke="black" '
                   f'stroke-width="0.7" points="{coords}"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
