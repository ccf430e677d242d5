"""Loop and surface quadrature for topological charges, plus constraint checks.

Charge integrands are evaluated on the grid and interpolated along the
curve or surface with periodic cubic (Catmull-Rom) interpolation; the
line integral uses the composite trapezoid rule, the surface integral
face-by-face 2D trapezoid sums.  The circulation convention follows the
outward-flux form: the loop integral of (Gamma^x, Gamma^y) is
closed-integral of Gamma^x dy - Gamma^y dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridField, evaluate_on_grid
from .jetexpr import JetExpr


class CurveNotClosed(ValueError):
    pass


@dataclass(frozen=True)
class CurveSpec:
    """Closed polyline in the periodic cell; orientation as listed."""

    vertices: tuple

    def __post_init__(self):
        v = tuple((float(a), float(b)) for a, b in self.vertices)
        object.__setattr__(self, "vertices", v)
        if len(v) < 4:
            raise CurveNotClosed("a closed polyline needs at least 4 vertices")
        if v[0] != v[-1]:
            raise CurveNotClosed("first vertex must equal the last")

    @staticmethod
    def rectangle(x0: float, x1: float, y0: float, y1: float) -> "CurveSpec":
        return CurveSpec(((x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)))


def _catmull_rom_weights(t: float) -> tuple:
    t2, t3 = t * t, t * t * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def periodic_interp(data: np.ndarray, periods, point) -> float:
    """Separable periodic cubic interpolation at one point."""
    dim = data.ndim
    idx_weights = []
    for axis in range(dim):
        n = data.shape[axis]
        h = periods[axis] / n
        s = point[axis] / h
        i0 = math.floor(s)
        frac = s - i0
        w = _catmull_rom_weights(frac)
        idx = [(i0 - 1 + j) % n for j in range(4)]
        idx_weights.append((idx, w))
    out = 0.0
    if dim == 1:
        idx, w = idx_weights[0]
        for j in range(4):
            out += w[j] * data[idx[j]]
        return float(out)
    if dim == 2:
        (ix, wx), (iy, wy) = idx_weights
        for a in range(4):
            row = 0.0
            for b in range(4):
                row += wy[b] * data[ix[a], iy[b]]
            out += wx[a] * row
        return float(out)
    (ix, wx), (iy, wy), (iz, wz) = idx_weights
    for a in range(4):
        plane = 0.0
        for b in range(4):
            row = 0.0
            for c in range(4):
                row += wz[c] * data[ix[a], iy[b], iz[c]]
            plane += wy[b] * row
        out += wx[a] * plane
    return float(out)


def spectral_values(data: np.ndarray, periods, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of `data` at arbitrary points.

    Exact for band-limited periodic data; cost O(npts * N^dim).
    """
    hat = np.fft.fftn(data) / data.size
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dim = data.ndim
    factors = []
    for axis in range(dim):
        n = data.shape[axis]
        k = 2.0 * math.pi * np.fft.fftfreq(n, d=periods[axis] / n)
        factors.append(np.exp(1j * np.outer(pts[:, axis], k)))
    if dim == 1:
        vals = factors[0] @ hat
    elif dim == 2:
        vals = np.einsum("pa,ab,pb->p", factors[0], hat, factors[1])
    else:
        vals = np.einsum("pa,abc,pb,pc->p", factors[0], hat, factors[1], factors[2])
    return np.real(vals)


class _Interpolator:
    def __init__(self, data: np.ndarray, periods, method: str):
        if method not in ("cubic", "spectral"):
            raise ValueError(f"unknown interpolation method {method!r}")
        self.data = data
        self.periods = periods
        self.method = method

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.method == "spectral":
            return spectral_values(self.data, self.periods, pts)
        return np.array([periodic_interp(self.data, self.periods, p) for p in pts])


def _interval_factors(n: int, period: float, lo: float, hi: float) -> np.ndarray:
    """Exact integrals of the Fourier modes over [lo, hi]."""
    k = 2.0 * math.pi * np.fft.fftfreq(n, d=period / n)
    out = np.empty(n, dtype=complex)
    nz = np.abs(k) > 1e-14
    out[~nz] = hi - lo
    kk = k[nz]
    out[nz] = (np.exp(1j * kk * hi) - np.exp(1j * kk * lo)) / (1j * kk)
    return out


def _point_factors(n: int, period: float, value: float) -> np.ndarray:
    k = 2.0 * math.pi * np.fft.fftfreq(n, d=period / n)
    return np.exp(1j * k * value)


def _axis_line_integral(data: np.ndarray, periods, axis: int, lo: float, hi: float,
                        fixed: dict) -> float:
    """Exact integral of the trig interpolant along an axis-aligned segment."""
    hat = np.fft.fftn(data) / data.size
    factors = []
    for a in range(data.ndim):
        n = data.shape[a]
        if a == axis:
            factors.append(_interval_factors(n, periods[a], lo, hi))
        else:
            factors.append(_point_factors(n, periods[a], fixed[a]))
    letters = "abc"[: data.ndim]
    spec = ",".join([letters] + [ch for ch in letters]) + "->"
    return float(np.real(np.einsum(spec, hat, *factors)))


def _segment_points(p0, p1, spacing: float, density: float):
    length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    n = max(2, int(math.ceil(length / spacing * density)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = [(p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])) for t in ts]
    return pts, length


def loop_integral(
    gamma,
    grid: GridField,
    u_t: np.ndarray,
    curve: CurveSpec,
    fun_bindings: dict | None = None,
    params: dict | None = None,
    extra_fields: dict | None = None,
    density: float = 2.0,
    method: str = "cubic",
) -> float:
    """Circulation of (Gamma^x dy - Gamma^y dx) around a closed polyline.

    Methods: "cubic" (periodic bicubic interpolation, composite
    trapezoid), "spectral" (trig-interpolant values, trapezoid), "exact"
    (closed-form integrals of the trig interpolant; axis-aligned
    segments only).
    """
    if grid.dim != 2:
        raise ValueError("loop integrals are two-dimensional")
    gx = evaluate_on_grid(gamma[0], grid, u_t, fun_bindings, params, extra_fields)
    gy = evaluate_on_grid(gamma[1], grid, u_t, fun_bindings, params, extra_fields)
    if method == "exact":
        total = 0.0
        for p0, p1 in zip(curve.vertices[:-1], curve.vertices[1:]):
            if abs(p0[1] - p1[1]) < 1e-14:  # horizontal: -int Gamma^y dx
                total -= _axis_line_integral(gy, grid.periods, 0, p0[0], p1[0], {1: p0[1]})
            elif abs(p0[0] - p1[0]) < 1e-14:  # vertical: +int Gamma^x dy
                total += _axis_line_integral(gx, grid.periods, 1, p0[1], p1[1], {0: p0[0]})
            else:
                raise ValueError("method 'exact' needs axis-aligned segments")
        return total
    ix = _Interpolator(gx, grid.periods, method)
    iy = _Interpolator(gy, grid.periods, method)
    spacing = min(grid.spacing(0), grid.spacing(1))
    total = 0.0
    for p0, p1 in zip(curve.vertices[:-1], curve.vertices[1:]):
        pts, length = _segment_points(p0, p1, spacing, density)
        if length == 0.0:
            continue
        dx = (p1[0] - p0[0]) / length
        dy = (p1[1] - p0[1]) / length
        vals = ix(pts) * dy - iy(pts) * dx
        h = length / (len(pts) - 1)
        total += h * (0.5 * vals[0] + float(vals[1:-1].sum()) + 0.5 * vals[-1])
    return total


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box boundary in the periodic 3D cell, outward-oriented."""

    bounds: tuple  # ((x0, x1), (y0, y1), (z0, z1))

    @staticmethod
    def cube(x0, x1, y0, y1, z0, z1) -> "BoxSpec":
        return BoxSpec(((float(x0), float(x1)), (float(y0), float(y1)), (float(z0), float(z1))))


def surface_integral(
    gamma,
    grid: GridField,
    u_t: np.ndarray,
    box: BoxSpec,
    fun_bindings: dict | None = None,
    params: dict | None = None,
    extra_fields: dict | None = None,
    density: float = 2.0,
    method: str = "cubic",
) -> float:
    """Outward flux of Gamma through the boundary of an axis-aligned box."""
    if grid.dim != 3:
        raise ValueError("surface integrals are three-dimensional")
    comps = [
        evaluate_on_grid(g, grid, u_t, fun_bindings, params, extra_fields)
        for g in gamma
    ]
    if method == "exact":
        total = 0.0
        for axis in (0, 1, 2):
            others = [a for a in (0, 1, 2) if a != axis]
            hat = np.fft.fftn(comps[axis]) / comps[axis].size
            for side, sign in ((box.bounds[axis][1], 1.0), (box.bounds[axis][0], -1.0)):
                factors = [None, None, None]
                factors[axis] = _point_factors(
                    comps[axis].shape[axis], grid.periods[axis], side
                )
                for o in others:
                    lo, hi = box.bounds[o]
                    factors[o] = _interval_factors(
                        comps[axis].shape[o], grid.periods[o], lo, hi
                    )
                total += sign * float(
                    np.real(np.einsum("abc,a,b,c->", hat, *factors))
                )
        return total
    interps = [_Interpolator(c, grid.periods, method) for c in comps]
    total = 0.0
    axes = (0, 1, 2)
    for axis in axes:
        others = [a for a in axes if a != axis]
        (a0, a1), (b0, b1) = box.bounds[others[0]], box.bounds[others[1]]
        na = max(2, int(math.ceil((a1 - a0) / grid.spacing(others[0]) * density)) + 1)
        nb = max(2, int(math.ceil((b1 - b0) / grid.spacing(others[1]) * density)) + 1)
        avals = np.linspace(a0, a1, na)
        bvals = np.linspace(b0, b1, nb)
        wa = np.ones(na)
        wa[0] = wa[-1] = 0.5
        wb = np.ones(nb)
        wb[0] = wb[-1] = 0.5
        ha = (a1 - a0) / (na - 1)
        hb = (b1 - b0) / (nb - 1)
        weights = np.outer(wa, wb).ravel()
        aa, bb = np.meshgrid(avals, bvals, indexing="ij")
        for side, sign in ((box.bounds[axis][1], 1.0), (box.bounds[axis][0], -1.0)):
            pts = np.zeros((na * nb, 3))
            pts[:, axis] = side
            pts[:, others[0]] = aa.ravel()
            pts[:, others[1]] = bb.ravel()
            vals = interps[axis](pts)
            total += sign * float((weights * vals).sum()) * ha * hb
    return total


def check_constraint(
    T_expr: JetExpr,
    u0: GridField,
    fun_bindings: dict | None = None,
    params: dict | None = None,
    tolerance: float = 1e-9,
) -> tuple[float, str, float]:
    """Cell integral of a density at the initial data, with a verdict.

    Returns (value, verdict, threshold) where the verdict is "satisfied"
    iff |value| <= tolerance * cell volume * field scale.
    """
    integrand = evaluate_on_grid(T_expr, u0, None, fun_bindings, params)
    value = float(integrand.mean()) * u0.cell_volume()
    scale = max(float(np.max(np.abs(integrand))), 1e-30)
    threshold = tolerance * u0.cell_volume() * scale
    verdict = "satisfied" if abs(value) <= threshold else "violated"
    return value, verdict, threshold


def extract_source_sink(trajectory, F_expr: JetExpr, params: dict | None = None):
    """Source/sink series w(t) = mean(u_t - F) and its spatial deviation.

    u_t is approximated by centered differences of consecutive trajectory
    samples, so the deviation measures how x-independent u_t - F is at
    the sampling resolution.
    """
    times, ws, devs = [], [], []
    fields = trajectory.fields
    for k in range(1, len(fields) - 1):
        dt_c = trajectory.times[k + 1] - trajectory.times[k - 1]
        ut = (fields[k + 1].data - fields[k - 1].data) / dt_c
        F = evaluate_on_grid(F_expr, fields[k], None, None, params)
        resid = ut - F
        w = float(resid.mean())
        times.append(trajectory.times[k])
        ws.append(w)
        devs.append(float(np.max(np.abs(resid - w))))
    return times, ws, devs


@dataclass
class ChargeReport:
    """Time series of a charge or constraint integral with its tolerance."""

    kind: str
    descriptor: str
    times: list
    values: list
    tolerance: float
    verdict: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")

    def to_text(self) -> str:
        lines = [
            f"kind: {self.kind}",
            f"descriptor: {self.descriptor}",
            f"tolerance: {float(self.tolerance)!r}",
            f"verdict: {self.verdict}",
        ]
        for key in sorted(self.meta):
            value = self.meta[key]
            if isinstance(value, (float, np.floating)):
                value = float(value)
            lines.append(f"meta.{key}: {value!r}")
        lines.append("columns: time value")
        for t, v in zip(self.times, self.values):
            lines.append(f"{float(t)!r} {float(v)!r}")
        return "\n".join(lines) + "\n"
