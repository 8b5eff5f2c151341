"""Escape/attraction renderers for the dynamical and parameter planes."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import family

BASIN0 = 0
ESCAPING = 1
UNRESOLVED = 2
CAPTURE = 3  # parameter plane, Basin0 pixels cut off from a = 0

LABEL_NAMES = {BASIN0: "basin0", ESCAPING: "escaping", UNRESOLVED: "unresolved", CAPTURE: "capture"}

TRAP_CAP = 0.5
_CYCLE_TOL = 1e-14
BAND_ROWS = 16  # fixed so that results do not depend on the thread count

# 4-connectivity
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class LabelMismatch(ValueError):
    pass


class EmptySet(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    center: complex
    half_width: float
    half_height: float
    pixels_x: int
    pixels_y: int

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("half extents must be positive")
        if self.pixels_x < 1 or self.pixels_y < 1:
            raise ValueError("pixel counts must be positive")
        if not all(math.isfinite(v) for v in (self.center.real, self.center.imag,
                                              self.half_width, self.half_height)):
            raise ValueError("viewport must be finite")

    @classmethod
    def from_view(cls, x0: float, x1: float, y0: float, y1: float, nx: int, ny: int | None = None,
                  axis_row: bool = False):
        """Viewport [x0, x1] x [y0, y1].

        With ``axis_row`` a window containing the real axis is shifted
        vertically by at most half a pixel so that a row of pixel centers lies on the real axis, which
        keeps real orbits of real parameters on the sample lattice.
        """
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"empty viewport {x0},{x1},{y0},{y1}")
        ny = nx if ny is None else ny
        cy = (y0 + y1) / 2
        if axis_row and y0 <= 0 <= y1:
            dy = (y1 - y0) / ny
            # row centers sit at y1 - (j + 1/2) dy; move the nearest one to 0
            k = min(max(math.floor(y1 / dy), 0), ny - 1)
            cy -= y1 - (k + 0.5) * dy
        return cls(complex((x0 + x1) / 2, cy), (x1 - x0) / 2, (y1 - y0) / 2, nx, ny)

    @property
    def dx(self) -> float:
        return 2 * self.half_width / self.pixels_x

    @property
    def dy(self) -> float:
        return 2 * self.half_height / self.pixels_y

    @property
    def x0(self) -> float:
        return self.center.real - self.half_width

    @property
    def y1(self) -> float:
        return self.center.imag + self.half_height

    def pixel_center(self, i: int, j: int) -> complex:
        """Center of column i, row j (row 0 at the top)."""
        return complex(self.x0 + (i + 0.5) * self.dx, self.y1 - (j + 0.5) * self.dy)

    def pixel_of(self, z: complex) -> tuple[int, int]:
        i = int(math.floor((z.real - self.x0) / self.dx))
        j = int(math.floor((self.y1 - z.imag) / self.dy))
        if not (0 <= i < self.pixels_x and 0 <= j < self.pixels_y):
            raise IndexError(f"{z} lies outside the viewport")
        return i, j

    def centers(self, rows=None) -> np.ndarray:
        js = np.arange(self.pixels_y) if rows is None else np.asarray(rows)
        xs = self.x0 + (np.arange(self.pixels_x) + 0.5) * self.dx
        ys = self.y1 - (js + 0.5) * self.dy
        return xs[None, :] + 1j * ys[:, None]

    def to_dict(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "half_width": self.half_width,
                "half_height": self.half_height, "pixels_x": self.pixels_x,
                "pixels_y": self.pixels_y}


@dataclass
class ClassifiedGrid:
    spec: GridSpec
    labels: np.ndarray  # int8, shape (pixels_y, pixels_x)
    iterations: np.ndarray  # int32
    plane: str  # "dynamical" or "parameter"
    a: complex | None = None
    budget: int = family.DEFAULT_BUDGET

    def label_at(self, z: complex) -> int:
        i, j = self.spec.pixel_of(z)
        return int(self.labels[j, i])

    def histogram(self) -> dict:
        vals, counts = np.unique(self.labels, return_counts=True)
        return {LABEL_NAMES[int(v)]: int(c) for v, c in zip(vals, counts)}


def _majorant(rho):
    """sum_{k>=2} (k-1) rho^k / k! = e^rho (rho - 1) + 1, for real rho >= 0."""
    return family.deriv_a(1, complex(rho)).real


def trap_radius(a) -> float:
    """Largest rho <= 0.5 with |a| (e^rho (rho - 1) + 1) <= rho / 2.

    Every coefficient of f_a is a times a positive number, so on |z| <= rho
    we have |f_a(z)| <= |a| (e^rho (rho - 1) + 1) <= rho / 2, and since the
    majorant over rho increases with rho, f_a also halves |z| on that disk:
    the disk is a certified trap for the basin of 0.
    """
    m = abs(a)
    if m == 0:
        return TRAP_CAP
    ok = lambda r: m * _majorant(r) <= r / 2  # noqa: E731
    if ok(TRAP_CAP):
        return TRAP_CAP
    lo, hi = 0.0, TRAP_CAP
    for _ in range(80):
        mid = (lo + hi) / 2
        if mid == 0 or ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _trap_radius_array(mod_a: np.ndarray) -> np.ndarray:
    """Vectorized ``trap_radius`` over an array of |a| (same bisection)."""
    m = np.asarray(mod_a, dtype=float)
    out = np.full(m.shape, TRAP_CAP)
    need = (m > 0) & (m * _majorant(TRAP_CAP) > TRAP_CAP / 2)
    if need.any():
        mm = m[need]
        lo = np.zeros_like(mm)
        hi = np.full_like(mm, TRAP_CAP)
        for _ in range(80):
            mid = (lo + hi) / 2
            ok = (mid == 0) | (mm * _majorant_vec(mid) <= mid / 2)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out[need] = lo
    return out


def _majorant_vec(rho: np.ndarray) -> np.ndarray:
    return _core_vec(rho.astype(complex)).real


def _core_vec(z: np.ndarray) -> np.ndarray:
    """Vectorized e^z (z - 1) + 1 with the same series/closed-form split as ``family``."""
    out = np.empty_like(z)
    small = np.abs(z) < family._SERIES_RADIUS
    if small.any():
        zs = z[small]
        total = np.zeros_like(zs)
        term = zs.copy()
        for k in range(2, family._SERIES_TERMS + 2):
            term = term * zs / k
            total += (k - 1) * term
        out[small] = total
    big = ~small
    if big.any():
        zb = z[big]
        with np.errstate(over="ignore", invalid="ignore"):
            out[big] = np.exp(zb) * (zb - 1) + 1
    return out


def classify_orbits(a: np.ndarray, z0: np.ndarray, trap: np.ndarray, budget: int,
                    escape_bound: float = family.DEFAULT_ESCAPE_BOUND):
    """Vectorized ``family.orbit`` verdicts for flat arrays of (a, z0, trap).

    Returns (labels, iterations).  The order of checks matches the scalar
    version: escape, then trap, then one more step.  Orbits that close up
    numerically onto a cycle away from 0 (detected against a snapshot
    refreshed at powers of two) are left Unresolved without spending the
    rest of the budget; their iteration count records when that happened.
    """
    n = z0.size
    labels = np.full(n, UNRESOLVED, dtype=np.int8)
    iters = np.full(n, budget, dtype=np.int32)
    idx = np.arange(n)
    z = z0.astype(complex).copy()
    aa = np.broadcast_to(a, z0.shape).astype(complex).copy()
    tr = np.broadcast_to(trap, z0.shape).astype(float).copy()
    snap = z.copy()
    next_snap = 1
    for it in range(budget + 1):
        with np.errstate(invalid="ignore", over="ignore"):
            mod = np.abs(z)
            esc = ~np.isfinite(mod) | (mod > escape_bound)
            hit = ~esc & (mod < tr)
            cyc = ~esc & ~hit & (np.abs(z - snap) <= _CYCLE_TOL * np.maximum(mod, 1.0))
        if it == 0:
            cyc[:] = False
        done = esc | hit | cyc
        if done.any():
            labels[idx[esc]] = ESCAPING
            labels[idx[hit]] = BASIN0
            iters[idx[done]] = it
            keep = ~done
            idx, z, aa, tr, snap = idx[keep], z[keep], aa[keep], tr[keep], snap[keep]
        if it == budget or idx.size == 0:
            break
        if it == next_snap:
            snap = z.copy()
            next_snap *= 2
        # overflow in e^z turns into inf/nan, which the escape test catches
        with np.errstate(over="ignore", invalid="ignore"):
            z = aa * _core_vec(z)
    return labels, iters


def _render(spec: GridSpec, band_fn, threads: int):
    bands = [range(j, min(j + BAND_ROWS, spec.pixels_y)) for j in range(0, spec.pixels_y, BAND_ROWS)]
    labels = np.empty((spec.pixels_y, spec.pixels_x), dtype=np.int8)
    iters = np.empty((spec.pixels_y, spec.pixels_x), dtype=np.int32)
    if threads <= 1:
        results = [band_fn(b) for b in bands]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(band_fn, bands))
    for rows, (lab, it) in zip(bands, results):
        labels[rows.start:rows.stop] = lab
        iters[rows.start:rows.stop] = it
    return labels, iters


def render_dynamical(a: complex, spec: GridSpec, budget: int = family.DEFAULT_BUDGET,
                     threads: int = 1, escape_bound: float = family.DEFAULT_ESCAPE_BOUND
                     ) -> ClassifiedGrid:
    """Classify every pixel z by the orbit of z under f_a."""
    family.check_parameter(a)
    rho = trap_radius(a)

    def band(rows):
        z0 = spec.centers(rows)
        lab, it = classify_orbits(np.complex128(a), z0.reshape(-1), np.float64(rho), budget,
                                  escape_bound)
        return lab.reshape(z0.shape), it.reshape(z0.shape)

    labels, iters = _render(spec, band, threads)
    return ClassifiedGrid(spec, labels, iters, "dynamical", complex(a), budget)


def render_parameter(spec: GridSpec, budget: int = family.DEFAULT_BUDGET, threads: int = 1,
                     main_only: bool = False,
                     escape_bound: float = family.DEFAULT_ESCAPE_BOUND) -> ClassifiedGrid:
    """Classify every pixel a by the orbit of the asymptotic value a under f_a.

    Basin0 covers C^0 and the capture components alike.  With ``main_only``
    the Basin0 pixels not 4-connected to the pixel of a = 0 are relabelled
    ``CAPTURE``; C^0 together with 0 is connected, captures are not
    attached to it.
    """

    def band(rows):
        a = spec.centers(rows).reshape(-1)
        rho = _trap_radius_array(np.abs(a))
        lab, it = classify_orbits(a, a, rho, budget, escape_bound)
        return lab.reshape(len(rows), spec.pixels_x), it.reshape(len(rows), spec.pixels_x)

    labels, iters = _render(spec, band, threads)
    grid = ClassifiedGrid(spec, labels, iters, "parameter", None, budget)
    if main_only:
        grid.labels = _split_main(grid)
    return grid


def _split_main(grid: ClassifiedGrid) -> np.ndarray:
    labels = grid.labels.copy()
    basin = labels == BASIN0
    comp, _ = ndimage.label(basin, structure=_CROSS)
    try:
        i, j = grid.spec.pixel_of(0j)
    except IndexError:
        return labels
    main = comp[j, i]
    if main == 0:
        return labels
    labels[basin & (comp != main)] = CAPTURE
    return labels


@dataclass
class CompactGridSet:
    """A nonempty set of pixels of a grid, optionally with a marked point."""

    spec: GridSpec
    mask: np.ndarray  # bool, shape (pixels_y, pixels_x)
    marked: complex | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.spec.pixels_y, self.spec.pixels_x):
            raise ValueError("mask shape does not match the grid")
        if not self.mask.any():
            raise EmptySet("compact grid sets must be nonempty")
        if self.marked is not None:
            i, j = self.spec.pixel_of(self.marked)
            if not self.mask[j, i]:
                raise ValueError("marked point does not lie in a member pixel")

    def points(self) -> np.ndarray:
        js, is_ = np.nonzero(self.mask)
        return (self.spec.x0 + (is_ + 0.5) * self.spec.dx) + 1j * (self.spec.y1 - (js + 0.5) * self.spec.dy)

    def __len__(self):
        return int(self.mask.sum())

    def complement(self) -> "CompactGridSet":
        return CompactGridSet(self.spec, ~self.mask)


def extract_component(grid: ClassifiedGrid, marked: complex, label: int = BASIN0) -> CompactGridSet:
    """4-connected component of ``label`` pixels containing ``marked``."""
    i, j = grid.spec.pixel_of(marked)
    if grid.labels[j, i] != label:
        raise LabelMismatch(f"pixel of {marked} is {LABEL_NAMES[int(grid.labels[j, i])]}, "
                            f"not {LABEL_NAMES[label]}")
    comp, _ = ndimage.label(grid.labels == label, structure=_CROSS)
    return CompactGridSet(grid.spec, comp == comp[j, i], marked)


PALETTES = ("mono", "classic")


def _colors(grid: ClassifiedGrid, palette: str) -> np.ndarray:
    lab, it = grid.labels, grid.iterations
    rgb = np.zeros(lab.shape + (3,), dtype=np.uint8)
    if palette == "mono":
        rgb[lab == BASIN0] = 255
        rgb[lab == CAPTURE] = 192
        rgb[lab == UNRESOLVED] = 128
        return rgb
    if palette == "classic":
        # blue basin shaded by attraction time, warm escape bands
        shade = (np.minimum(it, 63) * 3).astype(np.uint16)
        b = lab == BASIN0
        rgb[b, 0] = 0
        rgb[b, 1] = (40 + shade[b] // 2).astype(np.uint8)
        rgb[b, 2] = (255 - shade[b] // 2).astype(np.uint8)
        c = lab == CAPTURE
        rgb[c] = (90, 140, 255)
        e = lab == ESCAPING
        band = (it[e] % 16).astype(np.uint16)
        rgb[e, 0] = 255
        rgb[e, 1] = (120 + band * 8).astype(np.uint8)
        rgb[e, 2] = (band * 4).astype(np.uint8)
        return rgb
    raise ValueError(f"unknown palette {palette!r}; choose from {PALETTES}")


def encode_ppm(grid: ClassifiedGrid, palette: str = "classic") -> bytes:
    rgb = _colors(grid, palette)
    h, w = grid.labels.shape
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


def write_image(grid: ClassifiedGrid, palette: str, path) -> None:
    data = encode_ppm(grid, palette)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write image to {os.fspath(path)}: {exc.strerror}") from exc


def sidecar(grid: ClassifiedGrid, palette: str) -> dict:
    return {
        "plane": grid.plane,
        "a": None if grid.a is None else [grid.a.real, grid.a.imag],
        "spec": grid.spec.to_dict(),
        "budget": grid.budget,
        "palette": palette,
        "histogram": grid.histogram(),
    }


def write_sidecar(grid: ClassifiedGrid, palette: str, path) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(sidecar(grid, palette), fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write sidecar to {os.fspath(path)}: {exc.strerror}") from exc
