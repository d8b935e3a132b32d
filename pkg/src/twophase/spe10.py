"""Reader and synthetic generator for SPE10-layout rock property files.

The layout is plain whitespace-separated ASCII with x varying fastest,
then y, then z.  A permeability file holds either one block (isotropic)
or three consecutive blocks (kx, ky, kz), all in millidarcy; a porosity
file holds one block of dimensionless values.  The full SPE10 model 2
grid is 60 x 220 x 85.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .rockfluid import MILLIDARCY, RockProps

log = logging.getLogger(__name__)

SPE10_DIMS = (60, 220, 85)


class Spe10FormatError(ValueError):
    pass


def _read_values(path, expected, what):
    path = Path(path)
    tokens = path.read_text().split()
    try:
        values = np.array(tokens, dtype=float)
    except ValueError:
        for pos, tok in enumerate(tokens):
            try:
                float(tok)
            except ValueError:
                raise Spe10FormatError(
                    f"{path}: non-numeric {what} token {tok!r} at value index {pos}"
                ) from None
        raise
    if not np.all(np.isfinite(values)):
        pos = int(np.flatnonzero(~np.isfinite(values))[0])
        raise Spe10FormatError(f"{path}: non-finite {what} value at index {pos}")
    if len(values) not in expected:
        want = " or ".join(str(e) for e in expected)
        raise Spe10FormatError(f"{path}: found {len(values)} {what} values, expected {want}")
    return values


def _check_slab(origin, extent, dims):
    origin = tuple(int(v) for v in origin)
    extent = tuple(int(v) for v in extent)
    if len(origin) != 3 or len(extent) != 3:
        raise ValueError("origin and extent must be index triples")
    for o, e, d, ax in zip(origin, extent, dims, "xyz"):
        if e < 1 or o < 0 or o + e > d:
            raise ValueError(f"slab along {ax} ({o}..{o + e - 1}) lies outside 0..{d - 1}")
    return origin, extent


def _slab(block, dims, origin, extent):
    nx, ny, nz = dims
    cube = block.reshape(nz, ny, nx)
    (i0, j0, k0), (ni, nj, nk) = origin, extent
    return cube[k0:k0 + nk, j0:j0 + nj, i0:i0 + ni].ravel()


def load_spe10_slab(perm_path, poro_path, origin=(0, 0, 0), extent=None, dims=SPE10_DIMS,
                    min_porosity=1e-3):
    """Cut a slab out of SPE10-layout files and return it as SI rock properties.

    ``origin`` and ``extent`` are cell-index triples; the slab maps onto a
    scenario grid of shape ``extent`` cell-for-cell in the same x-fastest
    order.  Porosity below ``min_porosity`` (SPE10 contains zero-porosity
    cells) is raised to that floor.
    """
    dims = tuple(int(d) for d in dims)
    extent = dims if extent is None else extent
    origin, extent = _check_slab(origin, extent, dims)
    n = int(np.prod(dims))
    perm = _read_values(perm_path, (n, 3 * n), "permeability")
    poro = _read_values(poro_path, (n,), "porosity")
    if np.any(perm < 0):
        raise Spe10FormatError(f"{perm_path}: negative permeability")
    blocks = [perm[k * n:(k + 1) * n] for k in range(len(perm) // n)]
    k_cols = [_slab(b, dims, origin, extent) * MILLIDARCY for b in blocks]
    k = np.column_stack(k_cols * 3 if len(k_cols) == 1 else k_cols)
    phi = _slab(poro, dims, origin, extent)
    low = phi < min_porosity
    if low.any():
        log.info("raised %d porosity values below %.1e", int(low.sum()), min_porosity)
        phi = np.where(low, min_porosity, phi)
    return RockProps(phi, k)


def lognormal_field(shape, geometric_mean, sigma, correlation=1.5, seed=0):
    """Correlated lognormal field on an (nx, ny, nz) grid, flattened x-fastest.

    A white gaussian field is smoothed with a gaussian kernel of
    ``correlation`` cells, rescaled to unit sample standard deviation and
    exponentiated, so ``log(field / geometric_mean)`` has standard deviation
    ``sigma`` and zero mean in expectation.
    """
    nx, ny, nz = (int(v) for v in shape)
    if not geometric_mean > 0 or sigma < 0 or correlation < 0:
        raise ValueError("need geometric_mean > 0, sigma >= 0, correlation >= 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((nz, ny, nx))
    if correlation > 0:
        z = gaussian_filter(z, correlation, mode="reflect")
    std = z.std()
    if std > 0:
        z /= std
    return (geometric_mean * np.exp(sigma * z)).ravel()


def write_spe10_files(perm_path, poro_path, kx_md, poro, ky_md=None, kz_md=None, per_line=6):
    """Write property arrays (x-fastest) in the SPE10 text layout."""
    blocks = [np.asarray(kx_md, dtype=float)]
    if ky_md is not None or kz_md is not None:
        blocks.append(np.asarray(kx_md if ky_md is None else ky_md, dtype=float))
        blocks.append(np.asarray(kx_md if kz_md is None else kz_md, dtype=float))
    _write_block(perm_path, np.concatenate(blocks), per_line)
    _write_block(poro_path, np.asarray(poro, dtype=float), per_line)


def _write_block(path, values, per_line):
    lines = []
    for start in range(0, len(values), per_line):
        lines.append(" ".join(f"{v:.10g}" for v in values[start:start + per_line]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_synthetic_spe10(perm_path, poro_path, dims=SPE10_DIMS, geometric_mean_md=100.0, sigma=1.0,
                          correlation=1.5, kz_ratio=0.1, porosity=0.2, porosity_sigma=0.0, seed=0):
    """Generate a lognormal stand-in for the SPE10 files.

    Horizontal permeability is lognormal; kz is ``kz_ratio`` times kx.
    Porosity is constant, or lognormal around ``porosity`` when
    ``porosity_sigma > 0`` (clipped to [0.01, 0.5]).
    """
    kx = lognormal_field(dims, geometric_mean_md, sigma, correlation, seed)
    n = len(kx)
    if porosity_sigma > 0:
        phi = np.clip(lognormal_field(dims, porosity, porosity_sigma, correlation, seed + 1), 0.01, 0.5)
    else:
        phi = np.full(n, float(porosity))
    write_spe10_files(perm_path, poro_path, kx, phi, ky_md=kx, kz_md=kz_ratio * kx)
    return kx, phi
