"""Rock and fluid constitutive relations.

All quantities are SI.  Saturation arguments are *wetting* saturations
``s_w``; the simulator's primary unknown is the non-wetting saturation
``s_n = 1 - s_w`` and converts at the call site.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MILLIDARCY = 9.869233e-16  # m^2
CENTIPOISE = 1e-3  # Pa s
DAY = 86400.0  # s

DEFAULT_EPSILON_S = 1e-3


@dataclass(frozen=True)
class FluidProps:
    rho_w: float = 1000.0
    rho_n: float = 700.0
    mu_w: float = 1.0 * CENTIPOISE
    mu_n: float = 10.0 * CENTIPOISE
    g: float = 9.81

    def __post_init__(self):
        for name in ("rho_w", "rho_n", "mu_w", "mu_n"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not np.isfinite(self.g) or self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")


@dataclass(frozen=True, eq=False)
class RockProps:
    """Per-cell porosity and diagonal permeability ``perm[:, axis]``."""

    porosity: np.ndarray
    perm: np.ndarray
    s_wr: float = 0.0
    s_nr: float = 0.0

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.porosity, dtype=float))
        perm = np.asarray(self.perm, dtype=float)
        if perm.ndim == 1:
            perm = np.repeat(perm[:, None], 3, axis=1)
        if perm.shape != (len(phi), 3):
            raise ValueError(f"perm shape {perm.shape} does not match {len(phi)} cells")
        if np.any(~np.isfinite(phi)) or np.any(phi <= 0) or np.any(phi > 1):
            raise ValueError("porosity must lie in (0, 1]")
        if np.any(~np.isfinite(perm)) or np.any(perm < 0):
            raise ValueError("permeability must be non-negative")
        if self.s_wr < 0 or self.s_nr < 0 or self.s_wr + self.s_nr >= 1:
            raise ValueError("residual saturations need 0 <= s_wr + s_nr < 1")
        object.__setattr__(self, "porosity", phi)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def uniform(cls, n, porosity, perm, s_wr=0.0, s_nr=0.0):
        perm = np.broadcast_to(np.asarray(perm, dtype=float), (3,))
        return cls(np.full(n, float(porosity)), np.tile(perm, (n, 1)), s_wr, s_nr)

    def __eq__(self, other):
        if not isinstance(other, RockProps):
            return NotImplemented
        return (
            np.array_equal(self.porosity, other.porosity)
            and np.array_equal(self.perm, other.perm)
            and self.s_wr == other.s_wr
            and self.s_nr == other.s_nr
        )

    @property
    def num_cells(self) -> int:
        return len(self.porosity)

    @property
    def mobile_range(self) -> float:
        return 1.0 - self.s_wr - self.s_nr


def _residuals(rock):
    if rock is None:
        return 0.0, 0.0
    return rock.s_wr, rock.s_nr


def effective_saturation(s_w, rock=None, epsilon_s=DEFAULT_EPSILON_S):
    """Clamped effective wetting saturation in ``[epsilon_s, 1]``."""
    s_wr, s_nr = _residuals(rock)
    raw = (np.asarray(s_w, dtype=float) - s_wr) / (1.0 - s_wr - s_nr)
    out = np.clip(raw, epsilon_s, 1.0)
    return out if out.ndim else float(out)


def _effective_with_slope(s_w, rock, epsilon_s):
    s_wr, s_nr = _residuals(rock)
    scale = 1.0 / (1.0 - s_wr - s_nr)
    raw = (np.asarray(s_w, dtype=float) - s_wr) * scale
    se = np.clip(raw, epsilon_s, 1.0)
    inside = (raw >= epsilon_s) & (raw <= 1.0)
    return se, np.where(inside, scale, 0.0)


@dataclass(frozen=True)
class LinearCapillary:
    p0: float
    epsilon_s: float = DEFAULT_EPSILON_S

    def __post_init__(self):
        if not self.p0 > 0:
            raise ValueError(f"linear capillary P0 must be positive, got {self.p0}")
        _check_eps(self.epsilon_s)

    def pressure(self, s_w, rock=None):
        se = effective_saturation(s_w, rock, self.epsilon_s)
        return self.p0 * (1.0 - se)

    def derivative(self, s_w, rock=None):
        _, slope = _effective_with_slope(s_w, rock, self.epsilon_s)
        return -self.p0 * slope


@dataclass(frozen=True)
class BrooksCoreyCapillary:
    pd: float
    lam: float
    epsilon_s: float = DEFAULT_EPSILON_S

    def __post_init__(self):
        if not self.pd > 0:
            raise ValueError(f"entry pressure must be positive, got {self.pd}")
        if not self.lam > 0:
            raise ValueError(f"Brooks-Corey lambda must be positive, got {self.lam}")
        _check_eps(self.epsilon_s)

    def pressure(self, s_w, rock=None):
        se = effective_saturation(s_w, rock, self.epsilon_s)
        return self.pd * se ** (-1.0 / self.lam)

    def derivative(self, s_w, rock=None):
        se, slope = _effective_with_slope(s_w, rock, self.epsilon_s)
        return -(self.pd / self.lam) * se ** (-1.0 / self.lam - 1.0) * slope


@dataclass(frozen=True)
class ZeroCapillary:
    """P_c identically zero (purely hyperbolic saturation block)."""

    epsilon_s: float = DEFAULT_EPSILON_S

    def pressure(self, s_w, rock=None):
        return np.zeros_like(np.asarray(s_w, dtype=float))

    def derivative(self, s_w, rock=None):
        return np.zeros_like(np.asarray(s_w, dtype=float))


def _check_eps(eps):
    if not 0 < eps < 0.5:
        raise ValueError(f"epsilon_s must be a small positive number, got {eps}")


def capillary_pressure(s_w, model, rock=None):
    return model.pressure(s_w, rock)


def capillary_derivative(s_w, model, rock=None):
    """dP_c/ds_w; zero where the effective saturation is clamped."""
    return model.derivative(s_w, rock)


@dataclass(frozen=True)
class QuadraticRelPerm:
    epsilon_s: float = DEFAULT_EPSILON_S

    def evaluate(self, s_w, rock=None):
        """Return ``(k_rw, k_rn, dk_rw/ds_w, dk_rn/ds_w)``."""
        se, slope = _effective_with_slope(s_w, rock, self.epsilon_s)
        krw = se * se
        krn = (1.0 - se) ** 2
        return krw, krn, 2.0 * se * slope, -2.0 * (1.0 - se) * slope


@dataclass(frozen=True)
class CoreyRelPerm:
    lam: float
    epsilon_s: float = DEFAULT_EPSILON_S

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Corey lambda must be positive, got {self.lam}")

    def evaluate(self, s_w, rock=None):
        se, slope = _effective_with_slope(s_w, rock, self.epsilon_s)
        ew = (2.0 + 3.0 * self.lam) / self.lam
        en = (2.0 + self.lam) / self.lam
        krw = se**ew
        one_m = 1.0 - se
        tail = 1.0 - se**en
        krn = one_m**2 * tail
        dkrw = ew * se ** (ew - 1.0) * slope
        dkrn = (-2.0 * one_m * tail - one_m**2 * en * se ** (en - 1.0)) * slope
        return krw, krn, dkrw, dkrn


def relative_permeability(s_w, model, rock=None):
    krw, krn, _, _ = model.evaluate(s_w, rock)
    return krw, krn


def upwind_coefficient(value_i, value_j, flux_indicator):
    """Donor selection: ``value_i`` for flow i -> j, else ``value_j``."""
    return np.where(np.asarray(flux_indicator) > 0, value_i, value_j)
