"""Gauss-Hermite velocity quadrature against the 2D Maxwellian measure."""

from dataclasses import dataclass

import numpy as np

from .optics import thermal_velocity
from .params import VaporParams

_SQRT_PI = np.sqrt(np.pi)
_SQRT_2 = np.sqrt(2.0)


@dataclass(frozen=True)
class VelocityGrid:
    """Product quadrature for averaging over (v_x, v_z).

    Nodes integrate f(v) against the normalized Gaussian measure with
    per-axis standard deviation v_T; weights sum to 1.
    """

    vx: np.ndarray       # shape (n,), m/s
    vz: np.ndarray       # shape (n,), m/s
    weights: np.ndarray  # shape (n,), dimensionless
    order_x: int
    order_z: int

    def __len__(self) -> int:
        return self.vx.size


def hermite_axis(order: int, v_t: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return _SQRT_2 * v_t * nodes, weights / _SQRT_PI


def build_velocity_grid(vapor: VaporParams, order_x: int, order_z: int) -> VelocityGrid:
    """Tensor-product Gauss-Hermite grid scaled to the vapor's thermal speed.

    Orders must be even so no node sits at v_z = 0, where the convective
    equation degenerates.
    """
    for name, order in (("order_x", order_x), ("order_z", order_z)):
        if order < 2 or order % 2 != 0:
            raise ValueError(f"{name} must be even and >= 2, got {order}")
    v_t = thermal_velocity(vapor)
    x_nodes, x_weights = hermite_axis(order_x, v_t)
    z_nodes, z_weights = hermite_axis(order_z, v_t)
    vx, vz = np.meshgrid(x_nodes, z_nodes, indexing="ij")
    wx, wz = np.meshgrid(x_weights, z_weights, indexing="ij")
    return VelocityGrid(
        vx=vx.ravel(),
        vz=vz.ravel(),
        weights=(wx * wz).ravel(),
        order_x=order_x,
        order_z=order_z,
    )
