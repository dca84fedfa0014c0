"""Candidate array geometry, random drops and channel synthesis.

Coordinates follow the deployment convention used throughout the package:
the coverage area lies on the xz plane with the origin at its center, y is
the vertical axis, and the BS array is mounted on the xy plane (z = 0).

Channel models
--------------
Communication:  h_k[n] = sqrt(beta_k) exp(-j 2 pi / lambda (d_nk - d_k)),
                beta_k = (lambda / (4 pi d_k))^2
Sensing:        g0[n]  = sqrt(beta_0) exp(-j 2 pi / lambda (d_n0 - d_0)),
                beta_0 = sqrt(lambda^2 / ((4 pi)^3 d_0^4))
Residual SI:    H_SI[i, j] = sqrt(alpha_SI) exp(j phi_ij), phi_ij ~ U[0, 2 pi)

The square root in beta_0 is kept verbatim even though it is unusual for a
two-way radar gain (the conventional radar equation has no outer root).
Distances d_k and d_0 are measured from the reference point, which is the
bottom-left antenna of the candidate array.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError, InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0

# Minimum horizontal distance between a sampled UE/target and the BS.
MIN_STANDOFF_M = 1.0


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def dbm_to_watts(value_dbm):
    return 10.0 ** ((np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)


def wavelength_from_frequency(fc_hz: float) -> float:
    return SPEED_OF_LIGHT / fc_hz


@dataclasses.dataclass(frozen=True)
class ArrayGeometry:
    """Planar lattice of candidate antennas.

    Antenna ``n`` (0-based here) sits at
    ``[x_offset + (n mod Nx) dx, bs_height + (n // Nx) dy, 0]``, i.e. the
    index runs row by row starting from the bottom-left element.
    ``x_offset`` is zero for a full candidate pool and nonzero only for
    sub-arrays carved out of a pool.
    """

    Nx: int
    Ny: int
    dx: float
    dy: float
    bs_height: float
    x_offset: float = 0.0

    def __post_init__(self):
        if int(self.Nx) != self.Nx or int(self.Ny) != self.Ny or self.Nx < 1 or self.Ny < 1:
            raise InvalidArgumentError(f"antenna counts must be positive integers, got Nx={self.Nx}, Ny={self.Ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise InvalidArgumentError(f"antenna spacings must be positive, got dx={self.dx}, dy={self.dy}")

    @property
    def N(self) -> int:
        return self.Nx * self.Ny

    @property
    def positions(self) -> np.ndarray:
        n = np.arange(self.N)
        pos = np.zeros((self.N, 3))
        pos[:, 0] = self.x_offset + np.mod(n, self.Nx) * self.dx
        pos[:, 1] = self.bs_height + (n // self.Nx) * self.dy
        return pos

    @property
    def reference_point(self) -> np.ndarray:
        return np.array([self.x_offset, self.bs_height, 0.0])

    @property
    def center(self) -> np.ndarray:
        return np.array([
            self.x_offset + 0.5 * (self.Nx - 1) * self.dx,
            self.bs_height + 0.5 * (self.Ny - 1) * self.dy,
            0.0,
        ])

    def index_of(self, position, atol: float = 1e-9) -> int:
        """Inverse of the lattice rule; raises if ``position`` is off-lattice."""
        p = np.asarray(position, dtype=float)
        ix = (p[0] - self.x_offset) / self.dx
        iy = (p[1] - self.bs_height) / self.dy
        jx, jy = int(round(ix)), int(round(iy))
        if (abs(ix - jx) * self.dx > atol or abs(iy - jy) * self.dy > atol or abs(p[2]) > atol
                or not (0 <= jx < self.Nx and 0 <= jy < self.Ny)):
            raise InvalidArgumentError(f"position {p} is not on the lattice")
        return jy * self.Nx + jx

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def build_geometry(Nx: int, Ny: int, dx: float, dy: float, bs_height: float) -> ArrayGeometry:
    return ArrayGeometry(Nx=Nx, Ny=Ny, dx=dx, dy=dy, bs_height=bs_height)


@dataclasses.dataclass(frozen=True)
class SystemParams:
    """Link-budget and sensing parameters (SI units, linear scale).

    Defaults reproduce the baseline deployment: 20 W, -80 dBm noise at UEs
    and BS, 1 m^2 RCS variance, -110 dB residual SI, 100-symbol sensing
    block, 15 dB sensing threshold and a 3 GHz carrier.
    """

    K: int = 10
    P_max: float = 20.0
    sigma_k2: float = 1e-11
    sigma_r2: float = 1e-11
    sigma_02: float = 1.0
    alpha_SI: float = 1e-11
    B: int = 100
    gamma_0: float = float(10 ** 1.5)
    N_act: int = 36
    wavelength: float = SPEED_OF_LIGHT / 3e9
    ue_height: float = 1.5
    target_height: float = 1.5
    area_half_width: float = 100.0

    def __post_init__(self):
        if self.K < 0 or int(self.K) != self.K:
            raise InvalidArgumentError(f"K must be a nonnegative integer, got {self.K}")
        for name in ("P_max", "sigma_k2", "sigma_r2", "sigma_02", "alpha_SI", "gamma_0", "wavelength",
                     "area_half_width"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if int(self.B) != self.B or self.B < 1:
            raise InvalidArgumentError(f"B must be an integer >= 1, got {self.B}")
        if int(self.N_act) != self.N_act or self.N_act < 1:
            raise InvalidArgumentError(f"N_act must be a positive integer, got {self.N_act}")

    def validate_for(self, geometry: ArrayGeometry) -> None:
        if self.N_act > geometry.N:
            raise InvalidArgumentError(f"N_act={self.N_act} exceeds the candidate pool size N={geometry.N}")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)


def _distances(positions: np.ndarray, point: np.ndarray, reference: np.ndarray):
    d_n = np.linalg.norm(positions - point, axis=1)
    d_ref = float(np.linalg.norm(reference - point))
    if d_ref == 0.0 or np.any(d_n == 0.0):
        raise DegenerateGeometryError(f"point {point} coincides with an antenna position")
    return d_n, d_ref


def comm_channel(geometry: ArrayGeometry, ue_position, wavelength: float,
                 reference_point=None) -> np.ndarray:
    """Free-space LoS channel from the array to one UE (phase relative to the reference point)."""
    ref = geometry.reference_point if reference_point is None else np.asarray(reference_point, float)
    d_n, d_k = _distances(geometry.positions, np.asarray(ue_position, float), ref)
    beta = (wavelength / (4.0 * math.pi * d_k)) ** 2
    return math.sqrt(beta) * np.exp(-1j * 2.0 * math.pi / wavelength * (d_n - d_k))


def sensing_channel(geometry: ArrayGeometry, target_position, wavelength: float,
                    reference_point=None) -> np.ndarray:
    ref = geometry.reference_point if reference_point is None else np.asarray(reference_point, float)
    d_n, d_0 = _distances(geometry.positions, np.asarray(target_position, float), ref)
    beta0 = math.sqrt(wavelength ** 2 / ((4.0 * math.pi) ** 3 * d_0 ** 4))
    return math.sqrt(beta0) * np.exp(-1j * 2.0 * math.pi / wavelength * (d_n - d_0))


def si_channel(rng: np.random.Generator, N: int, alpha_SI: float) -> np.ndarray:
    if alpha_SI < 0:
        raise InvalidArgumentError("alpha_SI must be nonnegative")
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(N, N))
    return math.sqrt(alpha_SI) * np.exp(1j * phases)


@dataclasses.dataclass(frozen=True, eq=False)
class Scenario:
    """One random drop with its synthesized channels.

    ``h`` has shape (K, N); ``g0`` shape (N,); ``H_SI`` shape (N, N).
    """

    geometry: ArrayGeometry
    params: SystemParams
    ue_positions: np.ndarray
    target_position: np.ndarray
    h: np.ndarray
    g0: np.ndarray
    H_SI: np.ndarray
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.geometry.N

    @property
    def K(self) -> int:
        return self.params.K

    def with_params(self, **changes) -> "Scenario":
        return dataclasses.replace(self, params=self.params.replace(**changes))

    def subset(self, indices: Sequence[int], geometry: ArrayGeometry) -> "Scenario":
        """Restrict to the antennas ``indices`` of the pool.

        ``geometry`` must describe exactly those antennas in lattice order.
        Channels are indexed, not re-synthesized, so phases keep the pool's
        reference point.
        """
        idx = np.asarray(indices, dtype=int)
        if not np.allclose(geometry.positions, self.geometry.positions[idx], atol=1e-9):
            raise InvalidArgumentError("sub-geometry does not match the selected pool antennas")
        return dataclasses.replace(
            self, geometry=geometry, h=self.h[:, idx], g0=self.g0[idx], H_SI=self.H_SI[np.ix_(idx, idx)],
        )

    def to_dict(self) -> dict:
        def cplx(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "geometry": self.geometry.to_dict(),
            "params": dataclasses.asdict(self.params),
            "ue_positions": np.asarray(self.ue_positions).tolist(),
            "target_position": np.asarray(self.target_position).tolist(),
            "h": cplx(self.h),
            "g0": cplx(self.g0),
            "H_SI": cplx(self.H_SI),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        def cplx(x):
            return np.asarray(x["re"], float) + 1j * np.asarray(x["im"], float)

        params = SystemParams(**d["params"])
        K = params.K
        geometry = ArrayGeometry(**d["geometry"])
        h = cplx(d["h"]).reshape(K, geometry.N)
        return cls(
            geometry=geometry,
            params=params,
            ue_positions=np.asarray(d["ue_positions"], float).reshape(K, 3),
            target_position=np.asarray(d["target_position"], float),
            h=h,
            g0=cplx(d["g0"]),
            H_SI=cplx(d["H_SI"]).reshape(geometry.N, geometry.N),
            seed=d.get("seed"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic sub-seed for ``keys`` (independent of execution order)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _sample_ground_point(rng, half_width, height, anchor):
    while True:
        xz = rng.uniform(-half_width, half_width, size=2)
        if math.hypot(xz[0] - anchor[0], xz[1] - anchor[2]) >= MIN_STANDOFF_M:
            return np.array([xz[0], height, xz[1]])


def sample_drop(seed: int, geometry: ArrayGeometry, params: SystemParams) -> Scenario:
    """Uniform UE/target drop over the square coverage area plus all channels."""
    params.validate_for(geometry)
    rng = np.random.default_rng(seed)
    anchor = geometry.reference_point
    ues = np.array([_sample_ground_point(rng, params.area_half_width, params.ue_height, anchor)
                    for _ in range(params.K)]).reshape(params.K, 3)
    target = _sample_ground_point(rng, params.area_half_width, params.target_height, anchor)
    H_SI = si_channel(rng, geometry.N, params.alpha_SI)
    h = np.array([comm_channel(geometry, p, params.wavelength) for p in ues]).reshape(params.K, geometry.N)
    g0 = sensing_channel(geometry, target, params.wavelength)
    return Scenario(geometry=geometry, params=params, ue_positions=ues, target_position=target,
                    h=h, g0=g0, H_SI=H_SI, seed=seed)


def synthesize(geometry: ArrayGeometry, params: SystemParams, ue_positions, target_position,
               si_seed: int, seed: int | None = None) -> Scenario:
    """Channels for given positions on an arbitrary geometry (SI phases from ``si_seed``)."""
    ues = np.asarray(ue_positions, float).reshape(params.K, 3)
    target = np.asarray(target_position, float)
    h = np.array([comm_channel(geometry, p, params.wavelength) for p in ues]).reshape(params.K, geometry.N)
    g0 = sensing_channel(geometry, target, params.wavelength)
    H_SI = si_channel(np.random.default_rng(si_seed), geometry.N, params.alpha_SI)
    return Scenario(geometry=geometry, params=params, ue_positions=ues, target_position=target,
                    h=h, g0=g0, H_SI=H_SI, seed=seed)
