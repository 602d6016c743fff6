"""Saleh-Valenzuela mmWave channels for the multi-RIS downlink.

Link classes:

* direct BS -> UE rows ``h_tk`` (1 x M), NLOS clusters only by default;
* BS -> RIS matrices ``H_tl`` (N x M), an LOS cluster plus NLOS clusters;
* RIS -> UE rows ``h_lk`` (1 x N) for every (RIS, UE) pair, likewise.

The effective channel of UE k is ``h_k = h_tk + sum_l h_lk diag(theta_l) H_tl``.

Geometry: the BS sits at the origin with its ULA along the y axis (broadside
+x). The RISs are spread uniformly over an arc of ``ris_arc`` radians (a
quarter circle by default) of radius ``bs_ris_distance`` centred on the BS
broadside, each facing the BS. UEs are dropped at ``ris_ue_distance`` in front
of their serving RIS at random azimuth/zenith.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complexlin import ShapeError

SPEED_OF_LIGHT = 299_792_458.0
_Z = np.array([0.0, 0.0, 1.0])
_BS_ARRAY_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Topology:
    num_bs_antennas: int = 16
    num_ris: int = 4
    ris_nx: int = 4
    ris_ny: int = 4
    max_ue_per_ris: int = 4
    bs_ris_distance: float = 100.0
    ris_ue_distance: float = 2.0
    ris_arc: float = np.pi / 2
    ris_tilt: float = 0.0
    ue_zenith_spread: float = np.pi / 6

    def __post_init__(self):
        for name in ("num_bs_antennas", "num_ris", "ris_nx", "ris_ny", "max_ue_per_ris"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.bs_ris_distance <= 0 or self.ris_ue_distance <= 0:
            raise ValueError("distances must be positive")

    @property
    def elements_per_ris(self) -> int:
        return self.ris_nx * self.ris_ny

    @property
    def num_ue_slots(self) -> int:
        """K, the number of UE slots the networks are dimensioned for."""
        return self.num_ris * self.max_ue_per_ris

    def serving_ris(self, k: int) -> int:
        return k // self.max_ue_per_ris

    def ris_positions(self) -> np.ndarray:
        """(L, 3) RIS centres on the arc around the BS broadside."""
        L = self.num_ris
        step = self.ris_arc / L
        az = -self.ris_arc / 2 + (np.arange(L) + 0.5) * step
        r = self.bs_ris_distance
        return np.stack([r * np.cos(az), r * np.sin(az), np.zeros(L)], axis=1)

    def ris_frames(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit normals (facing the BS, rotated by ``ris_tilt``) and in-plane horizontal axes."""
        pos = self.ris_positions()
        back = -pos[:, :2] / np.linalg.norm(pos[:, :2], axis=1, keepdims=True)
        c, s = np.cos(self.ris_tilt), np.sin(self.ris_tilt)
        nx = c * back[:, 0] - s * back[:, 1]
        ny = s * back[:, 0] + c * back[:, 1]
        normals = np.stack([nx, ny, np.zeros_like(nx)], axis=1)
        tangents = np.stack([-ny, nx, np.zeros_like(nx)], axis=1)
        return normals, tangents


@dataclass(frozen=True)
class ClusterParams:
    num_clusters: int = 4
    paths_per_cluster: int = 5
    include_los: bool = True
    angular_spread_deg: float = 7.5

    def __post_init__(self):
        if self.num_clusters < 1 or self.paths_per_cluster < 1:
            raise ValueError("num_clusters and paths_per_cluster must be >= 1")
        if self.angular_spread_deg < 0:
            raise ValueError("angular_spread_deg must be non-negative")


@dataclass(frozen=True)
class PathLossModel:
    reference_loss_db: float = 61.34
    exponent_los: float = 2.0
    exponent_nlos: float = 2.92
    wavelength: float = SPEED_OF_LIGHT / 28e9
    antenna_spacing: float | None = None  # None -> half a wavelength
    ris_gain: float = 1.0

    def __post_init__(self):
        if self.exponent_los <= 0 or self.exponent_nlos <= 0:
            raise ValueError("path-loss exponents must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.antenna_spacing is not None and self.antenna_spacing <= 0:
            raise ValueError("antenna_spacing must be positive")
        if self.ris_gain <= 0:
            raise ValueError("ris_gain must be positive")

    @property
    def spacing_ratio(self) -> float:
        """d / lambda."""
        if self.antenna_spacing is None:
            return 0.5
        return self.antenna_spacing / self.wavelength


@dataclass(frozen=True)
class ChannelParams:
    """Cluster settings per link class plus the shared path-loss model."""

    direct: ClusterParams = field(default_factory=lambda: ClusterParams(include_los=False))
    bs_ris: ClusterParams = field(default_factory=ClusterParams)
    ris_ue: ClusterParams = field(default_factory=ClusterParams)
    path_loss: PathLossModel = field(default_factory=PathLossModel)


@dataclass(frozen=True)
class Geometry:
    ue_positions: np.ndarray  # (K, 3)


@dataclass(frozen=True)
class ChannelRealization:
    direct: np.ndarray  # (K, M)
    bs_to_ris: np.ndarray  # (L, N, M)
    ris_to_ue: np.ndarray  # (L, K, N)

    def __post_init__(self):
        K, M = self.direct.shape
        L, N, M2 = self.bs_to_ris.shape
        if M2 != M or self.ris_to_ue.shape != (L, K, N):
            raise ShapeError("inconsistent channel dimensions")
        for arr in (self.direct, self.bs_to_ris, self.ris_to_ue):
            arr.flags.writeable = False

    @property
    def num_ue(self) -> int:
        return self.direct.shape[0]

    @property
    def num_ris(self) -> int:
        return self.bs_to_ris.shape[0]

    @property
    def elements_per_ris(self) -> int:
        return self.bs_to_ris.shape[1]

    @property
    def num_bs_antennas(self) -> int:
        return self.direct.shape[1]


# --------------------------------------------------------------------------
# array responses and path loss


def ula_response(M: int, theta, d_over_lambda: float = 0.5) -> np.ndarray:
    """ULA response, entry m is exp(j 2 pi (d/lambda) m sin(theta)).

    ``theta`` may be an array; the element index is the trailing axis.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    m = np.arange(M)
    return np.exp(1j * 2 * np.pi * d_over_lambda * np.sin(theta)[..., None] * m)


def upa_response(nx: int, ny: int, azimuth, elevation, d_over_lambda: float = 0.5) -> np.ndarray:
    """UPA response with entry (p, q) = exp(j 2 pi (d/lambda)(p sin(az) sin(el) + q cos(el))).

    Entries are flattened with p as the slow index (n = p * ny + q).
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    az = np.asarray(azimuth, dtype=np.float64)[..., None, None]
    el = np.asarray(elevation, dtype=np.float64)[..., None, None]
    p = np.arange(nx)[:, None]
    q = np.arange(ny)[None, :]
    phase = 2 * np.pi * d_over_lambda * (p * np.sin(az) * np.sin(el) + q * np.cos(el))
    out = np.exp(1j * phase)
    return out.reshape(out.shape[:-2] + (nx * ny,))


def path_loss(model: PathLossModel, distance: float, los: bool) -> float:
    """Linear power gain 10^(-(PL0 + 10 n log10 d)/10) of the log-distance model."""
    distance = np.asarray(distance, dtype=np.float64)
    if np.any(distance <= 0):
        raise ValueError("distance must be positive")
    n = model.exponent_los if los else model.exponent_nlos
    loss_db = model.reference_loss_db + 10.0 * n * np.log10(distance)
    gain = 10.0 ** (-loss_db / 10.0)
    return gain if gain.ndim else float(gain)


# --------------------------------------------------------------------------
# geometry


def _local_angles(direction: np.ndarray, normal: np.ndarray, tangent: np.ndarray):
    """(azimuth, zenith) of unit vector(s) in a RIS frame."""
    az = np.arctan2(direction @ tangent, direction @ normal)
    el = np.arccos(np.clip(direction @ _Z, -1.0, 1.0))
    return az, el


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def draw_geometry(rng: np.random.Generator, topology: Topology) -> Geometry:
    """Drop one UE per slot in front of its serving RIS."""
    K = topology.num_ue_slots
    pos = topology.ris_positions()
    normals, tangents = topology.ris_frames()
    az = rng.uniform(-np.pi / 2, np.pi / 2, size=K)
    s = topology.ue_zenith_spread
    el = rng.uniform(np.pi / 2 - s, np.pi / 2 + s, size=K)
    ris_idx = np.arange(K) // topology.max_ue_per_ris
    u = (
        (np.sin(el) * np.cos(az))[:, None] * normals[ris_idx]
        + (np.sin(el) * np.sin(az))[:, None] * tangents[ris_idx]
        + np.cos(el)[:, None] * _Z
    )
    return Geometry(ue_positions=pos[ris_idx] + topology.ris_ue_distance * u)


# --------------------------------------------------------------------------
# assembling SV sums from explicit paths


def assemble_row(gains, steering, amplitudes) -> np.ndarray:
    """sum_p amp_p * g_p * a_p^H as a row; ``steering`` is (P, n)."""
    w = np.asarray(amplitudes) * np.asarray(gains)
    return w @ np.conj(steering)


def assemble_matrix(gains, rx_steering, tx_steering, amplitudes) -> np.ndarray:
    """sum_p amp_p * g_p * a_rx,p a_tx,p^H; steering arrays are (P, n_rx) and (P, n_tx)."""
    w = np.asarray(amplitudes) * np.asarray(gains)
    return (np.asarray(rx_steering).T * w) @ np.conj(tx_steering)


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def _path_amplitudes(clusters: ClusterParams, pl_model: PathLossModel, distance: float, gain: float = 1.0):
    """Per-path amplitude sqrt(PL * G / (N_cl * L_p)); LOS paths (if any) come first."""
    P = clusters.paths_per_cluster
    norm = gain / (clusters.num_clusters * P)
    nlos = np.full(clusters.num_clusters * P, np.sqrt(path_loss(pl_model, distance, False) * norm))
    if not clusters.include_los:
        return nlos
    los = np.full(P, np.sqrt(path_loss(pl_model, distance, True) * norm))
    return np.concatenate([los, nlos])


def _ula_angles(rng, clusters: ClusterParams, los_angle: float | None) -> np.ndarray:
    P = clusters.paths_per_cluster
    spread = np.deg2rad(clusters.angular_spread_deg)
    centers = rng.uniform(-np.pi / 2, np.pi / 2, size=clusters.num_clusters)
    ang = np.repeat(centers, P) + spread * rng.standard_normal(clusters.num_clusters * P)
    if clusters.include_los:
        ang = np.concatenate([np.full(P, los_angle), ang])
    return ang


def _upa_angles(rng, clusters: ClusterParams, los_angles: tuple[float, float] | None):
    P = clusters.paths_per_cluster
    C = clusters.num_clusters
    spread = np.deg2rad(clusters.angular_spread_deg)
    az_c = rng.uniform(-np.pi / 2, np.pi / 2, size=C)
    el_c = rng.uniform(0.0, np.pi, size=C)
    az = np.repeat(az_c, P) + spread * rng.standard_normal(C * P)
    el = np.repeat(el_c, P) + spread * rng.standard_normal(C * P)
    if clusters.include_los:
        az = np.concatenate([np.full(P, los_angles[0]), az])
        el = np.concatenate([np.full(P, los_angles[1]), el])
    return az, el


def _n_paths(clusters: ClusterParams) -> int:
    return (clusters.num_clusters + int(clusters.include_los)) * clusters.paths_per_cluster


# --------------------------------------------------------------------------
# per-link draws


def draw_direct_channel(
    rng: np.random.Generator,
    topology: Topology,
    clusters: ClusterParams,
    pl_model: PathLossModel,
    geometry: Geometry,
    k: int,
) -> np.ndarray:
    """BS -> UE k row (length M)."""
    if not 0 <= k < geometry.ue_positions.shape[0]:
        raise IndexError(f"UE index {k} out of range")
    ue = geometry.ue_positions[k]
    dist = float(np.linalg.norm(ue))
    los_aod = float(np.arcsin(np.clip(_unit(ue) @ _BS_ARRAY_AXIS, -1, 1)))
    aod = _ula_angles(rng, clusters, los_aod)
    gains = _cn(rng, aod.size)
    steer = ula_response(topology.num_bs_antennas, aod, pl_model.spacing_ratio)
    return assemble_row(gains, steer, _path_amplitudes(clusters, pl_model, dist))


def draw_bs_ris_channel(
    rng: np.random.Generator,
    topology: Topology,
    clusters: ClusterParams,
    pl_model: PathLossModel,
    ell: int,
) -> np.ndarray:
    """BS -> RIS ell matrix (N x M)."""
    pos = topology.ris_positions()[ell]
    normals, tangents = topology.ris_frames()
    dist = float(np.linalg.norm(pos))
    los_aod = float(np.arcsin(np.clip(_unit(pos) @ _BS_ARRAY_AXIS, -1, 1)))
    los_aoa = _local_angles(_unit(-pos), normals[ell], tangents[ell])
    aod = _ula_angles(rng, clusters, los_aod)
    aoa_az, aoa_el = _upa_angles(rng, clusters, los_aoa)
    gains = _cn(rng, aod.size)
    d = pl_model.spacing_ratio
    tx = ula_response(topology.num_bs_antennas, aod, d)
    rx = upa_response(topology.ris_nx, topology.ris_ny, aoa_az, aoa_el, d)
    amps = _path_amplitudes(clusters, pl_model, dist, pl_model.ris_gain)
    return assemble_matrix(gains, rx, tx, amps)


def draw_ris_ue_channel(
    rng: np.random.Generator,
    topology: Topology,
    clusters: ClusterParams,
    pl_model: PathLossModel,
    geometry: Geometry,
    ell: int,
    k: int,
) -> np.ndarray:
    """RIS ell -> UE k row (length N)."""
    pos = topology.ris_positions()[ell]
    normals, tangents = topology.ris_frames()
    delta = geometry.ue_positions[k] - pos
    dist = float(np.linalg.norm(delta))
    los_aod = _local_angles(_unit(delta), normals[ell], tangents[ell])
    az, el = _upa_angles(rng, clusters, los_aod)
    gains = _cn(rng, az.size)
    steer = upa_response(topology.ris_nx, topology.ris_ny, az, el, pl_model.spacing_ratio)
    amps = _path_amplitudes(clusters, pl_model, dist, pl_model.ris_gain)
    return assemble_row(gains, steer, amps)


def draw_ris_channels(
    rng: np.random.Generator,
    topology: Topology,
    params: ChannelParams,
    geometry: Geometry,
) -> tuple[np.ndarray, np.ndarray]:
    """All BS -> RIS matrices (L, N, M) and RIS -> UE rows (L, K, N)."""
    L, K = topology.num_ris, topology.num_ue_slots
    bs_ris = np.stack(
        [draw_bs_ris_channel(rng, topology, params.bs_ris, params.path_loss, ell) for ell in range(L)]
    )
    ris_ue = np.stack(
        [
            np.stack(
                [
                    draw_ris_ue_channel(rng, topology, params.ris_ue, params.path_loss, geometry, ell, k)
                    for k in range(K)
                ]
            )
            for ell in range(L)
        ]
    )
    return bs_ris, ris_ue


def draw_realization(
    rng: np.random.Generator,
    topology: Topology,
    params: ChannelParams,
    geometry: Geometry | None = None,
) -> ChannelRealization:
    """One draw of every link. A geometry is dropped first if none is given."""
    if geometry is None:
        geometry = draw_geometry(rng, topology)
    direct = np.stack(
        [
            draw_direct_channel(rng, topology, params.direct, params.path_loss, geometry, k)
            for k in range(topology.num_ue_slots)
        ]
    )
    bs_ris, ris_ue = draw_ris_channels(rng, topology, params, geometry)
    return ChannelRealization(direct=direct, bs_to_ris=bs_ris, ris_to_ue=ris_ue)


def expected_link_power(clusters: ClusterParams, pl_model: PathLossModel, distance: float, gain: float = 1.0) -> float:
    """E|entry|^2 of one SV link entry (unit-modulus steering, CN(0,1) gains)."""
    return float(np.sum(_path_amplitudes(clusters, pl_model, distance, gain) ** 2))


# --------------------------------------------------------------------------


def effective_channel(real: ChannelRealization, reflections) -> np.ndarray:
    """Per-UE effective rows h_k = h_tk + sum_l h_lk diag(theta_l) H_tl, stacked (K, M)."""
    refl = np.asarray(reflections, dtype=np.complex128)
    L, N = real.num_ris, real.elements_per_ris
    if refl.shape != (L, N):
        raise ShapeError(f"expected reflections of shape {(L, N)}, got {refl.shape}")
    weighted = real.ris_to_ue * refl[:, None, :]
    return real.direct + np.matmul(weighted, real.bs_to_ris).sum(axis=0)
