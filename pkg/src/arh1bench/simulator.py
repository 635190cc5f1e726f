"""Trajectory generation for diagonal ARH(1) processes in coefficient form.

Each component j follows an exact scalar AR(1) recursion

    X[0, j] ~ Normal(0, C_j)                      (stationary start)
    X[n, j] = rho_j * X[n-1, j] + eps[n, j],      eps[n, j] ~ Normal(0, sigma2_j)

with innovations independent across components and time.  Because
sigma2_j = C_j * (1 - rho_j**2), every row of the trajectory has the
stationary coefficient law, so no burn-in is needed.

Draw-order contract: ``simulate`` consumes exactly one (T+1) x k block of
standard normals from its stream; row 0 seeds the initial states and rows
1..T the innovations.  This ordering is part of the reproducibility
contract and must not change between releases.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .spectral_model import ModelRealization

BINARY_MAGIC = b"ARH1TRJ\x00"
_BINARY_HEADER = struct.Struct("<8sII")  # magic, T, k (little-endian, 16 bytes)


@dataclass(frozen=True)
class Trajectory:
    """Simulated coefficient matrix, rows = time 0..T, columns = components.

    ``innovations`` (rows 1..T when recorded) satisfy the reconstruction
    identity coeffs[n] = rho * coeffs[n-1] + innovations[n-1] exactly as
    computed, which pins the simulation to its defining recursion.
    """

    coeffs: np.ndarray
    innovations: np.ndarray | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
            raise ValueError(f"coeffs must be a (T+1) x k matrix, got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("trajectory contains non-finite coefficients")
        object.__setattr__(self, "coeffs", coeffs)
        if self.innovations is not None:
            innov = np.asarray(self.innovations, dtype=float)
            if innov.shape != (coeffs.shape[0] - 1, coeffs.shape[1]):
                raise ValueError(
                    f"innovations shape {innov.shape} does not match "
                    f"trajectory shape {coeffs.shape}"
                )
            if not np.all(np.isfinite(innov)):
                raise ValueError("trajectory contains non-finite innovations")
            object.__setattr__(self, "innovations", innov)

    @property
    def T(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def k(self) -> int:
        return self.coeffs.shape[1]


def simulate(
    real: ModelRealization,
    T: int,
    rng: np.random.Generator,
    record_innovations: bool = False,
) -> Trajectory:
    """Simulate T transitions of the coefficient process.

    Parameters
    ----------
    real : ModelRealization
        Per-component (C, rho, sigma2) triples; all real.k components are
        simulated.
    T : int
        Number of transitions; the result has T+1 rows.
    rng : numpy.random.Generator
        Source of Gaussian variates (numpy's ziggurat standard normal).
    record_innovations : bool
        Store the T x k innovation matrix on the trajectory; needed only by
        the positivity diagnostic.
    """
    if T < 0:
        raise ValueError(f"transition count T must be >= 0, got {T}")
    k = real.k
    z = rng.standard_normal((T + 1, k))
    coeffs = np.empty((T + 1, k))
    coeffs[0] = np.sqrt(real.C) * z[0]
    eps = np.sqrt(real.sigma2) * z[1:]
    if T > 0:
        for j in range(k):
            # lfilter runs the recursion y[n] = eps[n] + rho*y[n-1] in C;
            # with zi = rho*X0 it reproduces the scalar recursion bit for
            # bit.
            rho_j = real.rho[j]
            coeffs[1:, j], _ = lfilter(
                [1.0], [1.0, -rho_j], eps[:, j], zi=[rho_j * coeffs[0, j]]
            )
    return Trajectory(coeffs=coeffs, innovations=eps if record_innovations else None)


def trigonometric_basis(j: int, t: np.ndarray) -> np.ndarray:
    """Orthonormal trigonometric basis on [0, 1].

    phi_1 = 1, phi_2m(t) = sqrt(2) cos(2 pi m t),
    phi_{2m+1}(t) = sqrt(2) sin(2 pi m t).
    """
    if j < 1:
        raise IndexError(f"basis index must be >= 1, got {j}")
    t = np.asarray(t, dtype=float)
    if j == 1:
        return np.ones_like(t)
    m = j // 2
    if j % 2 == 0:
        return np.sqrt(2.0) * np.cos(2.0 * np.pi * m * t)
    return np.sqrt(2.0) * np.sin(2.0 * np.pi * m * t)


def render_curve(traj: Trajectory, row: int, grid, basis="trigonometric") -> np.ndarray:
    """Evaluate the truncated expansion sum_j coeffs[row, j] * phi_j(t) on a grid.

    ``basis`` is either the name of the built-in trigonometric system or a
    callable (j, t_array) -> array for custom orthonormal systems.
    """
    if not 0 <= row <= traj.T:
        raise IndexError(f"row {row} out of range 0..{traj.T}")
    t = np.asarray(grid, dtype=float)
    if t.size == 0:
        raise ValueError("evaluation grid must be nonempty")
    phi = trigonometric_basis if basis == "trigonometric" else basis
    out = np.zeros_like(t)
    for j in range(1, traj.k + 1):
        c = traj.coeffs[row, j - 1]
        if c != 0.0:
            out += c * phi(j, t)
    return out


@dataclass(frozen=True)
class PositivityReport:
    """Per-component minima of the running innovation-state correlations.

    Component j satisfies the positivity condition when every partial sum
    sum_{i<=T'} eps_j(i) * X_{i-1,j}, T' = 2..T, is nonnegative.
    """

    min_partial_sums: np.ndarray
    holds: np.ndarray

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds))


def positivity_diagnostic(traj: Trajectory) -> PositivityReport:
    """Check the empirical positivity condition on a recorded trajectory."""
    if traj.innovations is None:
        raise ValueError("positivity diagnostic requires recorded innovations")
    if traj.T < 2:
        raise ValueError(f"positivity diagnostic requires T >= 2, got T={traj.T}")
    partial = np.cumsum(traj.innovations * traj.coeffs[:-1], axis=0)
    mins = partial[1:].min(axis=0)  # partial sums from T' = 2 on
    return PositivityReport(min_partial_sums=mins, holds=mins >= 0.0)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the coefficient matrix as rows (n, j, x), components 1-based."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "j", "x"])
        for n in range(traj.T + 1):
            for j in range(traj.k):
                writer.writerow([n, j + 1, repr(float(traj.coeffs[n, j]))])


def write_trajectory_binary(traj: Trajectory, path) -> None:
    """Write the coefficient matrix as little-endian float64, row-major.

    Layout: 16-byte header (8-byte magic, uint32 T, uint32 k) followed by
    (T+1)*k doubles.  Innovations are not serialized.
    """
    with open(path, "wb") as fh:
        fh.write(_BINARY_HEADER.pack(BINARY_MAGIC, traj.T, traj.k))
        fh.write(np.ascontiguousarray(traj.coeffs, dtype="<f8").tobytes())


def read_trajectory_binary(path) -> Trajectory:
    """Read a trajectory written by ``write_trajectory_binary``."""
    with open(path, "rb") as fh:
        header = fh.read(_BINARY_HEADER.size)
        magic, T, k = _BINARY_HEADER.unpack(header)
        if magic != BINARY_MAGIC:
            raise ValueError(f"not a trajectory dump: bad magic {magic!r}")
        data = np.frombuffer(fh.read((T + 1) * k * 8), dtype="<f8")
    if data.size != (T + 1) * k:
        raise ValueError("trajectory dump truncated")
    return Trajectory(coeffs=data.reshape(T + 1, k).astype(float))
