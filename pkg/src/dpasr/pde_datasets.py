"""Ground-truth data for the benchmark PDE systems.

Analytic solutions for diffusion, Kovasznay flow, the Taylor-Green vortex and
diffusion-reaction; the air preheater comes from the finite-difference solver
in :mod:`dpasr.aph`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .aph import AphConfig, aph_fd_solve

PI = np.pi
SPLITS = ("train", "validation", "test")
# 10201 grid points -> 7500 train / 2701 test
TEST_FRACTION = 2701 / 10201


class UnknownSystem(KeyError):
    pass


# -- analytic solutions -----------------------------------------------------


def diffusion_truth(x, t):
    return np.exp(-t) * np.sin(PI * x)


def kovasznay_lambda(reynolds: float = 20.0) -> float:
    if reynolds <= 0:
        raise ValueError("reynolds must be positive")
    return reynolds / 2 - np.sqrt(reynolds**2 / 4 + 4 * PI**2)


def kovasznay_truth(x, y, reynolds: float = 20.0):
    lam = kovasznay_lambda(reynolds)
    e = np.exp(lam * x)
    u = 1 - e * np.cos(2 * PI * y)
    v = lam / (2 * PI) * e * np.sin(2 * PI * y)
    p = (1 - np.exp(2 * lam * x)) / 2
    return u, v, p


def taylor_green_truth(x, y, t, nu: float = 0.01):
    if nu <= 0:
        raise ValueError("nu must be positive")
    decay = np.exp(-2 * PI**2 * nu * t)
    u = -np.cos(PI * x) * np.sin(PI * y) * decay
    v = np.sin(PI * x) * np.cos(PI * y) * decay
    p = -(np.cos(2 * PI * x) + np.cos(2 * PI * y)) * decay / 4
    return u, v, p


def _dr_p(x):
    return (12 * np.sin(x) * (1 + np.cos(x)) + 4 * np.sin(3 * x)) / 12


def _dr_q(x):
    return np.sin(4 * x) * (1 + np.cos(4 * x)) / 4


def diffusion_reaction_source(x):
    return (36 * np.sin(2 * x) + 64 * np.sin(3 * x) + 90 * np.sin(4 * x) + 189 * np.sin(8 * x)) / 24


def diffusion_reaction_truth(x, t):
    return np.exp(-t) * (_dr_p(x) + _dr_q(x))


# -- systems ----------------------------------------------------------------


@dataclass(frozen=True)
class SystemInfo:
    name: str
    variables: tuple[str, ...]
    outputs: tuple[str, ...]
    headline_metric: str = "relative_l2"
    bounds: tuple[tuple[float, float], ...] = ()


SYSTEMS = {
    "diffusion": SystemInfo("diffusion", ("x", "t"), ("u",), bounds=((0.0, 1.0), (0.0, 1.0))),
    "kovasznay": SystemInfo(
        "kovasznay", ("x", "y"), ("u", "v", "p"), bounds=((-0.5, 1.0), (-0.5, 1.5))
    ),
    "taylor_green": SystemInfo(
        "taylor_green", ("x", "y", "t"), ("u", "v", "p"), bounds=((0.0, 2.0), (0.0, 2.0), (0.0, 1.0))
    ),
    "diffusion_reaction": SystemInfo(
        "diffusion_reaction", ("x", "t"), ("u",), bounds=((-PI, PI), (0.0, 1.0))
    ),
    "aph": SystemInfo(
        "aph",
        ("theta", "z"),
        ("T_fg", "T_mg", "T_fa1", "T_ma1", "T_fa2", "T_ma2"),
        headline_metric="mae",
        bounds=((0.0, 1.0), (0.0, 1.0)),
    ),
}


def system_info(system: str) -> SystemInfo:
    try:
        return SYSTEMS[system]
    except KeyError:
        raise UnknownSystem(
            f"unknown system {system!r} (choose from {', '.join(SYSTEMS)})"
        ) from None


# -- datasets ---------------------------------------------------------------


@dataclass
class Dataset:
    system: str
    variable_names: tuple[str, ...]
    inputs: np.ndarray  # (rows, variables)
    targets: dict[str, np.ndarray]
    split: np.ndarray  # split label per row
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.variable_names = tuple(self.variable_names)
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        n = self.inputs.shape[0]
        if self.inputs.shape != (n, len(self.variable_names)):
            raise ValueError("inputs must have one column per variable")
        self.targets = {k: np.asarray(v, dtype=np.float64).reshape(-1) for k, v in self.targets.items()}
        for name, col in self.targets.items():
            if col.shape[0] != n:
                raise ValueError(f"target {name!r} has {col.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"target {name!r} has non-finite values")
        self.split = np.asarray(self.split, dtype="<U10")
        if self.split.shape != (n,) or not np.isin(self.split, SPLITS).all():
            raise ValueError("split must label every row train/validation/test")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(self.targets)

    def mask(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return self.split == split

    def count(self, split: str) -> int:
        return int(self.mask(split).sum())

    def columns(self, split: str | None = None) -> dict[str, np.ndarray]:
        rows = slice(None) if split is None else self.mask(split)
        return {name: self.inputs[rows, i] for i, name in enumerate(self.variable_names)}

    def pair(self, output: str, split: str | None = None):
        """``(inputs by variable name, targets)`` for one output and split."""
        rows = slice(None) if split is None else self.mask(split)
        return self.columns(split), self.targets[output][rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*self.variable_names, *self.targets, "split"])
        cols = [self.inputs[:, i] for i in range(self.inputs.shape[1])] + list(self.targets.values())
        for r in range(len(self)):
            writer.writerow([repr(float(c[r])) for c in cols] + [self.split[r]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, system: str) -> "Dataset":
        info = system_info(system)
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        rows = list(reader)
        if header[-1] != "split":
            raise ValueError("dataset CSV lacks a split column")
        nvar = len(info.variables)
        if tuple(header[:nvar]) != info.variables:
            raise ValueError(f"expected variables {info.variables}, got {header[:nvar]}")
        values = np.array([[float(v) for v in r[:-1]] for r in rows]).reshape(len(rows), len(header) - 1)
        return cls(
            system=system,
            variable_names=info.variables,
            inputs=values[:, :nvar],
            targets={name: values[:, nvar + i] for i, name in enumerate(header[nvar:-1])},
            split=[r[-1] for r in rows],
        )


def assign_splits(n: int, rng: np.random.Generator, validation_fraction: float = 0.1) -> np.ndarray:
    """Random train/validation/test labels; validation is carved from train."""
    if not 0 <= validation_fraction < 1:
        raise ValueError("validation_fraction must be in [0, 1)")
    perm = rng.permutation(n)
    n_test = int(round(n * TEST_FRACTION))
    n_outer = n - n_test
    n_val = int(round(n_outer * validation_fraction))
    split = np.empty(n, dtype="<U10")
    split[perm[: n_outer - n_val]] = "train"
    split[perm[n_outer - n_val : n_outer]] = "validation"
    split[perm[n_outer:]] = "test"
    return split


def _grid(bounds, n: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _taylor_green_points(n: int, rng: np.random.Generator, time_step: float = 0.1) -> np.ndarray:
    xy = rng.uniform(0.0, 2.0, size=(n, 2))
    # interior in space; t on the 0.1 time grid over [0, 1]
    while True:
        bad = (xy <= 0.0) | (xy >= 2.0)
        if not bad.any():
            break
        xy[bad] = rng.uniform(0.0, 2.0, size=int(bad.sum()))
    n_steps = int(round(1.0 / time_step))
    t = rng.integers(0, n_steps + 1, size=n) * time_step
    return np.column_stack([xy, t])


def _truth(system: str, pts: np.ndarray, params: dict) -> dict[str, np.ndarray]:
    if system == "diffusion":
        return {"u": diffusion_truth(pts[:, 0], pts[:, 1])}
    if system == "diffusion_reaction":
        return {"u": diffusion_reaction_truth(pts[:, 0], pts[:, 1])}
    if system == "kovasznay":
        u, v, p = kovasznay_truth(pts[:, 0], pts[:, 1], params.get("reynolds", 20.0))
        return {"u": u, "v": v, "p": p}
    if system == "taylor_green":
        u, v, p = taylor_green_truth(pts[:, 0], pts[:, 1], pts[:, 2], params.get("nu", 0.01))
        return {"u": u, "v": v, "p": p}
    raise UnknownSystem(system)


def _aph_fields(config: AphConfig):
    sol = aph_fd_solve(config)
    info = SYSTEMS["aph"]
    fields = {}
    for j in range(3):
        fields[info.outputs[2 * j]] = sol.fluid[j]
        fields[info.outputs[2 * j + 1]] = sol.metal[j]
    return sol, fields


def sample_dataset(
    system: str,
    seed: int = 0,
    validation_fraction: float = 0.1,
    grid_points: int = 101,
    n_points: int = 25_000,
    reynolds: float = 20.0,
    nu: float = 0.01,
    aph_config: AphConfig | None = None,
) -> Dataset:
    """Sample a training dataset for ``system``, deterministic given ``seed``.

    Grid systems use a ``grid_points``-per-axis grid; the Taylor-Green vortex
    uses ``n_points`` random interior points.
    """
    info = system_info(system)
    rng = np.random.default_rng(seed)
    params = {"reynolds": reynolds, "nu": nu}
    meta = {"seed": seed}
    if system == "aph":
        config = aph_config or AphConfig()
        sol, fields = _aph_fields(config)
        mesh = np.meshgrid(sol.phi, sol.z, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        targets = {k: v.ravel() for k, v in fields.items()}
        meta.update(sweeps=sol.sweeps, residual=sol.residual)
    else:
        if system == "taylor_green":
            pts = _taylor_green_points(n_points, rng)
            meta["nu"] = nu
        else:
            pts = _grid(info.bounds, grid_points)
            if system == "kovasznay":
                meta["reynolds"] = reynolds
        targets = _truth(system, pts, params)
    split = assign_splits(pts.shape[0], rng, validation_fraction)
    return Dataset(system, info.variables, pts, targets, split, meta)


def evaluation_set(
    system: str,
    n: int = 10_000,
    seed: int = 0,
    reynolds: float = 20.0,
    nu: float = 0.01,
    aph_config: AphConfig | None = None,
) -> Dataset:
    """Independent uniform test sample (all rows labelled ``test``).

    APH values are linearly interpolated from the finite-difference grid.
    """
    info = system_info(system)
    rng = np.random.default_rng([seed, 10_000])
    if system == "taylor_green":
        pts = _taylor_green_points(n, rng)
    else:
        lo = np.array([b[0] for b in info.bounds])
        hi = np.array([b[1] for b in info.bounds])
        pts = rng.uniform(lo, hi, size=(n, len(info.bounds)))
    if system == "aph":
        sol, fields = _aph_fields(aph_config or AphConfig())
        targets = {
            k: RegularGridInterpolator((sol.phi, sol.z), v)(pts) for k, v in fields.items()
        }
    else:
        targets = _truth(system, pts, {"reynolds": reynolds, "nu": nu})
    return Dataset(system, info.variables, pts, targets, np.full(n, "test"), {"seed": seed})
