"""Scalar "energy" maps over discrete configuration spaces.

A configuration is a flat integer array of length ``D`` with entries in
``[0, V)``.  Every model exposes its energy and the gradient of the energy
with respect to the one-hot embedding of the configuration (a ``D x V``
matrix), which is what the gradient-informed proposal consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn


class ModelMismatchError(ValueError):
    pass


class UnknownModelError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigSpace:
    dims: int
    cardinality: int
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.cardinality < 2:
            raise ValueError("cardinality must be >= 2")
        if self.shape is not None and self.shape[0] * self.shape[1] != self.dims:
            raise ValueError(f"shape {self.shape} does not cover {self.dims} sites")

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.dims,):
            raise ModelMismatchError(f"config has shape {x.shape}, expected ({self.dims},)")
        if x.size and (x.min() < 0 or x.max() >= self.cardinality):
            raise ModelMismatchError(f"config values must lie in [0, {self.cardinality})")
        return x

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dims, dtype=np.int64)


class EnergyModel:
    """Base contract.  Subclasses set ``space`` and ``name``."""

    space: ConfigSpace
    name: str

    def energy(self, x) -> float:
        raise NotImplementedError

    def grad_onehot(self, x) -> np.ndarray:
        raise NotImplementedError

    def energy_and_grad(self, x) -> tuple[float, np.ndarray]:
        return self.energy(x), self.grad_onehot(x)

    def energy_after(self, x, z: float, site: int, value: int) -> float:
        """Energy of ``x`` with ``x[site] = value``; ``z`` is the energy of ``x``."""
        y = x.copy()
        y[site] = value
        return self.energy(y)

    def energies(self, configs: np.ndarray) -> np.ndarray:
        """Energies of a ``(N, D)`` batch."""
        return np.array([self.energy(c) for c in configs], dtype=np.float64)


def model_energy(model: EnergyModel, x) -> float:
    return model.energy(model.space.validate(x))


def model_grad_onehot(model: EnergyModel, x) -> np.ndarray:
    return model.grad_onehot(model.space.validate(x))


# -- Ising ----------------------------------------------------------------


def _check_ising_lattice(x) -> tuple[np.ndarray, int]:
    x = np.asarray(x)
    if x.ndim == 2:
        if x.shape[0] != x.shape[1]:
            raise ModelMismatchError(f"Ising lattice must be square, got {x.shape}")
        L = x.shape[0]
    else:
        L = math.isqrt(x.size)
        if L * L != x.size:
            raise ModelMismatchError(f"{x.size} sites do not form a square lattice")
    if x.size and (x.min() < 0 or x.max() > 1):
        raise ModelMismatchError("Ising sites take values 0 or 1")
    return x.reshape(L, L), L


def ising_energy(lattice) -> float:
    """E = -sum over right and down bonds of s_i s_j with periodic wraparound."""
    x, _ = _check_ising_lattice(lattice)
    s = 2 * x.astype(np.int64) - 1
    e = -(s * np.roll(s, -1, axis=1)).sum() - (s * np.roll(s, -1, axis=0)).sum()
    return float(e)


def _neighbor_sum(s: np.ndarray) -> np.ndarray:
    return (np.roll(s, 1, 0) + np.roll(s, -1, 0) + np.roll(s, 1, 1) + np.roll(s, -1, 1))


def ising_grad_onehot(lattice) -> np.ndarray:
    """Entry (i, v) is -(2v - 1) times the spin sum over the 4-neighbourhood of i."""
    x, L = _check_ising_lattice(lattice)
    s = 2 * x.astype(np.int64) - 1
    nb = _neighbor_sum(s).reshape(-1).astype(np.float64)
    return np.stack([nb, -nb], axis=1)


class IsingModel(EnergyModel):
    def __init__(self, L: int):
        if L < 2:
            raise ValueError("lattice side must be >= 2")
        self.L = L
        self.space = ConfigSpace(L * L, 2, (L, L))
        self.name = f"ising:L={L}"
        # neighbours of each site (right, left, down, up), repeats kept for small L
        idx = np.arange(L * L).reshape(L, L)
        self._nbrs = np.stack(
            [np.roll(idx, -1, 1), np.roll(idx, 1, 1), np.roll(idx, -1, 0), np.roll(idx, 1, 0)],
            axis=-1,
        ).reshape(-1, 4)
        self._nbr_lists = [tuple(int(j) for j in row) for row in self._nbrs]

    def energy(self, x) -> float:
        return ising_energy(np.asarray(x).reshape(self.L, self.L))

    def grad_onehot(self, x) -> np.ndarray:
        return ising_grad_onehot(np.asarray(x).reshape(self.L, self.L))

    def energy_after(self, x, z, site, value):
        old = int(x[site])
        if old == value:
            return z
        nb = 0
        for j in self._nbr_lists[site]:
            nb += 2 * int(x[j]) - 1
        # s_new - s_old = 2 (2v - 1) when the spin flips
        return z - (2 * value - 1 - (2 * old - 1)) * nb

    def energies(self, configs):
        c = np.asarray(configs).reshape(-1, self.L, self.L)
        s = 2 * c.astype(np.int64) - 1
        e = -(s * np.roll(s, -1, axis=2)).sum(axis=(1, 2)) - (s * np.roll(s, -1, axis=1)).sum(axis=(1, 2))
        return e.astype(np.float64)


# -- neural network adapter ----------------------------------------------


class NetworkModel(EnergyModel):
    """Logit of a ``nn.Network`` as the energy."""

    def __init__(self, net: nn.Network, name: str = "nn"):
        self.net = net
        self.space = ConfigSpace(net.h * net.w, net.v, (net.h, net.w))
        self.name = name

    def _onehot(self, x):
        return nn.onehot(np.asarray(x), self.net.v).reshape(self.net.h, self.net.w, self.net.v)

    def energy(self, x) -> float:
        z, _ = nn.forward(self.net, self._onehot(x))
        return z

    def grad_onehot(self, x) -> np.ndarray:
        return self.energy_and_grad(x)[1]

    def energy_and_grad(self, x):
        z, tape = nn.forward(self.net, self._onehot(x))
        return z, nn.backward_input(self.net, tape)

    def energies(self, configs):
        return nn.logits(self.net, np.asarray(configs).reshape(-1, self.space.dims))


class ConstantModel(EnergyModel):
    """Same energy everywhere; useful as a degenerate reference chain."""

    def __init__(self, dims: int, cardinality: int = 2, value: float = 0.0):
        self.space = ConfigSpace(dims, cardinality)
        self.value = float(value)
        self.name = f"const:D={dims},V={cardinality},E={value:g}"

    def energy(self, x) -> float:
        return self.value

    def grad_onehot(self, x) -> np.ndarray:
        return np.zeros((self.space.dims, self.space.cardinality))

    def energy_after(self, x, z, site, value):
        return self.value

    def energies(self, configs):
        return np.full(len(configs), self.value)


class SiteFieldModel(EnergyModel):
    """Separable energy ``E(x) = sum_i table[i, x_i]``; its one-hot gradient is ``table``."""

    def __init__(self, table, name: str = "field"):
        self.table = np.asarray(table, dtype=np.float64)
        d, v = self.table.shape
        self.space = ConfigSpace(d, v)
        self.name = name

    def energy(self, x) -> float:
        x = np.asarray(x)
        return float(self.table[np.arange(len(x)), x].sum())

    def grad_onehot(self, x) -> np.ndarray:
        return self.table.copy()

    def energies(self, configs):
        c = np.asarray(configs)
        return self.table[np.arange(c.shape[1]), c].sum(axis=1)


# -- registry -------------------------------------------------------------


def _kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise UnknownModelError(f"expected key=value, got {part!r}")
        out[key.strip()] = val.strip()
    return out


def make_model(name: str) -> EnergyModel:
    """Build a model from its registry name.

    ``ising:L=4``, ``nn:<weights.json>``, ``const:D=3,V=2[,E=0]``.
    """
    kind, _, arg = name.partition(":")
    try:
        if kind == "ising":
            return IsingModel(int(_kv(arg)["L"]))
        if kind == "const":
            kv = _kv(arg)
            model = ConstantModel(int(kv["D"]), int(kv.get("V", 2)), float(kv.get("E", 0.0)))
            model.name = name
            return model
    except (KeyError, ValueError) as exc:
        raise UnknownModelError(f"bad parameters in model name {name!r}: {exc}") from None
    if kind == "nn":
        if not arg:
            raise UnknownModelError("nn model needs a weight file: nn:<path>")
        path = Path(arg)
        if not path.exists():
            raise UnknownModelError(f"weight file not found: {arg}")
        return NetworkModel(nn.load(path), name=name)
    raise UnknownModelError(f"unknown model {name!r}")
