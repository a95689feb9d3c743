"""Bundled reference tables for the annulus cases and the driven cavity."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

import numpy as np


@dataclass(frozen=True)
class ReferenceTable:
    """Sampled (x, y) stations with reference u, v, p values."""

    coords: np.ndarray   # (n, 2)
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    provenance: str

    def __len__(self):
        return len(self.u)


def _data_path(name: str):
    return resources.files("rbfflow.benchmarks").joinpath("data", name)


def _read_csv(name: str):
    with _data_path(name).open("rb") as fh:
        raw = fh.read()
    lines = [ln for ln in raw.decode().splitlines()
             if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, val in zip(header, ln.split(",")):
            cols[h].append(val)
    return cols, raw


def data_checksum(name: str) -> str:
    """SHA-256 of a bundled fixture file (fixture-fidelity guard)."""
    with _data_path(name).open("rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _load_reference(name: str, provenance: str) -> ReferenceTable:
    cols, _ = _read_csv(name)
    coords = np.column_stack([np.array(cols["x"], dtype=float),
                              np.array(cols["y"], dtype=float)])
    return ReferenceTable(coords=coords,
                          u=np.array(cols["u"], dtype=float),
                          v=np.array(cols["v"], dtype=float),
                          p=np.array(cols["p"], dtype=float),
                          provenance=provenance)


def eccentric_reference() -> ReferenceTable:
    """15 stations along x = -0.35 for the eccentric-annulus case."""
    return _load_reference("eccentric_annulus_reference.csv",
                           "fine-point-set reference, eccentric annulus, x=-0.35")


def ellipse_reference() -> ReferenceTable:
    """15 stations along x = 0 for the elliptical-annulus case."""
    return _load_reference("elliptic_annulus_reference.csv",
                           "fine-point-set reference, elliptical annulus, x=0")


def ghia_reference(re: int):
    """Ghia et al. (1982) centerline profiles for the driven cavity.

    Returns ``(y, u, x, v)``: u along the vertical centerline at the 17
    tabulated y stations and v along the horizontal centerline at the 17
    tabulated x stations. Supported Reynolds numbers: 100 and 400.
    """
    if re not in (100, 400):
        raise ValueError(f"no bundled cavity reference for Re={re}")
    cols, _ = _read_csv(f"ghia_cavity_re{re}.csv")
    profile = np.array(cols["profile"])
    coord = np.array(cols["coord"], dtype=float)
    value = np.array(cols["value"], dtype=float)
    um = profile == "u"
    vm = profile == "v"
    return coord[um], value[um], coord[vm], value[vm]
