"""Case configuration files: flat INI sections mirroring the module names.

Unknown keys are hard errors so typos in numerical parameters cannot pass
silently. Exactly one of [geometry] / mesh_path selects the point source.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .geometry import GEOMETRY_KINDS, GeometrySpec


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "case": {"benchmark": str, "out_dir": str, "seed": int, "mesh_path": str,
             "snapshot_every": int, "threads": int},
    "geometry": {"kind": str, "spacing": float, "target_points": int,
                 "coarsen": float, "r1": float, "r2": float, "d": float,
                 "r_inner": float, "a_ellipse": float, "b_ellipse": float,
                 "x0": float, "x1": float, "y0": float, "y1": float,
                 "diameter": float},
    "basis": {"poly_degree": int, "phs_exponent": int},
    "fluid": {"rho": float, "mu": float, "reynolds": float},
    "time": {"mode": str, "dt": float, "scheme": str, "steady_tol": float,
             "max_steps": int, "t_final": float},
    "hyperviscosity": {"enabled": bool, "alpha": int},
}

_GEOM_PARAM_KEYS = ("r1", "r2", "d", "r_inner", "a_ellipse", "b_ellipse",
                    "x0", "x1", "y0", "y1", "diameter")


@dataclass
class CaseConfig:
    benchmark: str
    out_dir: str = "."
    seed: int = 0
    mesh_path: str | None = None
    geometry: GeometrySpec | None = None
    target_points: int | None = None
    poly_degree: int = 3
    phs_exponent: int = 1
    rho: float = 1.0
    mu: float | None = None
    reynolds: float | None = None
    mode: str = "steady"
    dt: float | None = None
    scheme: str = "forward-euler"
    steady_tol: float = 1e-8
    max_steps: int = 100_000
    t_final: float | None = None
    hyper_enabled: bool = False
    hyper_alpha: int = 2
    snapshot_every: int = 0
    threads: int = 1
    extras: dict = field(default_factory=dict)


def _coerce(raw: str, typ, key: str):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {typ.__name__}") from exc


def load_config(path) -> CaseConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")

    problems = []
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {key!r} in [{section}]")
                continue
            try:
                values[section][key] = _coerce(raw, _SCHEMA[section][key],
                                               f"{section}.{key}")
            except ConfigError as exc:
                problems.append(str(exc))

    case = values.get("case", {})
    geom_sec = values.get("geometry", {})
    if "benchmark" not in case:
        problems.append("missing required key 'benchmark' in [case]")
    has_mesh = "mesh_path" in case
    has_geom = "kind" in geom_sec
    if has_mesh == has_geom:
        problems.append("exactly one of [geometry] kind or case.mesh_path "
                        "must be given")

    geometry = None
    target_points = geom_sec.get("target_points")
    if has_geom and not problems:
        kind = geom_sec["kind"]
        if kind not in GEOMETRY_KINDS:
            problems.append(f"unknown geometry kind {kind!r}")
        elif "spacing" not in geom_sec and target_points is None:
            problems.append("geometry needs 'spacing' or 'target_points'")
        else:
            params = {k: geom_sec[k] for k in _GEOM_PARAM_KEYS if k in geom_sec}
            # spacing 1.0 is a placeholder when only target_points is given;
            # the runner resolves it from the geometry's area
            try:
                geometry = GeometrySpec(kind, geom_sec.get("spacing", 1.0),
                                        params=params,
                                        coarsen=geom_sec.get("coarsen", 1.0))
            except Exception as exc:
                problems.append(str(exc))

    fluid = values.get("fluid", {})
    tsec = values.get("time", {})
    mode = tsec.get("mode", "steady")
    if mode not in ("steady", "transient"):
        problems.append(f"time.mode must be steady|transient, got {mode!r}")
    if mode == "transient":
        if "dt" not in tsec:
            problems.append("missing required key 'dt' in [time] (transient mode)")
        if "t_final" not in tsec:
            problems.append("missing required key 't_final' in [time] "
                            "(transient mode)")
    for key in ("rho", "mu", "reynolds"):
        if key in fluid and not fluid[key] > 0:
            problems.append(f"fluid.{key} must be positive")
    if "dt" in tsec and not tsec["dt"] > 0:
        problems.append("time.dt must be positive")

    if problems:
        raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(problems))

    hyper = values.get("hyperviscosity", {})
    basis = values.get("basis", {})
    return CaseConfig(
        benchmark=case["benchmark"],
        out_dir=case.get("out_dir", "."),
        seed=case.get("seed", 0),
        mesh_path=case.get("mesh_path"),
        geometry=geometry,
        target_points=target_points,
        poly_degree=basis.get("poly_degree", 3),
        phs_exponent=basis.get("phs_exponent", 1),
        rho=fluid.get("rho", 1.0),
        mu=fluid.get("mu"),
        reynolds=fluid.get("reynolds"),
        mode=mode,
        dt=tsec.get("dt"),
        scheme=tsec.get("scheme", "forward-euler"),
        steady_tol=tsec.get("steady_tol", 1e-8),
        max_steps=tsec.get("max_steps", 100_000),
        t_final=tsec.get("t_final"),
        hyper_enabled=hyper.get("enabled", False),
        hyper_alpha=hyper.get("alpha", 2),
        snapshot_every=case.get("snapshot_every", 0),
        threads=case.get("threads", 1),
    )
