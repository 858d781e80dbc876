"""Component property database and mixture definition files.

Two plain-text formats are handled here.

Component database (one record per line, ``#`` starts a comment)::

    C1, 190.6, 45.4 bar, 0.008
    nasa C1 200.0 1000.0 6000.0
     a1 ... a9        # coefficients for [Tlow, Tmid]
     a1 ... a9        # coefficients for [Tmid, Thigh]

Mixture spec (INI-like sections)::

    [components]
    C1 = 0.8097
    ...
    [kappa]
    C1, nC4 = 0.02
    [eos]
    pr
    [options]
    normalize = yes

All quantities are converted to SI at this boundary.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, NamedTuple, Sequence

import numpy as np

__all__ = [
    "PR",
    "SRK",
    "Component",
    "EosSpec",
    "FluidDataError",
    "Mixture",
    "Nasa9",
    "default_db",
    "eos_by_name",
    "load_component_db",
    "load_mixture",
    "parse_mixture_spec",
    "serialize_component_db",
    "serialize_mixture",
]


class FluidDataError(ValueError):
    """Malformed or non-physical fluid data; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EosSpec(NamedTuple):
    """Constants of a two-parameter cubic EoS.

    A named tuple so it can be passed straight into compiled kernels.
    ``alpha`` selects the acentric polynomial: 0 = Peng-Robinson (piecewise),
    1 = Soave-Redlich-Kwong.
    """

    delta1: float
    delta2: float
    omega_a: float
    omega_b: float
    alpha: int

    @property
    def name(self) -> str:
        return "pr" if self.alpha == 0 else "srk"


PR = EosSpec(1.0 + math.sqrt(2.0), 1.0 - math.sqrt(2.0), 0.45724, 0.0778, 0)
SRK = EosSpec(0.0, 1.0, 0.42748, 0.08664, 1)


def eos_by_name(name: str) -> EosSpec:
    try:
        return {"pr": PR, "srk": SRK}[name.strip().lower()]
    except KeyError:
        raise FluidDataError(f"unknown equation of state {name!r} (expected pr or srk)") from None


@dataclass(frozen=True)
class Nasa9:
    """Two-range 9-coefficient NASA polynomial for ideal-gas cp/R."""

    t_low: float
    t_mid: float
    t_high: float
    low: tuple[float, ...]
    high: tuple[float, ...]
    source: str = ""

    def as_array(self) -> np.ndarray:
        return np.array([self.low, self.high], dtype=float)


@dataclass(frozen=True)
class Component:
    name: str
    Tc: float  # K
    pc: float  # Pa
    omega: float
    nasa: Nasa9 | None = None


@dataclass(frozen=True, eq=False)
class Mixture:
    """Components, overall composition ``z`` and binary interaction matrix ``kappa``."""

    components: tuple[Component, ...]
    z: np.ndarray
    kappa: np.ndarray
    eos: EosSpec = PR
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        z = np.ascontiguousarray(self.z, dtype=float)
        kappa = np.ascontiguousarray(self.kappa, dtype=float)
        n = len(self.components)
        if n < 1:
            raise FluidDataError("mixture needs at least one component")
        if z.shape != (n,) or kappa.shape != (n, n):
            raise FluidDataError("composition / kappa shape does not match component count")
        if np.any(z <= 0.0):
            raise FluidDataError("all mole fractions must be positive")
        if abs(z.sum() - 1.0) > 1e-12:
            raise FluidDataError(f"mole fractions sum to {z.sum():.15g}, not 1")
        if not np.array_equal(kappa, kappa.T):
            raise FluidDataError("kappa matrix is not symmetric")
        if np.any(np.diag(kappa) != 0.0):
            raise FluidDataError("kappa diagonal must be zero")
        z.flags.writeable = False
        kappa.flags.writeable = False
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "kappa", kappa)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.components]

    def _cached(self, key, build):
        arr = self._arrays.get(key)
        if arr is None:
            arr = np.ascontiguousarray(build(), dtype=float)
            arr.flags.writeable = False
            self._arrays[key] = arr
        return arr

    @property
    def Tc(self) -> np.ndarray:
        return self._cached("Tc", lambda: [c.Tc for c in self.components])

    @property
    def pc(self) -> np.ndarray:
        return self._cached("pc", lambda: [c.pc for c in self.components])

    @property
    def omega(self) -> np.ndarray:
        return self._cached("omega", lambda: [c.omega for c in self.components])

    @property
    def nasa_coeffs(self) -> np.ndarray:
        """(n, 2, 9) coefficient block; raises if any species lacks NASA data."""
        def build():
            missing = [c.name for c in self.components if c.nasa is None]
            if missing:
                raise FluidDataError(f"no NASA polynomial for {', '.join(missing)}")
            return [c.nasa.as_array() for c in self.components]
        return self._cached("nasa", build)

    @property
    def nasa_ranges(self) -> np.ndarray:
        """(n, 3) array of (Tlow, Tmid, Thigh)."""
        self.nasa_coeffs
        return self._cached(
            "nasa_T", lambda: [(c.nasa.t_low, c.nasa.t_mid, c.nasa.t_high) for c in self.components]
        )

    def with_composition(self, z) -> "Mixture":
        return Mixture(self.components, np.asarray(z, dtype=float), self.kappa, self.eos)

    def same_as(self, other: "Mixture") -> bool:
        """Field-wise equality (floats compared exactly)."""
        return (
            self.components == other.components
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.kappa, other.kappa)
            and self.eos == other.eos
        )


# --------------------------------------------------------------------------- parsing

_PRESSURE_UNITS = {"pa": 1.0, "kpa": 1e3, "mpa": 1e6, "bar": 1e5}


def _parse_pressure(text: str, line: int) -> float:
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*", text)
    if not m:
        raise FluidDataError(f"cannot parse pressure {text!r}", line)
    unit = m.group(2).lower() or "bar"
    if unit not in _PRESSURE_UNITS:
        raise FluidDataError(f"unknown pressure unit {m.group(2)!r}", line)
    return float(m.group(1)) * _PRESSURE_UNITS[unit]


def _float(text: str, what: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise FluidDataError(f"cannot parse {what} {text.strip()!r}", line) from None


def _strip_comment(raw: str) -> tuple[str, str]:
    body, _, comment = raw.partition("#")
    return body.strip(), comment.strip()


def load_component_db(source: IO[str] | str | Path) -> dict[str, Component]:
    """Read a component database; returns name -> Component (pressures in Pa).

    ``source`` may be an open text stream, a path, or the text itself when it
    contains a newline.
    """
    text = _read_text(source)
    crit: dict[str, tuple[float, float, float, int]] = {}
    nasa: dict[str, Nasa9] = {}
    pending: tuple[str, float, float, float, str, int] | None = None
    numbers: list[float] = []

    def finish_nasa(line: int):
        nonlocal pending, numbers
        name, tl, tm, th, src, start = pending
        if len(numbers) != 18:
            raise FluidDataError(f"NASA block for {name} has {len(numbers)} coefficients, expected 18", start)
        if not (tl < tm <= th):
            raise FluidDataError(f"NASA ranges for {name} are not ordered", start)
        if tl > 200.0 or th < 1000.0:
            raise FluidDataError(f"NASA ranges for {name} do not cover [200 K, 1000 K]", start)
        nasa[name] = Nasa9(tl, tm, th, tuple(numbers[:9]), tuple(numbers[9:]), src)
        pending, numbers = None, []

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        body, comment = _strip_comment(raw)
        if not body:
            continue
        if pending is not None and len(numbers) < 18 and not body.startswith("nasa") and "," not in body:
            numbers.extend(_float(tok, "NASA coefficient", lineno) for tok in body.split())
            if len(numbers) >= 18:
                finish_nasa(lineno)
            continue
        if pending is not None:
            finish_nasa(lineno)
        if body.startswith("nasa"):
            parts = body.split()
            if len(parts) != 5:
                raise FluidDataError("expected 'nasa <name> <Tlow> <Tmid> <Thigh>'", lineno)
            tl, tm, th = (_float(t, "NASA temperature bound", lineno) for t in parts[2:])
            pending = (parts[1], tl, tm, th, comment, lineno)
            numbers = []
            continue
        fields = [f.strip() for f in body.split(",")]
        if len(fields) != 4:
            raise FluidDataError("expected 'name, Tc_K, pc_bar, omega'", lineno)
        name = fields[0]
        if not name:
            raise FluidDataError("missing component name", lineno)
        if any(not f for f in fields[1:]):
            raise FluidDataError(f"missing field in record for {name}", lineno)
        Tc = _float(fields[1], "critical temperature", lineno)
        pc = _parse_pressure(fields[2], lineno)
        omega = _float(fields[3], "acentric factor", lineno)
        if not (Tc > 0.0 and math.isfinite(Tc)):
            raise FluidDataError(f"non-physical critical temperature {Tc} for {name}", lineno)
        if not (pc > 0.0 and math.isfinite(pc)):
            raise FluidDataError(f"non-physical critical pressure {pc} Pa for {name}", lineno)
        if name in crit:
            raise FluidDataError(f"duplicate record for {name}", lineno)
        crit[name] = (Tc, pc, omega, lineno)
    if pending is not None:
        finish_nasa(len(lines))

    for name in nasa:
        if name not in crit:
            raise FluidDataError(f"NASA block for unknown component {name}")
    return {
        name: Component(name, Tc, pc, omega, nasa.get(name))
        for name, (Tc, pc, omega, _) in crit.items()
    }


def _read_text(source) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, str):
        if "\n" in source or not Path(source).exists():
            return source
        return Path(source).read_text(encoding="utf-8")
    return source.read()


_SECTION = re.compile(r"\[\s*(\w+)\s*\]")


def parse_mixture_spec(source: IO[str] | str | Path, db: dict[str, Component]) -> Mixture:
    """Parse a mixture spec against ``db``; missing kappa entries are zero."""
    text = _read_text(source)
    section = None
    order: list[str] = []
    fracs: dict[str, float] = {}
    pairs: list[tuple[str, str, float, int]] = []
    eos = PR
    normalize = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, _ = _strip_comment(raw)
        if not body:
            continue
        m = _SECTION.fullmatch(body)
        if m:
            section = m.group(1).lower()
            if section not in ("components", "kappa", "eos", "options"):
                raise FluidDataError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise FluidDataError("content before the first section header", lineno)
        if section == "eos":
            eos = eos_by_name(body)
            continue
        key, eq, value = body.partition("=")
        if not eq:
            raise FluidDataError("expected 'key = value'", lineno)
        key, value = key.strip(), value.strip()
        if section == "components":
            if key not in db:
                raise FluidDataError(f"unknown component {key!r}", lineno)
            if key in fracs:
                raise FluidDataError(f"component {key} listed twice", lineno)
            order.append(key)
            fracs[key] = _float(value, "mole fraction", lineno)
        elif section == "kappa":
            names = [s.strip() for s in key.split(",")]
            if len(names) != 2:
                raise FluidDataError("kappa key must be 'name, name'", lineno)
            pairs.append((names[0], names[1], _float(value, "interaction coefficient", lineno), lineno))
        else:
            if key.lower() != "normalize":
                raise FluidDataError(f"unknown option {key!r}", lineno)
            normalize = value.lower() in ("1", "yes", "true", "on")

    if not order:
        raise FluidDataError("mixture spec has no [components]")
    z = np.array([fracs[k] for k in order])
    if np.any(z <= 0.0):
        raise FluidDataError("mole fractions must be positive")
    total = z.sum()
    if normalize:
        z = z / total
    elif abs(total - 1.0) > 1e-8:
        raise FluidDataError(f"mole fractions sum to {total:.10g}; add 'normalize = yes' under [options]")
    elif abs(total - 1.0) > 1e-12:
        z = z / total

    index = {name: i for i, name in enumerate(order)}
    kappa = np.zeros((len(order), len(order)))
    seen: dict[tuple[int, int], float] = {}
    for a, b, val, lineno in pairs:
        for name in (a, b):
            if name not in index:
                raise FluidDataError(f"kappa refers to {name!r}, which is not in [components]", lineno)
        i, j = index[a], index[b]
        if i == j:
            if val != 0.0:
                raise FluidDataError("kappa diagonal must be zero", lineno)
            continue
        key = (min(i, j), max(i, j))
        if key in seen and seen[key] != val:
            raise FluidDataError(f"asymmetric kappa for {a}, {b}", lineno)
        seen[key] = val
        kappa[i, j] = kappa[j, i] = val
    return Mixture(tuple(db[k] for k in order), z, kappa, eos)


def serialize_mixture(mix: Mixture) -> str:
    lines = ["[components]"]
    lines += [f"{c.name} = {zi!r}" for c, zi in zip(mix.components, mix.z.tolist())]
    nz = [(i, j) for i in range(mix.n) for j in range(i + 1, mix.n) if mix.kappa[i, j] != 0.0]
    if nz:
        lines.append("[kappa]")
        lines += [f"{mix.names[i]}, {mix.names[j]} = {float(mix.kappa[i, j])!r}" for i, j in nz]
    lines += ["[eos]", mix.eos.name]
    return "\n".join(lines) + "\n"


def serialize_component_db(db: dict[str, Component]) -> str:
    """Inverse of :func:`load_component_db` (critical pressure written in bar)."""
    out = [f"{c.name}, {c.Tc!r}, {c.pc / 1e5!r} bar, {c.omega!r}" for c in db.values()]
    for c in db.values():
        if c.nasa is None:
            continue
        nz = c.nasa
        out.append(f"nasa {c.name} {nz.t_low!r} {nz.t_mid!r} {nz.t_high!r}" + (f"  # {nz.source}" if nz.source else ""))
        out.append(" ".join(repr(x) for x in nz.low))
        out.append(" ".join(repr(x) for x in nz.high))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------- shipped data

_DEFAULT_DB: dict[str, Component] | None = None


def default_db() -> dict[str, Component]:
    """The shipped database (normal alkanes C1..nC14)."""
    global _DEFAULT_DB
    if _DEFAULT_DB is None:
        text = resources.files("redflash").joinpath("data/components.db").read_text(encoding="utf-8")
        _DEFAULT_DB = load_component_db(io.StringIO(text))
    return _DEFAULT_DB


def load_mixture(name_or_path: str | Path, db: dict[str, Component] | None = None) -> Mixture:
    """Load ``y8``/``my10``/``c2c7`` from the shipped data, or any mixture file."""
    db = default_db() if db is None else db
    path = Path(name_or_path)
    if path.exists():
        return parse_mixture_spec(path.read_text(encoding="utf-8"), db)
    stem = str(name_or_path).removesuffix(".mix")
    res = resources.files("redflash").joinpath(f"data/{stem}.mix")
    if not res.is_file():
        raise FileNotFoundError(f"no mixture file {name_or_path!r}")
    return parse_mixture_spec(res.read_text(encoding="utf-8"), db)


def duplicate_components(mix: Mixture, copies: Sequence[int]) -> Mixture:
    """Split component i into ``copies[i]`` identical pseudo-components.

    Mole fractions are divided evenly so the overall composition per species
    is unchanged; interaction coefficients are inherited (zero between copies).
    """
    comps, z, owner = [], [], []
    for i, (c, k) in enumerate(zip(mix.components, copies)):
        for j in range(k):
            comps.append(c if k == 1 else Component(f"{c.name}_{j + 1}", c.Tc, c.pc, c.omega, c.nasa))
            z.append(mix.z[i] / k)
            owner.append(i)
    owner = np.array(owner)
    kappa = mix.kappa[np.ix_(owner, owner)].copy()
    z = np.array(z)
    return Mixture(tuple(comps), z / z.sum(), kappa, mix.eos)
