"""Line-oriented experiment configuration: ``[section]`` headers, ``key = value``.

Parsing collects every problem (syntax, unknown keys, duplicate keys,
constraint violations) with its line number and a stable error code before
failing, so a config can be fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chain import GridSpec
from .errors import ConfigurationError, StickyDbmError
from .measure import (DENSITY_CATALOG, Density, StickyStructure, points_1d,
                      rect_boundary_2d, truncation_box)
from .simulate import SimConfig

_KNOWN_KEYS = {
    "experiment": {"id"},
    "density": {"kind"},
    "sticky": {"variant", "points", "weights", "rect", "w_surf"},
    "grid": {"h", "L"},
    "sim": {"seed", "T", "n_paths", "start", "burnin", "recording", "rec_dt"},
    "statistics": {"sejour", "ergodic", "crossings", "moments_cells",
                   "moments_delta", "fukushima", "small_ball_radius"},
    "output": {"dir", "paths_csv", "gzip"},
}

_OBSERVABLES = ("one", "x2", "abs")


@dataclass(frozen=True)
class ConfigProblem:
    code: str
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: [{self.code}] {self.message}"


class ConfigParseError(StickyDbmError):
    """Raised with the complete list of problems found in a config."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(str(p) for p in self.problems))


@dataclass
class ExperimentConfig:
    """Fully validated experiment description."""

    experiment_id: str
    density: Density
    sticky: StickyStructure | None
    grid: GridSpec
    sim: SimConfig
    sejour: bool = True
    ergodic: tuple[str, ...] = ()
    crossings: bool = False
    moments_cells: tuple[float, ...] = ()
    moments_delta: float = 0.0
    fukushima: tuple[str, ...] = ()
    small_ball_radius: float = 0.0
    out_dir: str = "out"
    paths_csv: bool = False
    gzip: bool = False
    raw_text: str = ""


def _parse_lines(text):
    """Raw pass: (section, key) -> (value, line), plus syntax/duplicate errors."""
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    problems: list[ConfigProblem] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                problems.append(ConfigProblem("E_SYNTAX", lineno,
                                              f"unterminated section header {raw!r}"))
                continue
            section = line[1:-1].strip().lower()
            if section not in _KNOWN_KEYS:
                problems.append(ConfigProblem("E_UNKNOWN_KEY", lineno,
                                              f"unknown section [{section}]"))
                section = None
            continue
        if "=" not in line:
            problems.append(ConfigProblem("E_SYNTAX", lineno,
                                          f"expected 'key = value', got {raw!r}"))
            continue
        if section is None:
            problems.append(ConfigProblem("E_SYNTAX", lineno,
                                          "key outside of any [section]"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS[section]:
            problems.append(ConfigProblem("E_UNKNOWN_KEY", lineno,
                                          f"unknown key {key!r} in [{section}]"))
            continue
        if (section, key) in entries:
            first_line = entries[(section, key)][1]
            problems.append(ConfigProblem(
                "E_DUP", lineno,
                f"duplicate key {key!r} in [{section}], first set on line {first_line}"))
            continue
        entries[(section, key)] = (value, lineno)
    return entries, problems


class _Reader:
    def __init__(self, entries, problems):
        self.entries = entries
        self.problems = problems

    def get(self, section, key, default=None):
        if (section, key) in self.entries:
            return self.entries[(section, key)][0]
        return default

    def line(self, section, key):
        return self.entries.get((section, key), (None, 0))[1]

    def error(self, section, key, code, message):
        self.problems.append(ConfigProblem(code, self.line(section, key), message))

    def floats(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        except ValueError:
            self.error(section, key, "E_VALUE", f"cannot parse numbers from {raw!r}")
            return default

    def scalar(self, section, key, cast, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError:
            self.error(section, key, "E_VALUE",
                       f"cannot parse {key}={raw!r} as {cast.__name__}")
            return default

    def flag(self, section, key, default=False):
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("yes", "true", "on", "1"):
            return True
        if low in ("no", "false", "off", "0"):
            return False
        self.error(section, key, "E_VALUE", f"expected yes/no, got {raw!r}")
        return default

    def names(self, section, key, default=()):
        raw = self.get(section, key)
        if raw is None:
            return tuple(default)
        return tuple(tok.strip() for tok in raw.split(",") if tok.strip())


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate; raises ConfigParseError listing every problem."""
    entries, problems = _parse_lines(text)
    r = _Reader(entries, problems)

    experiment_id = r.get("experiment", "id", "experiment")

    density = None
    kind = r.get("density", "kind", "gaussian").strip().lower()
    variant = r.get("sticky", "variant", "points1d").strip().lower()
    dim = 2 if variant == "rect2d" else 1
    if kind in DENSITY_CATALOG:
        density = DENSITY_CATALOG[kind](dim)
    else:
        r.error("density", "kind", "E_VALUE",
                f"unknown density {kind!r} (catalog: {sorted(DENSITY_CATALOG)})")

    sticky = None
    if variant == "points1d":
        pts = r.floats("sticky", "points", (0.0,))
        ws = r.floats("sticky", "weights", tuple(1.0 for _ in pts))
        try:
            sticky = points_1d(pts, ws)
        except ConfigurationError as exc:
            r.error("sticky", "points", "E_CONFIG", str(exc))
    elif variant == "rect2d":
        rect = r.floats("sticky", "rect", (-1.0, 1.0, -1.0, 1.0))
        w_surf = r.scalar("sticky", "w_surf", float, 1.0)
        if rect is not None and len(rect) != 4:
            r.error("sticky", "rect", "E_VALUE", "rect needs 4 numbers: a1 b1 a2 b2")
        else:
            try:
                sticky = rect_boundary_2d(*rect, w_surf=w_surf)
            except ConfigurationError as exc:
                r.error("sticky", "rect", "E_CONFIG", str(exc))
    elif variant == "none":
        sticky = None
    else:
        r.error("sticky", "variant", "E_VALUE", f"unknown sticky variant {variant!r}")

    h = r.scalar("grid", "h", float, 0.1)
    L = r.floats("grid", "L", (5.0,) * dim)
    grid = None
    if L is not None and len(L) not in (1, dim):
        r.error("grid", "L", "E_VALUE", f"L needs 1 or {dim} values")
    else:
        if L is not None and len(L) == 1:
            L = L * dim
        try:
            grid = GridSpec(h, truncation_box(L, dim))
            grid.validate_sticky(sticky)
        except ConfigurationError as exc:
            code = getattr(exc, "code", "E_CONFIG")
            line = r.line("grid", "h") or r.line("sticky", "points")
            problems.append(ConfigProblem(code, line, str(exc)))

    seed = r.scalar("sim", "seed", int, 20250808)
    T = r.scalar("sim", "T", float, 1000.0)
    n_paths = r.scalar("sim", "n_paths", int, 16)
    start = r.floats("sim", "start", (0.0,) * dim)
    burnin = r.scalar("sim", "burnin", float, None)
    recording = r.get("sim", "recording", "events").strip().lower()
    rec_dt = r.scalar("sim", "rec_dt", float, 0.0)
    sim = None
    try:
        sim = SimConfig(seed=seed, T=T, n_paths=n_paths,
                        start=tuple(start) if start is not None else 0.0,
                        burnin=burnin, recording=recording, rec_dt=rec_dt)
    except ConfigurationError as exc:
        problems.append(ConfigProblem("E_CONFIG", r.line("sim", "T"), str(exc)))

    ergodic = r.names("statistics", "ergodic")
    for name in ergodic:
        if name not in _OBSERVABLES:
            r.error("statistics", "ergodic", "E_VALUE",
                    f"unknown observable {name!r} (choose from {_OBSERVABLES})")
    fukushima = r.names("statistics", "fukushima")
    if fukushima and sticky is None:
        r.error("statistics", "fukushima", "E_MISSING_TESTFN",
                "fukushima statistics need a sticky structure for the catalog")
    elif fukushima and sticky is not None:
        from .testfunctions import default_catalog

        catalog = default_catalog(sticky)
        for name in fukushima:
            if name not in catalog:
                r.error("statistics", "fukushima", "E_MISSING_TESTFN",
                        f"unknown catalog function {name!r} (catalog: {sorted(catalog)})")

    moments_cells = r.floats("statistics", "moments_cells", ())
    moments_delta = r.scalar("statistics", "moments_delta", float, 0.0)
    if moments_cells and sim is not None and sim.recording != "snapshots":
        r.error("statistics", "moments_cells", "E_CONFIG",
                "increment moments need recording = snapshots")

    if problems:
        raise ConfigParseError(sorted(problems, key=lambda p: p.line))

    return ExperimentConfig(
        experiment_id=experiment_id,
        density=density, sticky=sticky, grid=grid, sim=sim,
        sejour=r.flag("statistics", "sejour", True),
        ergodic=ergodic,
        crossings=r.flag("statistics", "crossings", False),
        moments_cells=moments_cells or (),
        moments_delta=moments_delta or 0.0,
        fukushima=fukushima,
        small_ball_radius=r.scalar("statistics", "small_ball_radius", float, 0.0),
        out_dir=r.get("output", "dir", "out"),
        paths_csv=r.flag("output", "paths_csv", False),
        gzip=r.flag("output", "gzip", False),
        raw_text=text,
    )


def observable_fn(name: str):
    if name == "one":
        return lambda p: 1.0
    if name == "x2":
        return lambda p: float(p[0]) ** 2
    if name == "abs":
        return lambda p: abs(float(p[0]))
    raise ConfigurationError(f"unknown observable {name!r}")
