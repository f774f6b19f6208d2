"""Run configuration: a flat TOML file of solver, data and optimizer settings.

Every key has a default, so a file only needs the values it changes.
Unknown keys are rejected.  `load_config` runs all the solver
preconditions that can be checked without a solve (grid conformity, CFL,
coefficient bounds, non-negative weights).
"""
import math
import sys
from dataclasses import asdict, dataclass, fields, replace

from .errors import GeometryError, ParseError, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("generate-data", "reconstruct", "gradcheck", "adjointcheck", "regsearch", "run-case")
INJECTIONS = ("neumann", "dirichlet")
NORMALIZATIONS = ("none", "first", "each")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one run.

    ``amplitude = None`` means ``omega / 2`` for the Neumann source, which
    launches a plane wave of unit peak, and 1 for the Dirichlet source.
    ``delta = None`` means a cut-off width of ``0.1 T``.  ``noise_level``
    is in percent.  ``refine`` is the factor by which the data grid is finer
    than the inversion grid in both ``h`` and ``tau``.
    """

    extents: tuple = ((-3.4, 3.4), (-0.8, 0.8), (-0.4, 0.4))
    inner_extents: tuple = ((-3.2, 3.2), (-0.6, 0.6), (-0.3, 0.3))
    h: float = 0.1
    tau: float = 0.003
    T: float = 1.2
    omega: float = 30.0
    s: float = 1.0
    delta: float = None
    gamma_eps: float = 0.01
    gamma_mu: float = 0.9
    eps0: float = 1.0
    mu0: float = 1.0
    eps_bounds: tuple = (1.0, 15.0)
    mu_bounds: tuple = (1.0, 3.0)
    noise_level: float = 3.0
    seed: int = 1
    alpha_eps: float = 2.0
    alpha_mu: float = 0.2
    normalize: str = "first"
    theta: float = 1e-6
    window: int = 5
    rho: float = 1e-4
    max_iter: int = 150
    restart_every: int = 20
    observation_axis: int = 2
    injection: str = "neumann"
    amplitude: float = None
    component: int = 1
    refine: int = 2
    calibrate: bool = True
    eps_fraction: float = 0.25
    mu_fraction: float = 0.87
    mode: str = "run-case"
    workdir: str = "."
    data: str = ""
    start: str = ""
    gamma_grid: tuple = ((0.01, 0.9),)
    gradcheck_nodes: int = 5

    @property
    def source_amplitude(self):
        if self.amplitude is not None:
            return self.amplitude
        return self.omega / 2.0 if self.injection == "neumann" else 1.0

    @property
    def cutoff_width(self):
        return 0.1 * self.T if self.delta is None else self.delta

    def to_dict(self):
        """Plain dict with lists in place of tuples, ready for TOML or JSON."""
        def plain(v):
            return [plain(x) for x in v] if isinstance(v, (tuple, list)) else v
        return {k: plain(v) for k, v in asdict(self).items()}

    def updated(self, **changes):
        return validate(_coerce(replace(self, **changes)))


KEYS = tuple(f.name for f in fields(RunConfig))
_TUPLES = {"extents", "inner_extents", "eps_bounds", "mu_bounds", "gamma_grid"}


def _tuplify(v):
    return tuple(_tuplify(x) for x in v) if isinstance(v, (list, tuple)) else v


def _coerce(cfg):
    changes = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _TUPLES:
            changes[f.name] = _tuplify(v)
    return replace(cfg, **changes)


def _require(ok, name, message):
    if not ok:
        raise ValidationError(name, message)


def _pairs(name, value, n=None):
    try:
        ok = all(len(p) == 2 and float(p[0]) < float(p[1]) for p in value)
    except TypeError:
        ok = False
    _require(ok and (n is None or len(value) == n), name,
             f"expected {n or 'a list of'} [lo, hi] pairs with lo < hi")


def validate(cfg):
    """Check a `RunConfig`; raises `ValidationError` naming the first bad field."""
    from .domain import build_decomposition, build_grid

    _pairs("extents", cfg.extents, 3)
    _pairs("inner_extents", cfg.inner_extents, 3)
    for name in ("h", "tau", "T", "omega"):
        v = getattr(cfg, name)
        _require(isinstance(v, (int, float)) and math.isfinite(v) and v > 0, name,
                 "must be a positive number")
    try:
        grid = build_grid(cfg.extents, cfg.h)
        build_decomposition(grid, cfg.inner_extents)
        build_grid(cfg.extents, cfg.h / cfg.refine)
    except GeometryError as exc:
        raise ValidationError("h" if "multiple" in str(exc) else "inner_extents", str(exc)) from exc
    n = cfg.T / cfg.tau
    _require(abs(n - round(n)) <= 1e-9 * max(1.0, n), "T", "must be a multiple of tau")
    _require(cfg.s >= 0, "s", "must be non-negative")
    _require(cfg.delta is None or 0 < cfg.delta < cfg.T, "delta", "must lie in (0, T)")
    for name in ("gamma_eps", "gamma_mu"):
        _require(getattr(cfg, name) >= 0, name, "must be non-negative")
    for name, bounds in (("eps_bounds", cfg.eps_bounds), ("mu_bounds", cfg.mu_bounds)):
        _require(len(bounds) == 2 and 1.0 <= bounds[0] < bounds[1], name,
                 "must be [lo, hi] with 1 <= lo < hi")
    _require(cfg.eps_bounds[0] <= cfg.eps0 <= cfg.eps_bounds[1], "eps0", "outside eps_bounds")
    _require(cfg.mu_bounds[0] <= cfg.mu0 <= cfg.mu_bounds[1], "mu0", "outside mu_bounds")
    # eps, mu >= 1 everywhere and = 1 on OUTER nodes, so the fastest speed is 1
    tau_max = cfg.h / math.sqrt(3.0)
    _require(cfg.tau <= tau_max, "tau",
             f"CFL: tau={cfg.tau} exceeds the stability bound {tau_max:.6g} for h={cfg.h}")
    _require(cfg.noise_level >= 0, "noise_level", "must be non-negative")
    _require(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed", "must be a non-negative integer")
    for name in ("alpha_eps", "alpha_mu", "theta", "rho"):
        _require(getattr(cfg, name) > 0, name, "must be positive")
    _require(cfg.window >= 2, "window", "must be at least 2")
    _require(cfg.max_iter >= 1, "max_iter", "must be at least 1")
    _require(cfg.restart_every >= 1, "restart_every", "must be at least 1")
    _require(cfg.normalize in NORMALIZATIONS, "normalize", f"one of {NORMALIZATIONS}")
    _require(cfg.observation_axis in (0, 1, 2), "observation_axis", "must be 0, 1 or 2")
    _require(cfg.component in (0, 1, 2), "component", "must be 0, 1 or 2")
    _require(cfg.injection in INJECTIONS, "injection", f"one of {INJECTIONS}")
    _require(cfg.amplitude is None or cfg.amplitude > 0, "amplitude", "must be positive")
    _require(isinstance(cfg.refine, int) and cfg.refine >= 1, "refine", "must be a positive integer")
    for name in ("eps_fraction", "mu_fraction"):
        _require(0 <= getattr(cfg, name) < 1, name, "must lie in [0, 1)")
    _require(cfg.mode in MODES, "mode", f"one of {MODES}")
    try:
        ok = len(cfg.gamma_grid) > 0 and all(len(p) == 2 and min(p) >= 0 for p in cfg.gamma_grid)
    except TypeError:
        ok = False
    _require(ok, "gamma_grid", "must be a non-empty list of non-negative [gamma_eps, gamma_mu]")
    _require(cfg.gradcheck_nodes >= 1, "gradcheck_nodes", "must be at least 1")
    return cfg


def config_from_mapping(data, base=None):
    """Merge ``data`` into ``base`` (defaults when omitted) and validate."""
    unknown = sorted(set(data) - set(KEYS))
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    cfg = base if base is not None else RunConfig()
    try:
        cfg = replace(cfg, **data)
    except TypeError as exc:
        raise ValidationError("?", str(exc)) from exc
    return validate(_coerce(cfg))


def load_config(path):
    """Read a TOML run file and return the validated `RunConfig`.

    Raises
    ------
    ParseError
        The file is missing or not valid TOML.
    ValidationError
        A key is unknown or a value violates a precondition.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"no such config file: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_mapping(data)


def dump_config(cfg):
    """TOML text for ``cfg``; keys whose value is None are left out."""
    lines = []
    for key, value in cfg.to_dict().items():
        if value is None:
            continue
        lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)
