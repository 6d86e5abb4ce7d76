"""
This module contains the functions necessary to load a simulation scenario,
either from a JSON file or from the scenarios shipped with `magconfine`, as a
frozen `Scenario` suitable for further processing by `magconfine.runner`.

A scenario (schema version 1) is a single JSON document:

    {
      "schema": 1,
      "name": "fig1",
      "description": "...",
      "domain": {"kind": "disc", "R": 1.0},
      "field": "1/(1-r)",
      "parameters": {},
      "collars": {"outer": {"N": 0.5, "epsilon": 0.6}},
      "particle": {"charge": 1.0, "mass": 1.0},
      "initial_conditions": {
        "explicit": [{"q": [0.5, 0.0], "v": [0.0, 1.0]}],
        "random": {"count": 10, "r_min": 0.0, "r_max": 0.5, "speed": 1.0}
      },
      "T": 500.0,
      "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12, "c_step": 0.1,
                     "n_floor_ratio": 1e-6},
      "output": {"cadence": 0.1, "record_steps": false},
      "seed": 1
    }

Collar entries may also declare a decomposition ("M", "alpha", "C_f") and an
analytic tangential bound "D_C".
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field as dc_field, replace
from importlib.resources import files
from typing import Mapping, Optional

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_SEED = 2**64 - 1


class ScenarioError(ValueError):
    """Invalid scenario. Carries the source file, the line and column of JSON
    syntax errors, or the key path of the offending entry."""

    def __init__(
        self,
        message: str,
        source: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
        key: Optional[str] = None,
    ):
        self.source, self.line, self.column, self.key = source, line, column, key
        where = source or "<scenario>"
        if line is not None:
            where += f":{line}:{column}"
        if key is not None:
            where += f" [{key}]"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    R: Optional[float] = None
    R1: Optional[float] = None
    R2: Optional[float] = None

    @property
    def components(self) -> tuple:
        return ("outer",) if self.kind == "disc" else ("outer", "inner")


@dataclass(frozen=True)
class CollarSettings:
    N: Optional[float] = None
    epsilon: float = 0.5
    M: Optional[float] = None
    alpha: Optional[float] = None
    C_f: Optional[float] = None
    D_C: Optional[float] = None


@dataclass(frozen=True)
class RandomDraws:
    count: int
    r_min: float
    r_max: float
    speed: float = 1.0


@dataclass(frozen=True)
class InitialConditions:
    explicit: tuple = ()
    random: Optional[RandomDraws] = None

    @property
    def count(self) -> int:
        return len(self.explicit) + (self.random.count if self.random else 0)


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    c_step: float = 0.1
    n_floor_ratio: float = 1e-6


@dataclass(frozen=True)
class OutputSettings:
    cadence: Optional[float] = 0.1
    record_steps: bool = False


@dataclass(frozen=True)
class ParticleSettings:
    charge: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class Scenario:
    name: str
    domain: DomainSpec
    field: str
    T: float
    description: str = ""
    parameters: Mapping = dc_field(default_factory=dict)
    collars: Mapping = dc_field(default_factory=dict)
    particle: ParticleSettings = ParticleSettings()
    initial_conditions: InitialConditions = InitialConditions()
    integrator: IntegratorSettings = IntegratorSettings()
    output: OutputSettings = OutputSettings()
    seed: int = 0
    source: Optional[str] = dc_field(default=None, compare=False)

    def collar(self, component: str) -> CollarSettings:
        return self.collars.get(component, CollarSettings())

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("source")
        out["schema"] = SCHEMA_VERSION
        out["domain"] = {k: v for k, v in out["domain"].items() if v is not None}
        out["initial_conditions"]["explicit"] = [
            {"q": list(q), "v": list(v)} for q, v in self.initial_conditions.explicit
        ]
        return out

    def with_overrides(
        self, seed: Optional[int] = None, particles: Optional[int] = None
    ) -> "Scenario":
        """Returns a copy with the seed and/or the total number of particles
        replaced. Explicit starts are kept first (truncated if needed); the
        remainder is drawn at random, from the scenario's band or, without
        one, from the middle half of the domain at unit speed."""

        scenario = self
        if seed is not None:
            _check_seed(seed, "--seed")
            scenario = replace(scenario, seed=int(seed))
        if particles is not None:
            if particles < 0:
                raise ScenarioError("particle count must be nonnegative", key="--particles")
            ic = scenario.initial_conditions
            explicit = ic.explicit[:particles]
            remaining = particles - len(explicit)
            draws = ic.random or _default_band(scenario.domain)
            random = replace(draws, count=remaining) if remaining > 0 else None
            scenario = replace(scenario, initial_conditions=InitialConditions(explicit, random))
        return scenario


def _default_band(domain: DomainSpec) -> RandomDraws:
    inner, outer = (0.0, domain.R) if domain.kind == "disc" else (domain.R1, domain.R2)
    width = outer - inner
    return RandomDraws(0, inner + 0.25 * width, inner + 0.75 * width, 1.0)


def _check_seed(seed, key: str, source: Optional[str] = None):
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ScenarioError("seed must be an integer in [0, 2^64)", source=source, key=key)


class _Reader:
    """Walks a JSON mapping, rejecting unknown keys and reporting key paths."""

    def __init__(self, source: Optional[str]):
        self.source = source

    def fail(self, message: str, key: str):
        raise ScenarioError(message, source=self.source, key=key)

    def mapping(self, value, key: str, allowed: tuple, required: tuple = ()) -> dict:
        if not isinstance(value, Mapping):
            self.fail("expected an object", key)
        unknown = sorted(set(value) - set(allowed))
        if unknown:
            self.fail(f"unknown key(s) {', '.join(map(repr, unknown))}", key)
        missing = [k for k in required if k not in value]
        if missing:
            self.fail(f"missing key(s) {', '.join(map(repr, missing))}", key)
        return dict(value)

    def number(self, value, key: str, positive: bool = False, optional: bool = False):
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail("expected a number", key)
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            self.fail("expected a finite number", key)
        if positive and not value > 0:
            self.fail("must be positive", key)
        return value

    def vector(self, value, key: str) -> tuple:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            self.fail("expected a list of two numbers", key)
        return tuple(self.number(c, f"{key}[{i}]") for i, c in enumerate(value))


def _parse_domain(reader: _Reader, raw) -> DomainSpec:
    raw = reader.mapping(raw, "domain", ("kind", "R", "R1", "R2"), ("kind",))
    kind = raw["kind"]
    if kind == "disc":
        reader.mapping(raw, "domain", ("kind", "R"), ("R",))
        return DomainSpec("disc", R=reader.number(raw["R"], "domain.R", positive=True))
    if kind == "annulus":
        reader.mapping(raw, "domain", ("kind", "R1", "R2"), ("R1", "R2"))
        R1 = reader.number(raw["R1"], "domain.R1", positive=True)
        R2 = reader.number(raw["R2"], "domain.R2", positive=True)
        if not R1 < R2:
            reader.fail("R1 must be smaller than R2", "domain")
        return DomainSpec("annulus", R1=R1, R2=R2)
    reader.fail(f"unknown domain kind {kind!r} (expected 'disc' or 'annulus')", "domain.kind")


def _parse_collars(reader: _Reader, raw, domain: DomainSpec) -> dict:
    raw = reader.mapping(raw, "collars", domain.components)
    collars = {}
    for name, entry in raw.items():
        key = f"collars.{name}"
        entry = reader.mapping(entry, key, ("N", "epsilon", "M", "alpha", "C_f", "D_C"))
        settings = CollarSettings(
            N=reader.number(entry.get("N"), f"{key}.N", positive=True, optional=True),
            epsilon=reader.number(entry.get("epsilon", 0.5), f"{key}.epsilon"),
            M=reader.number(entry.get("M"), f"{key}.M", optional=True),
            alpha=reader.number(entry.get("alpha"), f"{key}.alpha", optional=True),
            C_f=reader.number(entry.get("C_f"), f"{key}.C_f", optional=True),
            D_C=reader.number(entry.get("D_C"), f"{key}.D_C", optional=True),
        )
        if not 0 < settings.epsilon < 1:
            reader.fail("epsilon must lie in (0, 1)", f"{key}.epsilon")
        if (settings.M is None) != (settings.alpha is None):
            reader.fail("M and alpha must be declared together", key)
        if settings.M == 0:
            reader.fail("M must be nonzero", f"{key}.M")
        if settings.alpha is not None and settings.alpha < 1:
            reader.fail("alpha must be >= 1", f"{key}.alpha")
        for attr in ("C_f", "D_C"):
            if getattr(settings, attr) is not None and getattr(settings, attr) < 0:
                reader.fail(f"{attr} must be nonnegative", f"{key}.{attr}")
        collars[name] = settings
    return collars


def _parse_initial_conditions(reader: _Reader, raw) -> InitialConditions:
    raw = reader.mapping(raw, "initial_conditions", ("explicit", "random"))
    explicit = []
    entries = raw.get("explicit", [])
    if not isinstance(entries, list):
        reader.fail("expected a list", "initial_conditions.explicit")
    for i, entry in enumerate(entries):
        key = f"initial_conditions.explicit[{i}]"
        entry = reader.mapping(entry, key, ("q", "v"), ("q", "v"))
        explicit.append((reader.vector(entry["q"], f"{key}.q"), reader.vector(entry["v"], f"{key}.v")))

    random = None
    if raw.get("random") is not None:
        key = "initial_conditions.random"
        entry = reader.mapping(raw["random"], key, ("count", "r_min", "r_max", "speed"), ("count", "r_max"))
        count = entry["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            reader.fail("count must be a nonnegative integer", f"{key}.count")
        random = RandomDraws(
            count=count,
            r_min=reader.number(entry.get("r_min", 0.0), f"{key}.r_min"),
            r_max=reader.number(entry["r_max"], f"{key}.r_max", positive=True),
            speed=reader.number(entry.get("speed", 1.0), f"{key}.speed", positive=True),
        )
        if not 0 <= random.r_min < random.r_max:
            reader.fail("expected 0 <= r_min < r_max", key)
    return InitialConditions(tuple(explicit), random)


def parse_scenario(raw: Mapping, source: Optional[str] = None) -> Scenario:
    """Returns a Scenario from a decoded JSON mapping.

    :param raw: Decoded scenario document
    :type raw: Mapping
    :param source: File name used in error messages, defaults to None
    :type source: str, optional

    :returns: Validated scenario
    :rtype: Scenario
    """

    reader = _Reader(source)
    allowed = (
        "schema", "name", "description", "domain", "field", "parameters", "collars",
        "particle", "initial_conditions", "T", "integrator", "output", "seed",
    )
    raw = reader.mapping(raw, "$", allowed, ("domain", "field", "T"))

    if raw.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        reader.fail(f"unsupported schema version {raw['schema']!r}", "schema")

    domain = _parse_domain(reader, raw["domain"])

    if not isinstance(raw["field"], str) or not raw["field"].strip():
        reader.fail("expected a non-empty expression string", "field")

    parameters = raw.get("parameters", {})
    if not isinstance(parameters, Mapping):
        reader.fail("expected an object", "parameters")
    parameters = {k: reader.number(v, f"parameters.{k}") for k, v in parameters.items()}

    particle = reader.mapping(raw.get("particle", {}), "particle", ("charge", "mass"))
    particle = ParticleSettings(
        charge=reader.number(particle.get("charge", 1.0), "particle.charge"),
        mass=reader.number(particle.get("mass", 1.0), "particle.mass", positive=True),
    )
    if particle.charge == 0:
        reader.fail("charge must be nonzero", "particle.charge")

    integrator = reader.mapping(
        raw.get("integrator", {}), "integrator", ("rel_tol", "abs_tol", "c_step", "n_floor_ratio")
    )
    integrator = IntegratorSettings(
        **{k: reader.number(v, f"integrator.{k}", positive=True) for k, v in integrator.items()}
    )
    if not integrator.n_floor_ratio < 1:
        reader.fail("n_floor_ratio must lie in (0, 1)", "integrator.n_floor_ratio")

    output = reader.mapping(raw.get("output", {}), "output", ("cadence", "record_steps"))
    record_steps = output.get("record_steps", False)
    if not isinstance(record_steps, bool):
        reader.fail("expected true or false", "output.record_steps")
    output = OutputSettings(
        cadence=reader.number(output.get("cadence", 0.1), "output.cadence", positive=True, optional=True),
        record_steps=record_steps,
    )

    seed = raw.get("seed", 0)
    _check_seed(seed, "seed", source)

    name = raw.get("name")
    if name is None:
        name = os.path.splitext(os.path.basename(source))[0] if source else "scenario"

    return Scenario(
        name=str(name),
        description=str(raw.get("description", "")),
        domain=domain,
        field=raw["field"],
        parameters=parameters,
        collars=_parse_collars(reader, raw.get("collars", {}), domain),
        particle=particle,
        initial_conditions=_parse_initial_conditions(reader, raw.get("initial_conditions", {})),
        T=reader.number(raw["T"], "T", positive=True),
        integrator=integrator,
        output=output,
        seed=seed,
        source=source,
    )


def loads_scenario(text: str, source: Optional[str] = None) -> Scenario:
    """Parse a scenario from JSON text, reporting syntax errors by line and
    column."""

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    return parse_scenario(raw, source=source)


def load_scenario(fpath: str) -> Scenario:
    """Loads a scenario from a local JSON file.

    :param fpath: Filepath of the scenario
    :type fpath: str

    :returns: Validated scenario
    :rtype: Scenario
    """

    try:
        with open(fpath, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario ({exc.strerror})", source=str(fpath)) from None
    return loads_scenario(text, source=str(fpath))


def list_builtin() -> list:
    """Names of the scenarios shipped with `magconfine`."""

    return sorted(
        entry.name[: -len(".json")]
        for entry in files("magconfine.scenarios").iterdir()
        if entry.name.endswith(".json")
    )


def load_builtin(name: str) -> Scenario:
    """Loads one of the shipped scenarios by name (see `list_builtin`)."""

    resource = files("magconfine.scenarios") / f"{name}.json"
    if not resource.is_file():
        raise ScenarioError(
            f"no built-in scenario {name!r}; available: {', '.join(list_builtin())}"
        )
    return loads_scenario(resource.read_text(encoding="utf-8"), source=f"{name}.json")


def resolve_scenario(name_or_path: str) -> Scenario:
    """Loads a scenario from a path, or a shipped scenario when no such file
    exists and the argument is a built-in name."""

    if os.path.exists(name_or_path) or name_or_path.endswith(".json"):
        return load_scenario(name_or_path)
    return load_builtin(name_or_path)
