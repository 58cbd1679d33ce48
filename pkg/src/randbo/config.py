"""Experiment configuration: a flat text format of dotted keys.

Grammar: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines ignored. Values are integers, reals, booleans (true/false), bare
strings, or comma-separated lists of those. Unknown keys are rejected with
a nearest-match suggestion; validation reports every problem at once, not
just the first.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError

KINDS = (
    "synthetic_bcr",
    "conditional_regret",
    "benchmark",
    "tabular",
    "counterexample",
    "lemma_check",
    "bound_sweep",
)

ALGORITHMS = (
    "gp_ucb",
    "rgp_ucb",
    "irgp_ucb",
    "irgp_ucb_high_prob",
    "irgp_ucb_continuous",
    "gp_ucb_heuristic",
    "irgp_ucb_heuristic",
    "constant_ucb",
    "ei",
    "ts",
    "pims",
)


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _render_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class _Key:
    """One schema entry: how to coerce, check, and default a config key."""

    name: str
    kind: str  # int | real | bool | str | list
    default: object = None
    required: bool = False
    choices: tuple | None = None
    minimum: float | None = None
    maximum: float | None = None
    exclusive_max: float | None = None
    help: str = ""

    def coerce(self, value, errors: list[str]):
        def scalar(v):
            if self.kind == "int":
                if isinstance(v, bool) or not isinstance(v, int):
                    errors.append(f"{self.name}: expected integer, got {v!r}")
                    return None
                return v
            if self.kind == "real":
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    errors.append(f"{self.name}: expected real number, got {v!r}")
                    return None
                return float(v)
            if self.kind == "bool":
                if not isinstance(v, bool):
                    errors.append(f"{self.name}: expected true/false, got {v!r}")
                    return None
                return v
            return str(v)

        if self.kind == "list":
            items = value if isinstance(value, list) else [value]
            return [_parse_scalar(str(i)) if isinstance(i, str) else i for i in items]
        out = scalar(value)
        if out is None:
            return None
        if self.choices is not None and out not in self.choices:
            errors.append(f"{self.name}: {out!r} is not one of {sorted(self.choices)}")
            return None
        if self.minimum is not None and out < self.minimum:
            errors.append(f"{self.name}: {out!r} is below the minimum {self.minimum}")
            return None
        if self.maximum is not None and out > self.maximum:
            errors.append(f"{self.name}: {out!r} is above the maximum {self.maximum}")
            return None
        if self.exclusive_max is not None and out >= self.exclusive_max:
            errors.append(f"{self.name}: {out!r} must be below {self.exclusive_max}")
            return None
        return out


SCHEMA: dict[str, _Key] = {
    k.name: k
    for k in [
        _Key("kind", "str", required=True, choices=KINDS,
             help="experiment family to run"),
        _Key("horizon", "int", default=200, minimum=1,
             help="acquisition rounds per replication"),
        _Key("n_reps", "int", default=100, minimum=1),
        _Key("base_seed", "int", default=0),
        _Key("n_jobs", "int", default=1, minimum=1),
        _Key("output", "str", default=None),
        _Key("overwrite", "bool", default=False),
        _Key("noise_variance", "real", default=None, help="surrogate noise variance"),
        _Key("noise_stddev", "real", default=None, minimum=0.0,
             help="observation noise standard deviation"),
        _Key("kernel.family", "str", default="squared_exponential",
             choices=("squared_exponential", "matern52", "matern32")),
        _Key("kernel.lengthscale", "list", default=[0.1]),
        _Key("kernel.signal_variance", "real", default=1.0),
        _Key("grid.low", "real", default=0.0),
        _Key("grid.high", "real", default=0.9),
        _Key("grid.count", "int", default=10, minimum=1),
        _Key("grid.dim", "int", default=3, minimum=1),
        _Key("algorithms", "list", default=["irgp_ucb"]),
        _Key("acquisition.num_features", "int", default=2000, minimum=1),
        _Key("candidates.count", "int", default=2000, minimum=1),
        _Key("initial.count", "int", default=1, minimum=0),
        _Key("gp_ucb.delta", "real", default=0.1, minimum=0.0, exclusive_max=1.0),
        _Key("rgp_ucb.theta", "real", default=1.0, minimum=0.0),
        _Key("constant_ucb.value", "real", default=1.0),
        _Key("irgp_ucb_high_prob.delta", "real", default=0.1, minimum=0.0, exclusive_max=1.0),
        _Key("irgp_ucb_continuous.a", "real", default=None),
        _Key("irgp_ucb_continuous.b", "real", default=None),
        _Key("irgp_ucb_continuous.r", "real", default=1.0),
        _Key("refit.period", "int", default=None, minimum=1),
        _Key("refit.lengthscales", "list", default=None),
        _Key("refit.signal_variances", "list", default=[1.0]),
        _Key("benchmark.name", "str", default=None,
             choices=("holder_table", "cross_in_tray", "ackley")),
        _Key("benchmark.dim", "int", default=None, minimum=1),
        _Key("tabular.path", "str", default=None),
        _Key("tabular.objective", "str", default=None),
        _Key("counterexample.rho", "real", default=0.0),
        _Key("counterexample.constants", "list", default=[0.5, 1.0, 2.0]),
        _Key("counterexample.horizons", "list", default=[250, 1000]),
        _Key("conditional.n_sequences", "int", default=1, minimum=1),
        _Key("conditional.delta", "real", default=0.1, minimum=0.0, exclusive_max=1.0),
        _Key("lemma.n_configs", "int", default=50, minimum=1),
        _Key("lemma.n_mc", "int", default=100000, minimum=100),
        _Key("lemma.max_grid", "int", default=50, minimum=2),
        _Key("lemma.max_data", "int", default=20, minimum=0),
        _Key("bounds.horizons", "list", default=[100, 200, 400]),
        _Key("bounds.deltas", "list", default=[0.05, 0.1, 0.2]),
        _Key("bounds.domain_size", "int", default=1000, minimum=2),
        _Key("bounds.gamma", "real", default=10.0, minimum=0.0),
        _Key("bounds.a", "real", default=2.0),
        _Key("bounds.b", "real", default=1.0),
        _Key("bounds.r", "real", default=1.0),
        _Key("bounds.dim", "int", default=3, minimum=1),
    ]
}

# Keys that must be present (beyond schema defaults) for specific kinds.
REQUIRED_BY_KIND = {
    "benchmark": ("benchmark.name",),
    "tabular": ("tabular.path", "tabular.objective"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with every key resolved."""

    kind: str
    values: dict = field(repr=False)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def horizon(self) -> int:
        return self.values["horizon"]

    @property
    def n_reps(self) -> int:
        return self.values["n_reps"]

    @property
    def base_seed(self) -> int:
        return self.values["base_seed"]

    @property
    def n_jobs(self) -> int:
        return self.values["n_jobs"]

    @property
    def algorithms(self) -> list[str]:
        return [str(a) for a in self.values["algorithms"]]

    @property
    def noise_variance(self) -> float:
        return self.values["noise_variance"]

    @property
    def noise_stddev(self) -> float:
        return self.values["noise_stddev"]


def parse_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text; collect every error."""
    errors: list[str] = []
    raw: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in raw:
            errors.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        if "," in value:
            raw[key] = [_parse_scalar(v.strip()) for v in value.split(",") if v.strip()]
        else:
            raw[key] = _parse_scalar(value)

    values: dict[str, object] = {}
    for key, value in raw.items():
        spec = SCHEMA.get(key)
        if spec is None:
            hint = difflib.get_close_matches(key, SCHEMA.keys(), n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            errors.append(f"unknown key {key!r}{suggestion}")
            continue
        coerced = spec.coerce(value, errors)
        if coerced is not None:
            values[key] = coerced

    for name, spec in SCHEMA.items():
        if name not in values and spec.default is not None:
            values.setdefault(name, spec.default)
    # contextual defaults: the two-point instance family runs with unit
    # noise, everything else with the small-variance default
    kind = values.get("kind")
    if values.get("noise_variance") is None:
        values["noise_variance"] = 1.0 if kind == "counterexample" else 1e-4
    if values.get("noise_stddev") is None:
        values["noise_stddev"] = math.sqrt(values["noise_variance"])
    if values.get("noise_variance") <= 0:
        errors.append("noise_variance: must be positive")

    if "kind" not in values:
        errors.append("kind: required key is missing")
    else:
        for req in REQUIRED_BY_KIND.get(values["kind"], ()):
            if values.get(req) is None:
                errors.append(f"{req}: required for kind {values['kind']!r}")

    for alg in values.get("algorithms", []):
        if str(alg) not in ALGORITHMS:
            hint = difflib.get_close_matches(str(alg), ALGORITHMS, n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            errors.append(f"algorithms: unknown algorithm {alg!r}{suggestion}")
        if str(alg) == "irgp_ucb_continuous":
            for p in ("irgp_ucb_continuous.a", "irgp_ucb_continuous.b"):
                if values.get(p) is None:
                    errors.append(f"{p}: required by the continuous-domain schedule")

    if errors:
        raise ConfigurationError(
            "invalid configuration:\n  " + "\n  ".join(sorted(errors))
        )
    return ExperimentConfig(kind=values["kind"], values=values)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, source=str(path))


def serialize_config(config: ExperimentConfig) -> str:
    """Render a config back to the flat text format (round-trips exactly)."""
    lines = []
    for key in sorted(config.values):
        value = config.values[key]
        if value is None:
            continue
        if isinstance(value, list):
            rendered = ", ".join(_render_scalar(v) for v in value)
        else:
            rendered = _render_scalar(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
