"""Experiment configuration (JSON, versioned)."""

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

from .errors import InvalidArgument

SCHEMA_VERSION = 1

KINDS = ("weyl", "integrate", "szego", "widom", "qe", "frohlich", "timeavg")
INTEGRATORS = ("truncated", "log_mean", "dixmier", "heat", "weighted", "all")


@dataclass
class ExperimentConfig:
    """One model, named operator expressions, and a list of diagnostics.

    Each entry of ``estimators`` is a dict with at least ``id`` and ``kind``
    (one of :data:`KINDS`); other keys are kind-specific (``op``, ``op_b``,
    ``ladder``, ``f``, ``beta``, ``T``, ...).  An optional ``assert`` dict
    declares the acceptance check for that entry.
    """

    model: dict
    operators: dict = field(default_factory=dict)
    estimators: list = field(default_factory=list)
    ladders: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise InvalidArgument(f"unsupported schema_version {self.schema_version}")
        if not isinstance(self.model, dict) or "name" not in self.model:
            raise InvalidArgument("config.model must be an object with a name")
        if not isinstance(self.operators, dict):
            raise InvalidArgument("config.operators must map names to expressions")
        seen = set()
        for i, est in enumerate(self.estimators):
            if not isinstance(est, dict):
                raise InvalidArgument(f"estimator #{i} must be an object")
            kind = est.get("kind")
            if kind not in KINDS:
                raise InvalidArgument(f"estimator #{i}: unknown kind {kind!r}")
            eid = est.get("id", f"{kind}_{i}")
            if eid in seen:
                raise InvalidArgument(f"duplicate estimator id {eid!r}")
            seen.add(eid)
            if kind == "integrate" and est.get("estimator", "all") not in INTEGRATORS:
                raise InvalidArgument(f"estimator #{i}: unknown integrator {est['estimator']!r}")

    def to_dict(self):
        return asdict(self)

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise InvalidArgument(f"unknown config keys: {sorted(extra)}")
        if "model" not in data:
            raise InvalidArgument("config needs a model")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise InvalidArgument(f"cannot read config {path}: {exc}") from None


def bundled_config(name):
    """Path-like handle to a config shipped with the package."""
    return resources.files("nctrunc").joinpath("configs", name)


def load_bundled(name):
    return ExperimentConfig.from_json(bundled_config(name).read_text(encoding="utf-8"))
