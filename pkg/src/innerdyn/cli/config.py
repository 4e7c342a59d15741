"""Declarative experiment configs.

Configs are TOML files carrying a schema = 1 marker. Every numeric
parameter that feeds the mathematics travels as a decimal string and is
parsed through parse_decimal below, never through a binary float; "0.1"
means one tenth to hundreds of bits, not the double nearest it. Integers
(counts, seeds, bit widths) stay TOML integers.

Unknown keys are errors at every level. A config that parses is already
structurally valid: tables present exactly where the kind wants them,
choices checked, defaults materialized. parse(serialize(cfg)) gives back
an equal config.
"""

import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..numerics import BigReal, DomainError, PrecisionPolicy


class ConfigError(ValueError):
    pass


KINDS = (
    "orbit",
    "rate",
    "summability",
    "theorem-a",
    "targets",
    "pullback-check",
    "bound-check",
)

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

# parse at a generous fixed width, then keep the narrowest width that
# still holds the value exactly so dyadic parameters ("0.5", "2") cost
# no more than hand-built ones
_PARSE_BITS = 512


def parse_decimal(text: str) -> BigReal:
    if not isinstance(text, str) or not _DECIMAL_RE.match(text):
        raise ConfigError(f"not a decimal string: {text!r}")
    x = BigReal(text, _PARSE_BITS)
    for bits in (64, 128, 256):
        t = x.with_prec(bits)
        if t.with_prec(_PARSE_BITS) == x:
            return t
    return x


_REQUIRED = object()
_OPTIONAL = object()

_FUNCTION_PARAMS = {
    "automorphism": ("a",),
    "rational2": ("lam",),
    "linear-plus-tan": ("lam",),
}

_RULE_PARAMS = {
    "power": ("base", "coeff"),
    "geometric": ("scale", "ratio"),
    "constant": ("value",),
}

# field -> (checker name, default) in definition order; checker names:
# int1 = integer >= 1, int0 = integer >= 0, u64 = integer in [0, 2^64),
# dec = decimal string, plus literal choice tuples
_PARAMETER_SCHEMA = {
    "orbit": (("n_max", "int1", _REQUIRED),),
    "rate": (
        ("n_max", "int1", _REQUIRED),
        ("n_min", "int0", 10),
        ("delta", "dec", "0"),
        ("alpha", "dec", _OPTIONAL),
    ),
    "summability": (("n_max", "int1", _REQUIRED),),
    "theorem-a": (
        ("eps", "dec", _REQUIRED),
        ("samples", "int1", _REQUIRED),
        ("seed", "u64", _REQUIRED),
        ("n_enter", "int1", _REQUIRED),
        ("n_max", "int1", _REQUIRED),
        ("alpha", "dec", _OPTIONAL),
        ("max_excluded_fraction", "dec", "0.01"),
    ),
    "targets": (
        ("samples", "int1", _REQUIRED),
        ("seed", "u64", _REQUIRED),
        ("horizon", "int1", _REQUIRED),
    ),
    "pullback-check": (
        ("mode", ("complement", "direct"), _REQUIRED),
        ("n_max", "int1", _REQUIRED),
        ("n_burn", "int0", 10),
        ("threshold", "dec", "1e-6"),
        ("endpoint_threshold", "dec", "1e-4"),
    ),
    "bound-check": (
        ("variant", ("upper", "lower"), _REQUIRED),
        ("eps", "dec", _REQUIRED),
        ("C", "dec", _REQUIRED),
        ("n_min", "int1", _REQUIRED),
        ("n_max", "int1", _REQUIRED),
        ("alpha", "dec", _OPTIONAL),
    ),
}

_PRECISION_SCHEMA = (
    ("base_bits", "int1", 128),
    ("max_bits", "int1", 4096),
    ("agreement_tol_bits", "int1", 64),
)

_NEEDS_TARGET = ("targets", "pullback-check")
_HAS_SEED = ("theorem-a", "targets")


def _fail(where, message):
    raise ConfigError(f"{where}: {message}")


def _check_value(value, checker, where):
    if isinstance(checker, tuple):
        if value not in checker:
            _fail(where, f"must be one of {', '.join(checker)}, got {value!r}")
        return value
    if checker == "dec":
        if not isinstance(value, str):
            _fail(where, f"must be a decimal string, got {value!r}")
        parse_decimal(value)
        return value
    if checker == "bool":
        if not isinstance(value, bool):
            _fail(where, f"must be a boolean, got {value!r}")
        return value
    # the integer checkers; TOML booleans are ints in Python, keep them out
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(where, f"must be an integer, got {value!r}")
    if checker == "int1" and value < 1:
        _fail(where, "must be at least 1")
    if checker == "int0" and value < 0:
        _fail(where, "must be nonnegative")
    if checker == "u64" and not 0 <= value < 2**64:
        _fail(where, "must fit an unsigned 64-bit integer")
    return value


def _check_table(data, schema, where):
    if not isinstance(data, dict):
        _fail(where, "must be a table")
    known = {name for name, _, _ in schema}
    unknown = sorted(set(data) - known)
    if unknown:
        _fail(where, f"unknown key {unknown[0]!r}")
    out = {}
    for name, checker, default in schema:
        if name in data:
            out[name] = _check_value(data[name], checker, f"{where}.{name}")
        elif default is _REQUIRED:
            _fail(where, f"missing required key {name!r}")
        elif default is not _OPTIONAL:
            out[name] = default
    return out


def _check_function(data):
    if not isinstance(data, dict):
        _fail("function", "must be a table")
    variant = data.get("variant")
    if variant not in _FUNCTION_PARAMS:
        _fail(
            "function.variant",
            f"must be one of {', '.join(sorted(_FUNCTION_PARAMS))}, got {variant!r}",
        )
    schema = (("variant", tuple(_FUNCTION_PARAMS), _REQUIRED),) + tuple(
        (name, "dec", _REQUIRED) for name in _FUNCTION_PARAMS[variant]
    )
    return _check_table(data, schema, "function")


def _check_target(data, kind):
    rule = data.get("rule") if isinstance(data, dict) else None
    if rule not in _RULE_PARAMS:
        _fail(
            "target.rule",
            f"must be one of {', '.join(sorted(_RULE_PARAMS))}, got {rule!r}",
        )
    schema = (
        ("center", ("p", "-p"), "p"),
        ("rule", tuple(_RULE_PARAMS), _REQUIRED),
    ) + tuple((name, "dec", _REQUIRED) for name in _RULE_PARAMS[rule]) + (
        ("complement", "bool", False),
    )
    out = _check_table(data, schema, "target")
    if kind == "pullback-check":
        if out["center"] != "p":
            _fail("target.center", "pullback checks run at the attracting point")
        if out["complement"]:
            _fail("target.complement", "pullback checks take the plain disk target")
    return out


class ExperimentConfig:
    """A validated config in canonical form (defaults materialized)."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = data

    def __eq__(self, other):
        if isinstance(other, ExperimentConfig):
            return self.data == other.data
        return NotImplemented

    def __repr__(self):
        return f"ExperimentConfig(kind={self.kind!r})"

    @property
    def kind(self):
        return self.data["kind"]

    @property
    def parameters(self):
        return self.data["parameters"]

    @property
    def function_spec(self):
        return self.data["function"]

    @property
    def target_spec(self):
        return self.data.get("target")

    @property
    def output(self):
        return self.data["output"]

    def decimal(self, name, table="parameters"):
        return parse_decimal(self.data[table][name])

    def policy(self) -> PrecisionPolicy:
        p = self.data["precision"]
        return PrecisionPolicy(
            p["base_bits"], p["max_bits"], p["agreement_tol_bits"]
        )

    def with_seed(self, seed):
        if "seed" not in self.parameters:
            raise ConfigError(f"kind {self.kind!r} takes no seed")
        _check_value(seed, "u64", "seed override")
        data = {k: dict(v) if isinstance(v, dict) else v for k, v in self.data.items()}
        data["parameters"]["seed"] = seed
        return ExperimentConfig(data)


def parse(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None

    top_known = {"schema", "kind", "function", "parameters", "target", "precision", "output"}
    unknown = sorted(set(raw) - top_known)
    if unknown:
        _fail("config", f"unknown key {unknown[0]!r}")
    if raw.get("schema") != 1:
        _fail("schema", f"this tool reads schema = 1, got {raw.get('schema')!r}")
    kind = raw.get("kind")
    if kind not in KINDS:
        _fail("kind", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    for required in ("function", "parameters"):
        if required not in raw:
            _fail("config", f"missing required table {required!r}")

    data = {"schema": 1, "kind": kind}
    data["function"] = _check_function(raw["function"])
    data["parameters"] = _check_table(
        raw["parameters"], _PARAMETER_SCHEMA[kind], "parameters"
    )
    if kind in _NEEDS_TARGET:
        if "target" not in raw:
            _fail("config", f"kind {kind!r} needs a [target] table")
        data["target"] = _check_target(raw["target"], kind)
    elif "target" in raw:
        _fail("config", f"kind {kind!r} takes no [target] table")
    data["precision"] = _check_table(
        raw.get("precision", {}), _PRECISION_SCHEMA, "precision"
    )
    try:
        PrecisionPolicy(**data["precision"])
    except DomainError as exc:
        _fail("precision", str(exc))
    out_raw = raw.get("output", {})
    if not isinstance(out_raw, dict):
        _fail("output", "must be a table")
    known = {"figures", "path"}
    unknown = sorted(set(out_raw) - known)
    if unknown:
        _fail("output", f"unknown key {unknown[0]!r}")
    output = {"figures": _check_value(out_raw.get("figures", True), "bool", "output.figures")}
    if "path" in out_raw:
        if not isinstance(out_raw["path"], str) or not out_raw["path"]:
            _fail("output.path", "must be a non-empty string")
        output["path"] = out_raw["path"]
    data["output"] = output

    cfg = ExperimentConfig(data)
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg):
    par = cfg.parameters
    if cfg.kind == "theorem-a" and par["n_enter"] > par["n_max"]:
        _fail("parameters", "n_enter must not exceed n_max")
    if cfg.kind in ("rate", "bound-check") and par["n_min"] > par["n_max"]:
        _fail("parameters", "n_min must not exceed n_max")


def _toml_value(v, where):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        if '"' in v or "\\" in v or "\n" in v:
            _fail(where, f"cannot serialize string {v!r}")
        return f'"{v}"'
    _fail(where, f"cannot serialize {v!r}")


def serialize(cfg: ExperimentConfig) -> str:
    d = cfg.data
    lines = [f"schema = {d['schema']}", f'kind = "{d["kind"]}"']
    for table in ("function", "parameters", "target", "precision", "output"):
        if table not in d:
            continue
        lines.append("")
        lines.append(f"[{table}]")
        for key, value in d[table].items():
            lines.append(f"{key} = {_toml_value(value, f'{table}.{key}')}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())
