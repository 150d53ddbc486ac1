"""Experiment configuration: JSON in, validated dataclasses out, and back.

A config looks like::

    {
      "model": {"model": "ar", "order": 1,
                "innovation": {"type": "student", "alpha": 3}, "theta_true": [0.5]},
      "procedure": {"procedure": "student_ar1", "alpha": 3},
      "starts": [[-0.2], [0.1], [0.7]],
      "T": 40,
      "seeds": [1]
    }

Unknown keys are rejected at every level.  `to_dict` emits a canonical form,
so ``parse(serialize(parse(text)))`` equals ``parse(text)``.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .engine import EngineOptions
from .errors import ConfigError, InvalidAlpha

MODEL_KINDS = ("ar", "iid")
IID_FAMILIES = ("location", "bernoulli")
PROCEDURES = ("student_ar1", "least_squares", "campbell", "iid_mle", "sample_mean")
CHECK_IDS = ("C1", "C2", "C3", "I", "II", "a", "b", "c",
             "ArC1", "ArC2", "StArC1", "StArC2", "G_positivity")
PAIRINGS = ("cartesian", "zip")

_PROCEDURE_KEYS = {
    "student_ar1": {"alpha", "tuning", "fisher"},
    "least_squares": {"order", "D"},
    "campbell": {"phi", "order", "tuning"},
    "iid_mle": set(),
    "sample_mean": set(),
}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where, f"expected an object, got {type(d).__name__}")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown key")


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required key")
    return d[key]


def _number(v, where, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(where, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(where, "must be finite")
    if positive and not v > 0:
        raise ConfigError(where, f"must be > 0, got {v!r}")
    return int(v) if integer else float(v)


def _vector(v, where, dim=None):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(where, f"expected a nonempty list of numbers, got {v!r}")
    out = tuple(_number(x, f"{where}[{i}]") for i, x in enumerate(v))
    if dim is not None and len(out) != dim:
        raise ConfigError(where, f"expected dimension {dim}, got {len(out)}")
    return out


def _innovation(d, where):
    _reject_unknown(d, {"type", "alpha", "sigma"}, where)
    kind = _require(d, "type", where)
    if kind == "student":
        _reject_unknown(d, {"type", "alpha"}, where)
        alpha = _require(d, "alpha", where)
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not alpha > 0:
            raise InvalidAlpha(f"{where}.alpha: alpha must be > 0, got {alpha!r}")
        return {"type": "student", "alpha": float(alpha)}
    if kind in ("gaussian", "normal"):
        _reject_unknown(d, {"type", "sigma"}, where)
        return {"type": "gaussian", "sigma": _number(d.get("sigma", 1.0), f"{where}.sigma", positive=True)}
    raise ConfigError(f"{where}.type", f"unknown innovation type {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    model: str
    theta_true: tuple
    order: int = 1
    innovation: Optional[dict] = None
    family: Optional[str] = None
    burn_in: int = 0

    @property
    def dim(self):
        return self.order if self.model == "ar" else 1

    @classmethod
    def from_dict(cls, d, where="model"):
        _reject_unknown(d, {"model", "order", "innovation", "family", "theta_true", "burn_in"}, where)
        kind = _require(d, "model", where)
        if kind not in MODEL_KINDS:
            raise ConfigError(f"{where}.model", f"must be one of {MODEL_KINDS}, got {kind!r}")
        if kind == "ar":
            _reject_unknown(d, {"model", "order", "innovation", "theta_true", "burn_in"}, where)
            order = _number(d.get("order", 1), f"{where}.order", positive=True, integer=True)
            innov = _innovation(_require(d, "innovation", where), f"{where}.innovation")
            burn = _number(d.get("burn_in", 0), f"{where}.burn_in", integer=True)
            if burn < 0:
                raise ConfigError(f"{where}.burn_in", "must be >= 0")
            theta = _vector(_require(d, "theta_true", where), f"{where}.theta_true", order)
            return cls("ar", theta, order, innov, None, burn)
        _reject_unknown(d, {"model", "family", "innovation", "theta_true"}, where)
        family = d.get("family", "location")
        if family not in IID_FAMILIES:
            raise ConfigError(f"{where}.family", f"must be one of {IID_FAMILIES}, got {family!r}")
        theta = _vector(_require(d, "theta_true", where), f"{where}.theta_true", 1)
        if family == "bernoulli":
            if "innovation" in d:
                raise ConfigError(f"{where}.innovation", "not used by the bernoulli family")
            if not 0 < theta[0] < 1:
                raise ConfigError(f"{where}.theta_true", "bernoulli parameter must lie in (0, 1)")
            return cls("iid", theta, 1, None, "bernoulli", 0)
        innov = _innovation(_require(d, "innovation", where), f"{where}.innovation")
        return cls("iid", theta, 1, innov, "location", 0)

    def to_dict(self):
        if self.model == "ar":
            return {"model": "ar", "order": self.order, "innovation": dict(self.innovation),
                    "theta_true": list(self.theta_true), "burn_in": self.burn_in}
        out = {"model": "iid", "family": self.family, "theta_true": list(self.theta_true)}
        if self.innovation is not None:
            out["innovation"] = dict(self.innovation)
        return out

    def build(self):
        from .models import ARModel, BernoulliModel, LocationModel, innovation_from_config
        if self.model == "ar":
            return ARModel(self.order, innovation_from_config(self.innovation), self.burn_in)
        if self.family == "bernoulli":
            return BernoulliModel()
        return LocationModel(innovation_from_config(self.innovation))


def _tuning(d, where):
    _reject_unknown(d, {"type", "values", "until"}, where)
    if d.get("type", "constant_prefix") != "constant_prefix":
        raise ConfigError(f"{where}.type", "only 'constant_prefix' tuning is supported")
    values = _require(d, "values", where)
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where}.values", "expected a nonempty list")
    values = [_number(v, f"{where}.values[{i}]", positive=True) for i, v in enumerate(values)]
    until = _number(d.get("until", len(values)), f"{where}.until", positive=True, integer=True)
    if len(values) not in (1, until):
        raise ConfigError(f"{where}.values", f"need 1 or {until} values, got {len(values)}")
    return {"type": "constant_prefix", "values": values, "until": until}


def _phi(d, where):
    _reject_unknown(d, {"type", "alpha", "c"}, where)
    kind = _require(d, "type", where)
    if kind == "student":
        _reject_unknown(d, {"type", "alpha"}, where)
        return {"type": "student", "alpha": _number(_require(d, "alpha", where), f"{where}.alpha", positive=True)}
    if kind == "huber":
        _reject_unknown(d, {"type", "c"}, where)
        return {"type": "huber", "c": _number(d.get("c", 1.345), f"{where}.c", positive=True)}
    if kind in ("sign", "linear"):
        _reject_unknown(d, {"type"}, where)
        return {"type": kind}
    raise ConfigError(f"{where}.type", f"unknown phi type {kind!r}")


@dataclass(frozen=True)
class ProcedureSpec:
    procedure: str
    params: dict = field(default_factory=dict)
    flip_sign: bool = False

    @classmethod
    def from_dict(cls, d, where="procedure"):
        if not isinstance(d, dict):
            raise ConfigError(where, "expected an object")
        name = _require(d, "procedure", where)
        if name not in PROCEDURES:
            raise ConfigError(f"{where}.procedure", f"must be one of {PROCEDURES}, got {name!r}")
        _reject_unknown(d, {"procedure", "flip_sign"} | _PROCEDURE_KEYS[name], where)
        flip = d.get("flip_sign", False)
        if not isinstance(flip, bool):
            raise ConfigError(f"{where}.flip_sign", "expected true or false")
        p = {}
        if name == "student_ar1":
            alpha = _require(d, "alpha", where)
            if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not alpha > 0:
                raise InvalidAlpha(f"{where}.alpha: alpha must be > 0, got {alpha!r}")
            p["alpha"] = float(alpha)
            if d.get("fisher") is not None:
                p["fisher"] = _number(d["fisher"], f"{where}.fisher", positive=True)
        if name in ("least_squares", "campbell"):
            p["order"] = _number(d.get("order", 1), f"{where}.order", positive=True, integer=True)
        if name == "least_squares" and d.get("D") is not None:
            p["D"] = _number(d["D"], f"{where}.D", positive=True)
        if name == "campbell":
            p["phi"] = _phi(_require(d, "phi", where), f"{where}.phi")
        if d.get("tuning") is not None:
            p["tuning"] = _tuning(d["tuning"], f"{where}.tuning")
        return cls(name, p, flip)

    @property
    def dim_hint(self):
        return self.params.get("order", 1)

    def to_dict(self):
        out = {"procedure": self.procedure}
        for k in sorted(self.params):
            v = self.params[k]
            out[k] = {kk: (list(vv) if isinstance(vv, (list, tuple)) else vv) for kk, vv in v.items()} \
                if isinstance(v, dict) else v
        if self.flip_sign:
            out["flip_sign"] = True
        return out

    def build(self, model):
        from . import estimators as est
        p = self.params
        tuning = est.NO_TUNING
        if "tuning" in p:
            tuning = est.TuningSchedule.constant_prefix(p["tuning"]["values"], p["tuning"]["until"])
        if self.procedure == "student_ar1":
            proc = est.make_student_ar1(p["alpha"], tuning, p.get("fisher"))
        elif self.procedure == "least_squares":
            proc = est.make_linear(est.least_squares_ar_spec(p["order"], p.get("D")))
        elif self.procedure == "campbell":
            proc = est.make_campbell_robust(est.phi_from_config(p["phi"]), order=p["order"],
                                            tuning=tuning)
        elif self.procedure == "iid_mle":
            proc = est.make_iid_mle(model)
        else:
            proc = est.make_linear(est.sample_mean_spec())
        return proc.flipped() if self.flip_sign else proc

    def linear_spec(self):
        """The LinearProcedureSpec behind a linear procedure, else None."""
        from . import estimators as est
        if self.procedure == "least_squares":
            return est.least_squares_ar_spec(self.params["order"], self.params.get("D"))
        if self.procedure == "sample_mean":
            return est.sample_mean_spec()
        return None


_CHECK_OPTION_KEYS = {
    "eps": dict(positive=True), "n_magnitudes": dict(positive=True, integer=True),
    "n_directions": dict(positive=True, integer=True), "T_check": dict(positive=True, integer=True),
    "n_histories": dict(positive=True, integer=True), "threshold_div": dict(positive=True),
    "tail_rtol": dict(positive=True), "tol_margin": dict(),
}


@dataclass(frozen=True)
class CheckOptions:
    eps: float = 0.05
    n_magnitudes: int = 20
    n_directions: int = 16
    T_check: int = 2000
    n_histories: int = 25
    threshold_div: float = 50.0
    tail_rtol: float = 1e-4
    tol_margin: float = 0.0

    @classmethod
    def from_dict(cls, d, where="check_options"):
        _reject_unknown(d, _CHECK_OPTION_KEYS, where)
        kw = {k: _number(v, f"{where}.{k}", **_CHECK_OPTION_KEYS[k]) for k, v in d.items()}
        if "eps" in kw and not kw["eps"] < 1:
            raise ConfigError(f"{where}.eps", "must lie in (0, 1)")
        return cls(**kw)

    def to_dict(self):
        return {k: getattr(self, k) for k in sorted(_CHECK_OPTION_KEYS)}

    def grid(self, dim):
        from .conditions import UGrid
        return UGrid(self.eps, self.n_magnitudes, dim, self.n_directions)

    def series_kw(self):
        return {"threshold_div": self.threshold_div, "tail_rtol": self.tail_rtol}


_ENGINE_KEYS = {"delta0", "delta_det", "regularize", "max_step_norm"}


def _engine(d, where="engine"):
    _reject_unknown(d, _ENGINE_KEYS, where)
    kw = {}
    for k in ("delta0", "delta_det"):
        if k in d:
            kw[k] = _number(d[k], f"{where}.{k}", positive=True)
    if "regularize" in d:
        if not isinstance(d["regularize"], bool):
            raise ConfigError(f"{where}.regularize", "expected true or false")
        kw["regularize"] = d["regularize"]
    if d.get("max_step_norm") is not None:
        kw["max_step_norm"] = _number(d["max_step_norm"], f"{where}.max_step_norm", positive=True)
    return EngineOptions(**kw)


_TOP_KEYS = {"name", "model", "procedure", "starts", "T", "seeds", "pairing", "checks",
             "check_options", "engine", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    procedure: ProcedureSpec
    starts: tuple
    T: int
    seeds: tuple
    pairing: str = "cartesian"
    checks: tuple = ()
    check_options: CheckOptions = CheckOptions()
    engine: EngineOptions = EngineOptions()
    output: Optional[str] = None
    name: str = ""

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(d, _TOP_KEYS, "")
        model = ModelSpec.from_dict(_require(d, "model", ""))
        procedure = ProcedureSpec.from_dict(_require(d, "procedure", ""))
        dim = model.dim
        if procedure.procedure in ("least_squares", "campbell", "student_ar1"):
            if model.model != "ar":
                raise ConfigError("procedure.procedure", f"{procedure.procedure} needs an autoregressive model")
            if procedure.dim_hint != dim:
                raise ConfigError("procedure.order", f"order {procedure.dim_hint} does not match model order {dim}")
        if procedure.procedure == "student_ar1" and dim != 1:
            raise ConfigError("procedure.procedure", "student_ar1 is for AR(1)")
        if procedure.procedure in ("iid_mle", "sample_mean") and model.model != "iid":
            raise ConfigError("procedure.procedure", f"{procedure.procedure} needs an i.i.d. model")
        starts = _require(d, "starts", "")
        if not isinstance(starts, list) or not starts:
            raise ConfigError("starts", "expected a nonempty list")
        starts = tuple(_vector(s, f"starts[{i}]", dim) for i, s in enumerate(starts))
        T = _number(_require(d, "T", ""), "T", integer=True)
        if T < 1:
            raise ConfigError("T", f"must be >= 1, got {T}")
        seeds = _require(d, "seeds", "")
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = [seeds]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds", "expected a nonempty list of integers")
        seeds = tuple(_number(s, f"seeds[{i}]", integer=True) for i, s in enumerate(seeds))
        if any(s < 0 for s in seeds):
            raise ConfigError("seeds", "seeds must be nonnegative")
        pairing = d.get("pairing", "cartesian")
        if pairing not in PAIRINGS:
            raise ConfigError("pairing", f"must be one of {PAIRINGS}, got {pairing!r}")
        if pairing == "zip" and len(starts) != len(seeds):
            raise ConfigError("pairing", "zip pairing needs as many starts as seeds")
        checks = d.get("checks", [])
        if not isinstance(checks, list):
            raise ConfigError("checks", "expected a list")
        for i, c in enumerate(checks):
            if c not in CHECK_IDS:
                raise ConfigError(f"checks[{i}]", f"unknown condition id {c!r}")
        opts = CheckOptions.from_dict(d.get("check_options", {}))
        engine = _engine(d.get("engine", {}))
        output = d.get("output")
        if output is not None:
            _reject_unknown(output, {"dir"}, "output")
            output = output.get("dir")
            if output is not None and not isinstance(output, str):
                raise ConfigError("output.dir", "expected a string")
        name = d.get("name", "")
        if not isinstance(name, str):
            raise ConfigError("name", "expected a string")
        return cls(model, procedure, starts, T, seeds, pairing, tuple(checks), opts, engine,
                   output, name)

    def to_dict(self):
        out = {
            "model": self.model.to_dict(),
            "procedure": self.procedure.to_dict(),
            "starts": [list(s) for s in self.starts],
            "T": self.T,
            "seeds": list(self.seeds),
            "pairing": self.pairing,
            "checks": list(self.checks),
            "check_options": self.check_options.to_dict(),
            "engine": {"delta0": self.engine.delta0, "delta_det": self.engine.delta_det,
                       "regularize": self.engine.regularize,
                       "max_step_norm": self.engine.max_step_norm},
        }
        if self.output is not None:
            out["output"] = {"dir": self.output}
        if self.name:
            out["name"] = self.name
        return out

    def with_seeds(self, seeds):
        from dataclasses import replace
        seeds = tuple(seeds)
        pairing = self.pairing
        if pairing == "zip" and len(seeds) != len(self.starts):
            pairing = "cartesian"
        return replace(self, seeds=seeds, pairing=pairing)


def parse_config(text):
    """Parse JSON text; syntax errors are reported with line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"line {err.lineno} column {err.colno}", err.msg) from None
    return ExperimentConfig.from_dict(raw)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(cfg):
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def figure1_config(seed=1):
    """Student AR(1), alpha 3, theta 0.5, 40 observations, three starts."""
    return ExperimentConfig.from_dict({
        "name": "figure1",
        "model": {"model": "ar", "order": 1, "innovation": {"type": "student", "alpha": 3},
                  "theta_true": [0.5]},
        "procedure": {"procedure": "student_ar1", "alpha": 3},
        "starts": [[-0.2], [0.1], [0.7]],
        "T": 40,
        "seeds": [seed],
    })
