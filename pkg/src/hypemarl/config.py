"""Run configuration: TOML files merged over per-module defaults.

Every section maps onto one module's validated dataclass, so an empty
file yields the stock hyperparameters and any override is checked by
the owning module's invariants. Unknown keys are rejected by name. The
fully-resolved configuration has a canonical JSON form whose SHA-256
hash ties checkpoints to the configuration that produced them.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:   # Python < 3.11
    import tomli as tomllib

from .encoding import EncodingConfig
from .envs import ENV_KINDS, make_env
from .envs.fokker_planck import EnvParams, FLUID_PARAMS, VACUUM_PARAMS
from .envs.toy import ToyParams
from .errors import ConfigurationError
from .marl import TrainSchedule
from .stacks import HYPER_LRS, PLAIN_LRS, VARIANTS, LearningRates
from .td3 import Td3Hyper

_TOP_KEYS = ("variant", "env", "grid_rows", "seeds", "out_dir",
             "schedule", "td3", "encoding", "agents", "env_params")
_SCHEDULE_KEYS = tuple(TrainSchedule.__dataclass_fields__)
_TD3_KEYS = tuple(Td3Hyper.__dataclass_fields__)
_ENCODING_KEYS = tuple(EncodingConfig.__dataclass_fields__)
_AGENT_KEYS = ("actor_lr", "critic_lr", "main_hidden", "hyper_hidden",
               "plain_hidden", "probe_count")
_PDE_PARAM_KEYS = ("kappa", "dt", "t_final", "u_min", "u_max")
_TOY_PARAM_KEYS = ("u_min", "u_max", "t_max")


@dataclass(frozen=True)
class RunConfig:
    variant: str = "hypemarl"
    env_kind: str = "vacuum"
    grid_rows: int = 33
    seeds: tuple = (1, 2, 3, 4, 5)
    out_dir: str = "runs"
    schedule: TrainSchedule = TrainSchedule()
    hyper: Td3Hyper = Td3Hyper()
    encoding: EncodingConfig = EncodingConfig()
    lrs: object = None            # None -> variant default
    main_hidden: tuple = (256,)
    hyper_hidden: tuple = (256,)
    plain_hidden: tuple = (256, 256)
    probe_count: int = 64
    env_params: object = None     # None -> env-kind default

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.env_kind not in ENV_KINDS:
            raise ConfigurationError(
                f"unknown env {self.env_kind!r}; expected one of {ENV_KINDS}")
        if not self.seeds or any(int(s) != s for s in self.seeds):
            raise ConfigurationError(f"seeds must be a non-empty integer list, "
                                     f"got {self.seeds!r}")
        if self.probe_count < 1:
            raise ConfigurationError(f"probe_count must be >= 1, "
                                     f"got {self.probe_count}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for name in ("main_hidden", "hyper_hidden", "plain_hidden"):
            object.__setattr__(self, name, tuple(int(h) for h in getattr(self, name)))


def effective_lrs(cfg):
    """Learning rates after applying the variant default."""
    if cfg.lrs is not None:
        return cfg.lrs
    if cfg.variant in ("hypemarl", "mb-hypemarl"):
        return HYPER_LRS
    return PLAIN_LRS


def _check_keys(section, data, allowed):
    for key in data:
        if key not in allowed:
            where = f"{section}.{key}" if section else key
            raise ConfigurationError(
                f"unknown config key {where!r}; allowed keys: {sorted(allowed)}")


def _resolve_env_params(kind, overrides):
    if kind == "toy":
        _check_keys("env_params", overrides, _TOY_PARAM_KEYS)
        return ToyParams(**overrides)
    _check_keys("env_params", overrides, _PDE_PARAM_KEYS)
    base = FLUID_PARAMS if kind == "fluid" else VACUUM_PARAMS
    return replace(base, **overrides)


def build_config(data):
    """Assemble a validated RunConfig from a parsed TOML mapping."""
    _check_keys("", data, _TOP_KEYS)
    schedule_data = dict(data.get("schedule", {}))
    _check_keys("schedule", schedule_data, _SCHEDULE_KEYS)
    td3_data = dict(data.get("td3", {}))
    _check_keys("td3", td3_data, _TD3_KEYS)
    encoding_data = dict(data.get("encoding", {}))
    _check_keys("encoding", encoding_data, _ENCODING_KEYS)
    agents = dict(data.get("agents", {}))
    _check_keys("agents", agents, _AGENT_KEYS)

    lrs = None
    if "actor_lr" in agents or "critic_lr" in agents:
        if not ("actor_lr" in agents and "critic_lr" in agents):
            raise ConfigurationError(
                "agents.actor_lr and agents.critic_lr must be set together")
        lrs = LearningRates(float(agents.pop("actor_lr")),
                            float(agents.pop("critic_lr")))

    env_kind = data.get("env", "vacuum")
    if env_kind not in ENV_KINDS:
        raise ConfigurationError(
            f"unknown env {env_kind!r}; expected one of {ENV_KINDS}")
    env_params = _resolve_env_params(env_kind, dict(data.get("env_params", {})))

    return RunConfig(
        variant=data.get("variant", "hypemarl"),
        env_kind=env_kind,
        grid_rows=int(data.get("grid_rows", 33)),
        seeds=tuple(data.get("seeds", (1, 2, 3, 4, 5))),
        out_dir=str(data.get("out_dir", "runs")),
        schedule=TrainSchedule(**schedule_data),
        hyper=Td3Hyper(**td3_data),
        encoding=EncodingConfig(**encoding_data),
        lrs=lrs,
        main_hidden=tuple(agents.get("main_hidden", (256,))),
        hyper_hidden=tuple(agents.get("hyper_hidden", (256,))),
        plain_hidden=tuple(agents.get("plain_hidden", (256, 256))),
        probe_count=int(agents.get("probe_count", 64)),
        env_params=env_params,
    )


def parse_config(path):
    """Load and validate one TOML run configuration."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"malformed TOML in {path}: {exc}") from exc
    return build_config(data)


def config_dict(cfg):
    """Fully-resolved plain-dict form (variant defaults applied).

    The result uses JSON-native types only (tuples become lists), so it
    equals its own JSON round trip byte for byte once serialized.
    """
    lrs = effective_lrs(cfg)
    raw = {
        "variant": cfg.variant,
        "env": cfg.env_kind,
        "grid_rows": cfg.grid_rows,
        "seeds": list(cfg.seeds),
        "out_dir": cfg.out_dir,
        "schedule": asdict(cfg.schedule),
        "td3": asdict(cfg.hyper),
        "encoding": asdict(cfg.encoding),
        "agents": {
            "actor_lr": lrs.actor,
            "critic_lr": lrs.critic,
            "main_hidden": list(cfg.main_hidden),
            "hyper_hidden": list(cfg.hyper_hidden),
            "plain_hidden": list(cfg.plain_hidden),
            "probe_count": cfg.probe_count,
        },
        "env_params": asdict(cfg.env_params) if cfg.env_params is not None else None,
    }
    return json.loads(json.dumps(raw))


def _detuple(value):
    if isinstance(value, list):
        return tuple(_detuple(v) for v in value)
    return value


def config_from_dict(data):
    """Inverse of config_dict: rebuild a RunConfig from its stored form.

    Used when loading checkpoints, whose manifests carry the resolved
    dict; hashes round-trip (config_hash(config_from_dict(d)) matches).
    """
    agents = data["agents"]
    kind = data["env"]
    ep = data.get("env_params")
    if ep is None:
        params = None
    else:
        cls = ToyParams if kind == "toy" else EnvParams
        params = cls(**{k: _detuple(v) for k, v in ep.items()})
    return RunConfig(
        variant=data["variant"],
        env_kind=kind,
        grid_rows=data["grid_rows"],
        seeds=tuple(data["seeds"]),
        out_dir=data["out_dir"],
        schedule=TrainSchedule(**data["schedule"]),
        hyper=Td3Hyper(**data["td3"]),
        encoding=EncodingConfig(**data["encoding"]),
        lrs=LearningRates(agents["actor_lr"], agents["critic_lr"]),
        main_hidden=tuple(agents["main_hidden"]),
        hyper_hidden=tuple(agents["hyper_hidden"]),
        plain_hidden=tuple(agents["plain_hidden"]),
        probe_count=agents["probe_count"],
        env_params=params,
    )


def config_hash(cfg):
    """SHA-256 over the fields that determine run dynamics.

    ``seeds`` and ``out_dir`` are bookkeeping (the seed actually used is
    stored in each snapshot), so they are excluded: a checkpoint may be
    resumed into a different output directory or seed list.
    """
    resolved = {k: v for k, v in config_dict(cfg).items()
                if k not in ("seeds", "out_dir")}
    payload = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_env(cfg):
    return make_env(cfg.env_kind, grid_rows=cfg.grid_rows,
                    params=cfg.env_params)
