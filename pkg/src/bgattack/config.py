"""Run configuration: a strict INI-style schema with filled defaults.

Sections are [dataset], [detector], [attack], [losses], [pa], [eval],
[output].  Unknown sections or keys are rejected outright: a silently
ignored typo in a hyperparameter would invalidate an experiment.  Every
value is validated against its documented constraint at parse time.
"""

from dataclasses import dataclass, field, fields

from .attack import AttackConfig, EnsembleConfig, PhaseMode
from .detector import ToyGridDetector, matched_filter_init
from .errors import ConfigError
from .losses import BidirAnchor, LossWeights, TvMode
from .metrics import EvalConfig
from .optimizer import LrMode, LrSchedule
from .scene import PhysicalAdaptation, Scene, make_dataset, make_sprite


@dataclass(frozen=True)
class SpriteSpec:
    shape: str
    size: int
    class_id: int


@dataclass(frozen=True)
class DatasetSpec:
    scenes: int = 20
    canvas_h: int = 64
    canvas_w: int = 64
    channels: int = 3
    background_fill: float = 0.5
    sprites: tuple[SpriteSpec, ...] = (SpriteSpec("disk", 16, 0),)
    place_align: int = 16
    place_offset: int = 0
    seed: int = 100


@dataclass(frozen=True)
class DetectorSpec:
    cell_size: int = 16
    num_classes: int = 1
    init: str = "matched"   # matched | random
    seed: int = 19
    sprite_index: int = 0


@dataclass(frozen=True)
class AttackSpec:
    epochs: int = 50
    batch_size: int = 2
    alpha0: float = 0.03
    lr_mode: str = "constant"  # constant | poly
    lr_exponent: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    grid_n: int = 0            # 0 disables the ensemble
    phase_mode: str = "preserve"
    model_b_seed: int = -1     # -1 reuses the primary detector
    grad_norm_replicates: int = 1


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    checkpoint_every: int = 0


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    losses: LossWeights = field(default_factory=LossWeights)
    pa: PhysicalAdaptation = field(default_factory=PhysicalAdaptation)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputSpec = field(default_factory=OutputSpec)


def _to_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}") from None


def _to_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}") from None


def _to_str(raw: str) -> str:
    return raw


def _to_sprites(raw: str) -> tuple[SpriteSpec, ...]:
    specs = []
    for item in raw.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise ConfigError(
                f"expected shape:size:class_id, got {item.strip()!r}")
        specs.append(SpriteSpec(parts[0], _to_int(parts[1]), _to_int(parts[2])))
    if not specs:
        raise ConfigError("at least one sprite is required")
    return tuple(specs)


_SCHEMA: dict[str, dict[str, object]] = {
    "dataset": {"scenes": _to_int, "canvas_h": _to_int, "canvas_w": _to_int,
                "channels": _to_int, "background_fill": _to_float,
                "sprites": _to_sprites, "place_align": _to_int,
                "place_offset": _to_int, "seed": _to_int},
    "detector": {"cell_size": _to_int, "num_classes": _to_int, "init": _to_str,
                 "seed": _to_int, "sprite_index": _to_int},
    "attack": {"epochs": _to_int, "batch_size": _to_int, "alpha0": _to_float,
               "lr_mode": _to_str, "lr_exponent": _to_float,
               "beta1": _to_float, "beta2": _to_float, "eps": _to_float,
               "seed": _to_int, "grid_n": _to_int, "phase_mode": _to_str,
               "model_b_seed": _to_int, "grad_norm_replicates": _to_int},
    "losses": {"eta": _to_float, "lambda": _to_float, "delta": _to_int,
               "eps_w": _to_float, "tv_mode": _to_str, "bidir_anchor": _to_str},
    "pa": {"contrast_lo": _to_float, "contrast_hi": _to_float,
           "brightness_lo": _to_float, "brightness_hi": _to_float,
           "noise_sigma": _to_float, "seed": _to_int},
    "eval": {"conf_threshold": _to_float, "iou_threshold": _to_float,
             "nms_iou": _to_float},
    "output": {"dir": _to_str, "checkpoint_every": _to_int},
}


def _parse_sections(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key not in _SCHEMA[current]:
            raise ConfigError(
                f"line {lineno}: unknown key {key!r} in section [{current}]")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        sections[current][key] = value.strip()
    return sections


def _typed(sections, section: str) -> dict[str, object]:
    out = {}
    for key, raw in sections.get(section, {}).items():
        try:
            out[key] = _SCHEMA[section][key](raw)
        except ConfigError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
    return out


_ENUMS = {
    "init": ("matched", "random"),
    "lr_mode": tuple(m.value for m in LrMode),
    "phase_mode": tuple(m.value for m in PhaseMode),
    "tv_mode": tuple(m.value for m in TvMode),
    "bidir_anchor": tuple(m.value for m in BidirAnchor),
}


def _check_enum(section: str, key: str, value: str) -> str:
    if value not in _ENUMS[key]:
        raise ConfigError(
            f"[{section}] {key}: expected one of {_ENUMS[key]}, got {value!r}")
    return value


def _build(cls, values: dict, section: str):
    try:
        return cls(**values)
    except ConfigError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig with defaults filled for every absent key."""
    sections = _parse_sections(text)
    ds = _typed(sections, "dataset")
    dt = _typed(sections, "detector")
    at = _typed(sections, "attack")
    ls = _typed(sections, "losses")
    pa = _typed(sections, "pa")
    ev = _typed(sections, "eval")
    ou = _typed(sections, "output")

    if "init" in dt:
        _check_enum("detector", "init", dt["init"])
    for key in ("lr_mode", "phase_mode"):
        if key in at:
            _check_enum("attack", key, at[key])

    if "lambda" in ls:
        ls["lam"] = ls.pop("lambda")
    if "tv_mode" in ls:
        ls["tv_mode"] = TvMode(_check_enum("losses", "tv_mode", ls["tv_mode"]))
    if "bidir_anchor" in ls:
        ls["bidir_anchor"] = BidirAnchor(
            _check_enum("losses", "bidir_anchor", ls["bidir_anchor"]))

    pa_kwargs = {}
    if "contrast_lo" in pa or "contrast_hi" in pa:
        pa_kwargs["contrast_range"] = (pa.get("contrast_lo", 0.8),
                                       pa.get("contrast_hi", 1.2))
    if "brightness_lo" in pa or "brightness_hi" in pa:
        pa_kwargs["brightness_range"] = (pa.get("brightness_lo", -0.1),
                                         pa.get("brightness_hi", 0.1))
    if "noise_sigma" in pa:
        pa_kwargs["noise_sigma"] = pa["noise_sigma"]
    if "seed" in pa:
        pa_kwargs["rng_seed"] = pa["seed"]

    rc = RunConfig(
        dataset=_build(DatasetSpec, ds, "dataset"),
        detector=_build(DetectorSpec, dt, "detector"),
        attack=_build(AttackSpec, at, "attack"),
        losses=_build(LossWeights, ls, "losses"),
        pa=_build(PhysicalAdaptation, pa_kwargs, "pa"),
        eval=_build(EvalConfig, ev, "eval"),
        output=_build(OutputSpec, ou, "output"),
    )
    _validate(rc)
    return rc


def _validate(rc: RunConfig) -> None:
    d = rc.dataset
    if d.scenes < 1:
        raise ConfigError("[dataset] scenes must be >= 1")
    if d.canvas_h < 2 or d.canvas_w < 2 or d.channels < 1:
        raise ConfigError("[dataset] canvas must be at least 2x2x1")
    if not 0.0 <= d.background_fill <= 1.0:
        raise ConfigError("[dataset] background_fill must lie in [0, 1]")
    for sp in d.sprites:
        if sp.size >= min(d.canvas_h, d.canvas_w):
            raise ConfigError(
                f"[dataset] sprite size {sp.size} must be smaller than the canvas")
    if d.place_align < 1 or d.place_offset < 0:
        raise ConfigError(
            "[dataset] place_align must be >= 1 and place_offset >= 0")
    dt = rc.detector
    if dt.cell_size < 2:
        raise ConfigError("[detector] cell_size must be >= 2")
    if dt.num_classes < 1:
        raise ConfigError("[detector] num_classes must be >= 1")
    if not 0 <= dt.sprite_index < len(d.sprites):
        raise ConfigError("[detector] sprite_index out of range")
    at = rc.attack
    if at.epochs < 1 or at.batch_size < 1:
        raise ConfigError("[attack] epochs and batch_size must be >= 1")
    if at.alpha0 <= 0.0:
        raise ConfigError("[attack] alpha0 must be > 0")
    if at.grid_n not in (0,) and at.grid_n < 2:
        raise ConfigError("[attack] grid_n must be 0 (off) or >= 2")
    if at.grad_norm_replicates < 1:
        raise ConfigError("[attack] grad_norm_replicates must be >= 1")
    if rc.output.checkpoint_every < 0:
        raise ConfigError("[output] checkpoint_every must be >= 0")


def serialize_config(rc: RunConfig) -> str:
    """Text form that parses back to an equal RunConfig."""
    def f(x):
        return repr(float(x))

    sprites = ",".join(f"{s.shape}:{s.size}:{s.class_id}"
                       for s in rc.dataset.sprites)
    lines = ["[dataset]"]
    for name in ("scenes", "canvas_h", "canvas_w", "channels"):
        lines.append(f"{name} = {getattr(rc.dataset, name)}")
    lines += [f"background_fill = {f(rc.dataset.background_fill)}",
              f"sprites = {sprites}",
              f"place_align = {rc.dataset.place_align}",
              f"place_offset = {rc.dataset.place_offset}",
              f"seed = {rc.dataset.seed}",
              "", "[detector]"]
    for name in ("cell_size", "num_classes", "init", "seed", "sprite_index"):
        lines.append(f"{name} = {getattr(rc.detector, name)}")
    lines += ["", "[attack]"]
    for fld in fields(AttackSpec):
        v = getattr(rc.attack, fld.name)
        lines.append(f"{fld.name} = {f(v) if isinstance(v, float) else v}")
    lines += ["", "[losses]",
              f"eta = {f(rc.losses.eta)}",
              f"lambda = {f(rc.losses.lam)}",
              f"delta = {rc.losses.delta}",
              f"eps_w = {f(rc.losses.eps_w)}",
              f"tv_mode = {rc.losses.tv_mode.value}",
              f"bidir_anchor = {rc.losses.bidir_anchor.value}",
              "", "[pa]",
              f"contrast_lo = {f(rc.pa.contrast_range[0])}",
              f"contrast_hi = {f(rc.pa.contrast_range[1])}",
              f"brightness_lo = {f(rc.pa.brightness_range[0])}",
              f"brightness_hi = {f(rc.pa.brightness_range[1])}",
              f"noise_sigma = {f(rc.pa.noise_sigma)}",
              f"seed = {rc.pa.rng_seed}",
              "", "[eval]",
              f"conf_threshold = {f(rc.eval.conf_threshold)}",
              f"iou_threshold = {f(rc.eval.iou_threshold)}",
              f"nms_iou = {f(rc.eval.nms_iou)}",
              "", "[output]",
              f"dir = {rc.output.dir}",
              f"checkpoint_every = {rc.output.checkpoint_every}"]
    return "\n".join(lines) + "\n"


# --- builders ------------------------------------------------------------

def build_dataset(rc: RunConfig) -> list[Scene]:
    d = rc.dataset
    sprites = [make_sprite(s.shape, s.size, s.class_id) for s in d.sprites]
    return make_dataset(d.seed, d.scenes, sprites,
                        (d.canvas_h, d.canvas_w, d.channels),
                        d.background_fill, d.place_align, d.place_offset)


def build_detector(rc: RunConfig, seed: int | None = None) -> ToyGridDetector:
    dt = rc.detector
    seed = dt.seed if seed is None else seed
    if dt.init == "matched":
        spec = rc.dataset.sprites[dt.sprite_index]
        sprite = make_sprite(spec.shape, spec.size, spec.class_id)
        return matched_filter_init(sprite, dt.cell_size, dt.num_classes, seed)
    return ToyGridDetector.random(dt.cell_size, dt.num_classes, seed,
                                  channels=rc.dataset.channels)


def build_attack_config(rc: RunConfig) -> AttackConfig:
    at = rc.attack
    ensemble = None
    if at.grid_n:
        model_b = (build_detector(rc, at.model_b_seed)
                   if at.model_b_seed >= 0 else None)
        ensemble = EnsembleConfig(grid_n=at.grid_n,
                                  phase_mode=PhaseMode(at.phase_mode),
                                  model_b=model_b)
    schedule = LrSchedule(alpha0=at.alpha0, exponent=at.lr_exponent,
                          mode=LrMode(at.lr_mode))
    return AttackConfig(
        epochs=at.epochs, batch_size=at.batch_size, loss_weights=rc.losses,
        schedule=schedule, beta1=at.beta1, beta2=at.beta2, eps=at.eps,
        ensemble=ensemble, pa=rc.pa, seed=at.seed,
        checkpoint_every=rc.output.checkpoint_every,
        checkpoint_dir=rc.output.dir if rc.output.checkpoint_every else None,
        grad_norm_replicates=at.grad_norm_replicates)
