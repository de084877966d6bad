"""Pipeline configuration: `[section] key = value` text files.

The grammar is deliberately tiny: section headers in brackets, one key per
line, `#`-prefixed comment lines, blank lines ignored. Unknown sections or
keys are rejected, and every parse or range error carries file:line. A config
produced by dump_config() parses back to an identical configuration.

The [loss] seed is a sub-stream id, not an absolute seed: the pipeline mixes
it with [pipeline] seed, so one seed knob reproduces an entire run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .analyzer import DEFAULT_BUDGET_MS, DEFAULT_FEEDBACK_WINDOW, DEFAULT_WEIGHTS
from .channel import LossKind, LossModel, SenderConfig
from .detector import DEFAULT_FORK_THRESHOLD
from .image_denoiser import CascadeParams
from .video_denoiser import (
    BlockMode,
    BlockParams,
    DEFAULT_CADENCE,
    read_weights_file,
)

EXECUTION_MODES = ("sequential", "threaded")
_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")


class ConfigError(ValueError):
    """Configuration syntax, type, or range problem, located at source:line."""

    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line


@dataclass(frozen=True)
class PipelineConfig:
    threshold: float = DEFAULT_FORK_THRESHOLD
    seed: int = 0
    execution: str = "sequential"
    cascade: CascadeParams = field(default_factory=CascadeParams)
    cadence: int = DEFAULT_CADENCE
    block: BlockParams = field(default_factory=BlockParams)
    weights_path: Optional[str] = None
    analyzer_weights: tuple = DEFAULT_WEIGHTS
    budget_ms: float = DEFAULT_BUDGET_MS
    feedback_window: int = DEFAULT_FEEDBACK_WINDOW  # 0 disables feedback
    sender: SenderConfig = field(default_factory=SenderConfig)
    loss: LossModel = field(default_factory=LossModel)

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        if self.execution not in EXECUTION_MODES:
            raise ValueError(f"execution must be one of {EXECUTION_MODES}")
        if self.cadence < 2:
            raise ValueError("cadence must be at least 2")
        if self.budget_ms <= 0:
            raise ValueError("budget_ms must be positive")
        if self.feedback_window < 0:
            raise ValueError("feedback_window must be >= 0 (0 disables feedback)")
        if len(self.analyzer_weights) != 3 or any(w < 0 for w in self.analyzer_weights):
            raise ValueError("analyzer weights must be three non-negative numbers")


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_scale(raw: str) -> Fraction:
    aliases = {"1": Fraction(1), "1/1": Fraction(1), "3/4": Fraction(3, 4),
               "0.75": Fraction(3, 4), "1/2": Fraction(1, 2), "0.5": Fraction(1, 2)}
    if raw in aliases:
        return aliases[raw]
    raise ValueError(f"resolution_scale must be 1, 3/4, or 1/2, got {raw!r}")


def _parse_tau(raw: str) -> Optional[float]:
    if raw.lower() == "auto":
        return None
    value = float(raw)
    if value < 0:
        raise ValueError("fusion_tau must be non-negative or 'auto'")
    return value


def _positive_float(raw: str) -> float:
    value = float(raw)
    if value <= 0:
        raise ValueError(f"must be positive, got {raw}")
    return value


def _nonneg_float(raw: str) -> float:
    value = float(raw)
    if value < 0:
        raise ValueError(f"must be non-negative, got {raw}")
    return value


def _probability(raw: str) -> float:
    value = float(raw)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"must be in [0, 1], got {raw}")
    return value


def _int_at_least(minimum: int):
    def cast(raw: str) -> int:
        value = int(raw)
        if value < minimum:
            raise ValueError(f"must be >= {minimum}, got {raw}")
        return value
    return cast


def _enum_value(enum_cls):
    def cast(raw: str):
        for member in enum_cls:
            if member.value == raw.lower():
                return member
        options = ", ".join(m.value for m in enum_cls)
        raise ValueError(f"expected one of {options}, got {raw!r}")
    return cast


def _choice(*options: str):
    def cast(raw: str) -> str:
        if raw in options:
            return raw
        raise ValueError(f"expected one of {', '.join(options)}, got {raw!r}")
    return cast


# section -> key -> caster; the parse result is a plain {section: {key: value}}
_SCHEMA = {
    "pipeline": {
        "threshold": _nonneg_float,
        "seed": int,
        "execution": _choice(*EXECUTION_MODES),
    },
    "image_denoiser": {
        "bilateral_spatial_sigma": _positive_float,
        "bilateral_range_factor": _positive_float,
        "gaussian_sigma_divisor": _positive_float,
        "gaussian_sigma_min": _positive_float,
        "gaussian_sigma_max": _positive_float,
        "fusion_tau": _parse_tau,
        "window_radius": _int_at_least(1),
    },
    "video_denoiser": {
        "mode": _enum_value(BlockMode),
        "k_temporal": _positive_float,
        "spatial_enabled": _parse_bool,
        "cadence": _int_at_least(2),
        "weights": str,
    },
    "analyzer": {
        "weight_psnr": _nonneg_float,
        "weight_ssim": _nonneg_float,
        "weight_runtime": _nonneg_float,
        "budget_ms": _positive_float,
        "feedback_window": _int_at_least(0),
    },
    "sender": {
        "q": _int_at_least(1),
        "resolution_scale": _parse_scale,
        "framerate_divisor": _int_at_least(1),
        "q_min": _int_at_least(1),
        "q_max": _int_at_least(1),
        "noise_sigma": _nonneg_float,
    },
    "loss": {
        "model": _enum_value(LossKind),
        "p_loss": _probability,
        "p_enter_bad": _probability,
        "p_exit_bad": _probability,
        "p_loss_bad": _probability,
        "slice_height": _int_at_least(1),
        "seed": int,
    },
}


def _scan(text: str, source: str) -> dict:
    """Tokenize into {section: {key: (value, line)}} with strict validation."""
    staged: dict = {name: {} for name in _SCHEMA}
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1)
            if section not in _SCHEMA:
                raise ConfigError(source, lineno, f"unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(source, lineno, f"expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(source, lineno, "key before any [section] header")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _SCHEMA[section]:
            raise ConfigError(source, lineno, f"unknown key {key!r} in section [{section}]")
        if key in staged[section]:
            first = staged[section][key][1]
            raise ConfigError(source, lineno, f"duplicate key {key!r} (first set on line {first})")
        staged[section][key] = (value, lineno)
    return staged


class _Section:
    def __init__(self, staged: dict, source: str, name: str):
        self._values = staged[name]
        self._source = source
        self._name = name

    def get(self, key: str, default):
        if key not in self._values:
            return default
        raw, lineno = self._values[key]
        try:
            return _SCHEMA[self._name][key](raw)
        except ValueError as exc:
            raise ConfigError(self._source, lineno, f"{self._name}.{key}: {exc}") from exc

    def line_of(self, key: str, fallback: int = 0) -> int:
        return self._values[key][1] if key in self._values else fallback


def parse_config_text(text: str, source: str = "<config>") -> PipelineConfig:
    staged = _scan(text, source)
    defaults = PipelineConfig()

    pipe = _Section(staged, source, "pipeline")
    image = _Section(staged, source, "image_denoiser")
    video = _Section(staged, source, "video_denoiser")
    analyzer = _Section(staged, source, "analyzer")
    sender = _Section(staged, source, "sender")
    loss = _Section(staged, source, "loss")

    dcascade = defaults.cascade
    try:
        cascade = CascadeParams(
            bilateral_spatial_sigma=image.get("bilateral_spatial_sigma", dcascade.bilateral_spatial_sigma),
            bilateral_range_factor=image.get("bilateral_range_factor", dcascade.bilateral_range_factor),
            gaussian_sigma_divisor=image.get("gaussian_sigma_divisor", dcascade.gaussian_sigma_divisor),
            gaussian_sigma_min=image.get("gaussian_sigma_min", dcascade.gaussian_sigma_min),
            gaussian_sigma_max=image.get("gaussian_sigma_max", dcascade.gaussian_sigma_max),
            fusion_tau=image.get("fusion_tau", dcascade.fusion_tau),
            window_radius=image.get("window_radius", dcascade.window_radius),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(source, image.line_of("gaussian_sigma_min"), f"[image_denoiser]: {exc}") from exc

    weights_path = video.get("weights", None)
    conv_weights = None
    if weights_path is not None:
        try:
            conv_weights = read_weights_file(weights_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(source, video.line_of("weights"), f"cannot load weights: {exc}") from exc
    mode = video.get("mode", defaults.block.mode)
    if mode is BlockMode.CONV and conv_weights is None:
        raise ConfigError(source, video.line_of("mode"), "mode = conv requires a weights path")
    block = BlockParams(
        mode=mode,
        k_temporal=video.get("k_temporal", defaults.block.k_temporal),
        spatial_enabled=video.get("spatial_enabled", defaults.block.spatial_enabled),
        conv_weights=conv_weights,
    )

    dsender = defaults.sender
    try:
        sender_cfg = SenderConfig(
            q=sender.get("q", dsender.q),
            resolution_scale=sender.get("resolution_scale", dsender.resolution_scale),
            framerate_divisor=sender.get("framerate_divisor", dsender.framerate_divisor),
            q_min=sender.get("q_min", dsender.q_min),
            q_max=sender.get("q_max", dsender.q_max),
            noise_sigma=sender.get("noise_sigma", dsender.noise_sigma),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(source, sender.line_of("q"), f"[sender]: {exc}") from exc

    dloss = defaults.loss
    try:
        loss_model = LossModel(
            kind=loss.get("model", dloss.kind),
            p_loss=loss.get("p_loss", dloss.p_loss),
            p_enter_bad=loss.get("p_enter_bad", dloss.p_enter_bad),
            p_exit_bad=loss.get("p_exit_bad", dloss.p_exit_bad),
            p_loss_bad=loss.get("p_loss_bad", dloss.p_loss_bad),
            slice_height=loss.get("slice_height", dloss.slice_height),
            seed=loss.get("seed", dloss.seed),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(source, loss.line_of("model"), f"[loss]: {exc}") from exc

    try:
        return PipelineConfig(
            threshold=pipe.get("threshold", defaults.threshold),
            seed=pipe.get("seed", defaults.seed),
            execution=pipe.get("execution", defaults.execution),
            cascade=cascade,
            cadence=video.get("cadence", defaults.cadence),
            block=block,
            weights_path=weights_path,
            analyzer_weights=(
                analyzer.get("weight_psnr", defaults.analyzer_weights[0]),
                analyzer.get("weight_ssim", defaults.analyzer_weights[1]),
                analyzer.get("weight_runtime", defaults.analyzer_weights[2]),
            ),
            budget_ms=analyzer.get("budget_ms", defaults.budget_ms),
            feedback_window=analyzer.get("feedback_window", defaults.feedback_window),
            sender=sender_cfg,
            loss=loss_model,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(source, 0, str(exc)) from exc


def parse_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def _format_scale(scale: Fraction) -> str:
    return "1" if scale == 1 else f"{scale.numerator}/{scale.denominator}"


def dump_config(config: PipelineConfig) -> str:
    """Render the full configuration; parse_config_text() round-trips it."""
    cascade = config.cascade
    block = config.block
    sender = config.sender
    loss = config.loss
    lines = [
        "[pipeline]",
        f"threshold = {config.threshold}",
        f"seed = {config.seed}",
        f"execution = {config.execution}",
        "",
        "[image_denoiser]",
        f"bilateral_spatial_sigma = {cascade.bilateral_spatial_sigma}",
        f"bilateral_range_factor = {cascade.bilateral_range_factor}",
        f"gaussian_sigma_divisor = {cascade.gaussian_sigma_divisor}",
        f"gaussian_sigma_min = {cascade.gaussian_sigma_min}",
        f"gaussian_sigma_max = {cascade.gaussian_sigma_max}",
        f"fusion_tau = {'auto' if cascade.fusion_tau is None else cascade.fusion_tau}",
        f"window_radius = {cascade.window_radius}",
        "",
        "[video_denoiser]",
        f"mode = {block.mode.value}",
        f"k_temporal = {block.k_temporal}",
        f"spatial_enabled = {'true' if block.spatial_enabled else 'false'}",
        f"cadence = {config.cadence}",
    ]
    if config.weights_path is not None:
        lines.append(f"weights = {config.weights_path}")
    lines += [
        "",
        "[analyzer]",
        f"weight_psnr = {config.analyzer_weights[0]}",
        f"weight_ssim = {config.analyzer_weights[1]}",
        f"weight_runtime = {config.analyzer_weights[2]}",
        f"budget_ms = {config.budget_ms}",
        f"feedback_window = {config.feedback_window}",
        "",
        "[sender]",
        f"q = {sender.q}",
        f"resolution_scale = {_format_scale(sender.resolution_scale)}",
        f"framerate_divisor = {sender.framerate_divisor}",
        f"q_min = {sender.q_min}",
        f"q_max = {sender.q_max}",
        f"noise_sigma = {sender.noise_sigma}",
        "",
        "[loss]",
        f"model = {loss.kind.value}",
        f"p_loss = {loss.p_loss}",
        f"p_enter_bad = {loss.p_enter_bad}",
        f"p_exit_bad = {loss.p_exit_bad}",
        f"p_loss_bad = {loss.p_loss_bad}",
        f"slice_height = {loss.slice_height}",
        f"seed = {loss.seed}",
        "",
    ]
    return "\n".join(lines)


def fresh_loss_model(config: PipelineConfig) -> LossModel:
    """Per-run copy of the loss template with state zeroed and the seed mixed.

    The effective seed combines [pipeline] seed and [loss] seed so that one
    top-level seed reproduces a whole run while distinct loss sub-streams
    stay decorrelated.
    """
    from .rng import NoiseRng

    # stream 2 under the pipeline seed is reserved for the channel; stream 1
    # feeds capture noise (see pipeline.py)
    mixed = NoiseRng(seed=config.seed).derive(2).derive(config.loss.seed).seed
    return replace(config.loss, seed=int(mixed), in_bad=False, draws=0)
