"""Experiment configuration files.

Grammar (one construct per line)::

    # comment                    full-line comment, also ';'
    [section]                    starts a section
    key = value                  value is a Python literal, or a bare word

Values are read with ``ast.literal_eval``; anything that is not a literal
(``entropy``, ``auto``) is kept as a plain string. Inline comments start
with ``#`` outside of quotes. Every error carries the file name and line.

Sections and keys::

    [run]          mode = offline | online, seed = <u64>
    [environment]  grid_side, horizon, noise_up_prob, noise_down_prob,
                   noise_left_prob, noise_right_prob
    [objective]    objective = entropy | multi | linear, targets, reward_file
    [solver]       iterations, tau, rho_steps                        (offline)
                   episodes, agents, tau, alpha, estimator, variants,
                   comparator_iterations, comparator_tau, snapshot_every (online)
    [output]       dir

Only ``[objective]`` is mandatory.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

SECTIONS = ("run", "environment", "objective", "solver", "output")
OFFLINE_KEYS = {"iterations", "tau", "rho_steps"}
ONLINE_KEYS = {"episodes", "agents", "tau", "alpha", "estimator", "variants",
               "comparator_iterations", "comparator_tau", "snapshot_every"}
KNOWN_KEYS = {
    "run": {"mode", "seed"},
    "environment": {"grid_side", "horizon", "noise_up_prob", "noise_down_prob",
                    "noise_left_prob", "noise_right_prob"},
    "objective": {"objective", "targets", "reward_file"},
    "solver": OFFLINE_KEYS | ONLINE_KEYS,
    "output": {"dir"},
}
VARIANTS = ("greedy", "known", "never_learn")
MAX_SEED = 2 ** 64


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("\n".join(self.errors))


@dataclass
class Entry:
    value: object
    line: int


def _strip_comment(text: str) -> str:
    quote = None
    for i, ch in enumerate(text):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return text[:i]
    return text


def _literal(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text: str, source: str = "<config>",
                      errors: Optional[list] = None) -> dict[str, dict[str, Entry]]:
    """Split a config into ``{section: {key: Entry}}`` without interpreting values.

    With an ``errors`` list, problems are appended to it instead of raised.
    """
    sections: dict[str, dict[str, Entry]] = {}
    current = None
    current_name = None
    collect = errors is not None
    errors = errors if collect else []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        body = _strip_comment(stripped).strip()
        if body.startswith("["):
            if not body.endswith("]"):
                errors.append(f"{source}:{lineno}: malformed section header {body!r}")
                continue
            name = body[1:-1].strip()
            if name not in SECTIONS:
                errors.append(f"{source}:{lineno}: unknown section [{name}]")
                current = current_name = None
                continue
            if name in sections:
                errors.append(f"{source}:{lineno}: section [{name}] appears twice")
            current = sections.setdefault(name, {})
            current_name = name
            continue
        if "=" not in body:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {body!r}")
            continue
        key, raw = (part.strip() for part in body.split("=", 1))
        if current is None:
            if not sections:
                errors.append(f"{source}:{lineno}: key {key!r} outside any section")
            continue
        if key not in KNOWN_KEYS[current_name]:
            errors.append(f"{source}:{lineno}: unknown key {key!r} in [{current_name}]")
            continue
        if key in current:
            errors.append(f"{source}:{lineno}: duplicate key {key!r} "
                          f"(first set on line {current[key].line})")
            continue
        if not raw:
            errors.append(f"{source}:{lineno}: key {key!r} has no value")
            continue
        current[key] = Entry(_literal(raw), lineno)
    if errors and not collect:
        raise ConfigError(errors)
    return sections


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "offline"
    seed: int = 0
    grid_side: int = 11
    horizon: int = 40
    noise: dict = field(default_factory=lambda: {"up": 0.0, "down": 0.0, "left": 0.0, "right": 0.0})
    objective: str = "entropy"
    targets: tuple = ()
    reward_file: Optional[Path] = None
    iterations: int = 500
    tau: Union[str, float] = "auto"
    rho_steps: Optional[tuple] = None
    episodes: int = 200
    agents: int = 10
    alpha: Union[str, float] = "decay"
    estimator: str = "noise"
    variants: tuple = ("greedy",)
    comparator_iterations: int = 4000
    comparator_tau: Union[str, float] = 0.05
    snapshot_every: int = 0
    out_dir: Path = Path("curl_out")
    source: str = "<config>"

    def with_overrides(self, out_dir=None, seed=None) -> "ExperimentConfig":
        changes = {}
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir)
        if seed is not None:
            if not 0 <= seed < MAX_SEED:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {seed}")
            changes["seed"] = int(seed)
        return replace(self, **changes)

    @property
    def resolved_rho_steps(self) -> tuple:
        return self.rho_steps if self.rho_steps is not None else (self.horizon,)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def build_config(sections: dict[str, dict[str, Entry]], source: str = "<config>",
                 base_dir: Optional[Path] = None, errors: Optional[list] = None) -> ExperimentConfig:
    """Validate parsed sections into an :class:`ExperimentConfig`; collects all errors."""
    errors = [] if errors is None else errors
    values = {}

    def where(entry: Entry) -> str:
        return f"{source}:{entry.line}"

    def get(section, key):
        return sections.get(section, {}).get(key)

    def need_int(section, key, lo, hi=None):
        e = get(section, key)
        if e is None:
            return None
        if not _is_int(e.value) or e.value < lo or (hi is not None and e.value >= hi):
            bound = f">= {lo}" if hi is None else f"in [{lo}, {hi})"
            errors.append(f"{where(e)}: {key} must be an integer {bound}, got {e.value!r}")
            return None
        return e.value

    def need_step(section, key, allow_auto=True):
        e = get(section, key)
        if e is None:
            return None
        if allow_auto and e.value == "auto":
            return "auto"
        if not _is_num(e.value) or not e.value > 0:
            extra = " or 'auto'" if allow_auto else ""
            errors.append(f"{where(e)}: {key} must be a positive number{extra}, got {e.value!r}")
            return None
        return float(e.value)

    if "objective" not in sections:
        errors.append(f"{source}: missing [objective] section")

    e = get("run", "mode")
    mode = "offline"
    if e is not None:
        if e.value not in ("offline", "online"):
            errors.append(f"{where(e)}: mode must be 'offline' or 'online', got {e.value!r}")
        else:
            mode = e.value
    values["mode"] = mode
    seed = need_int("run", "seed", 0, MAX_SEED)
    if seed is not None:
        values["seed"] = seed

    side = need_int("environment", "grid_side", 5)
    if side is not None:
        if side % 2 == 0:
            errors.append(f"{where(get('environment', 'grid_side'))}: grid_side must be odd")
        else:
            values["grid_side"] = side
    horizon = need_int("environment", "horizon", 1)
    if horizon is not None:
        values["horizon"] = horizon
    noise = {}
    for sym in ("up", "down", "left", "right"):
        e = get("environment", f"noise_{sym}_prob")
        if e is None:
            noise[sym] = 0.0
        elif not _is_num(e.value) or not 0.0 <= e.value < 1.0:
            errors.append(f"{where(e)}: noise_{sym}_prob must lie in [0, 1), got {e.value!r}")
            noise[sym] = 0.0
        else:
            noise[sym] = float(e.value)
    if sum(noise.values()) >= 1.0:
        errors.append(f"{source}: noise probabilities sum to {sum(noise.values())}, must be < 1")
    values["noise"] = noise
    side = values.get("grid_side", 11)
    horizon = values.get("horizon", 40)

    e = get("objective", "objective")
    objective = None
    if e is None:
        if "objective" in sections:
            errors.append(f"{source}: [objective] needs an 'objective' key")
    elif e.value not in ("entropy", "multi", "linear"):
        errors.append(f"{where(e)}: objective must be entropy, multi or linear, got {e.value!r}")
    else:
        objective = values["objective"] = e.value
    e = get("objective", "targets")
    if objective == "multi":
        if e is None:
            errors.append(f"{source}: multi objective needs 'targets = [x1, x2, ...]'")
        elif (not isinstance(e.value, (list, tuple)) or not e.value
              or not all(_is_int(t) and 0 <= t < side * side for t in e.value)):
            errors.append(f"{where(e)}: targets must be a nonempty list of state indices "
                          f"in [0, {side * side}), got {e.value!r}")
        else:
            values["targets"] = tuple(e.value)
    elif e is not None:
        errors.append(f"{where(e)}: targets only apply to the multi objective")
    e = get("objective", "reward_file")
    if objective == "linear":
        if e is None or not isinstance(e.value, str):
            errors.append(f"{source}: linear objective needs 'reward_file = \"path\"'")
        else:
            path = Path(e.value)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            values["reward_file"] = path
    elif e is not None:
        errors.append(f"{where(e)}: reward_file only applies to the linear objective")

    own = OFFLINE_KEYS if mode == "offline" else ONLINE_KEYS
    for key, entry in sections.get("solver", {}).items():
        if key not in own:
            errors.append(f"{where(entry)}: solver key {key!r} is not used in {mode} mode")
    tau = need_step("solver", "tau")
    if tau is not None:
        values["tau"] = tau
    if mode == "offline":
        k = need_int("solver", "iterations", 1)
        if k is not None:
            values["iterations"] = k
        e = get("solver", "rho_steps")
        if e is not None:
            if (not isinstance(e.value, (list, tuple))
                    or not all(_is_int(n) and 0 <= n <= horizon for n in e.value)):
                errors.append(f"{where(e)}: rho_steps must list steps in [0, {horizon}], "
                              f"got {e.value!r}")
            else:
                values["rho_steps"] = tuple(sorted(set(e.value)))
    else:
        for key in ("episodes", "agents"):
            v = need_int("solver", key, 1)
            if v is not None:
                values[key] = v
        v = need_int("solver", "comparator_iterations", 0)
        if v is not None:
            values["comparator_iterations"] = v
        v = need_int("solver", "snapshot_every", 0)
        if v is not None:
            values["snapshot_every"] = v
        v = need_step("solver", "comparator_tau")
        if v is not None:
            values["comparator_tau"] = v
        e = get("solver", "alpha")
        if e is not None:
            if e.value in ("decay", "inverse_T"):
                values["alpha"] = e.value
            elif _is_num(e.value) and 0.0 < e.value < 0.5:
                values["alpha"] = float(e.value)
            else:
                errors.append(f"{where(e)}: alpha = {e.value!r} is outside the open interval "
                              f"(0, 1/2) allowed for the exploration mix (1 - alpha) pi + "
                              f"alpha / |A|; use a number in (0, 0.5), 'decay' or 'inverse_T'")
        e = get("solver", "estimator")
        if e is not None:
            if e.value not in ("noise", "counts"):
                errors.append(f"{where(e)}: estimator must be 'noise' or 'counts', got {e.value!r}")
            else:
                values["estimator"] = e.value
        e = get("solver", "variants")
        if e is not None:
            vals = e.value if isinstance(e.value, (list, tuple)) else None
            if not vals or not all(v in VARIANTS for v in vals) or len(set(vals)) != len(vals):
                errors.append(f"{where(e)}: variants must be a list of distinct names from "
                              f"{list(VARIANTS)}, got {e.value!r}")
            else:
                values["variants"] = tuple(vals)

    e = get("output", "dir")
    if e is not None:
        if not isinstance(e.value, str) or not e.value:
            errors.append(f"{where(e)}: dir must be a path string")
        else:
            values["out_dir"] = Path(e.value)

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(source=source, **values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    errors: list = []
    sections = parse_config_text(text, str(path), errors)
    return build_config(sections, str(path), base_dir=path.parent, errors=errors)
