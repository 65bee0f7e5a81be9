"""Experiment configuration: a flat ``key = value`` text format.

Grammar, one entry per line::

    # comment
    key = 12            # integer
    key = 0.125         # decimal
    key = "text"        # string (bare words are accepted too)
    key = [0.5, 0.125]  # array, may nest
    key = none          # unset

Values are parsed with :func:`ast.literal_eval`; anything it rejects is
kept as a bare string.
"""
from __future__ import annotations

import ast
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError, InsufficientReplicas

__all__ = ["ExperimentConfig", "parse_config_text", "load_config", "FORMAT_VERSION"]

FORMAT_VERSION = 1

EXPERIMENTS = ("universality", "mean-check", "var-check", "clt-check")


@dataclass
class ExperimentConfig:
    experiment: str = "universality"
    potentials: list = field(default_factory=lambda: [[0.5]])
    beta: float = 2.0
    a: float = 0.0
    sizes: list = field(default_factory=lambda: [400])
    replicas: int = 2000
    k: int = 4
    master_seed: int = 0
    output_dir: str = "results"
    kernel_convention: str = "corrected"
    # SBO target
    sbo_target: bool = True
    sbo_M: int = 1000
    sbo_eps: float = 1e-6
    sbo_replicas: int = 2000
    # MCMC for non-linear potentials
    mcmc_burn_in: int | None = None
    mcmc_thin: int | None = None
    mcmc_chains: int | None = None
    # thresholds
    ks_threshold: float = 0.06
    verdict_indices: list = field(default_factory=lambda: [1])
    control_alpha: float = 0.05
    bootstrap: int = 200
    mean_s: float = 0.2
    mean_t: float = 0.8
    mean_rate_tol: float = 0.3
    var_block: int | None = None
    var_start: int | None = None
    var_tol: float = 0.15
    var_beta_scaling: bool = True
    var_beta_tol: float = 0.2
    clt_times: list = field(default_factory=lambda: [0.2, 0.5, 0.8])
    clt_var_tol: float = 0.10
    clt_ks: float = 0.05
    clt_mean_z: float = 4.0
    clt_cov_tol: float = 0.15
    clt_incr_corr: float = 0.1
    clt_x_tol: float = 0.02
    min_replicas: int = 100

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.potentials or any(not isinstance(g, (list, tuple)) or not g for g in self.potentials):
            raise ConfigError("potentials must be a non-empty list of coefficient lists")
        if not self.sizes or any(int(n) != n or n < 2 for n in self.sizes):
            raise ConfigError("sizes must be integers >= 2")
        if list(self.sizes) != sorted(self.sizes):
            raise ConfigError("sizes must be ascending")
        if not self.beta >= 1 or not self.a > -1:
            raise ConfigError("need beta >= 1 and a > -1")
        if self.experiment in ("universality", "var-check", "clt-check"):
            if self.replicas < self.min_replicas:
                raise InsufficientReplicas(f"replicas = {self.replicas} < {self.min_replicas}")
            if self.experiment == "universality":
                if self.sbo_target and self.sbo_replicas < self.min_replicas:
                    raise InsufficientReplicas(f"sbo_replicas = {self.sbo_replicas} < {self.min_replicas}")
                if len(self.potentials) + int(bool(self.sbo_target)) < 2:
                    raise ConfigError("universality needs two ensembles or one ensemble plus the SBO target")
        if self.kernel_convention not in ("corrected", "literal"):
            raise ConfigError("kernel_convention must be 'corrected' or 'literal'")
        if not 1 <= self.k <= 20:
            raise ConfigError("k must lie in [1, 20]")
        if any(not 1 <= i <= self.k for i in self.verdict_indices):
            raise ConfigError("verdict_indices must lie in [1, k]")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def updated(self, **overrides) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(self)}
        bad = set(overrides) - names
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return dataclasses.replace(self, **overrides)


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_config_text(text: str) -> dict:
    """Parse the ``key = value`` format into a dict."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key.isidentifier():
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        values[key] = _parse_value(val)
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    values.update(overrides or {})
    return ExperimentConfig().updated(**values).validate()


def parse_override(item: str):
    """``key=value`` command-line override."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, val = item.split("=", 1)
    return key.strip().replace("-", "_"), _parse_value(val)
