"""Experiment configuration files.

Configurations are INI-style text with five sections::

    [layout]      regions, shapes, sigmas, targets, donors, inter_r, gap
    [intra]       named intra-correlation models "<k_max> <r_min>"
    [noise]       local-noise correlation weights eta_0 .. eta_{p-1}
    [scenarios]   one grid cell per line: "<intra_model> <snr_eps> <snr_e>"
                  (decibel values, or "off" for no noise)
    [methods]     one estimator per line: optional "key=value" tokens
                  among method=, nu=, delta=, B=; the line label is the
                  method name unless method= overrides it

Run-level knobs (replications, samples T, master seed, worker count)
are not part of the file; they come from the caller or command line.
A complete reference file equivalent to the built-in default study is
available from ``reference_config_text()``.
"""

from __future__ import annotations

import configparser
import io
from pathlib import Path

from .estimators import EstimatorConfig, canonical_method
from .harness import DEFAULT_MASTER_SEED, ExperimentConfig, Scenario
from .lattice import CompactNoiseCorrelation, LinearDecayCorrelation, RegionSpec
from .model import make_layout


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


def _split(value: str) -> list[str]:
    return value.replace(",", " ").split()


def _parse_methods(section, targets, donors) -> list[EstimatorConfig]:
    methods = []
    for label, value in section.items():
        tokens = dict(tok.split("=", 1) for tok in _split(value) if "=" in tok)
        extra = [tok for tok in _split(value) if "=" not in tok]
        if extra:
            raise ConfigError(f"[methods] {label}: unexpected tokens {extra}")
        name = canonical_method(tokens.pop("method", label))
        kwargs = {}
        if "nu" in tokens:
            kwargs["nu"] = int(tokens.pop("nu"))
        if "delta" in tokens:
            kwargs["delta"] = int(tokens.pop("delta"))
        if "B" in tokens or "b" in tokens:
            kwargs["B"] = int(tokens.pop("B", tokens.pop("b", None)))
        if tokens:
            raise ConfigError(f"[methods] {label}: unknown keys {sorted(tokens)}")
        donor_kwargs = {}
        if name in ("D", "LD", "RD", "LRD"):
            if donors is None:
                raise ConfigError(
                    f"[methods] {label}: method {name} needs donors in [layout]")
            donor_kwargs = {"donor_k": donors[0], "donor_kp": donors[1]}
        methods.append(EstimatorConfig(method=name, target_j=targets[0],
                                       target_jp=targets[1], **donor_kwargs,
                                       **kwargs))
    if not methods:
        raise ConfigError("[methods] section is empty")
    return methods


def parse_config(text: str, *, reps: int = 100, T: int = 1000,
                 master_seed: int = DEFAULT_MASTER_SEED,
                 n_jobs: int = 1) -> ExperimentConfig:
    """Build an ExperimentConfig from configuration text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep region/scenario ids case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for required in ("layout", "intra", "scenarios", "methods"):
        if not parser.has_section(required):
            raise ConfigError(f"missing [{required}] section")

    lay = parser["layout"]
    try:
        region_ids = _split(lay["regions"])
        targets = tuple(_split(lay["targets"]))
        inter_r = float(lay["inter_r"])
        blocks = []
        for rid in region_ids:
            shape = tuple(int(x) for x in _split(lay[f"shape_{rid}"]))
            sigma = float(lay[f"sigma_{rid}"])
            blocks.append((rid, shape, sigma))
    except KeyError as exc:
        raise ConfigError(f"[layout] missing key {exc}") from exc
    if len(targets) != 2:
        raise ConfigError("[layout] targets must list exactly two region ids")
    donors = None
    if "donors" in lay:
        donors = tuple(_split(lay["donors"]))
        if len(donors) != 2:
            raise ConfigError("[layout] donors must list exactly two region ids")

    noise = CompactNoiseCorrelation()
    if parser.has_section("noise") and "eta" in parser["noise"]:
        weights = tuple(float(x) for x in _split(parser["noise"]["eta"]))
        noise = CompactNoiseCorrelation(weights)

    intra_models = {}
    for name, value in parser["intra"].items():
        parts = _split(value)
        if len(parts) != 2:
            raise ConfigError(f"[intra] {name}: expected '<k_max> <r_min>'")
        intra_models[name] = LinearDecayCorrelation(float(parts[0]),
                                                    float(parts[1]))

    scenarios = []
    for sid, value in parser["scenarios"].items():
        parts = _split(value)
        if len(parts) != 3:
            raise ConfigError(
                f"[scenarios] {sid}: expected '<intra_model> <snr_eps> <snr_e>'")
        model, snr_eps, snr_e = parts
        scenarios.append(Scenario(
            id=sid, intra_model=model,
            snr_eps_db=None if snr_eps.lower() == "off" else float(snr_eps),
            snr_e_db=None if snr_e.lower() == "off" else float(snr_e)))
    if not scenarios:
        raise ConfigError("[scenarios] section is empty")

    methods = _parse_methods(parser["methods"], targets, donors)

    p = noise.support
    max_delta = max((m.delta if m.delta is not None else max(p, 1)
                     for m in methods), default=1)
    gap = int(lay["gap"]) if "gap" in lay else max(p, max_delta, 2)
    regions = make_layout(blocks, gap=gap)

    return ExperimentConfig(
        regions=regions, targets=targets, inter_r=inter_r,
        intra_models=intra_models, scenarios=scenarios, methods=methods,
        noise_corr=noise, reps=reps, T=T, master_seed=master_seed,
        n_jobs=n_jobs)


def load_config(path, **run_kwargs) -> ExperimentConfig:
    """Read and parse a configuration file."""
    return parse_config(Path(path).read_text(encoding="utf-8"), **run_kwargs)


def reference_config_text() -> str:
    """A complete config file equivalent to the built-in default study."""
    return io.StringIO(_REFERENCE).getvalue()


def write_reference_config(path) -> None:
    Path(path).write_text(reference_config_text(), encoding="utf-8")


_REFERENCE = """\
; Reference study configuration: two target regions observed with local
; and global noise, plus two disconnected donor regions.
[layout]
regions = j jp k kp
shape_j = 20 20
sigma_j = 1.0
shape_jp = 40 40
sigma_jp = 2.0
shape_k = 10 10
sigma_k = 1.0
shape_kp = 10 10
sigma_kp = 1.0
targets = j jp
donors = k kp
inter_r = 0.6
gap = 2

[intra]
; name = k_max r_min  ->  rho(d) = max(1 - d/k_max, r_min)
model1 = 300 0.9
model2 = 100 0.6

[noise]
; eta_0 .. eta_{p-1}; a single 1.0 means spatially uncorrelated noise
eta = 1.0

[scenarios]
; id = intra_model snr_eps_db snr_e_db   ("off" disables that noise)
model1-none = model1 off off
model1-local0db = model1 0 off
model1-local10db = model1 10 off
model1-global0db = model1 off 0
model1-global10db = model1 off 10
model2-none = model2 off off
model2-local0db = model2 0 off
model2-local10db = model2 10 off
model2-global0db = model2 off 0
model2-global10db = model2 off 10

[methods]
; label = [method=NAME] [nu=..] [delta=..] [B=..]
ca =
ac =
act =
lca = nu=1
r = delta=1
lr = nu=1 delta=1
d =
ld = nu=1
rd = delta=1
lrd = nu=1 delta=1
"""
