"""TOML run configuration: parsing, overrides, and object construction.

A config file has sections [topology], [problem], [domain], [schedules],
[noise], [stream], [run]. ``load_config`` turns a file plus any
``section.key=value`` override strings into a validated
:class:`ldonline.simulate.RunConfig`.
"""

from __future__ import annotations

import math
import re

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import topology
from .learner import ProjectionSet
from .objectives import (LogisticLoss, ProblemSpec, RidgeLoss,
                         logistic_constants, ridge_constants)
from .privacy import NoiseSchedule
from .schedules import Schedules
from .simulate import (FileStream, RunConfig, SyntheticLinearStream,
                       SyntheticLogisticStream, load_svmlight)


class ConfigError(ValueError):
    """Unusable configuration; message lists every problem found."""


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def parse_override(text: str):
    """Split ``section.key=value`` into a key path and a typed value.

    The value is parsed with TOML syntax, so strings need quotes and lists
    use brackets: ``run.seed=3``, ``stream.kind="file"``.
    """
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(f"override {text!r} has an empty key component")
    raw = raw.strip()
    try:
        doc = tomllib.loads(f"value = {raw}")
    except tomllib.TOMLDecodeError:
        # bare words are treated as strings for convenience; anything that
        # looks like a malformed literal stays an error
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_\-]*", raw):
            return key.split("."), raw
        raise ConfigError(f"override {text!r} has an unparseable value")
    return key.split("."), doc["value"]


def apply_overrides(doc: dict, overrides) -> dict:
    for text in overrides:
        path, value = parse_override(text)
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends through a scalar")
        node[path[-1]] = value
    return doc


def _require(section: dict, key: str, where: str, problems: list, default=None):
    if key in section:
        return section[key]
    if default is not None:
        return default
    problems.append(f"[{where}] missing required key {key!r}")
    return None


def _build_topology(sec: dict, problems: list):
    kind = _require(sec, "kind", "topology", problems, default="ring")
    scheme = sec.get("scheme", "metropolis")
    scale = sec.get("scale", "auto")
    try:
        if kind == "explicit":
            return topology.from_entries(sec["entries"])
        m = int(_require(sec, "m", "topology", problems, default=0) or 0)
        if m < 1:
            problems.append("[topology] m must be >= 1")
            return None
        if kind == "erdos_renyi":
            graph = topology.erdos_renyi(m, float(sec.get("p", 0.5)),
                                         int(sec.get("graph_seed", 0)))
        elif kind in topology.GENERATORS:
            graph = topology.GENERATORS[kind](m)
        else:
            problems.append(f"[topology] unknown kind {kind!r}")
            return None
        return topology.build_weight_matrix(
            graph, scheme=scheme, scale=scale,
            uniform_weight=sec.get("uniform_weight"))
    except (ValueError, KeyError) as exc:
        problems.append(f"[topology] {exc}")
        return None


def _build_domain(sec: dict, problems: list):
    kind = sec.get("kind", "ball")
    try:
        if kind == "ball":
            center = sec.get("center")
            radius = sec.get("radius")
            if center is None or radius is None:
                problems.append("[domain] ball needs center and radius")
                return None
            return ProjectionSet(kind="ball", center=np.asarray(center, dtype=float),
                                 radius=float(radius))
        if kind == "box":
            lo, hi = sec.get("lo"), sec.get("hi")
            if lo is None or hi is None:
                problems.append("[domain] box needs lo and hi")
                return None
            return ProjectionSet(kind="box", lo=np.asarray(lo, dtype=float),
                                 hi=np.asarray(hi, dtype=float))
        problems.append(f"[domain] unknown kind {kind!r}")
    except ValueError as exc:
        problems.append(f"[domain] {exc}")
    return None


def _build_stream(sec: dict, m: int, problems: list):
    kind = sec.get("kind", "synthetic_linear")
    try:
        if kind == "synthetic_linear":
            return SyntheticLinearStream(
                theta_true=tuple(sec["theta_true"]),
                feature_bound=float(sec["feature_bound"]),
                label_noise=float(sec.get("label_noise", 0.0)))
        if kind == "synthetic_logistic":
            return SyntheticLogisticStream(
                theta_true=tuple(sec["theta_true"]),
                feature_bound=float(sec["feature_bound"]))
        if kind == "file":
            label_map = sec.get("label_map")
            if label_map is not None:
                label_map = {_label_key(k): float(v)
                             for k, v in label_map.items()}
            X, y = load_svmlight(sec["path"], label_map=label_map,
                                 scale_features=bool(sec.get("scale_features", False)))
            return FileStream(X=X, y=y, m=m)
        problems.append(f"[stream] unknown kind {kind!r}")
    except KeyError as exc:
        problems.append(f"[stream] missing key {exc}")
    except (ValueError, OSError) as exc:
        problems.append(f"[stream] {exc}")
    return None


def _label_key(k):
    try:
        f = float(k)
        return int(f) if f.is_integer() else f
    except (TypeError, ValueError):
        return k


def _stream_feature_bound(stream):
    if isinstance(stream, (SyntheticLinearStream, SyntheticLogisticStream)):
        return stream.feature_bound
    return float(np.abs(stream.X).max())


def _domain_radius(domain: ProjectionSet) -> float:
    if domain.kind == "ball":
        return float(domain.radius + np.linalg.norm(domain.center))
    return float(np.max(np.abs(np.stack([domain.lo, domain.hi]))) * math.sqrt(domain.dim))


def _build_problem(sec: dict, domain, stream, problems: list):
    kind = sec.get("loss", "ridge")
    if kind == "ridge":
        loss = RidgeLoss(float(sec.get("alpha", 0.0)))
    elif kind == "logistic":
        loss = LogisticLoss(float(sec.get("r", 0.0)))
    else:
        problems.append(f"[problem] unknown loss {kind!r}")
        return None
    explicit = all(k in sec for k in
                   ("mu", "lipschitz", "grad_bound", "kappa_sq", "l1_clip"))
    try:
        if explicit:
            mu, L = float(sec["mu"]), float(sec["lipschitz"])
            D, k2, C = (float(sec["grad_bound"]), float(sec["kappa_sq"]),
                        float(sec["l1_clip"]))
        else:
            if domain is None or stream is None:
                problems.append(
                    "[problem] constants not given and not derivable without"
                    " a valid domain and stream")
                return None
            B = float(sec.get("feature_bound", _stream_feature_bound(stream)))
            R = _domain_radius(domain)
            n = domain.dim
            if kind == "ridge":
                Y = float(sec.get("label_bound",
                                  _default_label_bound(stream, B, n)))
                mu, L, D, k2, C = ridge_constants(loss.alpha, B, R, Y, n)
            else:
                mu, L, D, k2, C = logistic_constants(loss.r, B, R, n)
            # explicit keys override individual derived constants
            mu = float(sec.get("mu", mu))
            L = float(sec.get("lipschitz", L))
            D = float(sec.get("grad_bound", D))
            k2 = float(sec.get("kappa_sq", k2))
            C = float(sec.get("l1_clip", C))
        return ProblemSpec(loss=loss, mu=mu, lipschitz=L, grad_bound=D,
                           kappa_sq=k2, l1_clip=C, domain=domain)
    except ValueError as exc:
        problems.append(f"[problem] {exc}")
        return None


def _default_label_bound(stream, feature_bound, dim):
    if isinstance(stream, SyntheticLinearStream):
        signal = feature_bound * float(np.abs(stream.theta_true).sum())
        return signal + 4.0 * stream.label_noise
    if isinstance(stream, FileStream):
        return float(np.abs(stream.y).max())
    return 1.0


def _build_noise(sec: dict, m: int, problems: list):
    sigma = sec.get("sigma", 1.0)
    varsigma = sec.get("varsigma", 0.1)
    sigmas = list(sigma) if isinstance(sigma, list) else [sigma] * m
    varsigmas = list(varsigma) if isinstance(varsigma, list) else [varsigma] * m
    if len(sigmas) != m or len(varsigmas) != m:
        problems.append(f"[noise] need one sigma/varsigma per learner (m={m})")
        return None
    try:
        return tuple(NoiseSchedule(float(s), float(vs))
                     for s, vs in zip(sigmas, varsigmas))
    except ValueError as exc:
        problems.append(f"[noise] {exc}")
        return None


def build_config(doc: dict) -> RunConfig:
    problems = []
    weights = _build_topology(doc.get("topology", {}), problems)
    domain = _build_domain(doc.get("domain", {}), problems)
    m = weights.m if weights is not None else 1
    stream = _build_stream(doc.get("stream", {}), m, problems)

    sched_sec = doc.get("schedules", {})
    sched = None
    try:
        sched = Schedules(gamma0=float(sched_sec.get("gamma0", 0.1)),
                          u=float(sched_sec.get("u", 0.7)),
                          lambda0=float(sched_sec.get("lambda0", 0.01)),
                          v=float(sched_sec.get("v", 0.8)),
                          regime=sched_sec.get("regime", "theorem1"))
    except ValueError as exc:
        problems.append(f"[schedules] {exc}")

    noise = _build_noise(doc.get("noise", {}), m, problems)
    problem = _build_problem(doc.get("problem", {}), domain, stream, problems)

    run_sec = doc.get("run", {})
    horizon = int(run_sec.get("horizon", 0))
    if horizon < 1:
        problems.append("[run] horizon must be >= 1")
    if problems:
        raise ConfigError("; ".join(problems))

    config = RunConfig(
        weights=weights, problem=problem, schedules=sched, noise=noise,
        projection=domain, stream=stream, horizon=horizon,
        replicates=int(run_sec.get("replicates", 1)),
        seed=int(run_sec.get("seed", 0)),
        checkpoints=tuple(run_sec.get("checkpoints", ())) or None,
        engine=run_sec.get("engine"),
        noise_on=bool(run_sec.get("noise_on", True)),
        clip_gradients=bool(run_sec.get("clip_gradients", False)),
        record_dynamic=bool(run_sec.get("record_dynamic", False)))
    remaining = config.validate()
    if remaining:
        raise ConfigError("; ".join(remaining))
    return config


def load_config(path, overrides=()) -> RunConfig:
    doc = apply_overrides(load_toml(path), overrides)
    return build_config(doc)
