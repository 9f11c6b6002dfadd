"""Config-driven sweeps comparing loss variants across seeds.

A single JSON config names an environment, a training recipe, and a list
of loss arms.  Every (arm, seed) pair trains independently; results land
in ``records.csv`` (one row per arm, seed, epoch), ``summary.csv`` (per-arm
final-epoch statistics), and one SVG chart per metric.  Identical configs
and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .agent import NonFiniteLossError, RiskMetric, TrainConfig, train
from .charts import emit_chart
from .environments import (
    MdpEnv,
    SabrConfig,
    SabrHedgingEnv,
    chain_mdp,
    load_mdp,
    oracle_return_distribution,
    oracle_truncation_bound,
    quantiles_from_support,
)
from .losses import LossSpec, LossVariant
from .noise import NoiseStats
from .records import write_records_csv

SUMMARY_COLUMNS = (
    "arm", "status", "seeds",
    "final_loss_mean", "final_loss_std",
    "final_w1_mean", "final_w1_std",
    "final_risk_mean", "final_risk_std",
    "final_b_mean", "final_b_std",
    "epochs_to_threshold_mean", "epochs_to_threshold_count",
)

_ENV_IDS = ("chain", "mdp_file", "sabr")
_ORACLE_TRUNCATION_TARGET = 1e-4


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""


def _need(mapping, key, path, kind):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    value = mapping[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, kind) and not (kind is not bool and isinstance(value, bool)):
        return value
    raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(value).__name__}")


def _optional(mapping, key, path, kind, default):
    if key not in mapping:
        return default
    return _need(mapping, key, path, kind)


def _parse_train(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("train: expected an object")
    out = {
        "learning_rate": _need(raw, "learning_rate", "train", float),
        "discount": _need(raw, "discount", "train", float),
        "epochs": _need(raw, "epochs", "train", int),
        "steps_per_epoch": _need(raw, "steps_per_epoch", "train", int),
        "exploration_epsilon": _need(raw, "exploration_epsilon", "train", float),
        "n_quantiles": _optional(raw, "n_quantiles", "train", int, 32),
        "risk_metric": _optional(raw, "risk_metric", "train", str, "mean"),
        "eval_episodes": _optional(raw, "eval_episodes", "train", int, 0),
        "record_timing": _optional(raw, "record_timing", "train", bool, False),
    }
    try:
        RiskMetric(out["risk_metric"])
    except ValueError:
        raise ConfigError(f"train.risk_metric: unknown metric {out['risk_metric']!r}") from None
    try:
        _train_config(out, LossSpec(LossVariant.QR), 0)
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from None
    return out


def _train_config(train_cfg: dict, loss: LossSpec, seed: int) -> TrainConfig:
    return TrainConfig(
        loss=loss,
        learning_rate=train_cfg["learning_rate"],
        discount=train_cfg["discount"],
        epochs=train_cfg["epochs"],
        steps_per_epoch=train_cfg["steps_per_epoch"],
        exploration_epsilon=train_cfg["exploration_epsilon"],
        seed=seed,
        risk_metric=RiskMetric(train_cfg["risk_metric"]),
        n_quantiles=train_cfg["n_quantiles"],
        eval_episodes=train_cfg["eval_episodes"],
        record_timing=train_cfg["record_timing"],
    )


def _parse_arms(raw) -> list:
    if not isinstance(raw, list) or len(raw) == 0:
        raise ConfigError("arms: at least one arm is required")
    arms = []
    names = set()
    for i, entry in enumerate(raw):
        path = f"arms[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: expected an object")
        name = _need(entry, "name", path, str)
        if not name or name in names:
            raise ConfigError(f"{path}.name: arm names must be nonempty and unique")
        names.add(name)
        variant = _need(entry, "variant", path, str)
        try:
            LossVariant(variant)
        except ValueError:
            raise ConfigError(f"{path}.variant: unknown variant {variant!r}") from None
        threshold = _optional(entry, "threshold", path, float, 1.0)
        adaptive = _optional(entry, "adaptive", path, bool, False)
        try:
            LossSpec(variant=LossVariant(variant), threshold=threshold, adaptive=adaptive)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        arms.append({"name": name, "variant": variant, "threshold": threshold, "adaptive": adaptive})
    return arms


def _parse_environment(raw, train_cfg: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("environment: expected an object")
    env_id = _need(raw, "id", "environment", str)
    if env_id not in _ENV_IDS:
        raise ConfigError(f"environment.id: unknown id {env_id!r}, expected one of {_ENV_IDS}")
    out = {"id": env_id}
    if env_id == "chain":
        out["length"] = _need(raw, "length", "environment", int)
        support = _need(raw, "reward_support", "environment", list)
        try:
            out["reward_support"] = [[float(v), float(p)] for v, p in support]
        except (TypeError, ValueError):
            raise ConfigError(
                "environment.reward_support: expected a list of [value, probability] pairs") from None
        out["stop_reward"] = _optional(raw, "stop_reward", "environment", float, -1.0)
        env_discount = _optional(raw, "discount", "environment", float, train_cfg["discount"])
        if env_discount != train_cfg["discount"]:
            raise ConfigError(
                f"environment.discount: {env_discount} conflicts with train.discount {train_cfg['discount']}")
    elif env_id == "mdp_file":
        out["path"] = _need(raw, "path", "environment", str)
        if not os.path.exists(out["path"]):
            raise ConfigError(f"environment.path: no such file {out['path']!r}")
        if "oracle_policy" in raw:
            out["oracle_policy"] = [int(a) for a in _need(raw, "oracle_policy", "environment", list)]
        out["oracle_horizon"] = _optional(raw, "oracle_horizon", "environment", int, 0)
    else:
        known = {"spot0", "vol0", "beta", "rho", "nu", "maturity", "steps", "strike",
                 "cost_rate", "hedge_grid", "forward_payoff"}
        for key in raw:
            if key != "id" and key not in known:
                raise ConfigError(f"environment.{key}: unknown SABR parameter")
        out.update({k: raw[k] for k in known if k in raw})
        if "hedge_grid" in out:
            out["hedge_grid"] = [float(h) for h in out["hedge_grid"]]
    try:
        _build_env(out, train_cfg)
    except ConfigError:
        raise
    except (ValueError, TypeError, RuntimeError, OSError) as exc:
        raise ConfigError(f"environment: {exc}") from None
    return out


def parse_experiment_config(source) -> dict:
    """Validate a config (dict, or path to a JSON file) and fill defaults.

    Returns a normalized plain dict; raises ConfigError naming the bad
    field otherwise.
    """
    if isinstance(source, str):
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    else:
        raw = source
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    train_cfg = _parse_train(raw.get("train", {}))
    arms = _parse_arms(raw.get("arms", []))
    if "environment" not in raw:
        raise ConfigError("environment: required field is missing")
    env_cfg = _parse_environment(raw["environment"], train_cfg)
    seeds = _need(raw, "seeds", "config", int)
    if seeds < 1:
        raise ConfigError(f"config.seeds: must be >= 1, got {seeds}")
    out_dir = _optional(raw, "out_dir", "config", str, "out")
    w1_threshold = _optional(raw, "w1_threshold", "config", float, 0.05)
    if not (w1_threshold > 0):
        raise ConfigError(f"config.w1_threshold: must be > 0, got {w1_threshold}")
    noise_raw = raw.get("noise", {})
    if not isinstance(noise_raw, dict):
        raise ConfigError("noise: expected an object")
    noise = {
        "center": _optional(noise_raw, "center", "noise", str, "batch"),
        "fallback_b": _optional(noise_raw, "fallback_b", "noise", float, 1.0),
    }
    try:
        NoiseStats(center=noise["center"], fallback_b=noise["fallback_b"])
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None
    return {
        "environment": env_cfg,
        "train": train_cfg,
        "arms": arms,
        "seeds": seeds,
        "out_dir": out_dir,
        "w1_threshold": w1_threshold,
        "noise": noise,
    }


def _auto_horizon(model, target: float) -> int:
    r_max = float(np.abs(model.reward_values[model.reward_probs > 0]).max(initial=0.0))
    if r_max == 0.0 or model.discount >= 1.0:
        raise ConfigError(
            "environment.oracle_horizon: required when discount = 1 (no geometric truncation)")
    horizon = 1
    while oracle_truncation_bound(model, horizon) >= target:
        horizon += 1
    return horizon


def _build_env(env_cfg: dict, train_cfg: dict):
    """Fresh (env, eval_env, oracle_values-or-None) from a normalized config."""
    n = train_cfg["n_quantiles"]
    if env_cfg["id"] == "chain":
        model = chain_mdp(env_cfg["length"], env_cfg["reward_support"],
                          train_cfg["discount"], env_cfg["stop_reward"])
        policy = np.zeros(model.n_states, dtype=int)
        dist = oracle_return_distribution(model, policy, model.start, env_cfg["length"] + 1)
        return MdpEnv(model), MdpEnv(model), quantiles_from_support(dist, n)
    if env_cfg["id"] == "mdp_file":
        model = load_mdp(env_cfg["path"])
        if model.discount != train_cfg["discount"]:
            raise ConfigError(
                f"environment.path: file discount {model.discount} conflicts "
                f"with train.discount {train_cfg['discount']}")
        oracle_values = None
        if "oracle_policy" in env_cfg:
            horizon = env_cfg.get("oracle_horizon") or _auto_horizon(model, _ORACLE_TRUNCATION_TARGET)
            dist = oracle_return_distribution(model, env_cfg["oracle_policy"], model.start, horizon)
            oracle_values = quantiles_from_support(dist, n)
        return MdpEnv(model), MdpEnv(model), oracle_values
    kwargs = {k: v for k, v in env_cfg.items() if k != "id"}
    if "hedge_grid" in kwargs:
        kwargs["hedge_grid"] = tuple(kwargs["hedge_grid"])
    sabr = SabrConfig(**kwargs)
    return SabrHedgingEnv(sabr), SabrHedgingEnv(sabr), None


def _run_job(payload):
    config, arm_index, seed = payload
    arm = config["arms"][arm_index]
    spec = LossSpec(variant=LossVariant(arm["variant"]),
                    threshold=arm["threshold"], adaptive=arm["adaptive"])
    env, eval_env, oracle_values = _build_env(config["environment"], config["train"])
    stats = NoiseStats(center=config["noise"]["center"], fallback_b=config["noise"]["fallback_b"])
    try:
        _, records = train(env, _train_config(config["train"], spec, seed), stats,
                           oracle_values=oracle_values, eval_env=eval_env)
    except NonFiniteLossError as exc:
        return {"arm": arm["name"], "seed": seed, "error": str(exc), "records": []}
    rows = [replace(r, arm=arm["name"], seed=seed) for r in records]
    return {"arm": arm["name"], "seed": seed, "error": None, "records": rows}


def _mean(xs):
    return math.fsum(xs) / len(xs)


def _pstd(xs):
    m = _mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


def summarize(records, arm_names, failures, w1_threshold) -> list:
    """Per-arm final-epoch statistics as rows matching SUMMARY_COLUMNS.

    Means and population standard deviations are taken over seeds at each
    arm's final recorded epoch, via math.fsum so independent recomputation
    can match exactly.  ``failures`` maps arm name to a list of error
    strings; any failure marks the arm failed.
    """
    by_arm = {}
    for rec in records:
        by_arm.setdefault(rec.arm, {}).setdefault(rec.seed, []).append(rec)
    rows = []
    for arm in arm_names:
        seeds = by_arm.get(arm, {})
        finals = [max(rs, key=lambda r: r.epoch) for rs in seeds.values()]
        finals.sort(key=lambda r: r.seed)
        status = "failed" if failures.get(arm) else "ok"
        row = {"arm": arm, "status": status, "seeds": len(finals)}

        def stat(label, values):
            row[f"{label}_mean"] = repr(_mean(values)) if values else ""
            row[f"{label}_std"] = repr(_pstd(values)) if values else ""

        stat("final_loss", [r.loss for r in finals])
        stat("final_w1", [r.w1_oracle for r in finals if r.w1_oracle is not None])
        stat("final_risk", [r.risk for r in finals])
        stat("final_b", [r.b for r in finals])
        reached = []
        for rs in seeds.values():
            hits = [r.epoch for r in rs if r.w1_oracle is not None and r.w1_oracle <= w1_threshold]
            if hits:
                reached.append(min(hits))
        row["epochs_to_threshold_mean"] = repr(_mean(reached)) if reached else ""
        row["epochs_to_threshold_count"] = len(reached)
        rows.append([row[col] for col in SUMMARY_COLUMNS])
    return rows


def _write_summary(path, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(cell) for cell in row) + "\n")
    os.replace(tmp, path)


def run_experiment(config, *, workers: int = 1, out_dir=None, seeds=None) -> int:
    """Execute every (arm, seed) pair and write records, summary and charts.

    ``config`` is a dict or JSON path accepted by parse_experiment_config;
    ``out_dir`` and ``seeds`` override the config.  Returns 0 on success,
    2 when every arm failed at runtime.  Arms that hit a non-finite loss
    are marked failed in summary.csv and excluded from records.csv; other
    arms are unaffected.
    """
    config = parse_experiment_config(config)
    if seeds is not None:
        if seeds < 1:
            raise ConfigError(f"config.seeds: must be >= 1, got {seeds}")
        config["seeds"] = seeds
    if out_dir is not None:
        config["out_dir"] = out_dir
    if workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {workers}")

    payloads = [(config, ai, seed)
                for ai in range(len(config["arms"]))
                for seed in range(config["seeds"])]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, payloads))
    else:
        results = [_run_job(p) for p in payloads]

    records = []
    failures = {}
    for res in results:
        if res["error"] is None:
            records.extend(res["records"])
        else:
            failures.setdefault(res["arm"], []).append(f"seed {res['seed']}: {res['error']}")

    out = config["out_dir"]
    os.makedirs(out, exist_ok=True)
    write_records_csv(os.path.join(out, "records.csv"), records)
    arm_names = [arm["name"] for arm in config["arms"]]
    _write_summary(os.path.join(out, "summary.csv"),
                   summarize(records, arm_names, failures, config["w1_threshold"]))
    for arm, errors in sorted(failures.items()):
        for err in errors:
            print(f"arm {arm!r} failed: {err}")

    if records:
        metrics = ["loss", "risk", "b"]
        if any(r.w1_oracle is not None for r in records):
            metrics.insert(1, "w1_oracle")
        if config["train"]["record_timing"]:
            metrics.append("ms")
        for metric in metrics:
            emit_chart(records, metric, os.path.join(out, f"chart_{metric}.svg"))

    all_failed = all(failures.get(name) for name in arm_names)
    return 2 if all_failed else 0
