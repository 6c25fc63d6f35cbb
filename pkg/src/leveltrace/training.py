"""One-example-per-batch training with responsibility recording.

The loop is deliberately plain: shuffle the instances each epoch, run one
forward/backward per instance, apply one optimizer step, and charge the
resulting conv-weight delta to that instance in the ledger.  Everything is
seeded, so a rerun with the same corpus and config reproduces the model, the
responsibility arrays, and the log byte for byte.

A training run is identified by a fingerprint: the SHA-256 of the config and
the exact corpus bytes.  The fingerprint is stamped into both the model and
the responsibility file so downstream code can refuse mismatched pairs.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import attribution, sessionlog
from .attribution import DeltaLedger, MrinArrays, finalize, record_batch
from .errors import ConfigError, NumericFailure
from .neuralnet import (
    AdamConfig,
    AdamState,
    NetworkConfig,
    NetworkParams,
    adam_step,
    init_params,
    loss_and_gradients,
    save_model,
)
from .sessionlog import Session, TrainingInstance, build_training_set

MODEL_FILE = "model.bin"
MRIN_FILE = "mrin.bin"
FINGERPRINT_FILE = "fingerprint.txt"
TRAIN_LOG_FILE = "train_log.jsonl"
CORPUS_FILE = "sessions.jsonl"

# Targets are 0/1 per channel, so any healthy loss is O(1).  Adam's step size
# is lr-bounded, which means a diverging run can blow up polynomially forever
# without ever reaching inf; the ceiling turns that into a loud failure.
DIVERGENCE_CEILING = 1e6


@dataclass(frozen=True)
class TrainConfig:
    width: int = 16
    height: int = 8
    epochs: int = 12
    lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    leaky_slope: float = 0.01
    seed: int = 0

    def network(self) -> NetworkConfig:
        return NetworkConfig(
            width=self.width,
            height=self.height,
            leaky_slope=self.leaky_slope,
            adam=AdamConfig(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps),
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "epochs": self.epochs,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "leaky_slope": self.leaky_slope,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        known = set(TrainConfig.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return TrainConfig(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_train_config(path: str) -> TrainConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return TrainConfig.from_dict(raw)


def corpus_digest(sessions: list[Session]) -> str:
    text = sessionlog.sessions_to_text(sessions)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def training_fingerprint(config: TrainConfig, sessions: list[Session]) -> str:
    payload = json.dumps(
        {"config": config.to_dict(), "corpus": corpus_digest(sessions)},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class TrainResult:
    params: NetworkParams
    mrin: MrinArrays
    ledger: DeltaLedger
    epoch_losses: list[float]
    fingerprint: str
    instances: list[TrainingInstance]


def train_model(
    sessions: list[Session],
    config: TrainConfig,
    progress: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Train on every agent turn in the corpus and attribute each step.

    Raises NumericFailure the moment a loss stops being finite or clears the
    divergence ceiling, so runaway configurations fail loudly instead of
    producing a poisoned model.
    """
    instances = build_training_set(sessions)
    w, h = instances[0].state.shape[0], instances[0].state.shape[1]
    if (w, h) != (config.width, config.height):
        raise ConfigError(
            f"corpus grids are {w}x{h} but config says {config.width}x{config.height}"
        )
    if config.epochs < 1:
        raise ConfigError("epochs must be >= 1")

    fingerprint = training_fingerprint(config, sessions)
    params = init_params(config.network())
    adam = AdamState.for_params(params)
    ledger = DeltaLedger([inst.instance_id for inst in instances])
    order_rng = np.random.default_rng(config.seed)

    epoch_losses: list[float] = []
    conv_before = params.conv_flat()
    for epoch in range(config.epochs):
        order = order_rng.permutation(len(instances))
        total = 0.0
        for idx in order:
            inst = instances[idx]
            loss, grads, _ = loss_and_gradients(params, inst.state, inst.target_q)
            if not np.isfinite(loss) or loss > DIVERGENCE_CEILING:
                raise NumericFailure(
                    f"loss diverged ({loss:.6g}) at epoch {epoch}, "
                    f"instance {inst.instance_id}"
                )
            adam_step(params, grads, adam)
            conv_after = params.conv_flat()
            record_batch(ledger, inst.instance_id, conv_before, conv_after)
            conv_before = conv_after
            total += loss
        mean_loss = total / len(instances)
        epoch_losses.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)

    mrin = finalize(ledger)
    mrin.fingerprint = fingerprint
    mrin.instance_sessions = {
        inst.instance_id: inst.session_id for inst in instances
    }
    params.fingerprint = fingerprint
    return TrainResult(
        params=params,
        mrin=mrin,
        ledger=ledger,
        epoch_losses=epoch_losses,
        fingerprint=fingerprint,
        instances=instances,
    )


def save_artifacts(result: TrainResult, out_dir: str, sessions: list[Session]) -> None:
    """Write a self-contained run directory.

    model.bin, mrin.bin, fingerprint.txt, train_log.jsonl, and a copy of the
    training corpus (so explanations can be served from the directory alone).
    The log carries no timestamps; a rerun with the same seed reproduces
    every file exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    save_model(result.params, os.path.join(out_dir, MODEL_FILE))
    attribution.save_mrin(result.mrin, os.path.join(out_dir, MRIN_FILE))
    with open(os.path.join(out_dir, FINGERPRINT_FILE), "w", encoding="utf-8") as fh:
        fh.write(result.fingerprint + "\n")
    with open(os.path.join(out_dir, TRAIN_LOG_FILE), "w", encoding="utf-8") as fh:
        for epoch, loss in enumerate(result.epoch_losses):
            fh.write(json.dumps({"epoch": epoch, "mean_loss": loss}, sort_keys=True))
            fh.write("\n")
    sessionlog.save_sessions(sessions, os.path.join(out_dir, CORPUS_FILE))


def load_artifacts(out_dir: str):
    """Load (params, mrin, train_sessions) from a run directory."""
    from .neuralnet import load_model

    params = load_model(os.path.join(out_dir, MODEL_FILE))
    mrin = attribution.load_mrin(os.path.join(out_dir, MRIN_FILE))
    sessions = sessionlog.load_sessions(os.path.join(out_dir, CORPUS_FILE))
    return params, mrin, sessions
