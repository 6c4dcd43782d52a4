# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The PlayItBack Authors
"""Python bindings for the PlayItBack C++ core."""

import json

from ._core import (
    PlayItBackError,
    average_precision,
    d_prime,
    load_wav,
    log_mel_spectrogram,
    roc_auc,
    select_segments,
    write_wav,
)
from . import _core

__all__ = [
    "Model",
    "PlayItBackError",
    "average_precision",
    "d_prime",
    "evaluate",
    "gen_data",
    "gradcheck",
    "load_wav",
    "log_mel_spectrogram",
    "roc_auc",
    "select_segments",
    "train",
    "write_wav",
]


def gen_data(spec: dict, out) -> None:
    _core.gen_data(json.dumps(spec), str(out))


def train(config: dict, data, ckpt) -> float:
    """Returns the best validation top-1 (percent)."""
    return _core.train(json.dumps(config), str(data), str(ckpt))


def evaluate(ckpt, manifest) -> dict:
    return json.loads(_core.evaluate(str(ckpt), str(manifest)))


def gradcheck(full: bool = False) -> list:
    return json.loads(_core.gradcheck(full))


class Model:
    def __init__(self, ckpt):
        self._m = _core.Model(str(ckpt))

    @property
    def n_passes(self) -> int:
        return self._m.n_passes

    @property
    def config(self) -> dict:
        return json.loads(self._m.config_json())

    def infer(self, samples, sample_rate: int = 16000) -> list:
        return self._m.infer(list(map(float, samples)), sample_rate)

    def trace(self, samples, sample_rate: int = 16000) -> dict:
        return json.loads(self._m.trace_json(list(map(float, samples)), sample_rate))
