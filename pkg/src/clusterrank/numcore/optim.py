"""Adam with staircase exponential learning-rate decay."""
from __future__ import annotations

import logging
from typing import Iterable

import numpy as np

from .tensor import Parameter

log = logging.getLogger(__name__)


class Adam:
    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, decay_rate: float = 0.999,
                 decay_frequency: int = 100, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = list(params)
        self.base_lr = lr
        self.decay_rate = decay_rate
        self.decay_frequency = decay_frequency
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    @property
    def lr(self) -> float:
        return self.base_lr * self.decay_rate ** (self.step_count // self.decay_frequency)

    def step(self) -> list[str]:
        """Apply one update from the parameters' ``.grad``.

        Returns the names of parameters with non-finite gradients; when that
        list is non-empty nothing is updated and the step counter is unchanged.
        """
        bad = [p.name for p in self.params if p.grad is not None and not np.all(np.isfinite(p.grad))]
        if bad:
            log.warning("skipping update, non-finite gradient in %s", ", ".join(bad))
            return bad
        self.step_count += 1
        t = self.step_count
        lr = self.lr
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p in self.params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return []

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_dict(self) -> dict:
        return {
            "step": self.step_count,
            "base_lr": self.base_lr,
            "decay_rate": self.decay_rate,
            "decay_frequency": self.decay_frequency,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.step_count = int(state["step"])
        self.base_lr = float(state["base_lr"])
        self.decay_rate = float(state["decay_rate"])
        self.decay_frequency = int(state["decay_frequency"])
        for name in self.m:
            if name in state["m"]:
                self.m[name] = np.array(state["m"][name], dtype=np.float64)
                self.v[name] = np.array(state["v"][name], dtype=np.float64)
