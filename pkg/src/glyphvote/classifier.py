"""Three layer sigmoid perceptron trained by backpropagation with momentum."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from glyphvote.exceptions import DimensionMismatch, EmptyTrainingSet, NonFiniteLoss

log = logging.getLogger(__name__)

INIT_RANGE = 0.5
PARAMETER_NAMES = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class MlpConfig:
    """Architecture and training hyperparameters of one network.

    Parameters
    ----------
    input_size, hidden_size, output_size : int
        Layer widths, all at least one.
    learning_rate : float
        Step size of the gradient term, positive.
    momentum : float
        Fraction of the previous update carried over, in ``[0, 1)``.
    max_epochs : int
        Hard cap on training epochs.
    seed : int
        Seeds both the initial weights and the per-epoch sample order.
    target_sse : float
        Training stops once an epoch's sum of squared errors falls to this.
    """

    input_size: int
    hidden_size: int
    output_size: int
    learning_rate: float = 0.8
    momentum: float = 0.7
    max_epochs: int = 300
    seed: int = 0
    target_sse: float = 0.0

    def __post_init__(self):
        for name in ("input_size", "hidden_size", "output_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs cannot be negative, got {self.max_epochs}")

    @property
    def parameter_count(self) -> int:
        h = self.hidden_size
        return h * self.input_size + h + self.output_size * h + self.output_size

    def _streams(self) -> tuple[np.random.Generator, np.random.Generator]:
        init, shuffle = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(init), np.random.default_rng(shuffle)


@dataclass(eq=False)
class MlpModel:
    """Weights, biases and momentum buffers of a network.

    ``w1`` is ``hidden x input`` and ``w2`` is ``output x hidden``.
    """

    config: MlpConfig
    w1: NDArray[np.float64]
    b1: NDArray[np.float64]
    w2: NDArray[np.float64]
    b2: NDArray[np.float64]
    velocity: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self):
        c = self.config
        expected = {
            "w1": (c.hidden_size, c.input_size),
            "b1": (c.hidden_size,),
            "w2": (c.output_size, c.hidden_size),
            "b2": (c.output_size,),
        }
        for name, shape in expected.items():
            value = np.array(getattr(self, name), dtype=np.float64)
            if value.shape != shape:
                raise DimensionMismatch(
                    f"{name} has shape {value.shape}, expected {shape}", where=name
                )
            if not np.all(np.isfinite(value)):
                raise NonFiniteLoss(f"{name} holds non-finite values", where=name)
            setattr(self, name, value)
            self.velocity.setdefault(name, np.zeros(shape))

    def parameters(self) -> dict[str, NDArray[np.float64]]:
        """The live parameter arrays keyed by name."""
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def copy(self) -> MlpModel:
        return MlpModel(
            self.config,
            **{k: v.copy() for k, v in self.parameters().items()},
            velocity={k: v.copy() for k, v in self.velocity.items()},
        )


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    final_sse: float
    sse_trace: tuple[float, ...]


def init_mlp(config: MlpConfig) -> MlpModel:
    """Draw every weight and bias uniformly from [-0.5, 0.5]."""
    rng, _ = config._streams()
    h, i, o = config.hidden_size, config.input_size, config.output_size
    return MlpModel(
        config,
        w1=rng.uniform(-INIT_RANGE, INIT_RANGE, (h, i)),
        b1=rng.uniform(-INIT_RANGE, INIT_RANGE, h),
        w2=rng.uniform(-INIT_RANGE, INIT_RANGE, (o, h)),
        b2=rng.uniform(-INIT_RANGE, INIT_RANGE, o),
    )


def _as_inputs(model: MlpModel, x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1:] != (model.config.input_size,):
        raise DimensionMismatch(
            f"Input of shape {arr.shape} for a network of {model.config.input_size} inputs"
        )
    return arr


def _forward(
    model: MlpModel, x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    hidden = expit(x @ model.w1.T + model.b1)
    return hidden, expit(hidden @ model.w2.T + model.b2)


def forward(model: MlpModel, x: ArrayLike) -> NDArray[np.float64]:
    """Output activations for one input vector (or a batch of rows)."""
    return _forward(model, _as_inputs(model, x))[1]


def predict_confidences(model: MlpModel, x: ArrayLike) -> NDArray[np.float64]:
    """Raw sigmoid outputs, one confidence per class."""
    return forward(model, x)


def predict_class(confidences: ArrayLike) -> int:
    """Maximum response; ties go to the lowest class index."""
    return int(np.argmax(np.asarray(confidences)))


def _stack(
    model: MlpModel, samples: Sequence[tuple[ArrayLike, ArrayLike]]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if not samples:
        raise EmptyTrainingSet("No samples to train on")
    x = _as_inputs(model, np.array([s[0] for s in samples], dtype=np.float64))
    t = np.array([s[1] for s in samples], dtype=np.float64)
    if t.shape != (len(samples), model.config.output_size):
        raise DimensionMismatch(
            f"Targets of shape {t.shape[1:]} for a network of "
            f"{model.config.output_size} outputs"
        )
    return x, t


def sum_squared_error(
    model: MlpModel, samples: Sequence[tuple[ArrayLike, ArrayLike]]
) -> float:
    """Sum over samples and outputs of ``(output - target)^2``."""
    x, t = _stack(model, samples)
    return float(np.sum((_forward(model, x)[1] - t) ** 2))


def loss(model: MlpModel, samples: Sequence[tuple[ArrayLike, ArrayLike]]) -> float:
    """The objective backpropagation descends, half the sum of squared errors."""
    return 0.5 * sum_squared_error(model, samples)


def _backprop(
    model: MlpModel, x: NDArray[np.float64], t: NDArray[np.float64]
) -> dict[str, NDArray[np.float64]]:
    """Gradients of ``loss`` for a batch of rows ``x`` with targets ``t``."""
    hidden, out = _forward(model, x)
    delta_out = (out - t) * out * (1 - out)
    delta_hidden = (delta_out @ model.w2) * hidden * (1 - hidden)
    return {
        "w1": delta_hidden.T @ x,
        "b1": delta_hidden.sum(axis=0),
        "w2": delta_out.T @ hidden,
        "b2": delta_out.sum(axis=0),
    }


def gradients(
    model: MlpModel, samples: Sequence[tuple[ArrayLike, ArrayLike]]
) -> dict[str, NDArray[np.float64]]:
    """Partial derivatives of ``loss`` with respect to every parameter."""
    x, t = _stack(model, samples)
    return _backprop(model, x, t)


def train(
    model: MlpModel, samples: Sequence[tuple[ArrayLike, ArrayLike]]
) -> TrainReport:
    """Stochastic backpropagation with momentum, updating ``model`` in place.

    Every epoch visits the samples once in a freshly shuffled order and
    applies ``delta = -lr * grad + momentum * previous_delta`` after each one.

    Raises
    ------
    DimensionMismatch
        If inputs or targets do not match the network.
    NonFiniteLoss
        If an epoch's error is NaN or infinite.
    """
    cfg = model.config
    x, t = _stack(model, samples)
    _, rng = cfg._streams()
    params = model.parameters()

    trace: list[float] = []
    for epoch in range(1, cfg.max_epochs + 1):
        # Overflow surfaces as a non-finite error below.
        with np.errstate(over="ignore", invalid="ignore"):
            for i in rng.permutation(len(x)):
                grads = _backprop(model, x[i : i + 1], t[i : i + 1])
                for name, grad in grads.items():
                    step = -cfg.learning_rate * grad + cfg.momentum * model.velocity[name]
                    params[name] += step
                    model.velocity[name] = step
            sse = float(np.sum((_forward(model, x)[1] - t) ** 2))

        if not np.isfinite(sse):
            raise NonFiniteLoss(f"Sum of squared errors diverged in epoch {epoch}")
        trace.append(sse)
        log.debug(f"Epoch {epoch}: SSE {sse:.6f}")
        if sse <= cfg.target_sse:
            break

    final = trace[-1] if trace else sum_squared_error(model, samples)
    return TrainReport(epochs_run=len(trace), final_sse=final, sse_trace=tuple(trace))


def one_hot(labels: ArrayLike, classes: int) -> NDArray[np.float64]:
    """Targets with a single 1 at each label's index."""
    idx = np.asarray(labels, dtype=int)
    out = np.zeros((idx.size, classes))
    out[np.arange(idx.size), idx] = 1.0
    return out


# -------------------------------- Serialization -------------------------------- #


def to_document(model: MlpModel) -> dict[str, Any]:
    """JSON ready description of the trained network.

    Weight matrices are nested row-major lists. Momentum buffers are training
    state and are not kept.
    """
    return {
        "config": asdict(model.config),
        **{name: value.tolist() for name, value in model.parameters().items()},
    }


def from_document(doc: dict[str, Any]) -> MlpModel:
    """Rebuild a network written by :func:`to_document`."""
    return MlpModel(
        MlpConfig(**doc["config"]),
        **{name: np.asarray(doc[name], dtype=np.float64) for name in PARAMETER_NAMES},
    )
