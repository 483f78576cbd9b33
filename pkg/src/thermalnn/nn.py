"""
Purpose: A small dense network engine with exact reverse-mode gradients.

    Vectors are rows: a layer computes z = h @ W.T + b, so W has shape (width, fan_in) and
    every call also accepts a batch of rows of shape (B, fan_in). Layer 0 optionally receives
    the recurrent state through its own matrix W_r: z0 = state @ W_r.T + phi @ W_0.T + b_0.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .const import BIASED_ELU, LINEAR, RELU, SIGMOID, SINUS, TANH
from .tnn_exceptions import ArgumentError, ContractError, ShapeError
from .utils import as_vector


class ActivationKind(enum.Enum):
    SIGMOID = SIGMOID
    TANH = TANH
    LINEAR = LINEAR
    RELU = RELU
    BIASED_ELU = BIASED_ELU
    SINUS = SINUS

    def apply(self, z):
        if self is ActivationKind.SIGMOID:
            return 0.5 * (1.0 + np.tanh(0.5 * z))
        if self is ActivationKind.TANH:
            return np.tanh(z)
        if self is ActivationKind.LINEAR:
            return z
        if self is ActivationKind.RELU:
            return np.maximum(z, 0.0)
        if self is ActivationKind.BIASED_ELU:
            # elu(z) + 1, strictly positive
            return np.where(z > 0.0, z + 1.0, np.exp(np.minimum(z, 0.0)))
        return np.sin(z)

    def derivative(self, z, h):
        """Derivative at pre-activation z, h being the activation output"""
        if self is ActivationKind.SIGMOID:
            return h * (1.0 - h)
        if self is ActivationKind.TANH:
            return 1.0 - h * h
        if self is ActivationKind.LINEAR:
            return np.ones_like(z)
        if self is ActivationKind.RELU:
            return (z > 0.0).astype(np.float64)
        if self is ActivationKind.BIASED_ELU:
            return np.where(z > 0.0, 1.0, h)
        return np.cos(z)


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: ActivationKind = ActivationKind.SIGMOID
    l2_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "activation", ActivationKind(self.activation))
        if int(self.width) < 1:
            raise ArgumentError("layer width must be at least 1, got {}".format(self.width))
        if not self.l2_rate >= 0.0:
            raise ArgumentError("l2 rate must be non-negative, got {}".format(self.l2_rate))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "l2_rate", float(self.l2_rate))


@dataclass(frozen=True)
class MlpSpec:
    """
    state_width: size of the recurrent state fed through W_r (ignored without recurrent input)
    input_width: size of the non-state input phi
    layers: LayerSpec per layer, the last one being the output layer
    """

    state_width: int
    input_width: int
    layers: tuple
    use_recurrent_input: bool = True

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ArgumentError("a network needs at least one layer")
        if self.state_width < 0 or self.input_width < 0:
            raise ArgumentError("input widths must be non-negative")
        object.__setattr__(self, "layers", layers)

    @property
    def output_width(self):
        return self.layers[-1].width

    @property
    def fan_ins(self):
        """Width of the input of every layer, W_r excluded"""
        return [self.input_width] + [layer.width for layer in self.layers[:-1]]

    @property
    def parameter_count(self):
        count = sum(
            layer.width * (fan_in + 1) for layer, fan_in in zip(self.layers, self.fan_ins)
        )
        if self.use_recurrent_input:
            count += self.layers[0].width * self.state_width
        return count

    def to_dict(self):
        return {
            "state_width": self.state_width,
            "input_width": self.input_width,
            "use_recurrent_input": self.use_recurrent_input,
            "layers": [
                {"width": layer.width, "activation": layer.activation.value, "l2_rate": layer.l2_rate}
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            state_width=raw["state_width"],
            input_width=raw["input_width"],
            layers=tuple(LayerSpec(**layer) for layer in raw["layers"]),
            use_recurrent_input=raw["use_recurrent_input"],
        )


@dataclass(eq=False)
class MlpParameters:
    """w_r is None when the network has no recurrent input"""

    w_r: object
    weights: list
    biases: list

    def copy(self):
        return MlpParameters(
            None if self.w_r is None else self.w_r.copy(),
            [weight.copy() for weight in self.weights],
            [bias.copy() for bias in self.biases],
        )

    def to_arrays(self, prefix=""):
        """
        Named view of all arrays. The arrays are not copied, so updating them in place updates
        the network.
        """
        arrays = {}
        if self.w_r is not None:
            arrays[prefix + "w_r"] = self.w_r
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            arrays["{}w_{}".format(prefix, index)] = weight
            arrays["{}b_{}".format(prefix, index)] = bias
        return arrays

    @classmethod
    def from_arrays(cls, spec, arrays, prefix=""):
        params = cls(
            np.asarray(arrays[prefix + "w_r"], dtype=np.float64) if spec.use_recurrent_input else None,
            [
                np.asarray(arrays["{}w_{}".format(prefix, index)], dtype=np.float64)
                for index in range(len(spec.layers))
            ],
            [
                np.asarray(arrays["{}b_{}".format(prefix, index)], dtype=np.float64)
                for index in range(len(spec.layers))
            ],
        )
        check_shapes(spec, params)
        return params

    @classmethod
    def zeros(cls, spec):
        return cls(
            np.zeros((spec.layers[0].width, spec.state_width)) if spec.use_recurrent_input else None,
            [np.zeros((layer.width, fan_in)) for layer, fan_in in zip(spec.layers, spec.fan_ins)],
            [np.zeros(layer.width) for layer in spec.layers],
        )


def check_shapes(spec, params):
    expected = MlpParameters.zeros(spec).to_arrays()
    actual = params.to_arrays()
    if expected.keys() != actual.keys():
        raise ShapeError(
            "parameter arrays {} do not match network arrays {}".format(
                sorted(actual), sorted(expected)
            )
        )
    for name, array in expected.items():
        if actual[name].shape != array.shape:
            raise ShapeError(
                "{} has shape {}, expected {}".format(name, actual[name].shape, array.shape)
            )


@dataclass(eq=False)
class MlpCache:
    """Everything a backward pass needs from its forward pass"""

    spec: MlpSpec
    params: MlpParameters
    state: object
    inputs: list
    pre: list
    post: list


def mlp_forward(spec, params, state, phi):
    """
    Evaluates the network.
    :param MlpSpec spec: the architecture
    :param MlpParameters params: weights and biases
    :param state: recurrent input (state_width,) or (B, state_width); ignored without W_r
    :param phi: other input (input_width,) or (B, input_width)
    :return tuple: (output, MlpCache)
    """
    phi = as_vector(phi, spec.input_width, "network input")
    if spec.use_recurrent_input:
        state = as_vector(state, spec.state_width, "network state input")
        if state.shape[:-1] != phi.shape[:-1]:
            raise ShapeError(
                "state batch shape {} does not match input batch shape {}".format(
                    state.shape, phi.shape
                )
            )
    else:
        state = None

    inputs, pre, post = [], [], []
    h = phi
    for index, (layer, weight, bias) in enumerate(zip(spec.layers, params.weights, params.biases)):
        inputs.append(h)
        z = h @ weight.T + bias
        if index == 0 and state is not None:
            z = z + state @ params.w_r.T
        h = layer.activation.apply(z)
        pre.append(z)
        post.append(h)

    return h, MlpCache(spec, params, state, inputs, pre, post)


def l2_penalty(spec, params):
    """Sum over layers of l2_rate * squared Frobenius norm; W_r counts with layer 0"""
    penalty = 0.0
    for layer, weight in zip(spec.layers, params.weights):
        penalty += layer.l2_rate * float(np.sum(weight * weight))
    if params.w_r is not None:
        penalty += spec.layers[0].l2_rate * float(np.sum(params.w_r * params.w_r))
    return penalty


def mlp_backward(spec, params, cache, cotangent, include_penalty=True):
    """
    Reverse pass through the network. Gradients of a batch are summed over the batch.
    :param cache: the MlpCache of the matching mlp_forward call
    :param cotangent: gradient of the objective w.r.t. the network output
    :param bool include_penalty: add the gradient of l2_penalty
    :return tuple: (MlpParameters gradients, state cotangent, input cotangent)
    """
    if cache.spec is not spec or cache.params is not params:
        raise ContractError("the forward cache belongs to another network or parameter set")
    g = np.asarray(cotangent, dtype=np.float64)
    if g.shape != cache.post[-1].shape:
        raise ShapeError(
            "cotangent has shape {}, expected {}".format(g.shape, cache.post[-1].shape)
        )
    batched = g.ndim == 2

    grads = MlpParameters.zeros(spec)
    d_state = None
    for index in reversed(range(len(spec.layers))):
        layer = spec.layers[index]
        dz = g * layer.activation.derivative(cache.pre[index], cache.post[index])
        layer_input = cache.inputs[index]
        if batched:
            grads.weights[index] = dz.T @ layer_input
            grads.biases[index] = dz.sum(axis=0)
        else:
            grads.weights[index] = np.outer(dz, layer_input)
            grads.biases[index] = dz.copy()
        g = dz @ params.weights[index]
        if index == 0 and cache.state is not None:
            grads.w_r = dz.T @ cache.state if batched else np.outer(dz, cache.state)
            d_state = dz @ params.w_r

    if d_state is None:
        batch = g.shape[:-1]
        d_state = np.zeros(batch + (spec.state_width,))

    if include_penalty:
        for index, layer in enumerate(spec.layers):
            if layer.l2_rate:
                grads.weights[index] += 2.0 * layer.l2_rate * params.weights[index]
        if params.w_r is not None and spec.layers[0].l2_rate:
            grads.w_r += 2.0 * spec.layers[0].l2_rate * params.w_r

    return grads, d_state, g


def init_parameters(spec, seed):
    """
    Glorot-uniform weights, zero biases. Layer 0 draws W_r and W_0 as one matrix over the
    combined fan-in.
    :param seed: int seed or a numpy Generator to draw from
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    w_r = None
    for index, (layer, fan_in) in enumerate(zip(spec.layers, spec.fan_ins)):
        state_width = spec.state_width if index == 0 and spec.use_recurrent_input else 0
        total_fan_in = fan_in + state_width
        limit = np.sqrt(6.0 / (total_fan_in + layer.width))
        combined = rng.uniform(-limit, limit, size=(layer.width, total_fan_in))
        if index == 0 and spec.use_recurrent_input:
            w_r = combined[:, :state_width].copy()
        weights.append(combined[:, state_width:].copy())
        biases.append(np.zeros(layer.width))
    return MlpParameters(w_r, weights, biases)
