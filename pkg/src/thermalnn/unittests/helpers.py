"""
Purpose: Small profiles, topologies and fold sets shared by the unit tests
"""

import numpy as np

from ..data import FoldSets, MeasurementProfile, make_schema
from ..nn import ActivationKind, LayerSpec
from ..tnn import TnnParameters, make_topology


def profile_from(schema, exogenous, ancillary, targets, profile_id="p"):
    """Profile from normalized column blocks of shape (K, o), (K, n), (K, m)"""
    length = len(targets)
    blocks = [
        np.asarray(exogenous, dtype=np.float64).reshape(length, schema.o),
        np.asarray(ancillary, dtype=np.float64).reshape(length, schema.n),
        np.asarray(targets, dtype=np.float64).reshape(length, schema.m),
    ]
    return MeasurementProfile(profile_id, np.hstack(blocks), schema)


def random_profile(schema, length, seed, profile_id="p"):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.2, 0.8, size=(length, len(schema.channels)))
    return MeasurementProfile(profile_id, values, schema)


def linear_topology(m, n, o, pruned=(), loss_mask=()):
    """Single linear layer networks, so constant outputs can be set through the biases"""
    layers = (LayerSpec(1, ActivationKind.LINEAR),)
    return make_topology(m, n, o, layers, layers, pruned=pruned, loss_mask=loss_mask)


def constant_parameters(topology, pi=0.0, gamma=0.0, theta_c=0.0):
    """Zero weights with the given biases, so pi and gamma do not depend on any input"""
    params = TnnParameters.zeros(topology)
    params.pi[0].biases[-1][:] = pi
    if params.gamma is not None:
        params.gamma.biases[-1][:] = gamma
    params.theta_c[:] = theta_c
    return params


def small_schema(sample_time=0.5):
    return make_schema(
        exogenous=("i_s",), ancillary=("coolant",), targets=("pm", "winding"), sample_time=sample_time
    )


def small_folds(schema, length=12, seed=0):
    """Random profiles split into two training profiles and one profile per other set"""
    profiles = [random_profile(schema, length, seed + index, str(index)) for index in range(5)]
    return FoldSets(
        train=tuple(profiles[:2]),
        fold_1=(profiles[2],),
        fold_2=(profiles[3],),
        generalization=(profiles[4],),
    )
