"""
A collection of help/utility functions
"""

import numpy as np
import psutil
from Crypto.Hash import SHA256

from .tnn_exceptions import ShapeError

DIGEST_CHUNK_SIZE = 1 << 20


def as_vector(values, width, name):
    """
    Converts values to a float64 array whose last axis has the given width.
    :param values: vector (width,) or batch (B, width)
    :param int width: expected size of the last axis
    :param str name: used in the error message
    :return np.ndarray: the converted array
    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim not in (1, 2) or array.shape[-1] != width:
        raise ShapeError(
            "{} must have trailing dimension {}, got shape {}".format(name, width, array.shape)
        )
    return array


def file_digest(path):
    """SHA-256 hex digest of a file"""
    digest = SHA256.new()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(DIGEST_CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()


def available_jobs(jobs=None):
    """
    Number of worker processes to use; defaults to the available cores
    :param int jobs: explicit request, None or 0 for the default
    """
    if jobs:
        return max(1, int(jobs))
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def parse_number_list(text, cast=float):
    """
    Parses a comma separated list such as "1,2,3" or "-30,30"
    :param str text: the list
    :param cast: type of each item
    """
    return [cast(item) for item in str(text).split(",") if item.strip()]
