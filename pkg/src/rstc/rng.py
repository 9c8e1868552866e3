"""Random streams.

All randomness comes from numpy's counter-based ``Philox`` generator keyed by
a ``SeedSequence``. A stream is identified by the master seed plus a tuple of
non-negative integer keys (purpose, rate point, block, column, ...), so any
unit of work can be regenerated on its own and in any order.
"""

import numpy as np

from .errors import ValidationError

# stream purposes
CHANNEL = 1
DITHER = 2
BASIS = 3
BASIS_F = 4
RVQ_MC = 5

_SEED_MAX = 2**64


def check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < _SEED_MAX:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``."""
    seed = check_seed(seed)
    keys = tuple(int(k) for k in keys)
    if any(k < 0 for k in keys):
        raise ValidationError("stream keys must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=keys)
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng, shape):
    """Circularly-symmetric CN(0, 1) draws: real and imaginary parts each N(0, 1/2)."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    z *= np.sqrt(0.5)
    return z
