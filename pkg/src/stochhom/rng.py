"""Counter-based random streams.

A stream is a Philox key derived from ``(seed, *labels)``; the normals for
step ``k`` come from the counter block ``[0, k, 0, 0]`` of that key, so any
step of any replica can be regenerated without replaying the others.
"""
import numpy as np


def label_of(value):
    """Stable non-negative integer label for ints and floats."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    return int(np.float64(value).view(np.uint64))


def stream_key(seed, *labels):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(label_of(x) for x in labels))
    return tuple(int(k) for k in ss.generate_state(2, np.uint64))


def step_normals(key, step, shape):
    gen = np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64), counter=[0, int(step), 0, 0]))
    return gen.standard_normal(shape)
