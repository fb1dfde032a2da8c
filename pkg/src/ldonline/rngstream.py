"""Counter-based random streams addressable by (seed, replicate, learner, purpose).

Every draw made during a simulation lives at a fixed position in a fixed
stream, so a coupled re-run (same seed, perturbed dataset) reproduces each
noise vector bit for bit, and a per-round noise vector can be regenerated
in isolation without replaying the rounds before it.

Streams are Philox counter-based generators. Philox emits 64-bit words in
blocks of four and ``advance(k)`` skips k whole blocks, so addressing works
in block units: a slot of ``s`` blocks holds ``4 s`` uniform doubles, and
reading slot ``k`` in isolation reproduces words ``4 s k .. 4 s k + 4 s - 1``
of a single batched draw exactly.
"""

from __future__ import annotations

import numpy as np

PURPOSE_INIT = 0
PURPOSE_NOISE = 1
PURPOSE_DATA = 2

WORDS_PER_BLOCK = 4


def stream(seed: int, replicate: int, learner: int, purpose: int) -> np.random.Generator:
    """Return the Philox generator keyed by the full stream address."""
    ss = np.random.SeedSequence([int(seed), int(replicate), int(learner), int(purpose)])
    return np.random.Generator(np.random.Philox(ss))


def blocks_for(size: int) -> int:
    """Philox blocks needed to hold ``size`` uniform doubles."""
    return -(-int(size) // WORDS_PER_BLOCK)


def uniform_block(seed, replicate, learner, purpose, block_offset, size):
    """``size`` uniforms starting at Philox block ``block_offset``.

    Equals words ``4*block_offset .. 4*block_offset + size - 1`` of one
    batched draw from the same stream.
    """
    gen = stream(seed, replicate, learner, purpose)
    if block_offset:
        gen.bit_generator.advance(int(block_offset))
    return gen.random(size)


def laplace_from_uniform(u, nu):
    """Map uniforms in [0, 1) to Laplace(nu) draws via the inverse CDF.

    ``nu`` broadcasts against ``u``; per-coordinate variance is 2*nu**2.
    """
    p = np.asarray(u) - 0.5
    core = np.clip(1.0 - 2.0 * np.abs(p), 1e-300, None)
    return -np.asarray(nu) * np.sign(p) * np.log(core)
