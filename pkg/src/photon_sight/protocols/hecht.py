"""Frequency-of-seeing sessions with classical (Poissonian) flashes."""

import numpy as np

from .._validation import check_count, check_nonnegative
from ..observer import absorb, check_rating_criteria, respond_rating, see_flash
from ..records import CONDITIONS, TrialTable, points_from_trials
from ..rng import TRIAL_BLOCK, as_seed_sequence, block_generator, block_slices, map_blocks

_FLASH = CONDITIONS.index("flash")


def simulate_hecht(intensities, trials_per_intensity, eye, rng=None, *,
                   rating_criteria=None, n_jobs=1):
    """Per-trial yes/no (and optional rating) responses to Poisson flashes.

    Single-spot flashes are recorded in the ``photons_left`` / ``seen_left``
    columns.
    """
    intensities = [check_nonnegative(float(i), "intensity") for i in intensities]
    if not intensities:
        raise ValueError("intensities must be non-empty")
    trials = check_count(trials_per_intensity, "trials_per_intensity", minimum=1)
    if rating_criteria is not None:
        rating_criteria = check_rating_criteria(rating_criteria)
    root = as_seed_sequence(rng)

    def work(task):
        level, b, size = task
        gen = block_generator(root, "hecht", level, b)
        mean = intensities[level]
        photons = gen.poisson(mean, size)
        absorbed, dark = absorb(photons, eye, gen)
        seen = see_flash(absorbed, dark, eye)
        rating = None if rating_criteria is None else respond_rating(absorbed, dark, rating_criteria)
        return TrialTable(
            condition=np.full(size, _FLASH),
            mean_photons=np.full(size, mean),
            photons_left=photons,
            photons_right=np.zeros(size, dtype=np.int64),
            seen_left=seen,
            rating=rating,
        )

    tasks = [(level, b, stop - start)
             for level in range(len(intensities))
             for b, start, stop in block_slices(trials, TRIAL_BLOCK)]
    return TrialTable.concat(map_blocks(work, tasks, n_jobs))


def run_hecht(intensities, trials_per_intensity, eye, rng=None, *, n_jobs=1):
    """Return one :class:`FoSPoint` ``(mean_photons, trials, seen)`` per intensity."""
    table = simulate_hecht(intensities, trials_per_intensity, eye, rng, n_jobs=n_jobs)
    points = points_from_trials(table)
    order = {float(i): k for k, i in enumerate(intensities)}
    # points_from_trials sorts by intensity; restore caller order
    return sorted(points, key=lambda p: order[p.mean_photons]) if len(order) == len(points) else points
