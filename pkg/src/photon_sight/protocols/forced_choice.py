"""Left/right forced-choice sessions with heralded single photons.

Both protocols schedule conditions with one permutation drawn from a
dedicated stream, then simulate trials in fixed blocks, so results do not
depend on the worker count.
"""

from dataclasses import dataclass

import numpy as np

from .._validation import check_count, check_probability
from ..inference import exact_binomial_test, two_proportion_test, wilson_interval
from ..observer import Side, _choose, absorb, see_flash
from ..polarization import make_mixture_left_right, make_superposition_left_right, path_probabilities
from ..records import CONDITIONS, SessionResult, TrialTable
from ..rng import TRIAL_BLOCK, as_seed_sequence, block_generator, block_slices, map_blocks
from ..source import sample_heralded_delivery

_LEFT, _RIGHT = 0, 1


def _schedule(root, stream, total, n_special):
    """Boolean mask with exactly ``n_special`` True entries in random order."""
    perm = block_generator(root, stream).permutation(total)
    return perm < n_special


def _observe(gen, photons_left, photons_right, eye):
    a_l, d_l = absorb(photons_left, eye, gen, efficiency=eye.side_efficiency(Side.LEFT))
    a_r, d_r = absorb(photons_right, eye, gen, efficiency=eye.side_efficiency(Side.RIGHT))
    seen_l = see_flash(a_l, d_l, eye)
    seen_r = see_flash(a_r, d_r, eye)
    chose_right = _choose(seen_l, seen_r, eye.guess_bias_right, gen.random(len(photons_left)))
    return seen_l, seen_r, chose_right


def _accuracy(correct, null_p=0.5):
    n = int(correct.size)
    if n == 0:
        return None
    k = int(correct.sum())
    test = exact_binomial_test(k, n, null_p, "greater")
    return {
        "successes": k,
        "trials": n,
        "estimate": k / n,
        "wilson_interval": list(test.wilson_interval),
        "p_value_above_chance": test.p_value,
    }


def run_2afc(source, eye, trials, control_fraction=0.5, rng=None, *,
             alternatives=("Left", "Right"), n_jobs=1):
    """Spatial (or, relabelled, temporal) two-alternative forced choice.

    Exactly ``round(trials * control_fraction)`` trials are blank controls.
    Every other trial waits for a herald and sends the delivered photon(s)
    left or right with equal probability; the observer names a side.
    ``alternatives`` only relabels the two choices in the summary.
    """
    trials = check_count(trials, "trials", minimum=1)
    control_fraction = check_probability(control_fraction, "control_fraction")
    root = as_seed_sequence(rng)
    n_control = int(round(trials * control_fraction))
    is_control = _schedule(root, "afc-schedule", trials, n_control)

    def work(task):
        b, start, stop = task
        gen = block_generator(root, "afc", b)
        n = stop - start
        control = is_control[start:stop]
        right = gen.random(n) < 0.5
        delivered = sample_heralded_delivery(source, n, gen)
        delivered[control] = 0
        photons_left = np.where(right, 0, delivered)
        photons_right = np.where(right, delivered, 0)
        seen_l, seen_r, chose_right = _observe(gen, photons_left, photons_right, eye)
        truth = np.where(control, -1, right.astype(np.int8))
        condition = np.where(
            control,
            CONDITIONS.index("control_blank"),
            np.where(right, CONDITIONS.index("stimulus_right"), CONDITIONS.index("stimulus_left")),
        )
        return TrialTable(
            condition=condition,
            photons_left=photons_left,
            photons_right=photons_right,
            truth_side=truth,
            response_side=chose_right,
            seen_left=seen_l,
            seen_right=seen_r,
            correct=np.where(control, -1, chose_right == right),
        )

    table = TrialTable.concat(map_blocks(work, block_slices(trials, TRIAL_BLOCK), n_jobs))
    stim = table.correct >= 0
    ctrl = table.condition_mask("control_blank")
    ctrl_right = int((table.response_side[ctrl] == _RIGHT).sum())
    n_ctrl = int(ctrl.sum())
    control_summary = None
    if n_ctrl:
        control_summary = {
            "trials": n_ctrl,
            f"chose_{alternatives[1].lower()}": ctrl_right,
            "fraction": ctrl_right / n_ctrl,
            "guess_bias": eye.guess_bias_right,
            "p_value_vs_bias": exact_binomial_test(ctrl_right, n_ctrl, eye.guess_bias_right, "two").p_value,
        }
    return SessionResult(
        protocol="afc",
        config={
            "trials": trials,
            "control_fraction": control_fraction,
            "alternatives": list(alternatives),
            "source": source.to_dict(),
            "eye": eye.to_dict(),
        },
        trials=table,
        accuracy=_accuracy(table.correct[stim] == 1),
        extra={"control": control_summary},
    )


@dataclass
class SuperpositionComparison:
    """Superposition and mixture sessions plus the right-response comparison.

    ``seen`` compares the right-choice proportions over trials on which the
    observer reported seeing a photon; ``all`` uses every trial. ``p_value``
    is the seen-trial comparison, where any effect is undiluted by guesses.
    """

    superposition: SessionResult
    mixture: SessionResult
    seen: dict
    all: dict

    @property
    def p_value(self):
        return self.seen["p_value"]

    def to_dict(self):
        return {
            "superposition": self.superposition.to_dict(),
            "mixture": self.mixture.to_dict(),
            "comparison": {"p_value": self.p_value, "seen_trials": self.seen, "all_trials": self.all},
        }


def _compare(table_a, table_b, mask_a, mask_b):
    k1 = int((table_a.response_side[mask_a] == _RIGHT).sum())
    n1 = int(mask_a.sum())
    k2 = int((table_b.response_side[mask_b] == _RIGHT).sum())
    n2 = int(mask_b.sum())
    return {"k1": k1, "n1": n1, "k2": k2, "n2": n2, "p_value": two_proportion_test(k1, n1, k2, n2)}


def run_superposition_vs_mixture(source, eye, trials, anomaly_epsilon=0.0, rng=None, *, n_jobs=1):
    """Interleave ``trials`` superposition and ``trials`` mixture presentations.

    Under standard quantum mechanics both conditions put the photon on the
    right path with the Born-rule probability of 1/2. ``anomaly_epsilon``
    shifts the superposition condition to ``1/2 + epsilon``.
    """
    trials = check_count(trials, "trials", minimum=1)
    eps = float(anomaly_epsilon)
    if not abs(eps) <= 0.5:
        raise ValueError(f"anomaly_epsilon must satisfy |epsilon| <= 0.5, got {eps}")
    root = as_seed_sequence(rng)
    p_sup = path_probabilities(make_superposition_left_right())[0] + eps
    p_mix = path_probabilities(make_mixture_left_right())[0]
    total = 2 * trials
    is_sup = _schedule(root, "superposition-schedule", total, trials)

    def work(task):
        b, start, stop = task
        gen = block_generator(root, "superposition", b)
        n = stop - start
        sup = is_sup[start:stop]
        right = gen.random(n) < np.where(sup, p_sup, p_mix)
        delivered = sample_heralded_delivery(source, n, gen)
        photons_left = np.where(right, 0, delivered)
        photons_right = np.where(right, delivered, 0)
        seen_l, seen_r, chose_right = _observe(gen, photons_left, photons_right, eye)
        # the experimenter knows the path only for the mixture
        truth = np.where(sup, -1, right.astype(np.int8))
        return TrialTable(
            condition=np.where(sup, CONDITIONS.index("superposition"), CONDITIONS.index("mixture")),
            photons_left=photons_left,
            photons_right=photons_right,
            truth_side=truth,
            response_side=chose_right,
            seen_left=seen_l,
            seen_right=seen_r,
            correct=np.where(sup, -1, chose_right == right),
        )

    table = TrialTable.concat(map_blocks(work, block_slices(total, TRIAL_BLOCK), n_jobs))
    sup_t = table.take(table.condition_mask("superposition"))
    mix_t = table.take(table.condition_mask("mixture"))
    config = {
        "trials_per_condition": trials,
        "anomaly_epsilon": eps,
        "source": source.to_dict(),
        "eye": eye.to_dict(),
    }

    def session(name, t, p_right):
        k = int((t.response_side == _RIGHT).sum())
        lo, hi = wilson_interval(k, len(t))
        return SessionResult(
            protocol=name,
            config={**config, "right_path_probability": p_right},
            trials=t,
            accuracy=_accuracy(t.correct[t.correct >= 0] == 1),
            extra={"right_fraction": {"successes": k, "trials": len(t), "estimate": k / len(t),
                                      "wilson_interval": [lo, hi]}},
        )

    seen_sup = (sup_t.seen_left == 1) | (sup_t.seen_right == 1)
    seen_mix = (mix_t.seen_left == 1) | (mix_t.seen_right == 1)
    return SuperpositionComparison(
        superposition=session("superposition", sup_t, p_sup),
        mixture=session("mixture", mix_t, p_mix),
        seen=_compare(sup_t, mix_t, seen_sup, seen_mix),
        all=_compare(sup_t, mix_t, np.ones(len(sup_t), bool), np.ones(len(mix_t), bool)),
    )
