from photon_sight.observer import EyeParams
from photon_sight.source import SourceParams

IDEAL_SOURCE = SourceParams(mean_pairs_per_pulse=0.01, herald_detection_efficiency=1.0,
                            signal_path_transmission=1.0, single_pair=True)


def eye_for(p_detect, **kw):
    """Eye whose single-photon detection probability is ``p_detect``."""
    qe = 0.33 if p_detect <= 0.33 else 1.0
    return EyeParams(pre_retinal_transmission=p_detect / qe, rod_quantum_efficiency=qe, **kw)


def within_sigma(observed, expected, se, k=3.0):
    return abs(observed - expected) <= k * se
