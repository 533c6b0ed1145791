"""Energy detector operating curve: false alarms as the price of detection.

With the sensing window and sampling rate fixed, choosing a target detection
probability pins the decision threshold, and the false alarm rate follows.
Low sensing SNR makes the curve brutal: past pd ~0.9 the false alarm rate
climbs fast and the secondary loses idle slots it could have used.
"""

import numpy as np

from cogrelay import SensingConfig, false_alarm_from_detection
from cogrelay.sensing import detection_from_threshold, threshold_from_detection


def show_curve(gamma_se_db: float) -> None:
    cfg = SensingConfig(gamma_se=10.0 ** (gamma_se_db / 10.0),
                        tau=0.3e-3, f_s=1e6)
    print(f"sensing SNR {gamma_se_db:+.0f} dB, {cfg.n_samples} samples")
    for pd in np.linspace(0.1, 0.99, 8):
        pf = false_alarm_from_detection(float(pd), cfg)
        print(f"  pd={pd:5.3f}  pf={pf:8.5f}")
    print()


show_curve(-15.0)
show_curve(-12.0)

# threshold round trip at the default operating point
cfg = SensingConfig(gamma_se=10.0 ** -1.5, tau=0.3e-3, f_s=1e6)
eta = threshold_from_detection(0.9, cfg)
back = detection_from_threshold(eta, cfg)
print(f"threshold for pd=0.9: eta={eta:.6f} (round trip gives pd={back:.6f})")
