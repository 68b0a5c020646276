"""Trade sensing bandwidth against communication bandwidth.

beta is the fraction of the band shared by radar echoes and uplink data, and
the rest is left to data alone. The sensing rate grows with beta while the
communication users lose clean bandwidth. Sharing the band under NOMA keeps
the aggregate above OMA sharing, which in turn stays above a split where
sensing owns its slice outright.

    python tutorials/sensing_vs_communication_bandwidth.py
"""

from semiisac import analytic as A
from semiisac import preset

print(f"{'beta':>5} {'REIR':>12} {'FD':>10} {'OMA-Semi':>10} {'NOMA-Semi':>10}")
for i in range(11):
    beta = i / 10
    cfg = preset(bandwidth={"beta_semi": beta, "epsilon_semi": 1 - beta})
    reir = A.reir_general(cfg).value
    caps = [A.aggregate_capacity(cfg, mode).value for mode in ("fd", "oma", "noma")]
    print(f"{beta:5.1f} {reir:12.4e} " + " ".join(f"{c:10.4f}" for c in caps))

# At a 10 dBm base-station power the echo is buried in noise. Raising it shows
# the logarithmic growth and where the high-power approximation takes over.
print(f"\n{'P_BS dBm':>8} {'REIR':>12} {'approx':>12}")
for p in (40.0, 70.0, 100.0, 130.0):
    cfg = preset(**{"powers.P_BS_dBm": p})
    print(f"{p:8.0f} {A.reir_general(cfg).value:12.4e} {A.reir_asymptotic(cfg).value:12.4e}")
print("slope in ln P_BS:", round(A.high_snr_slope(cfg.radar), 2), "bit/s")

try:
    A.reir_asymptotic(preset(**{"fading.m": 2}))
except A.UnsupportedAsymptoticError as err:
    print("m=2:", err)
