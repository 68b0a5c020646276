"""Walk through outage probability for the three access schemes.

We fix the radar user's power at 20 dBm and raise the communication user's
power. Under OMA each user only fights noise, so both curves fall. Under NOMA
with the communication user nearer the base station, it is decoded first:
its outage falls with slope -m at high power, while the radar user, decoded
after cancellation, hits a floor because the near user's residual grows too.

    python tutorials/outage_vs_power.py
"""

import numpy as np

from semiisac import analytic as A
from semiisac import montecarlo as M
from semiisac import preset

mc = M.McSettings(n_samples=200_000, seed=7)
print(f"{'P_c dBm':>8} {'OMA c':>10} {'NOMA c':>10} {'NOMA c MC':>10} {'NOMA r':>10} {'NOMA r MC':>10}")
for p in np.arange(0.0, 61.0, 10.0):
    cfg = preset(**{"powers.P_c_dBm": float(p), "powers.P_r_dBm": 20.0})
    oma = A.op_oma(cfg, "c").value
    near = A.op_noma(cfg, "noma-i", "c").value
    far = A.op_noma(cfg, "noma-i", "r").value
    near_mc = M.mc_outage(cfg, "noma-i", "c", settings=mc).value
    far_mc = M.mc_outage(cfg, "noma-i", "r", settings=mc).value
    print(f"{p:8.0f} {oma:10.3e} {near:10.3e} {near_mc:10.3e} {far:10.3e} {far_mc:10.3e}")

cfg = preset(**{"powers.P_c_dBm": 60.0, "powers.P_r_dBm": 20.0})
print("\nfar-user floor:", A.outage_floor(cfg, "noma-i", "r"))
print("near-user diversity order:", A.diversity_order(cfg, "noma-i", "c"))
print("high-power approximation at 60 dBm:", A.asymptotic_op(cfg, "noma-i", "c").value)
