"""
Healthy and unhealthy markets
=============================

The payment ratio says how much more an honest purchase is worth than a
pumping one. At 100 the pumping volume is negligible; at 10 the rings
outweigh many honest suppliers.
"""

# %%
from dataclasses import replace

from wlrank.engine import CHAMPION
from wlrank.market import ScenarioConfig, run_simulation
from wlrank.metrics import evaluate

base = ScenarioConfig(reputation=CHAMPION, seed=2)
for ratio in (100, 20, 10):
    r = evaluate(run_simulation(replace(base, payment_ratio=ratio)))
    print(f"{r.market_tier:>13}  V_g/V_b {r.volume_ratio:6.1f}  precision {r.precision:.2f}  "
          f"recall {r.recall:.2f}  pcc {r.pcc_by_category:+.2f}  pccg {r.pccg_by_category:.2f}")

# %%
# In the unhealthy market some scams climb above the threshold, so
# precision and the overall per-category correlation fall. The ordering of
# honest suppliers among themselves (pccg) is untouched by the pumping:
# every honest rank is divided by the same inflated maximum.
