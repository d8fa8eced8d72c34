"""
Re-ranking a stored log
=======================

Selections in a finished run depend on the ranks that were live at the
time, so changing reputation settings properly needs a new run. For a quick
look, the stored transactions can be re-ranked with other settings.
"""

# %%
import tempfile
from dataclasses import replace

from wlrank.engine import CHAMPION
from wlrank.harness import load_log, replay, save_log
from wlrank.market import ScenarioConfig, run_simulation
from wlrank.metrics import evaluate

log = run_simulation(ScenarioConfig(periodic_surge=True, reputation=CHAMPION, seed=3))

# %%
# Store it in the flat-file format and read it back.
with tempfile.TemporaryDirectory() as d:
    save_log(log, d)
    stored = load_log(d)

# %%
for period in (1, 7):
    r = evaluate(replay(stored, replace(CHAMPION, update_period=period)))
    print(f"update every {period} day(s): precision {r.precision:.2f} recall {r.recall:.2f} "
          f"pccg {r.pccg_by_category:.2f}")
