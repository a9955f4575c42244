"""Scan a shared PTO setting over a fixed four-buoy layout.

Every buoy gets the same (k, d); the grid shows how flat the power surface
is around its ridge. Run with ``python demos/pto_landscape.py``.
"""

import numpy as np

from wecfarm import FarmBounds, FarmLayout, HydroModel, load_scenario
from wecfarm.farm import is_feasible
from wecfarm.harness import DEFAULT_PTO, landscape, shared_pto_power

model = HydroModel()
scenario = load_scenario("perth_like.scn")
bounds = FarmBounds(4)

# A line of buoys 60 m apart, roughly broadside to the dominant direction.
direction = np.radians(scenario.dominant_direction - 90.0)
start = np.array([250.0, 20.0])
positions = [start + 60.0 * i * np.array([np.cos(direction), np.sin(direction)]) for i in range(4)]
assert is_feasible(positions, bounds)
layout = FarmLayout(positions, [DEFAULT_PTO] * 4)
print("positions (m):")
print(np.round(layout.positions, 1))

# A coarse step keeps this quick; the CLI default is 10000.
k_axis, d_axis, grid = landscape(model, scenario, layout, bounds, step=50000.0)
print(f"\n{k_axis.size} x {d_axis.size} grid, power in kW (rows k, columns d)")
print("k \\ d    " + "".join(f"{d / 1e3:7.0f}" for d in d_axis))
for k, row in zip(k_axis, grid):
    print(f"{k / 1e3:7.0f}  " + "".join(f"{p / 1e3:7.1f}" for p in row))

i, j = np.unravel_index(np.argmax(grid), grid.shape)
default = shared_pto_power(model, scenario, layout, *DEFAULT_PTO)
print(f"\nbest cell k={k_axis[i]:.0f}, d={d_axis[j]:.0f}: {grid[i, j]:.1f} W")
print(f"reference k={DEFAULT_PTO[0]:.0f}, d={DEFAULT_PTO[1]:.0f}: {default:.1f} W")
