"""Walk through the hydrodynamic surrogate on one and two buoys.

Run with ``python demos/single_buoy_physics.py``.
"""

from wecfarm import FarmLayout, HydroModel, farm_power, monochromatic
from wecfarm.hydro import coefficients, solve_motion

model = HydroModel()
sea = monochromatic(omega=model.omega0)

# A lone buoy tuned to resonance absorbs |f|^2 / (8 b0).
case = coefficients(model, [[0.0, 0.0]], model.omega0, 0.0)
tuned = [[model.resonant_stiffness, model.b0]]
v = solve_motion(case, model, tuned)
print(f"excitation |f| = {abs(case.f_exc[0]):.4g} N, heave velocity |v| = {abs(v[0]):.4g} m/s")
print(f"resonant power {0.5 * model.b0 * abs(v[0]) ** 2:.1f} W, "
      f"closed form {abs(case.f_exc[0]) ** 2 / (8 * model.b0):.1f} W")

# Detuning the spring stiffness away from resonance costs power.
for k in (2e5, 4e5, model.resonant_stiffness):
    p = farm_power(model, sea, FarmLayout([[0.0, 0.0]], [[k, model.b0]])).total_power
    print(f"  k = {k:9.0f} N/m -> {p:9.1f} W")

# Two buoys interact through radiated waves; the q-factor compares the
# pair against two isolated buoys. It swings above and below 1 with the
# spacing, and the swing decays slowly with distance.
print("\nspacing (m)   q-factor")
for spacing in (50, 60, 80, 120, 200, 500, 2000):
    layout = FarmLayout([[0.0, 0.0], [float(spacing), 0.0]], [[4e5, 1e5]] * 2)
    print(f"{spacing:11d}   {farm_power(model, sea, layout).q_factor:.4f}")

# Waves arriving along the line of buoys versus broadside to it.
layout = FarmLayout([[0.0, 0.0], [60.0, 0.0]], [[4e5, 1e5]] * 2)
for theta in (0.0, 90.0):
    q = farm_power(model, monochromatic(theta=theta), layout).q_factor
    print(f"direction {theta:4.0f} deg -> q = {q:.4f}")
