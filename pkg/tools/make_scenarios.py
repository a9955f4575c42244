"""Regenerate the synthetic scenario files bundled in src/wecfarm/data.

Both sites share 50 frequencies on [0.3, 1.6] rad/s. The Perth-like climate
is narrow in direction and frequency around 232.5 deg; the Sydney-like one
spreads over all seven directions with a broad spectrum around 172.5 deg.
"""

from pathlib import Path

import numpy as np

from wecfarm.scenario import WaveScenario, monochromatic, write_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "wecfarm" / "data"
FREQUENCIES = np.round(np.linspace(0.3, 1.6, 50), 6)


def gaussian_table(directions, dir_peak, dir_width, freq_peak, freq_width):
    dirs = np.asarray(directions, dtype=float)
    by_direction = np.exp(-0.5 * ((dirs - dir_peak) / dir_width) ** 2)
    by_frequency = np.exp(-0.5 * ((FREQUENCIES - freq_peak) / freq_width) ** 2)
    table = np.round(np.outer(by_direction, by_frequency), 9)
    return table / table.sum()


def main():
    perth_dirs = np.arange(187.5, 278.0, 15.0)
    sydney_dirs = np.arange(82.5, 263.0, 30.0)
    scenarios = [
        WaveScenario("perth_like", perth_dirs, FREQUENCIES,
                     gaussian_table(perth_dirs, 232.5, 12.0, 0.9, 0.12), 1.0),
        WaveScenario("sydney_like", sydney_dirs, FREQUENCIES,
                     gaussian_table(sydney_dirs, 172.5, 60.0, 0.8, 0.25), 1.0),
        monochromatic(omega=1.0, theta=0.0),
    ]
    for s in scenarios:
        write_scenario(s, DATA / f"{s.name}.scn")
        print(s.name, s.weights.shape, s.dominant_direction)


if __name__ == "__main__":
    main()
