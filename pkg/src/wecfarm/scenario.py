"""Wave climates: directional/frequency grids with probability weights.

A scenario file is line-oriented UTF-8 text::

    # comment
    scenario perth_like amplitude=1.0
    directions: 187.5 202.5 ...
    frequencies: 0.3 0.3265 ...
    <one line of weights per direction, one weight per frequency>
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

GRAVITY = 9.81

__all__ = [
    "GRAVITY",
    "ScenarioError",
    "WaveScenario",
    "bundled_scenarios",
    "load_scenario",
    "monochromatic",
    "resolve_scenario_path",
    "wavenumber",
    "write_scenario",
]

# sums closer than this to 1 are accepted verbatim, so written scenarios round-trip exactly
_EXACT_SUM_TOL = 1e-9
_RENORMALIZE_TOL = 1e-6


class ScenarioError(ValueError):
    """Malformed or invalid wave scenario."""


def _frozen(values, ndim):
    arr = np.array(values, dtype=float, ndmin=ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WaveScenario:
    """Site climate as a probability table over (direction, frequency) cells.

    Parameters
    ----------
    name : str
        Scenario label, written to the file header.
    directions : array_like
        Wave directions in degrees, strictly increasing in [0, 360).
    frequencies : array_like
        Angular frequencies in rad/s, strictly increasing and positive.
    weights : array_like
        Probability mass per cell, shape ``(len(directions), len(frequencies))``.
    amplitude : float
        Wave amplitude in meters scaling all excitation forces.
    """

    name: str
    directions: np.ndarray
    frequencies: np.ndarray
    weights: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        directions = _frozen(self.directions, 1)
        frequencies = _frozen(self.frequencies, 1)
        weights = _frozen(self.weights, 2)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "amplitude", float(self.amplitude))

        if not self.name or any(c.isspace() for c in self.name):
            raise ScenarioError(f"scenario name must be a non-empty token, got {self.name!r}")
        if directions.ndim != 1 or directions.size == 0:
            raise ScenarioError("at least one direction is required")
        if frequencies.ndim != 1 or frequencies.size == 0:
            raise ScenarioError("at least one frequency is required")
        if np.any(directions < 0) or np.any(directions >= 360):
            raise ScenarioError("directions must lie in [0, 360)")
        if np.any(np.diff(directions) <= 0):
            raise ScenarioError("directions must be strictly increasing")
        if np.any(frequencies <= 0):
            raise ScenarioError("frequencies must be positive")
        if np.any(np.diff(frequencies) <= 0):
            raise ScenarioError("frequencies must be strictly increasing")
        if weights.shape != (directions.size, frequencies.size):
            raise ScenarioError(
                f"weights shape {weights.shape} does not match "
                f"({directions.size}, {frequencies.size})"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ScenarioError("weights must be finite and non-negative")
        total = float(weights.sum())
        if abs(total - 1.0) > _EXACT_SUM_TOL:
            raise ScenarioError(f"weights sum to {total!r}, expected 1")
        if not np.isfinite(self.amplitude) or self.amplitude <= 0:
            raise ScenarioError("amplitude must be positive")

    def __eq__(self, other):
        if not isinstance(other, WaveScenario):
            return NotImplemented
        return (
            self.name == other.name
            and self.amplitude == other.amplitude
            and np.array_equal(self.directions, other.directions)
            and np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    @property
    def n_cells(self) -> int:
        return self.weights.size

    @property
    def dominant_direction(self) -> float:
        """Direction (degrees) carrying the largest total weight."""
        return float(self.directions[np.argmax(self.weights.sum(axis=1))])

    @property
    def dominant_frequency(self) -> float:
        return float(self.frequencies[np.argmax(self.weights.sum(axis=0))])


def wavenumber(omega):
    """Deep-water wavenumber ``k = omega**2 / g`` in 1/m.

    Accepts scalars or arrays; every ``omega`` must be strictly positive.
    """
    omega_arr = np.asarray(omega, dtype=float)
    if not np.all(omega_arr > 0):
        raise ValueError("omega must be strictly positive")
    k = omega_arr**2 / GRAVITY
    return float(k) if k.ndim == 0 else k


def monochromatic(omega=1.0, theta=0.0, amplitude=1.0, name="monochromatic"):
    """Single-cell scenario: one direction, one frequency, weight 1."""
    return WaveScenario(name, [theta], [omega], [[1.0]], amplitude)


def _parse_floats(tokens, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ScenarioError(f"line {lineno}: bad {what} value ({exc})") from None


def _parse(text, source):
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append((lineno, line))
    if len(lines) < 3:
        raise ScenarioError(f"{source}: incomplete scenario file")

    lineno, header = lines[0]
    parts = header.split()
    if len(parts) < 2 or parts[0] != "scenario":
        raise ScenarioError(f"{source}:{lineno}: expected 'scenario <name> amplitude=<float>'")
    name = parts[1]
    amplitude = 1.0
    for token in parts[2:]:
        key, sep, value = token.partition("=")
        if key != "amplitude" or not sep:
            raise ScenarioError(f"{source}:{lineno}: unexpected header token {token!r}")
        amplitude = _parse_floats([value], lineno, "amplitude")[0]

    axes = {}
    for (lineno, line), key in zip(lines[1:3], ("directions", "frequencies")):
        label, sep, rest = line.partition(":")
        if label.strip() != key or not sep:
            raise ScenarioError(f"{source}:{lineno}: expected '{key}: ...'")
        axes[key] = _parse_floats(rest.split(), lineno, key)

    rows = [_parse_floats(line.split(), lineno, "weight") for lineno, line in lines[3:]]
    n_dir, n_freq = len(axes["directions"]), len(axes["frequencies"])
    if len(rows) != n_dir or any(len(r) != n_freq for r in rows):
        raise ScenarioError(
            f"{source}: expected {n_dir} weight rows of {n_freq} values, "
            f"got {[len(r) for r in rows]}"
        )
    weights = np.array(rows, dtype=float).reshape(n_dir, n_freq)
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ScenarioError(f"{source}: weights must be finite and non-negative")
    total = float(weights.sum())
    if abs(total - 1.0) > _RENORMALIZE_TOL:
        raise ScenarioError(f"{source}: weights sum to {total!r}, expected 1 within 1e-6")
    if abs(total - 1.0) > _EXACT_SUM_TOL:
        weights = weights / total
    return WaveScenario(name, axes["directions"], axes["frequencies"], weights, amplitude)


def bundled_scenarios():
    """Names of the scenario files shipped with the package."""
    root = resources.files("wecfarm") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".scn"))


def resolve_scenario_path(path):
    """Return `path` if it exists, else the bundled file of that name (``.scn`` optional)."""
    p = Path(path)
    if p.exists():
        return p
    root = resources.files("wecfarm") / "data"
    for name in (p.name, p.name + ".scn"):
        candidate = root / name
        if candidate.is_file():
            return Path(str(candidate))
    raise FileNotFoundError(f"scenario file not found: {path}")


def load_scenario(path):
    """Load and validate a scenario file (bundled names are accepted too)."""
    resolved = resolve_scenario_path(path)
    return _parse(resolved.read_text(encoding="utf-8"), str(path))


def write_scenario(scenario, path):
    lines = [
        f"scenario {scenario.name} amplitude={scenario.amplitude!r}",
        "directions: " + " ".join(repr(float(d)) for d in scenario.directions),
        "frequencies: " + " ".join(repr(float(w)) for w in scenario.frequencies),
    ]
    for row in scenario.weights:
        lines.append(" ".join(repr(float(w)) for w in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
