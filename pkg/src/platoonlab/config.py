"""Scenario configuration files.

Scenarios are plain-text ``key = value`` documents with four sections:

    [profile]        v0, rho, drop_start, drop_length
    [platoon]        n, T
    [sim]            x1_start, duration, dt, record_interval,
                     integrator (rk4|rk45), saturation (optional cap)
    [perturbations]  one entry per vehicle: ``<index> = <dx>[, <dy>]``

``#`` starts a comment.  Missing optional keys take the defaults listed in
``_SIM_DEFAULTS``; every parse error carries the offending line number.
The controller hypotheses (``M * T < 1``, positive speed infimum) are
validated at parse time so a bad scenario fails before any integration.

The config file is the reproducibility unit: :func:`serialize_scenario`
writes every resolved value with full round-trip precision and
``parse_scenario(serialize_scenario(s)) == s``.
"""

from __future__ import annotations

from .exceptions import ConfigError, HypothesisError
from .profile import SpeedDropProfile, validate
from .sim import Perturbation, Scenario

_PROFILE_KEYS = ("v0", "rho", "drop_start", "drop_length")
_PLATOON_KEYS = ("n", "T")
_SIM_DEFAULTS = {
    "x1_start": 0.0,
    "duration": 60.0,
    "dt": 0.01,
    "record_interval": 0.1,
    "integrator": "rk4",
    "saturation": None,
}
_SECTIONS = ("profile", "platoon", "sim", "perturbations")


def _parse_float(raw: str, key: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {raw!r}", line) from None


def _parse_int(raw: str, key: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {raw!r}", line) from None


def _split_sections(text: str) -> dict[str, list[tuple[int, str, str]]]:
    """Break the document into per-section (line, key, raw value) triples."""
    sections: dict[str, list[tuple[int, str, str]]] = {s: [] for s in _SECTIONS}
    current: str | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in sections:
                raise ConfigError(f"unknown section [{name}]", lineno)
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside any section", lineno)
        key, raw_value = (part.strip() for part in line.split("=", 1))
        sections[current].append((lineno, key, raw_value))
    return sections


def _collect(
    entries: list[tuple[int, str, str]], section: str, allowed: tuple[str, ...]
) -> dict[str, tuple[int, str]]:
    out: dict[str, tuple[int, str]] = {}
    for lineno, key, raw in entries:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        out[key] = (lineno, raw)
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario document, validating hypotheses at parse time."""
    sections = _split_sections(text)

    prof_entries = _collect(sections["profile"], "profile", _PROFILE_KEYS)
    for key in _PROFILE_KEYS:
        if key not in prof_entries:
            raise ConfigError(f"missing key {key!r} in [profile]")
    prof_values = {
        key: _parse_float(raw, key, line) for key, (line, raw) in prof_entries.items()
    }
    try:
        profile = SpeedDropProfile(**prof_values)
    except ValueError as exc:
        msg = str(exc)
        line = next(
            (ln for key, (ln, _) in prof_entries.items() if key in msg.split()),
            None,
        )
        raise ConfigError(msg, line) from None

    plat_entries = _collect(sections["platoon"], "platoon", _PLATOON_KEYS)
    for key in _PLATOON_KEYS:
        if key not in plat_entries:
            raise ConfigError(f"missing key {key!r} in [platoon]")
    n_line, n_raw = plat_entries["n"]
    n = _parse_int(n_raw, "n", n_line)
    t_line, t_raw = plat_entries["T"]
    T = _parse_float(t_raw, "T", t_line)
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T!r}", t_line)

    check = validate(profile, T)
    if not check.ok:
        raise HypothesisError(
            f"line {t_line}: scenario violates controller hypotheses: "
            + "; ".join(check.failures)
        )

    sim_entries = _collect(sections["sim"], "sim", tuple(_SIM_DEFAULTS))
    sim_values: dict = dict(_SIM_DEFAULTS)
    for key, (line, raw) in sim_entries.items():
        if key == "integrator":
            if raw not in ("rk4", "rk45"):
                raise ConfigError(
                    f"integrator must be 'rk4' or 'rk45', got {raw!r}", line
                )
            sim_values[key] = raw
        else:
            sim_values[key] = _parse_float(raw, key, line)

    perturbations = []
    seen: set[int] = set()
    for lineno, key, raw in sections["perturbations"]:
        vehicle = _parse_int(key, "perturbation vehicle index", lineno)
        if vehicle in seen:
            raise ConfigError(f"duplicate perturbation for vehicle {vehicle}", lineno)
        seen.add(vehicle)
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) not in (1, 2):
            raise ConfigError(
                f"perturbation expects '<dx>[, <dy>]', got {raw!r}", lineno
            )
        dx = _parse_float(parts[0], "dx", lineno)
        dy = _parse_float(parts[1], "dy", lineno) if len(parts) == 2 else 0.0
        perturbations.append(Perturbation(vehicle=vehicle, dx=dx, dy=dy))

    try:
        return Scenario(
            n=n,
            T=T,
            profile=profile,
            perturbations=tuple(perturbations),
            **sim_values,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def serialize_scenario(scenario: Scenario) -> str:
    """Write every resolved value; round-trips exactly through the parser."""
    profile = scenario.profile
    if not isinstance(profile, SpeedDropProfile):
        raise TypeError(
            "only speed-drop profiles are representable in scenario files"
        )
    lines = [
        "[profile]",
        f"v0 = {profile.v0!r}",
        f"rho = {profile.rho!r}",
        f"drop_start = {profile.drop_start!r}",
        f"drop_length = {profile.drop_length!r}",
        "",
        "[platoon]",
        f"n = {scenario.n}",
        f"T = {scenario.T!r}",
        "",
        "[sim]",
        f"x1_start = {scenario.x1_start!r}",
        f"duration = {scenario.duration!r}",
        f"dt = {scenario.dt!r}",
        f"record_interval = {scenario.record_interval!r}",
        f"integrator = {scenario.integrator}",
    ]
    if scenario.saturation is not None:
        lines.append(f"saturation = {scenario.saturation!r}")
    lines.append("")
    lines.append("[perturbations]")
    for p in scenario.perturbations:
        lines.append(f"{p.vehicle} = {p.dx!r}, {p.dy!r}")
    lines.append("")
    return "\n".join(lines)
