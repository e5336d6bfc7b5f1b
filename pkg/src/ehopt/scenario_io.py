"""Scenario documents: JSON schema, validation, and the bundled default.

A scenario file is a single JSON object:

    {
      "schema_version": 1,
      "name": "...",                      # optional
      "battery_capacity": 5,
      "discount": 0.9,
      "energy_chain":  {"labels": [...], "transition": [[...], ...]},
      "data_chain":    {"labels": [...], "transition": [[...], ...]},
      "channel_chain": {"labels": [...], "transition": [[...], ...]},
      "physical": {"bandwidth_hz": ..., "tx_duration_s": ...,
                   "slot_duration_s": ..., "noise_density_w_per_hz": ...,
                   "energy_unit_joules": ...},
      "cost_table": [[...], ...],         # optional explicit override
      "cost_tolerance": 1e-3              # optional
    }

The bundled default reproduces the low-power indoor radio setup the
experiment presets assume: on/off harvesting of two 2.5 uJ units,
300/600-bit packets, a two-level channel, all with 0.9 self-transition
probability.
"""
import json
from importlib import resources

import numpy as np

from .errors import ParseError
from .model import EnergyCostTable, MarkovChain, PhysicalParams, Scenario

SCHEMA_VERSION = 1
DEFAULT_NAME = "default"


def _chain(doc: dict, key: str) -> MarkovChain:
    try:
        body = doc[key]
        return MarkovChain(tuple(body["labels"]), np.asarray(body["transition"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"scenario field '{key}' is missing or malformed: {exc}") from exc


def scenario_from_dict(doc: dict) -> Scenario:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        phys = PhysicalParams(**doc["physical"])
        battery = int(doc["battery_capacity"])
        discount = float(doc["discount"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"scenario document malformed: {exc}") from exc
    cost_table = None
    if doc.get("cost_table") is not None:
        cost_table = EnergyCostTable(np.asarray(doc["cost_table"], dtype=np.int64))
    return Scenario(
        energy_chain=_chain(doc, "energy_chain"),
        data_chain=_chain(doc, "data_chain"),
        channel_chain=_chain(doc, "channel_chain"),
        battery_capacity=battery,
        discount=discount,
        physical=phys,
        cost_table=cost_table,
        cost_tolerance=float(doc.get("cost_tolerance", 1e-3)),
        name=str(doc.get("name", "scenario")),
    )


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; `default` loads the bundled one."""
    if path == DEFAULT_NAME:
        text = resources.files("ehopt").joinpath("data/default_scenario.json").read_text()
    else:
        with open(path) as f:
            text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def default_scenario() -> Scenario:
    return load_scenario(DEFAULT_NAME)


def scenario_to_dict(scenario: Scenario) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "battery_capacity": scenario.battery_capacity,
        "discount": scenario.discount,
        "energy_chain": {
            "labels": list(scenario.energy_chain.labels),
            "transition": scenario.energy_chain.transition.tolist(),
        },
        "data_chain": {
            "labels": list(scenario.data_chain.labels),
            "transition": scenario.data_chain.transition.tolist(),
        },
        "channel_chain": {
            "labels": list(scenario.channel_chain.labels),
            "transition": scenario.channel_chain.transition.tolist(),
        },
        "physical": {
            "bandwidth_hz": scenario.physical.bandwidth_hz,
            "tx_duration_s": scenario.physical.tx_duration_s,
            "slot_duration_s": scenario.physical.slot_duration_s,
            "noise_density_w_per_hz": scenario.physical.noise_density_w_per_hz,
            "energy_unit_joules": scenario.physical.energy_unit_joules,
        },
        "cost_tolerance": scenario.cost_tolerance,
    }
    if scenario.cost_table is not None:
        doc["cost_table"] = scenario.cost_table.cost.tolist()
    return doc
