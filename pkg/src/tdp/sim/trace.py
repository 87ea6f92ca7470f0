"""Contact traces: parsing, normalization and synthetic generation.

The native layout is one contact per line, ``t_start t_end node_i node_j``.
Two adapters cover the public conference datasets:

* ``haggle``: CRAWDAD cambridge/haggle contact tables (Infocom'05), whitespace
  separated ``node_i node_j t_start t_end [ignored...]``.
* ``sightings``: scan logs such as the Sigcomm'09 proximity table, one row
  ``timestamp node seen_node`` separated by whitespace, ``;`` or ``,``.  Each
  sighting covers ``[t, t + granularity)`` and overlapping sightings of the
  same pair are merged.
"""
from __future__ import annotations

import math
import random
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

LAYOUTS = ("tdp", "haggle", "sightings")


class ParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class EmptyTrace(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TraceEvent:
    t_start: float
    t_end: float
    node_i: str
    node_j: str

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def merge_events(events: Iterable[TraceEvent]) -> list[TraceEvent]:
    """Normalize pair order and merge overlapping contacts of the same pair."""
    by_pair = defaultdict(list)
    for ev in events:
        i, j = sorted((ev.node_i, ev.node_j))
        by_pair[(i, j)].append((ev.t_start, ev.t_end))
    out = []
    for (i, j), spans in by_pair.items():
        spans.sort()
        cur_s, cur_e = spans[0]
        for s, e in spans[1:]:
            if s <= cur_e:
                cur_e = max(cur_e, e)
            else:
                out.append(TraceEvent(cur_s, cur_e, i, j))
                cur_s, cur_e = s, e
        out.append(TraceEvent(cur_s, cur_e, i, j))
    out.sort()
    return out


def _num(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(lineno, f"expected a number, got {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(lineno, f"non-finite time {tok!r}")
    return v


def parse_lines(lines: Iterable[str], layout: str = "tdp", granularity: float = 120.0) -> list[TraceEvent]:
    if layout not in LAYOUTS:
        raise ValueError(f"unknown trace layout {layout!r}; choose from {LAYOUTS}")
    events = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = re.split(r"[;,\s]+", line) if layout == "sightings" else line.split()
        if layout == "tdp":
            if len(toks) != 4:
                raise ParseError(lineno, f"expected 4 fields, got {len(toks)}")
            s, e, i, j = _num(toks[0], lineno), _num(toks[1], lineno), toks[2], toks[3]
        elif layout == "haggle":
            if len(toks) < 4:
                raise ParseError(lineno, f"expected at least 4 fields, got {len(toks)}")
            i, j, s, e = toks[0], toks[1], _num(toks[2], lineno), _num(toks[3], lineno)
        else:
            if len(toks) < 3:
                raise ParseError(lineno, f"expected 3 fields, got {len(toks)}")
            s, i, j = _num(toks[0], lineno), toks[1], toks[2]
            e = s + granularity
        if i == j:
            raise ParseError(lineno, f"self-contact of node {i}")
        if not s < e:
            raise ParseError(lineno, f"t_end {e} is not after t_start {s}")
        events.append(TraceEvent(s, e, i, j))
    return merge_events(events)


def load_trace(path: str | Path, layout: str = "tdp", granularity: float = 120.0) -> list[TraceEvent]:
    with open(path) as fh:
        events = parse_lines(fh, layout, granularity)
    if not events:
        raise EmptyTrace(f"{path} contains no contacts")
    return events


def device_ids(events: Iterable[TraceEvent]) -> list[str]:
    ids = set()
    for ev in events:
        ids.add(ev.node_i)
        ids.add(ev.node_j)
    return sorted(ids)


def format_trace(events: Iterable[TraceEvent]) -> str:
    return "".join(f"{ev.t_start!r} {ev.t_end!r} {ev.node_i} {ev.node_j}\n" for ev in events)


def dump_trace(events: Iterable[TraceEvent], path: str | Path) -> None:
    Path(path).write_text(format_trace(events))


def contact_rate_for(n_devices: int, duration: float, per_device_contacts: float) -> float:
    """Per-pair Poisson rate giving the requested expected contacts per device."""
    return per_device_contacts / ((n_devices - 1) * duration)


def synth_trace(
    n_devices: int,
    duration: float,
    contact_rate: float,
    rng: random.Random,
    mean_duration: float = 600.0,
) -> list[TraceEvent]:
    """Homogeneous Poisson contacts, independently per device pair.

    ``contact_rate`` is per pair and per second; contact lengths are exponential
    with mean ``mean_duration`` (at least one second).
    """
    if n_devices < 2:
        raise ValueError("need at least two devices")
    width = len(str(n_devices - 1))
    ids = [f"d{k:0{width}d}" for k in range(n_devices)]
    events = []
    if contact_rate <= 0:
        return events
    for a in range(n_devices):
        for b in range(a + 1, n_devices):
            t = rng.expovariate(contact_rate)
            while t < duration:
                length = max(1.0, rng.expovariate(1.0 / mean_duration))
                events.append(TraceEvent(round(t, 3), round(t + length, 3), ids[a], ids[b]))
                t += rng.expovariate(contact_rate)
    return merge_events(events)
