"""Shared fixtures: synthetic melodic lines and MIDI event builders."""

from __future__ import annotations

import numpy as np
import pytest

from melmax import ingest
from melmax.ingest import NoteEvent
from melmax.scales import tet_frequency


def random_walk_events(
    seed: int,
    n_notes: int = 800,
    lo: int = 48,
    hi: int = 84,
    rest_prob: float = 0.03,
    track: int = 0,
) -> list[NoteEvent]:
    """Seeded melodic random walk biased toward small steps, with rests."""
    rng = np.random.default_rng(seed)
    steps = np.array([-12, -7, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 7, 12])
    weights = np.exp(-np.abs(steps) / 3.5)
    weights /= weights.sum()
    pitch = (lo + hi) // 2
    events = []
    tick = 0
    for _ in range(n_notes):
        events.append(NoteEvent(track, tick, 240, pitch, 64))
        tick += 240
        if rng.random() < rest_prob:
            tick += 120
        pitch = min(max(pitch + int(rng.choice(steps, p=weights)), lo), hi)
    return events


def transition_from_indices(i: int, j: int) -> ingest.Transition:
    return ingest.Transition(tet_frequency(i), tet_frequency(j))


def random_track_events(rng: np.random.Generator, track: int) -> list[NoteEvent]:
    """Random note events without same-key overlap, as in quantised scores."""
    events = []
    tick = 0
    busy_until: dict[int, int] = {}
    for _ in range(rng.integers(1, 60)):
        tick += int(rng.integers(0, 400))
        note = int(rng.integers(30, 100))
        if busy_until.get(note, -1) >= tick:
            continue
        duration = int(rng.integers(1, 600))
        busy_until[note] = tick + duration
        events.append(NoteEvent(track, tick, duration, note, int(rng.integers(1, 128))))
    return events


@pytest.fixture(scope="session")
def walk_line():
    events = random_walk_events(seed=7, n_notes=1200)
    return ingest.extract_melodic_line(events, label="walk")


@pytest.fixture(scope="session")
def walk_transitions(walk_line):
    return ingest.transitions(walk_line)
