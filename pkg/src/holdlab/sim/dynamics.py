"""Pure per-stop dynamics: dwell, boarding split, alighting, headways."""

from __future__ import annotations

from typing import Iterable, Sequence


class InvariantViolation(RuntimeError):
    pass


def dwell_time(boarding: int, alighting: int, board_per_pax: float, alight_per_pax: float) -> float:
    """Dwell is governed by the slower of the two door processes."""
    if boarding < 0 or alighting < 0:
        raise ValueError("counts must be >= 0")
    return max(board_per_pax * boarding, alight_per_pax * alighting, 0.0)


def boarding_count(waiting: int, capacity: int, onboard: int, alighting: int) -> tuple[int, int]:
    """Split the waiting crowd into (boarded, left behind)."""
    if onboard > capacity:
        raise InvariantViolation(f"onboard {onboard} exceeds capacity {capacity}")
    if min(waiting, capacity, onboard, alighting) < 0:
        raise ValueError("counts must be >= 0")
    room = capacity - onboard + alighting
    boarded = min(waiting, room)
    return boarded, waiting - boarded


def alighting_set(onboard: Sequence, stop_id: str) -> tuple[list, list]:
    """Partition riders into (alighting here, staying)."""
    off, stay = [], []
    for p in onboard:
        (off if p.alight_stop == stop_id else stay).append(p)
    return off, stay


def alighting_count(onboard: Sequence, stop_id: str) -> int:
    return sum(1 for p in onboard if p.alight_stop == stop_id)


def line_headways(ref: float, others: Iterable[tuple[float, bool]], route_length: float,
                  circular: bool) -> tuple[float, float]:
    """Nearest forward/backward spacing from ``ref`` along one line.

    ``others`` holds (position, ahead_on_tie) pairs. ``ahead_on_tie`` decides
    on which side a co-located bus counts. With no neighbour on a side, a
    linear line falls back to the distance to the terminus (forward) or to
    the origin (backward); a circular line with no other bus reports the
    full loop on both sides.
    """
    L = route_length
    fwd = bwd = None
    for pos, ahead in others:
        if circular:
            d = (pos - ref) % L
            if d == 0.0:
                f, b = (0.0, L) if ahead else (L, 0.0)
            else:
                f, b = d, L - d
            fwd = f if fwd is None else min(fwd, f)
            bwd = b if bwd is None else min(bwd, b)
        else:
            d = pos - ref
            if d > 0 or (d == 0 and ahead):
                fwd = d if fwd is None else min(fwd, d)
            else:
                bwd = -d if bwd is None else min(bwd, -d)
    if fwd is None:
        fwd = L if circular else min(max(L - ref, 0.0), L)
    if bwd is None:
        bwd = L if circular else min(max(ref, 0.0), L)
    return float(fwd), float(bwd)
