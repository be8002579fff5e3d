import math

from gazeauth.core.models import LrSchedule


def _annealing_cos(start: float, end: float, pct: float) -> float:
    return end + (start - end) / 2.0 * (math.cos(math.pi * pct) + 1.0)


def peak_step(total_steps: int, schedule: LrSchedule) -> int:
    """round-half-up(warmup_fraction * total), kept strictly inside (0, total - 1)."""
    step = int(math.floor(schedule.warmup_fraction * total_steps + 0.5))
    return min(max(step, 1), total_steps - 2)


def lr_at(step: int, total_steps: int, schedule: LrSchedule) -> float:
    """
    One-cycle cosine schedule: start -> peak over [0, peak_step], peak -> end
    over [peak_step, total_steps - 1]. Runs shorter than three steps have no
    warm-up: step 0 is `start` and anything later is `end`.
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    if total_steps < 3:
        return schedule.start if step == 0 else schedule.end
    peak = peak_step(total_steps, schedule)
    if step <= peak:
        return _annealing_cos(schedule.start, schedule.peak, step / peak)
    return _annealing_cos(schedule.peak, schedule.end, (step - peak) / (total_steps - 1 - peak))
