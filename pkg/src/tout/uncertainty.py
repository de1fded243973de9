"""Local uncertainty quantification for intermediate reasoning states.

A state is evaluated m times under a linearly spaced temperature schedule.
The mean of the sampled values is the state's value v, the population
variance is its local uncertainty u, and selection uses the confidence
score v / (u + epsilon). Switching LUQ off collapses the procedure to a
single sample at the top temperature with u = 0; switching guidance off
keeps u but scores by value alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .backends import Backend, BackendRequest, ResponseCache, cached_generate
from .model import (
    InvalidArgumentError,
    ScoredState,
    SearchConfig,
    State,
    TaskSpec,
    Transcript,
)


def temperature_schedule(m: int, t_min: float, t_max: float) -> list[float]:
    """m temperatures linearly spaced from t_min to t_max inclusive.

    A single sample is drawn at t_min: with no spread to estimate there is
    no reason to pay the noise of a hot generation.
    """
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    if t_min < 0 or t_min > t_max:
        raise InvalidArgumentError("need 0 <= t_min <= t_max")
    if m == 1:
        return [t_min]
    step = (t_max - t_min) / (m - 1)
    return [t_min + i * step for i in range(m)]


def aggregate_value(samples: Sequence[float]) -> float:
    """Mean of the sampled values."""
    if not samples:
        raise InvalidArgumentError("need at least one sample")
    return math.fsum(samples) / len(samples)


def variance(samples: Sequence[float]) -> float:
    """Population variance (divide by n, not n-1)."""
    if not samples:
        raise InvalidArgumentError("need at least one sample")
    mean = math.fsum(samples) / len(samples)
    return math.fsum((x - mean) ** 2 for x in samples) / len(samples)


def confidence_score(value: float, uncertainty: float, epsilon: float) -> float:
    """value / (uncertainty + epsilon); epsilon keeps zero variance finite."""
    if epsilon <= 0:
        raise InvalidArgumentError("epsilon must be > 0")
    if uncertainty < 0:
        raise InvalidArgumentError("uncertainty must be >= 0")
    return value / (uncertainty + epsilon)


@dataclass(frozen=True)
class UncertaintyEstimate:
    """v, u and v/(u+eps) for one batch of sampled values."""

    value: float
    uncertainty: float
    score: float
    samples: tuple[float, ...]
    temperatures: tuple[float, ...] = ()


def estimate_uncertainty(
    samples: Sequence[float],
    epsilon: float,
    temperatures: Sequence[float] = (),
) -> UncertaintyEstimate:
    """Fold one sample batch into the value/uncertainty/score triple."""
    value = aggregate_value(samples)
    uncertainty = variance(samples)
    return UncertaintyEstimate(
        value=value,
        uncertainty=uncertainty,
        score=confidence_score(value, uncertainty, epsilon),
        samples=tuple(samples),
        temperatures=tuple(temperatures),
    )


def sample_values(
    task: TaskSpec,
    state: State,
    backend: Backend,
    schedule: Sequence[float],
    transcript: Optional[Transcript] = None,
    cache: Optional[ResponseCache] = None,
    batch_offset: int = 0,
) -> list[float]:
    """Evaluate the state once per scheduled temperature.

    Each draw is its own request (temperatures differ across the schedule)
    and carries its index as the cache batch index, so repeated draws at
    one temperature are still distinct requests.
    """
    prompt = task.value_prompt(state)
    values: list[float] = []
    for i, temp in enumerate(schedule):
        request = BackendRequest(prompt=prompt, temperature=temp, n=1)
        response = cached_generate(
            cache, backend, request, batch_index=batch_offset + i, transcript=transcript
        )
        completion = response.completions[0]
        value = task.parse_value(completion)
        values.append(value)
        if transcript is not None:
            transcript.emit(
                "sample",
                state_id=state.id,
                index=batch_offset + i,
                temperature=temp,
                completion=completion,
                value=value,
            )
    return values


def evaluate_state(
    task: TaskSpec,
    state: State,
    backend: Backend,
    config: SearchConfig,
    transcript: Optional[Transcript] = None,
    cache: Optional[ResponseCache] = None,
) -> ScoredState:
    """Produce the (value, uncertainty, score) triple that drives search.

    Default is single-pass: the m draws feed both the value mean and the
    variance. With config.two_pass a second m-draw pass is made and the
    variance is computed over that pass alone, at twice the call cost.
    With LUQ off, one draw at t_max stands in for the value and the
    uncertainty is pinned to zero. With guidance off, the score is the
    bare value rather than the confidence ratio.
    """
    if config.luq_enabled:
        schedule = temperature_schedule(config.m, config.t_min, config.t_max)
        first = sample_values(task, state, backend, schedule, transcript, cache)
        if config.two_pass:
            second = sample_values(
                task, state, backend, schedule, transcript, cache,
                batch_offset=len(schedule),
            )
            value = aggregate_value(first)
            uncertainty = variance(second)
            samples = tuple(first + second)
            temperatures = tuple(schedule) + tuple(schedule)
        else:
            estimate = estimate_uncertainty(first, config.epsilon, schedule)
            value = estimate.value
            uncertainty = estimate.uncertainty
            samples = estimate.samples
            temperatures = estimate.temperatures
    else:
        schedule = [config.t_max]
        first = sample_values(task, state, backend, schedule, transcript, cache)
        value = first[0]
        uncertainty = 0.0
        samples = tuple(first)
        temperatures = tuple(schedule)

    if config.ugs_enabled:
        score = confidence_score(value, uncertainty, config.epsilon)
    else:
        score = value

    if transcript is not None:
        # path makes evaluated states reconstructable from the record alone
        transcript.emit(
            "evaluate",
            state_id=state.id,
            path=list(state.thoughts),
            value=value,
            uncertainty=uncertainty,
            score=score,
            samples=list(samples),
            temperatures=list(temperatures),
        )
    return ScoredState(
        state=state,
        value=value,
        uncertainty=uncertainty,
        score=score,
        samples=samples,
        temperatures=temperatures,
    )
