"""Prompt rendering and response parsing.

The prompt layout (section order, wording, punctuation, every blank line,
including the double blank inside the first phase block) is normative and
pinned by a golden file in the test fixtures; render_prompt must stay
byte-identical to it.  Parsing accepts exactly one well-formed decision tag.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .sim import PHASE_NAMES, PHASES, IntersectionObservation, SignalPhase

DEFAULT_TASK = (
    "Which is the most effective traffic signal that will most significantly "
    "improve the traffic condition during the next phase?"
)

PHASE_RELIEVES = {
    SignalPhase.ETWT: "Eastern and western through lanes.",
    SignalPhase.NTST: "Northern and southern through lanes.",
    SignalPhase.ELWL: "Eastern and western left-turn lanes.",
    SignalPhase.NLSL: "Northern and southern left-turn lanes.",
}

# (directions shown, lane movement) per phase block
_BLOCK_SPEC = {
    SignalPhase.ETWT: (("E", "W"), "through", ("East", "West")),
    SignalPhase.NTST: (("N", "S"), "through", ("North", "South")),
    SignalPhase.ELWL: (("E", "W"), "left", ("East", "West")),
    SignalPhase.NLSL: (("N", "S"), "left", ("North", "South")),
}

_PREAMBLE = (
    "You are an expert in traffic management.",
    "",
    "A traffic light regulates a four-way intersection with northern, southern, "
    "eastern, and western approaches, each containing two lanes: one for through "
    "traffic and one for left-turns. Each lane is further divided into three "
    "segments. Segment 1 is the closest to the intersection. Segment 2 is in the "
    "middle. Segment 3 is the farthest. In a lane, there may be early queued "
    "vehicles and approaching vehicles traveling in different segments. Early "
    "queued vehicles have already arrived at the intersection and await passage "
    "permission. Approaching vehicles will arrive at the intersection in the future.",
    "",
    "The traffic light has 4 signal phases. Each signal relieves vehicles' flow "
    "in a group of two specific lanes.",
    "",
    "",
    "Available signal phases:",
    "",
    "- ETWT: Eastern and western through lanes.",
    "",
    "- NTST: Northern and southern through lanes.",
    "",
    "- ELWL: Eastern and western left-turn lanes.",
    "",
    "- NLSL: Northern and southern left-turn lanes.",
    "",
    "",
    "Current intersection state:",
)

_LEGEND = (
    "The state description above lists:",
    "",
    "- The group of lanes relieved under each traffic light phase.",
    "",
    "- The number of early queued vehicles in the allowed lanes of each signal.",
    "",
    "- The number of approaching vehicles in different segments of the allowed "
    "lanes of each signal.",
    "",
    "- Neighbor incoming totals from adjacent intersections for each phase.",
    "",
    "- `NA` means that adjacent side has a virtual/missing neighbor and is "
    "excluded from `Known total`.",
)

_NOTES = (
    "Note:",
    "",
    "- Traffic congestion is primarily dictated by early queued vehicles, with "
    "the most significant impact.",
    "",
    "- You must pay the most attention to lanes with long queue lengths.",
    "",
    "- It is not urgent to consider vehicles in distant segments, since they "
    "are unlikely to reach the intersection soon.",
)

_REQUIREMENTS = (
    "Requirements:",
    "",
    "- Think step by step.",
    "",
    "- You can only choose one of the signals listed above.",
    "",
    "- Step 1: Provide a brief analysis identifying the optimal traffic signal.",
    "",
    "- Step 2: After finishing the analysis, answer with your chosen signal.",
    "",
    "- Include exactly one final decision tag in this format: "
    "<signal>PHASE</signal>, where PHASE is one of: ETWT, NTST, ELWL, NLSL.",
)


@dataclass(frozen=True)
class PromptText:
    text: str
    intersection: str
    step: int | None = None


@dataclass(frozen=True)
class ParseResult:
    phase: SignalPhase | None
    reason: str | None  # no_tag | multiple_tags | unknown_phase

    @property
    def valid(self) -> bool:
        return self.phase is not None


def _pair_line(label: str, a: int, b: int, words: tuple[str, str]) -> str:
    return f"- {label}: {a} ({words[0]}), {b} ({words[1]}), {a + b} (Total)"


def _neighbor_line(na: int | None, nb: int | None, words: tuple[str, str]) -> str:
    def fmt(v):
        return "NA" if v is None else str(v)

    shown = [v for v in (na, nb) if v is not None]
    known = sum(shown)
    return (
        f"- Neighbor incoming totals: {fmt(na)} ({words[0]}), {fmt(nb)} ({words[1]}), "
        f"{known} (Known total), {len(shown)}/2 available"
    )


def _phase_block(obs: IntersectionObservation, phase: SignalPhase) -> list[str]:
    (da, db), movement, words = _BLOCK_SPEC[phase]
    la = obs.lanes[(da, movement)]
    lb = obs.lanes[(db, movement)]
    lines = [
        f"Signal: {phase.name}",
        "",
        f"Relieves: {PHASE_RELIEVES[phase]}",
        "",
        _pair_line("Early queued", la.queued, lb.queued, words),
        "",
        _pair_line("Segment 1", la.segments[0], lb.segments[0], words),
        "",
    ]
    if phase == SignalPhase.ETWT:
        # the template carries an extra blank line here; kept verbatim
        lines.append("")
    lines += [
        _pair_line("Segment 2", la.segments[1], lb.segments[1], words),
        "",
        _pair_line("Segment 3", la.segments[2], lb.segments[2], words),
        "",
        _neighbor_line(obs.neighbor_incoming[da], obs.neighbor_incoming[db], words),
    ]
    return lines


def render_prompt(obs: IntersectionObservation, task: str = DEFAULT_TASK,
                  step: int | None = None) -> PromptText:
    """Render the full prompt for one intersection observation."""
    lines: list[str] = list(_PREAMBLE)
    for phase in PHASES:
        lines.append("")
        lines += _phase_block(obs, phase)
        lines.append("")
    lines.append("")
    lines += _LEGEND
    lines += ["", "", "Question:", "", task, "", ""]
    lines += _NOTES
    lines += ["", ""]
    lines += _REQUIREMENTS
    text = "\n".join(lines) + "\n"
    return PromptText(text=text, intersection=obs.intersection, step=step)


_TAG_RE = re.compile(r"<signal>(.*?)</signal>", re.DOTALL)


def parse_response(text: str) -> ParseResult:
    """Extract the decision phase from a response.

    Exactly one tag whose trimmed payload is a canonical uppercase phase name
    is Valid; anything else is Invalid with a reason.
    """
    matches = _TAG_RE.findall(text or "")
    if len(matches) == 0:
        return ParseResult(None, "no_tag")
    if len(matches) > 1:
        return ParseResult(None, "multiple_tags")
    payload = matches[0].strip()
    if payload in PHASE_NAMES:
        return ParseResult(SignalPhase[payload], None)
    return ParseResult(None, "unknown_phase")
