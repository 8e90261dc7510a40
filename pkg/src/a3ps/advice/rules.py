"""Template advice generator.

Each rule pairs a situation predicate with the action the planner picked for
that state, so a rule only fires when its recommendation agrees with the
oracle.  Rules are tried in table order; the per-action catch-alls at the end
guarantee that every state is covered.

Priority, highest first:

=====================  =========================================  =========
rule                   situation                                  action
=====================  =========================================  =========
hazard_here_*          car approaching on the agent's row         any
around_tunnel_*        tunnel cell directly above                 LEFT/RIGHT
line_up_gap            below the tunnel, not under the gap        LEFT/RIGHT
hazard_ahead_*         car approaching the cell above             NOOP/DOWN/LEFT/RIGHT
clear_forward          nothing above but open road                UP
fallback_*             anything                                   each action
=====================  =========================================  =========
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from a3ps.env.config import EnvConfig
from a3ps.env.core import Action, GridState
from a3ps.errors import CoverageError

HAZARD_RANGE = 2
SIDE_WORD = {1: "left", -1: "right", 0: "side"}
DIR_WORD = {Action.UP: "forward", Action.DOWN: "back", Action.LEFT: "left", Action.RIGHT: "right", Action.NOOP: "wait"}


@dataclass(frozen=True)
class Situation:
    config: EnvConfig
    state: GridState
    action: Action

    @property
    def row(self) -> int:
        return self.state.agent[0]

    @property
    def col(self) -> int:
        return self.state.agent[1]

    @property
    def tunnel_ahead(self) -> bool:
        return self.row + 1 == self.config.tunnel_row and self.col in self.config.tunnel_cols

    @property
    def below_closed_tunnel(self) -> bool:
        return self.row < self.config.tunnel_row and self.col in self.config.tunnel_cols

    def approaching(self, row: int) -> int | None:
        """Direction of the nearest car heading for this column in ``row``, if within range."""
        best = None
        for r, c, d in self.state.cars:
            if r != row:
                continue
            gap = ((self.col - c) * d) % self.config.cols if d else (0 if c == self.col else None)
            if gap is not None and gap <= HAZARD_RANGE and (best is None or gap < best[0]):
                best = (gap, d)
        return None if best is None else best[1]

    @property
    def hazard_here(self) -> int | None:
        return self.approaching(self.row)

    @property
    def hazard_ahead(self) -> int | None:
        if self.row + 1 >= self.config.goal_row:
            return None
        return self.approaching(self.row + 1)

    @property
    def clear_ahead(self) -> bool:
        return not self.tunnel_ahead and self.hazard_ahead is None


@dataclass(frozen=True)
class TemplateRule:
    name: str
    predicate: Callable[[Situation], bool]
    template: str
    actions: frozenset[Action]

    def matches(self, s: Situation) -> bool:
        return s.action in self.actions and self.predicate(s)

    def render(self, s: Situation) -> str:
        side = s.hazard_here if s.hazard_here is not None else s.hazard_ahead
        return self.template.format(dir=DIR_WORD[s.action], side=SIDE_WORD.get(side, "side"))


def _rule(name, predicate, template, *actions) -> TemplateRule:
    return TemplateRule(name, predicate, template, frozenset(actions))


A = Action
DEFAULT_RULES: tuple[TemplateRule, ...] = (
    _rule("hazard_here_forward", lambda s: s.hazard_here is not None,
          "car coming from the {side}, move forward to get out of its way", A.UP),
    _rule("hazard_here_back", lambda s: s.hazard_here is not None,
          "car coming from the {side}, step back to dodge it", A.DOWN),
    _rule("hazard_here_side", lambda s: s.hazard_here is not None,
          "car coming from the {side}, move {dir} to avoid it", A.LEFT, A.RIGHT),
    _rule("hazard_here_wait", lambda s: s.hazard_here is not None,
          "car coming from the {side}, wait here until it passes", A.NOOP),
    _rule("around_tunnel_left", lambda s: s.tunnel_ahead,
          "move left get better position next move forward get around tunnel", A.LEFT),
    _rule("around_tunnel_right", lambda s: s.tunnel_ahead,
          "move right get better position next move forward get around tunnel", A.RIGHT),
    _rule("line_up_gap", lambda s: s.below_closed_tunnel,
          "move {dir} to line up with the gap in the tunnel", A.LEFT, A.RIGHT),
    _rule("hazard_ahead_wait", lambda s: s.hazard_ahead is not None,
          "wait, a car is crossing the lane ahead, let it pass", A.NOOP),
    _rule("hazard_ahead_back", lambda s: s.hazard_ahead is not None,
          "step back, the car in the lane ahead is too close", A.DOWN),
    _rule("hazard_ahead_side", lambda s: s.hazard_ahead is not None,
          "move {dir} to avoid the car in the lane ahead", A.LEFT, A.RIGHT),
    _rule("clear_forward", lambda s: s.clear_ahead, "move forward path is clear", A.UP),
    _rule("fallback_forward", lambda s: True, "move forward now while the gap is open", A.UP),
    _rule("fallback_back", lambda s: True, "step back to a safer spot", A.DOWN),
    _rule("fallback_side", lambda s: True, "move {dir} to line up with the next opening", A.LEFT, A.RIGHT),
    _rule("fallback_wait", lambda s: True, "wait here until the cars pass", A.NOOP),
)


def first_match(rules, situation: Situation) -> TemplateRule:
    for rule in rules:
        if rule.matches(situation):
            return rule
    raise CoverageError(f"no advice rule covers state {situation.state} with action {situation.action.name}")


def advise(config: EnvConfig, state: GridState, action: Action, rules=DEFAULT_RULES) -> tuple[str, TemplateRule]:
    s = Situation(config, state, Action(action))
    rule = first_match(rules, s)
    return rule.render(s), rule


def contradictory_advice(config: EnvConfig, state: GridState, action: Action, rules=DEFAULT_RULES) -> str:
    """Advice for the same state recommending the opposite-ish action."""
    flip = {A.UP: A.DOWN, A.DOWN: A.UP, A.LEFT: A.RIGHT, A.RIGHT: A.LEFT, A.NOOP: A.UP}
    return advise(config, state, flip[Action(action)], rules)[0]
