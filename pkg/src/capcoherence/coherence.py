"""Authorization state machine mirrored from MESI.

The machine has four stable states (M, E, S, I) and five transient states
named in the XYZ style: "was X, heading to Y, awaiting Z".  ``TRANSITIONS``
is the complete transition function; any (state, event) pair missing from it
is a protocol violation and ``transition`` raises ``InvalidTransition``.

A second table, ``HW_TRANSITIONS``, encodes the hardware side of the
correspondence so that ``verify_structural_equivalence`` can enumerate every
valid hardware transition and check that its image under ``phi`` is accepted
by the authorization machine.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import InvalidTransition


class AuthState(str, enum.Enum):
    M = "M"  # delegate-capable
    E = "E"  # sole holder
    S = "S"  # pooled, read-only
    I = "I"  # revoked  # noqa: E741

    def __str__(self) -> str:
        return self.value


class AuthEvent(str, enum.Enum):
    GRANT_SHARED = "grant_shared"
    GRANT_EXCLUSIVE = "grant_exclusive"
    DELEGATE = "delegate"
    REVOKE = "revoke"
    REVOKE_CASCADE = "revoke_cascade"
    ACK = "ack"
    ALL_ACKS = "all_acks"
    EXHAUST = "exhaust"
    EXPIRE = "expire"
    INTROSPECT = "introspect"

    def __str__(self) -> str:
        return self.value


class TransientState(str, enum.Enum):
    EIA = "EIA"
    SIA = "SIA"
    MIC = "MIC"
    ISG = "ISG"
    IED = "IED"

    def __str__(self) -> str:
        return self.value

    @property
    def origin(self) -> AuthState:
        return _TRANSIENT_SHAPE[self][0]

    @property
    def target(self) -> AuthState:
        return _TRANSIENT_SHAPE[self][1]

    @property
    def awaits(self) -> AuthEvent:
        return _TRANSIENT_SHAPE[self][2]


_TRANSIENT_SHAPE = {
    TransientState.EIA: (AuthState.E, AuthState.I, AuthEvent.ACK),
    TransientState.SIA: (AuthState.S, AuthState.I, AuthEvent.ACK),
    TransientState.MIC: (AuthState.M, AuthState.I, AuthEvent.ALL_ACKS),
    TransientState.ISG: (AuthState.I, AuthState.S, AuthEvent.GRANT_SHARED),
    TransientState.IED: (AuthState.I, AuthState.E, AuthEvent.GRANT_EXCLUSIVE),
}

State = Union[AuthState, TransientState]

_I, _E, _S, _M = AuthState.I, AuthState.E, AuthState.S, AuthState.M
_T = TransientState
_Ev = AuthEvent

TRANSITIONS: Mapping[tuple[State, AuthEvent], State] = {
    (_I, _Ev.GRANT_SHARED): _S,
    (_I, _Ev.GRANT_EXCLUSIVE): _E,
    (_E, _Ev.DELEGATE): _M,
    (_E, _Ev.REVOKE): _T.EIA,
    (_T.EIA, _Ev.ACK): _I,
    (_S, _Ev.REVOKE): _T.SIA,
    (_T.SIA, _Ev.ACK): _I,
    (_M, _Ev.REVOKE_CASCADE): _T.MIC,
    (_T.MIC, _Ev.ALL_ACKS): _I,
    (_S, _Ev.EXHAUST): _I,
    (_S, _Ev.EXPIRE): _I,
    # grant-in-flight completions
    (_T.ISG, _Ev.GRANT_SHARED): _S,
    (_T.IED, _Ev.GRANT_EXCLUSIVE): _E,
}

# Used instead of the direct grant rows when the grant reply has nonzero latency.
IN_FLIGHT_GRANTS: Mapping[tuple[State, AuthEvent], TransientState] = {
    (_I, _Ev.GRANT_SHARED): _T.ISG,
    (_I, _Ev.GRANT_EXCLUSIVE): _T.IED,
}

# Abstract events whose refinements the machine distinguishes by source state.
REFINEMENTS: Mapping[AuthEvent, tuple[AuthEvent, ...]] = {
    _Ev.REVOKE: (_Ev.REVOKE, _Ev.REVOKE_CASCADE),
}

ALL_STATES: tuple[State, ...] = tuple(AuthState) + tuple(TransientState)


def transition(
    state: State,
    event: AuthEvent,
    *,
    in_flight: bool = False,
    table: Mapping[tuple[State, AuthEvent], State] = TRANSITIONS,
) -> State:
    """Return the successor of ``state`` on ``event``.

    ``introspect`` is a pure query and leaves every state unchanged.  With
    ``in_flight=True`` a grant from I lands in ISG/IED rather than S/E.
    """
    if event is AuthEvent.INTROSPECT:
        return state
    if in_flight and (state, event) in IN_FLIGHT_GRANTS:
        return IN_FLIGHT_GRANTS[(state, event)]
    try:
        return table[(state, event)]
    except KeyError:
        raise InvalidTransition(state, event) from None


def is_valid(state: State, event: AuthEvent, table=TRANSITIONS) -> bool:
    return event is AuthEvent.INTROSPECT or (state, event) in table


def completion_events(table=TRANSITIONS) -> dict[TransientState, list[AuthEvent]]:
    """Map each transient state to the events that move it to a stable state."""
    out: dict[TransientState, list[AuthEvent]] = {t: [] for t in TransientState}
    for (src, ev), dst in table.items():
        if isinstance(src, TransientState) and isinstance(dst, AuthState):
            out[src].append(ev)
    return out


def reachable_from(start: State, table=TRANSITIONS, *, avoid=None) -> set[State]:
    """States reachable from ``start``; ``avoid`` is an edge predicate to skip."""
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for (src, ev), dst in table.items():
            if src != s or (avoid is not None and avoid(src, ev, dst)):
                continue
            if dst not in seen:
                seen.add(dst)
                queue.append(dst)
        for (src, ev), dst in IN_FLIGHT_GRANTS.items():
            if src == s and dst not in seen:
                seen.add(dst)
                queue.append(dst)
    return seen


# --- permitted operations -------------------------------------------------


class Op(str, enum.Enum):
    READ = "read"
    WRITE = "write"
    DELEGATE = "delegate_op"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PermittedOps:
    state: AuthState
    ops: frozenset[Op]

    def __contains__(self, op: Op) -> bool:
        return op in self.ops


_PERMITTED = {
    AuthState.I: frozenset(),
    AuthState.S: frozenset({Op.READ}),
    AuthState.E: frozenset({Op.READ, Op.WRITE}),
    AuthState.M: frozenset({Op.READ, Op.WRITE, Op.DELEGATE}),
}


def permitted_ops(state: AuthState) -> PermittedOps:
    if not isinstance(state, AuthState):
        raise InvalidTransition(state, "permitted_ops")
    return PermittedOps(state, _PERMITTED[state])


def effective_ops(state: State) -> PermittedOps:
    """Permissions in force for a holder, transient states included.

    A revocation in flight leaves the holder with its prior stable state's
    permissions; a grant in flight confers nothing yet.
    """
    if isinstance(state, TransientState):
        return permitted_ops(state.origin)
    return permitted_ops(state)


# --- hardware side --------------------------------------------------------


class HwMesiState(str, enum.Enum):
    M_hw = "M_hw"
    E_hw = "E_hw"
    S_hw = "S_hw"
    I_hw = "I_hw"


class HwMesiEvent(str, enum.Enum):
    BusRd = "BusRd"
    BusRdX = "BusRdX"
    SnoopInvalidate = "SnoopInvalidate"
    WriteBack = "WriteBack"


_H = HwMesiState
_He = HwMesiEvent

# Every (state, event) pair appears; None marks an invalid pair.  Transitions
# are written from the requesting cache's side: BusRd fills a shared line,
# BusRdX fills an exclusive one, WriteBack is the dirtying write that takes an
# exclusive line to Modified, and a snooped invalidation drops any valid line.
HW_TRANSITIONS: Mapping[tuple[HwMesiState, HwMesiEvent], HwMesiState | None] = {
    (_H.I_hw, _He.BusRd): _H.S_hw,
    (_H.I_hw, _He.BusRdX): _H.E_hw,
    (_H.I_hw, _He.SnoopInvalidate): None,
    (_H.I_hw, _He.WriteBack): None,
    (_H.S_hw, _He.BusRd): None,
    (_H.S_hw, _He.BusRdX): None,
    (_H.S_hw, _He.SnoopInvalidate): _H.I_hw,
    (_H.S_hw, _He.WriteBack): None,
    (_H.E_hw, _He.BusRd): None,
    (_H.E_hw, _He.BusRdX): None,
    (_H.E_hw, _He.SnoopInvalidate): _H.I_hw,
    (_H.E_hw, _He.WriteBack): _H.M_hw,
    (_H.M_hw, _He.BusRd): None,
    (_H.M_hw, _He.BusRdX): None,
    (_H.M_hw, _He.SnoopInvalidate): _H.I_hw,
    (_H.M_hw, _He.WriteBack): None,
}

_PHI = {_H.M_hw: _M, _H.E_hw: _E, _H.S_hw: _S, _H.I_hw: _I}

_HW_EVENT = {
    _He.BusRd: _Ev.GRANT_SHARED,
    _He.BusRdX: _Ev.GRANT_EXCLUSIVE,
    _He.SnoopInvalidate: _Ev.REVOKE,
    _He.WriteBack: _Ev.DELEGATE,
}


def phi(hw: HwMesiState) -> AuthState:
    return _PHI[hw]


def map_hw_event(e: HwMesiEvent) -> AuthEvent:
    return _HW_EVENT[e]


@dataclass(frozen=True)
class TripleCheck:
    hw: tuple[HwMesiState, HwMesiEvent, HwMesiState]
    image: tuple[AuthState, AuthEvent, AuthState]
    matched: bool
    route: tuple[str, ...] = ()  # e.g. ("E", "revoke", "EIA", "ack", "I")

    @property
    def via_transient(self) -> bool:
        return len(self.route) > 3


@dataclass
class EquivalenceReport:
    checks: list[TripleCheck] = field(default_factory=list)
    authorization_only: list[tuple[State, AuthEvent, State]] = field(default_factory=list)

    @property
    def missing(self) -> list[TripleCheck]:
        return [c for c in self.checks if not c.matched]

    @property
    def verdict(self) -> bool:
        return bool(self.checks) and not self.missing

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            s1, e, s2 = (x.value for x in c.hw)
            tag = "ok  " if c.matched else "MISS"
            route = " -> ".join(c.route) if c.route else "(no route)"
            out.append(f"{tag} {s1} --{e}--> {s2}   ~   {route}")
        for src, ev, dst in self.authorization_only:
            out.append(f"ext  {src} --{ev}--> {dst}   (authorization-only)")
        out.append(f"verdict: {'equivalent' if self.verdict else 'NOT equivalent'}")
        return out


def _find_route(src: AuthState, event: AuthEvent, dst: AuthState, table) -> tuple[str, ...]:
    for ev in REFINEMENTS.get(event, (event,)):
        nxt = table.get((src, ev))
        if nxt is None:
            continue
        if nxt == dst:
            return (src.value, ev.value, dst.value)
        if isinstance(nxt, TransientState) and table.get((nxt, nxt.awaits)) == dst:
            return (src.value, ev.value, nxt.value, nxt.awaits.value, dst.value)
    return ()


def verify_structural_equivalence(
    hw_table: Mapping = HW_TRANSITIONS,
    auth_table: Mapping = TRANSITIONS,
) -> EquivalenceReport:
    """Check that every valid hardware transition survives the mapping.

    Each hardware triple (s1, e, s2) is matched when the authorization table
    takes phi(s1) to phi(s2) on the mapped event (or one of its refinements),
    either directly or through a transient state and its completion event.
    Stable-state transitions on events that no hardware event maps to are
    listed separately as authorization-only extensions.
    """
    report = EquivalenceReport()
    for (s1, e_hw), s2 in hw_table.items():
        if s2 is None:
            continue
        image = (phi(s1), map_hw_event(e_hw), phi(s2))
        route = _find_route(*image, auth_table)
        report.checks.append(TripleCheck((s1, e_hw, s2), image, bool(route), route))

    covered = set(_HW_EVENT.values())
    for ev in list(covered):
        covered.update(REFINEMENTS.get(ev, ()))
    for (src, ev), dst in auth_table.items():
        if isinstance(src, AuthState) and ev not in covered:
            report.authorization_only.append((src, ev, dst))
    return report
