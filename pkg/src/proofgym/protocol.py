"""Line-oriented proof service over stdio.

One session at a time, one response line per request line, errors in-band as
`ERR <code> <message>`; the server never raises on malformed input. UNDO is
implemented by replaying the retained tactic prefix into a fresh session,
which keeps the engine itself free of backtracking.

    THEOREM <sexpr>              OK state=<id> goal=<sexpr>
    TACTIC rewrite <pos> <law>   OK state=<id> goal=<sexpr> final=false
    TACTIC reflexivity           OK closed=true
    STATE                        OK state=<id> ctx={nm:(sexpr),..} goal=<sexpr>
    UNDO                         OK state=<id> goal=<sexpr>
    QUIT                         OK bye
"""

from __future__ import annotations

import sys
from typing import IO

from .engine import (
    EngineError,
    Law,
    ProofSession,
    Reflexivity,
    Rewrite,
    Tactic,
    declare_domain,
    start_session,
)
from .sexpr import parse_sexpr, print_sexpr
from .terms import TermError, TermStore


class ProtocolError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def _one_line(text: str) -> str:
    return " ".join(str(text).split()) or "error"


class ProtocolServer:
    """Parses commands, drives one ProofSession, formats responses."""

    def __init__(self, store: TermStore | None = None) -> None:
        self.store = store or TermStore()
        declare_domain(self.store)
        self.session: ProofSession | None = None
        self.theorem: int | None = None
        self.tactics: list[Tactic] = []

    # -- response helpers -------------------------------------------------------

    def _current_sid(self) -> int:
        assert self.session is not None
        if not self.session.open_goals:
            raise ProtocolError("StateClosed", "proof is complete")
        return self.session.open_goals[0]

    def _state_line(self, with_ctx: bool) -> str:
        sid = self._current_sid()
        state = self.session.state(sid)
        goal = print_sexpr(self.store, state.goal)
        if not with_ctx:
            return f"OK state={sid} goal={goal}"
        entries = ",".join(f"{name}:{print_sexpr(self.store, ty)}" for name, ty in state.ctx)
        return f"OK state={sid} ctx={{{entries}}} goal={goal}"

    # -- commands -------------------------------------------------------------------

    def handle(self, line: str) -> str | None:
        """Response for one request line; None means shut down (after QUIT/EOF)."""
        try:
            return self._dispatch(line)
        except ProtocolError as exc:
            return f"ERR {exc.code} {_one_line(exc.args[0])}"
        except EngineError as exc:
            return f"ERR {exc.code} {_one_line(exc.args[0] if exc.args else exc)}"
        except TermError as exc:
            return f"ERR {type(exc).__name__} {_one_line(exc.args[0] if exc.args else exc)}"
        except Exception as exc:  # malformed input must never kill the loop
            return f"ERR Internal {_one_line(f'{type(exc).__name__}: {exc}')}"

    def _dispatch(self, line: str) -> str | None:
        parts = line.split(maxsplit=1)
        if not parts:
            raise ProtocolError("UnknownCommand", "empty request")
        cmd, rest = parts[0], parts[1] if len(parts) > 1 else ""
        if cmd == "THEOREM":
            return self._cmd_theorem(rest)
        if cmd == "TACTIC":
            return self._cmd_tactic(rest)
        if cmd == "STATE":
            self._need_session()
            return self._state_line(with_ctx=True)
        if cmd == "UNDO":
            return self._cmd_undo()
        if cmd == "QUIT":
            return None
        raise ProtocolError("UnknownCommand", f"unknown command {cmd!r}")

    def _need_session(self) -> ProofSession:
        if self.session is None:
            raise ProtocolError("NoSession", "no theorem has been started")
        return self.session

    def _cmd_theorem(self, rest: str) -> str:
        if not rest.strip():
            raise ProtocolError("BadArgument", "THEOREM needs a term")
        tid = parse_sexpr(self.store, rest)
        self.session = start_session(self.store, tid)
        self.theorem = tid
        self.tactics = []
        return self._state_line(with_ctx=False)

    def _parse_tactic(self, rest: str) -> Tactic:
        words = rest.split()
        if not words:
            raise ProtocolError("BadArgument", "TACTIC needs a tactic")
        if words[0] == "reflexivity":
            if len(words) != 1:
                raise ProtocolError("BadArgument", "reflexivity takes no arguments")
            return Reflexivity()
        if words[0] == "rewrite":
            if len(words) != 3:
                raise ProtocolError("BadArgument", "usage: TACTIC rewrite <pos> <left|right>")
            try:
                pos = int(words[1])
            except ValueError:
                raise ProtocolError("BadArgument", f"position {words[1]!r} is not an integer") from None
            if words[2] not in ("left", "right"):
                raise ProtocolError("BadArgument", f"law {words[2]!r} is not left or right")
            return Rewrite(pos, Law(words[2]))
        raise ProtocolError("BadArgument", f"unsupported tactic {words[0]!r}")

    def _cmd_tactic(self, rest: str) -> str:
        session = self._need_session()
        tactic = self._parse_tactic(rest)
        sid = self._current_sid()
        result = session.apply_tactic(sid, tactic)
        self.tactics.append(tactic)
        if isinstance(tactic, Reflexivity):
            return "OK closed=true"
        child = result[0]
        goal = print_sexpr(self.store, session.state(child).goal)
        return f"OK state={child} goal={goal} final=false"

    def _cmd_undo(self) -> str:
        self._need_session()
        if not self.tactics:
            raise ProtocolError("NothingToUndo", "no tactic to undo")
        kept = self.tactics[:-1]
        session = start_session(self.store, self.theorem)
        for tactic in kept:
            session.apply_tactic(session.open_goals[0], tactic)
        self.session = session
        self.tactics = kept
        return self._state_line(with_ctx=False)


def serve(in_stream: IO[str] | None = None, out_stream: IO[str] | None = None) -> None:
    """Run the request/response loop until QUIT or EOF."""
    in_stream = in_stream or sys.stdin
    out_stream = out_stream or sys.stdout
    server = ProtocolServer()
    for raw in in_stream:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        response = server.handle(line)
        if response is None:
            out_stream.write("OK bye\n")
            out_stream.flush()
            return
        out_stream.write(response + "\n")
        out_stream.flush()
