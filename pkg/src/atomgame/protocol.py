"""Line-delimited JSON protocol serving episodes to an out-of-process policy.

One connection (or the stdio pair) hosts one sequential session. Requests:

    {"id":int,"op":"hello","version":1}
    {"id":int,"op":"reset","circuit":{...},"grid":{"rows":R,"cols":C},
     "params":{...},"window":W,"seed":S,"layout_mode":"random"|"rowmajor"}
    {"id":int,"op":"step","targets":[{"atom":q,"cell":j},...]}
    {"id":int,"op":"close"}

Responses echo the id: {"id":..,"ok":true,"obs":{...},"reward":..,"done":..}
or {"id":..,"ok":false,"error":".."}. Cells on the wire are flat row-major
indices; malformed input gets an error response, never a crash.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from typing import Callable, IO

from . import env as atomenv
from .circuit import circuit_from_json
from .cost import CongestionError, CostParams
from .env import EnvState, InvalidActionError, Observation
from .geometry import CapacityError, Grid

PROTOCOL_VERSION = 1

EnvFactory = Callable[[dict], tuple[EnvState, Observation]]


def dumps(obj: dict) -> str:
    """Canonical one-line encoding; byte-stable for fixed inputs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def encode_observation(state: EnvState) -> dict:
    obs = atomenv.observe(state)
    return {
        "t": obs.t,
        "T": obs.n_chunks,
        "grid": {"rows": obs.grid.rows, "cols": obs.grid.cols},
        "positions": [[c, r] for c, r in obs.positions],
        "initial_positions": [[c, r] for c, r in obs.initial_positions],
        "playable": list(obs.playable),
        "chunks": [[list(g) for g in chunk] for chunk in obs.chunks],
        "done": obs.done,
    }


def default_env_factory(payload: dict) -> tuple[EnvState, Observation]:
    """Build an episode entirely from the reset payload."""
    circuit = circuit_from_json(payload["circuit"])
    grid_obj = payload.get("grid") or {}
    grid = Grid(rows=int(grid_obj["rows"]), cols=int(grid_obj["cols"]))
    params = CostParams.from_json(payload.get("params") or {}, n_atoms=circuit.n_qubits)
    return atomenv.reset(
        circuit,
        grid,
        params,
        window=int(payload.get("window", atomenv.DEFAULT_WINDOW)),
        seed=int(payload.get("seed", 0)),
        layout_mode=str(payload.get("layout_mode", "random")),
    )


class Session:
    """Per-connection request handler owning at most one live episode."""

    def __init__(self, env_factory: EnvFactory = default_env_factory,
                 on_transition=None):
        self.env_factory = env_factory
        self.on_transition = on_transition
        self.state: EnvState | None = None
        self.closed = False

    def handle_line(self, line: str) -> str:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return dumps({"id": None, "ok": False, "error": f"malformed JSON: {exc.msg}"})
        if not isinstance(msg, dict):
            return dumps({"id": None, "ok": False, "error": "message must be a JSON object"})
        msg_id = msg.get("id")
        try:
            return dumps(self._dispatch(msg_id, msg))
        except (InvalidActionError, CapacityError, CongestionError,
                ValueError, KeyError, TypeError) as exc:
            return dumps({"id": msg_id, "ok": False, "error": str(exc) or repr(exc)})

    def _dispatch(self, msg_id, msg: dict) -> dict:
        op = msg.get("op")
        if op == "hello":
            if msg.get("version") != PROTOCOL_VERSION:
                return {
                    "id": msg_id,
                    "ok": False,
                    "error": f"protocol version mismatch: server speaks {PROTOCOL_VERSION}",
                }
            return {"id": msg_id, "ok": True, "version": PROTOCOL_VERSION}
        if op == "reset":
            self.state, _ = self.env_factory(msg)
            return {
                "id": msg_id,
                "ok": True,
                "obs": encode_observation(self.state),
                "reward": 0.0,
                "done": self.state.done,
            }
        if op == "step":
            if self.state is None:
                return {"id": msg_id, "ok": False, "error": "no active episode; send reset first"}
            action = self._decode_targets(msg.get("targets", []))
            transition, _ = atomenv.step(self.state, action)
            if self.on_transition is not None:
                self.on_transition(transition)
            return {
                "id": msg_id,
                "ok": True,
                "obs": encode_observation(self.state),
                "reward": transition.reward,
                "done": transition.done,
            }
        if op == "close":
            self.closed = True
            return {"id": msg_id, "ok": True}
        return {"id": msg_id, "ok": False, "error": f"invalid op {op!r}"}

    def _decode_targets(self, targets) -> dict:
        assert self.state is not None
        action = {}
        for entry in targets:
            atom = int(entry["atom"])
            cell = self.state.grid.cell_at(int(entry["cell"]))
            if atom in action:
                raise InvalidActionError(f"atom {atom} targeted twice")
            action[atom] = cell
        return action


def serve_stream(instream: IO[str], outstream: IO[str],
                 env_factory: EnvFactory = default_env_factory,
                 on_transition=None) -> None:
    """Run one session over a line stream until EOF or close."""
    session = Session(env_factory, on_transition=on_transition)
    for line in instream:
        if not line.strip():
            continue
        outstream.write(session.handle_line(line) + "\n")
        outstream.flush()
        if session.closed:
            break


class _TCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        reader = self.rfile
        session = Session(self.server.env_factory,  # type: ignore[attr-defined]
                          on_transition=self.server.on_transition)  # type: ignore[attr-defined]
        for raw in reader:
            line = raw.decode("utf-8")
            if not line.strip():
                continue
            self.wfile.write((session.handle_line(line) + "\n").encode("utf-8"))
            if session.closed:
                break


class ProtocolServer(socketserver.ThreadingTCPServer):
    """TCP server hosting one session per connection, many concurrently."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int,
                 env_factory: EnvFactory = default_env_factory,
                 on_transition=None):
        super().__init__((host, port), _TCPHandler)
        self.env_factory = env_factory
        self.on_transition = on_transition

    @property
    def port(self) -> int:
        return self.server_address[1]

    def serve_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def serve_tcp(host: str, port: int,
              env_factory: EnvFactory = default_env_factory,
              on_transition=None) -> ProtocolServer:
    return ProtocolServer(host, port, env_factory, on_transition=on_transition)


def serve_one_connection(host: str, port: int,
                         env_factory: EnvFactory = default_env_factory,
                         on_transition=None) -> None:
    """Accept a single connection and block until its session finishes."""

    class OneShot(socketserver.TCPServer):
        allow_reuse_address = True

    server = OneShot((host, port), _TCPHandler)
    server.env_factory = env_factory  # type: ignore[attr-defined]
    server.on_transition = on_transition  # type: ignore[attr-defined]
    try:
        server.handle_request()
    finally:
        server.server_close()


class ProtocolClient:
    """Minimal blocking client, used by tests and the remote-planner glue."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._writer = self._sock.makefile("w", encoding="utf-8")
        self._next_id = 0

    def request(self, op: str, **payload) -> dict:
        self._next_id += 1
        msg = {"id": self._next_id, "op": op, **payload}
        self._writer.write(dumps(msg) + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        resp = json.loads(line)
        if resp.get("id") != self._next_id:
            raise ConnectionError(f"response id {resp.get('id')} does not match request")
        return resp

    def close(self) -> None:
        try:
            self.request("close")
        except (ConnectionError, OSError):
            pass
        self._sock.close()
