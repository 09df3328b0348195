"""Clients for the atomgame environment protocol.

The trainer never imports the environment package; it talks JSON lines to an
`atomgame serve` process (spawned over stdio or reached over TCP) and reads
baseline costs from `atomgame compile` reports.
"""

from __future__ import annotations

import json
import shutil
import socket
import subprocess
import sys


class EnvProtocolError(RuntimeError):
    pass


def default_serve_command() -> list[str]:
    if shutil.which("atomgame"):
        return ["atomgame", "serve", "--stdio"]
    return [sys.executable, "-m", "atomgame.cli", "serve", "--stdio"]


class StdioEnvClient:
    """Owns one `atomgame serve --stdio` subprocess; one session at a time."""

    def __init__(self, command: list[str] | None = None):
        self._proc = subprocess.Popen(
            command or default_serve_command(),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._next_id = 0
        hello = self.request("hello", version=1)
        if not hello.get("ok"):
            raise EnvProtocolError(f"handshake failed: {hello}")

    def request(self, op: str, **payload) -> dict:
        self._next_id += 1
        msg = {"id": self._next_id, "op": op, **payload}
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps(msg) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise EnvProtocolError("environment process closed the stream")
        resp = json.loads(line)
        if resp.get("id") != self._next_id:
            raise EnvProtocolError(f"response id mismatch: {resp.get('id')}")
        return resp

    def reset(self, **payload) -> dict:
        resp = self.request("reset", **payload)
        if not resp.get("ok"):
            raise EnvProtocolError(f"reset rejected: {resp.get('error')}")
        return resp

    def step(self, targets: list[dict]) -> dict:
        resp = self.request("step", targets=targets)
        if not resp.get("ok"):
            raise EnvProtocolError(f"step rejected: {resp.get('error')}")
        return resp

    def close(self) -> None:
        try:
            if self._proc.poll() is None:
                self.request("close")
        except (EnvProtocolError, OSError, ValueError):
            pass
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class TcpEnvClient:
    """Same interface against a long-running `atomgame serve --port` host."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._writer = self._sock.makefile("w", encoding="utf-8")
        self._next_id = 0
        if not self.request("hello", version=1).get("ok"):
            raise EnvProtocolError("handshake failed")

    def request(self, op: str, **payload) -> dict:
        self._next_id += 1
        msg = {"id": self._next_id, "op": op, **payload}
        self._writer.write(json.dumps(msg) + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise EnvProtocolError("server closed the connection")
        resp = json.loads(line)
        if resp.get("id") != self._next_id:
            raise EnvProtocolError("response id mismatch")
        return resp

    reset = StdioEnvClient.reset
    step = StdioEnvClient.step

    def close(self) -> None:
        try:
            self.request("close")
        except (EnvProtocolError, OSError):
            pass
        self._sock.close()


def reset_payload(circuit: dict, rows: int, cols: int, seed: int,
                  window: int = 2, layout_mode: str = "random",
                  params: dict | None = None) -> dict:
    return {
        "circuit": circuit,
        "grid": {"rows": rows, "cols": cols},
        "params": params or {},
        "window": window,
        "seed": seed,
        "layout_mode": layout_mode,
    }


def baseline_cost(circuit_path: str, rows: int, cols: int, seed: int,
                  window: int = 2, layout_mode: str = "random") -> float:
    """Baseline gate cost for one (circuit, seed): read from an identity-
    planner compile report, the CLI's external interface for cost data."""
    if shutil.which("atomgame"):
        cmd = ["atomgame"]
    else:
        cmd = [sys.executable, "-m", "atomgame.cli"]
    cmd += [
        "compile", "--circuit", circuit_path, "--planner", "identity",
        "--grid", f"{rows}x{cols}", "--seed", str(seed),
        "--window", str(window), "--layout", layout_mode, "--format", "json",
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
    if proc.returncode != 0:
        raise EnvProtocolError(f"baseline probe failed: {proc.stderr.strip()}")
    return float(json.loads(proc.stdout)["baseline_cost"])
