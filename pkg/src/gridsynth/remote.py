"""Guidance wire protocol: length-delimited JSON over stdio or TCP.

Frame layout: the payload's byte length in ASCII decimal, a newline, the
UTF-8 JSON payload, a trailing newline. The first frame each way is a
handshake carrying the vocabulary-manifest hash; a mismatch aborts the
connection. After that the client sends {"id", "state_tokens", "prefix"}
requests and the server answers {"id", "probs": {tokenId: p}} with token
ids as JSON object keys (strings).
"""

from __future__ import annotations

import json
import selectors
import shlex
import socket
import subprocess
import time

from gridsynth.codec import Vocabulary
from gridsynth.guidance import GuidanceContext, GuidanceModel, RemoteUnavailable

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT_S = 2.0


def encode_frame(obj) -> bytes:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return str(len(payload)).encode("ascii") + b"\n" + payload + b"\n"


class FrameReader:
    """Incremental frame decoder over a feed() of raw bytes."""

    def __init__(self):
        self._buf = b""

    def feed(self, data: bytes) -> None:
        self._buf += data

    def next_frame(self):
        """Decoded payload, or None if the buffer holds no complete frame."""
        newline = self._buf.find(b"\n")
        if newline < 0:
            return None
        try:
            length = int(self._buf[:newline])
        except ValueError:
            raise RemoteUnavailable("malformed frame header") from None
        end = newline + 1 + length
        if len(self._buf) < end + 1:
            return None
        payload = self._buf[newline + 1 : end]
        if self._buf[end : end + 1] != b"\n":
            raise RemoteUnavailable("missing frame terminator")
        self._buf = self._buf[end + 1 :]
        try:
            return json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise RemoteUnavailable("frame payload is not valid JSON") from None


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout_s: float):
        self.timeout_s = timeout_s
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as e:
            raise RemoteUnavailable(f"cannot connect to {host}:{port}: {e}") from None
        self.reader = FrameReader()

    def send(self, obj) -> None:
        try:
            self.sock.sendall(encode_frame(obj))
        except OSError as e:
            raise RemoteUnavailable(f"send failed: {e}") from None

    def recv(self, timeout_s: float):
        deadline = time.monotonic() + timeout_s
        while True:
            frame = self.reader.next_frame()
            if frame is not None:
                return frame
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RemoteUnavailable("timed out waiting for a response")
            self.sock.settimeout(remaining)
            try:
                data = self.sock.recv(65536)
            except socket.timeout:
                raise RemoteUnavailable("timed out waiting for a response") from None
            except OSError as e:
                raise RemoteUnavailable(f"receive failed: {e}") from None
            if not data:
                raise RemoteUnavailable("connection closed by the server")
            self.reader.feed(data)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class _StdioTransport:
    def __init__(self, command: str, timeout_s: float):
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as e:
            raise RemoteUnavailable(f"cannot start {command!r}: {e}") from None
        self.reader = FrameReader()
        self.selector = selectors.DefaultSelector()
        self.selector.register(self.proc.stdout, selectors.EVENT_READ)

    def send(self, obj) -> None:
        if self.proc.poll() is not None:
            raise RemoteUnavailable("guidance process exited")
        try:
            self.proc.stdin.write(encode_frame(obj))
            self.proc.stdin.flush()
        except (OSError, ValueError) as e:
            raise RemoteUnavailable(f"send failed: {e}") from None

    def recv(self, timeout_s: float):
        deadline = time.monotonic() + timeout_s
        while True:
            frame = self.reader.next_frame()
            if frame is not None:
                return frame
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise RemoteUnavailable("timed out waiting for a response")
            if not self.selector.select(timeout=remaining):
                raise RemoteUnavailable("timed out waiting for a response")
            data = self.proc.stdout.read1(65536)
            if not data:
                raise RemoteUnavailable("guidance process closed its output")
            self.reader.feed(data)

    def close(self) -> None:
        self.selector.close()
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()


def _open_transport(spec: str, timeout_s: float):
    kind, _, rest = spec.partition(":")
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise RemoteUnavailable(f"bad tcp address {rest!r}; expected host:port")
        return _TcpTransport(host, int(port), timeout_s)
    if kind == "stdio":
        if not rest:
            raise RemoteUnavailable("stdio transport needs a command line")
        return _StdioTransport(rest, timeout_s)
    raise RemoteUnavailable(f"unknown transport {kind!r}; expected tcp:... or stdio:...")


class RemoteGuidanceModel(GuidanceModel):
    """Client side of the guidance protocol.

    The handshake exchanges manifest hashes so that token ids cannot drift
    between the engine and the model server; any transport failure or
    timeout surfaces as RemoteUnavailable, which callers treat as fatal
    for the current task.
    """

    deterministic = False

    def __init__(self, vocab: Vocabulary, address: str, timeout_s: float = DEFAULT_TIMEOUT_S):
        super().__init__(vocab)
        self.timeout_s = timeout_s
        self._next_id = 0
        self.transport = _open_transport(address, timeout_s)
        self.transport.send(
            {
                "type": "hello",
                "protocol": PROTOCOL_VERSION,
                "manifest_sha256": vocab.manifest_hash(),
            }
        )
        reply = self.transport.recv(timeout_s)
        if not isinstance(reply, dict) or reply.get("type") != "hello":
            self.transport.close()
            raise RemoteUnavailable(f"bad handshake reply: {reply!r}")
        if reply.get("manifest_sha256") != vocab.manifest_hash():
            self.transport.close()
            raise RemoteUnavailable("vocabulary manifest hash mismatch")
        self.deterministic = bool(reply.get("deterministic", False))

    def next_token_dist(self, ctx: GuidanceContext) -> dict[int, float]:
        self._next_id += 1
        request_id = self._next_id
        self.transport.send(
            {
                "id": request_id,
                "state_tokens": list(ctx.state_tokens),
                "prefix": list(ctx.step_prefix),
            }
        )
        reply = self.transport.recv(self.timeout_s)
        if not isinstance(reply, dict) or reply.get("id") != request_id:
            raise RemoteUnavailable(f"out-of-order or malformed reply: {reply!r}")
        if "error" in reply:
            raise RemoteUnavailable(f"server error: {reply['error']}")
        probs = reply.get("probs")
        if not isinstance(probs, dict):
            raise RemoteUnavailable("reply is missing a probs object")
        out: dict[int, float] = {}
        for key, p in probs.items():
            try:
                tok = int(key)
                p = float(p)
            except (TypeError, ValueError):
                raise RemoteUnavailable(f"bad probability entry {key!r}: {p!r}") from None
            if p < 0:
                raise RemoteUnavailable(f"negative probability for token {tok}")
            if p > 0 and 0 <= tok < self.vocab.size:
                out[tok] = p
        return out

    def close(self) -> None:
        self.transport.close()


# -- server harness (testing and oracle-over-the-wire) ------------------------


def serve_connection(model: GuidanceModel, recv_bytes, send_bytes) -> None:
    """Answer one connection's requests with `model` until EOF.

    recv_bytes() returns the next chunk (empty at EOF); send_bytes(data)
    writes. Used by the tests and the built-in oracle server.
    """
    reader = FrameReader()
    hello_done = False
    while True:
        frame = reader.next_frame()
        if frame is None:
            data = recv_bytes()
            if not data:
                return
            reader.feed(data)
            continue
        if not hello_done:
            ok = (
                isinstance(frame, dict)
                and frame.get("type") == "hello"
                and frame.get("manifest_sha256") == model.vocab.manifest_hash()
            )
            if not ok:
                send_bytes(encode_frame({"type": "error", "message": "manifest mismatch"}))
                return
            send_bytes(
                encode_frame(
                    {
                        "type": "hello",
                        "protocol": PROTOCOL_VERSION,
                        "manifest_sha256": model.vocab.manifest_hash(),
                        "deterministic": model.deterministic,
                    }
                )
            )
            hello_done = True
            continue
        request_id = frame.get("id") if isinstance(frame, dict) else None
        try:
            state_tokens = tuple(int(t) for t in frame["state_tokens"])
            prefix = tuple(int(t) for t in frame["prefix"])
            dist = model.next_token_dist(GuidanceContext(state_tokens, prefix))
            reply = {"id": request_id, "probs": {str(t): p for t, p in dist.items() if p > 0}}
        except Exception as e:  # malformed request: report, keep serving
            reply = {"id": request_id, "error": str(e)}
        send_bytes(encode_frame(reply))


class TcpGuidanceServer:
    """One-connection-at-a-time TCP server around any guidance model."""

    def __init__(self, model: GuidanceModel, host: str = "127.0.0.1", port: int = 0):
        self.model = model
        self.server = socket.create_server((host, port))
        self.address = self.server.getsockname()

    def serve_once(self) -> None:
        conn, _ = self.server.accept()
        with conn:
            serve_connection(self.model, lambda: conn.recv(65536), conn.sendall)

    def serve_forever(self) -> None:
        while True:
            self.serve_once()

    def close(self) -> None:
        self.server.close()
