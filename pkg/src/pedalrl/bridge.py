"""Line protocol for serving trained policies over a stream socket.

Grammar: ``<KIND>,<step:uint>,<agent:{0,1}>[,<payload:decimal>...]\\n`` with
KIND one of OBS, ACT, ERR, BYE. A client streams OBS frames carrying the
agent's observation fields in their fixed order (5 for the human agent, 6
for the machine agent); the server answers each with exactly one ACT frame
holding the chosen action index. Malformed input is answered with an ERR
frame carrying a numeric code and the connection stays up. BYE ends the
session.

Serving is greedy (argmax) by default so that a run over the wire is
reproducible; the loopback tests pin it bit-for-bit against in-process
episodes. Floats are rendered with ``repr`` (shortest round-trip form), so
values survive the wire exactly.
"""

import socket
import socketserver
from dataclasses import dataclass

import numpy as np

from .episode import OBS_DIM_HUMAN, OBS_DIM_MACHINE
from .nets import actor_forward, sample_action
from .ppo import load_checkpoint

KINDS = ("OBS", "ACT", "ERR", "BYE")
OBS_DIMS = {0: OBS_DIM_HUMAN, 1: OBS_DIM_MACHINE}

ERR_MALFORMED = 1  # unparseable frame (field count, numeric syntax, kind)
ERR_BAD_AGENT = 2  # agent id outside {0, 1}
ERR_BAD_PAYLOAD = 3  # wrong field count or non-finite observation
ERR_UNEXPECTED_KIND = 4  # server accepts only OBS and BYE


class ProtocolError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Frame:
    kind: str
    step: int
    agent: int
    payload: tuple = ()


def encode_frame(frame: Frame) -> str:
    """One ASCII line; ints bare, floats as shortest round-trip decimals."""
    parts = [frame.kind, str(frame.step), str(frame.agent)]
    for v in frame.payload:
        parts.append(str(v) if isinstance(v, int) else repr(float(v)))
    return ",".join(parts) + "\n"


def _parse_number(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ProtocolError(ERR_MALFORMED, "non-numeric payload %r" % token)


def decode_frame(line: str) -> Frame:
    """Inverse of encode_frame; raises ProtocolError echoing the bad line."""
    if not line.endswith("\n"):
        raise ProtocolError(ERR_MALFORMED, "frame not newline-terminated: %r" % line)
    parts = line[:-1].split(",")
    if len(parts) < 3:
        raise ProtocolError(ERR_MALFORMED, "expected KIND,step,agent...: %r" % line)
    kind = parts[0]
    if kind not in KINDS:
        raise ProtocolError(ERR_MALFORMED, "unknown frame kind in %r" % line)
    try:
        step = int(parts[1])
    except ValueError:
        raise ProtocolError(ERR_MALFORMED, "bad step index in %r" % line)
    if step < 0:
        raise ProtocolError(ERR_MALFORMED, "negative step index in %r" % line)
    try:
        agent = int(parts[2])
    except ValueError:
        raise ProtocolError(ERR_MALFORMED, "bad agent id in %r" % line)
    if agent not in (0, 1):
        raise ProtocolError(ERR_BAD_AGENT, "agent id out of range in %r" % line)
    payload = tuple(_parse_number(tok) for tok in parts[3:])
    return Frame(kind=kind, step=step, agent=agent, payload=payload)


class PolicyServer(socketserver.TCPServer):
    """Single-threaded request-reply server answering OBS frames with ACT.

    One connection is handled at a time (further connects wait in the
    listen backlog); within a connection the reply to each frame is written
    before the next is read, so ACT frames strictly alternate with OBS.
    """

    allow_reuse_address = True

    def __init__(self, endpoint, actors: dict, stochastic: bool = False, seed: int = 0):
        self.actors = actors  # {0: human actor params, 1: machine actor params}
        self.stochastic = stochastic
        self.rng = np.random.default_rng(seed)
        super().__init__(endpoint, _Handler)

    def respond(self, frame: Frame) -> Frame:
        if frame.kind != "OBS":
            raise ProtocolError(
                ERR_UNEXPECTED_KIND, "server accepts OBS or BYE, got %s" % frame.kind
            )
        if frame.agent not in self.actors:
            raise ProtocolError(ERR_BAD_AGENT, "no policy for agent %d" % frame.agent)
        want = OBS_DIMS[frame.agent]
        if len(frame.payload) != want:
            raise ProtocolError(
                ERR_BAD_PAYLOAD,
                "agent %d expects %d fields, got %d" % (frame.agent, want, len(frame.payload)),
            )
        obs = np.array([float(v) for v in frame.payload])
        if not np.all(np.isfinite(obs)):
            raise ProtocolError(ERR_BAD_PAYLOAD, "non-finite observation")
        dist = actor_forward(self.actors[frame.agent], obs)
        if self.stochastic:
            idx, _ = sample_action(dist, self.rng)
        else:
            idx = int(np.argmax(dist.probabilities))
        return Frame(kind="ACT", step=frame.step, agent=frame.agent, payload=(idx,))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            line = raw.decode("ascii", errors="replace")
            try:
                frame = decode_frame(line)
            except ProtocolError as exc:
                self._reply(Frame("ERR", 0, 0, (exc.code,)))
                continue
            if frame.kind == "BYE":
                self._reply(Frame("BYE", frame.step, frame.agent))
                break
            try:
                reply = self.server.respond(frame)
            except ProtocolError as exc:
                reply = Frame("ERR", frame.step, frame.agent, (exc.code,))
            self._reply(reply)

    def _reply(self, frame: Frame):
        self.wfile.write(encode_frame(frame).encode("ascii"))


class RemotePolicy:
    """Policy adapter that forwards observations to a PolicyServer.

    Drop-in for the in-process policies: ``act`` sends one OBS frame and
    blocks for the ACT reply. It consumes no local randomness, so swapping
    it for a GreedyPolicy changes nothing about the episode's RNG stream.
    """

    def __init__(self, host: str, port: int, agent_id: int):
        if agent_id not in (0, 1):
            raise ValueError("agent id must be 0 or 1")
        self.agent_id = agent_id
        self._sock = socket.create_connection((host, port))
        self._rfile = self._sock.makefile("r", encoding="ascii", newline="\n")
        self._step = 0

    def act(self, obs, rng):
        frame = Frame(
            kind="OBS",
            step=self._step,
            agent=self.agent_id,
            payload=tuple(float(v) for v in obs),
        )
        self._sock.sendall(encode_frame(frame).encode("ascii"))
        reply = decode_frame(self._rfile.readline())
        if reply.kind == "ERR":
            raise ProtocolError(
                int(reply.payload[0]) if reply.payload else ERR_MALFORMED,
                "server rejected frame at step %d" % self._step,
            )
        if reply.kind != "ACT" or reply.step != self._step or reply.agent != self.agent_id:
            raise ProtocolError(
                ERR_MALFORMED, "reply does not match request: %r" % (reply,)
            )
        self._step += 1
        return int(reply.payload[0]), 0.0

    def close(self):
        try:
            self._sock.sendall(
                encode_frame(Frame("BYE", self._step, self.agent_id)).encode("ascii")
            )
            self._rfile.readline()
        finally:
            self._rfile.close()
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def parse_endpoint(text: str) -> tuple:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError("endpoint must be HOST:PORT, got %r" % text)
    return host, int(port)


def actors_from_checkpoint(path) -> dict:
    ckpt = load_checkpoint(path)
    return {0: ckpt["human.actor"], 1: ckpt["machine.actor"]}


def serve_policies(endpoint: str, checkpoint_path, stochastic: bool = False):
    """Blocking serve loop: answer OBS frames from the checkpointed actors."""
    host, port = parse_endpoint(endpoint)
    server = PolicyServer((host, port), actors_from_checkpoint(checkpoint_path), stochastic)
    with server:
        server.serve_forever()
