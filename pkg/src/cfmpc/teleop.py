"""Teleop bridge: WebSocket server steering the closed-loop simulation.

The operator (browser panel or scripted client) sends `cmd` twist frames and
`ctrl` frames (pause/resume/reset/scenario); the server streams `state`
frames with the commanded and optimized trajectories, sphere decomposition,
obstacles, and solver timings, plus `map` frames on every ESDF rebuild.
Frames are JSON texts over a persistent bidirectional socket. Command intake
is latest-value: a new twist overwrites the previous one, nothing queues.
"""

import json
import logging
import socket
import threading
import time
from dataclasses import replace

import numpy as np

from . import ws
from .errors import ConfigError, PortInUse
from .ocp import DEFAULT_CMD_LIMITS
from .simulate import CONTROL_PERIOD, make_scenario, resolve_scenario, run_scenario

log = logging.getLogger(__name__)

STREAM_PERIOD = 0.04  # 25 Hz wall-clock re-emission of the latest state


class TeleopServer:
    """Runs a scenario under operator command until stopped.

    The simulation loop runs in the calling thread; client sockets are
    handled by daemon threads that only swap latest-value snapshots.
    """

    def __init__(self, scenario, port, allow_privileged=False,
                 realtime=True, limits=DEFAULT_CMD_LIMITS):
        # port 0 asks the OS for any free port; 1..1023 are privileged
        if 0 < port < 1024 and not allow_privileged:
            raise ConfigError(
                f"refusing privileged port {port} (use the override flag)")
        self.scenario = scenario
        self.port = port
        self.realtime = realtime
        self.limits = limits
        self._cmd = np.zeros(3)
        self._cmd_lock = threading.Lock()
        self._clients = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._reset = threading.Event()
        self._paused = threading.Event()
        self._switch_to = None
        self._latest_state = None
        self._last_map_time = None
        self._wall_anchor = None
        self._sim_anchor = 0.0
        self.bound_port = None
        self.last_metrics = None
        self._server_sock = None
        self._reset_requested = False

    # -- lifecycle ---------------------------------------------------------

    def start_listener(self):
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind(("127.0.0.1", self.port))
        except OSError as exc:
            raise PortInUse(f"cannot bind port {self.port}: {exc}") from exc
        sock.listen(8)
        self._server_sock = sock
        self.bound_port = sock.getsockname()[1]
        threading.Thread(target=self._accept_loop, daemon=True).start()
        log.info("teleop bridge listening on 127.0.0.1:%d", self.bound_port)
        return self.bound_port

    def serve_forever(self):
        """Run scenarios until stopped; returns the last Metrics."""
        if self._server_sock is None:
            self.start_listener()
        try:
            while not self._stop.is_set():
                self._reset.clear()
                if self._switch_to is not None:
                    self.scenario = make_scenario(self._switch_to)
                    self._switch_to = None
                sc = replace(self.scenario, command="teleop")
                self._wall_anchor = time.monotonic()
                self._sim_anchor = 0.0
                streamer = threading.Thread(target=self._stream_loop, daemon=True)
                streamer.start()
                try:
                    self.last_metrics, _ = run_scenario(sc, teleop_hooks=self,
                                                        collect_log=False)
                finally:
                    self._reset.set()  # stops the streamer for this episode
                    streamer.join(timeout=1.0)
                if not self._stop.is_set() and self._switch_to is None \
                        and not self._reset_requested:
                    break  # scenario ran to completion
                self._reset_requested = False
        except KeyboardInterrupt:
            pass
        finally:
            self.shutdown()
        return self.last_metrics

    def shutdown(self):
        self._stop.set()
        with self._clients_lock:
            for c in list(self._clients):
                try:
                    c.sendall(ws.encode_frame("", opcode=ws.OP_CLOSE))
                    c.close()
                except OSError:
                    pass
            self._clients.clear()
        if self._server_sock is not None:
            try:
                self._server_sock.close()
            except OSError:
                pass
            self._server_sock = None

    # -- hooks consumed by run_scenario -------------------------------------

    def command(self, t):
        while self._paused.is_set() and not self._stop.is_set() \
                and not self._reset.is_set():
            time.sleep(0.02)
        if self.realtime and self._wall_anchor is not None:
            target = self._wall_anchor + (t - self._sim_anchor)
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        with self._cmd_lock:
            return self._cmd.copy()

    def publish_state(self, record):
        record["limits"] = {"vx": self.limits[0], "vy": self.limits[1],
                            "yaw_rate": self.limits[2]}
        self._latest_state = json.dumps(record)

    def publish_map(self, esdf, t):
        if self._last_map_time == esdf.build_time:
            return
        self._last_map_time = esdf.build_time
        layer, z_actual = esdf.slice_distances(self.scenario.model.nominal_height)
        frame = json.dumps({
            "type": "map",
            "t": round(t, 4),
            "origin": [float(esdf.origin[0]), float(esdf.origin[1])],
            "voxel_size": esdf.voxel_size,
            "dims_xy": [esdf.dims[0], esdf.dims[1]],
            "z_slice": round(float(z_actual), 4),
            "distances": [round(float(v), 3) for v in layer.ravel()],
        })
        self._broadcast(frame)

    def should_stop(self):
        return self._stop.is_set() or self._reset.is_set()

    # -- internals ------------------------------------------------------------

    def _stream_loop(self):
        while not self._stop.is_set() and not self._reset.is_set():
            frame = self._latest_state
            if frame is not None:
                self._broadcast(frame)
            time.sleep(STREAM_PERIOD)

    def _broadcast(self, text):
        dead = []
        with self._clients_lock:
            for c in self._clients:
                try:
                    c.sendall(ws.encode_frame(text))
                except OSError:
                    dead.append(c)
            for c in dead:
                self._clients.remove(c)

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                client, addr = self._server_sock.accept()
            except OSError:
                return
            threading.Thread(target=self._client_loop, args=(client,),
                             daemon=True).start()

    def _client_loop(self, sock):
        try:
            leftover = ws.server_handshake(sock)
        except ws.HandshakeError as exc:
            log.warning("handshake failed: %s", exc)
            sock.close()
            return
        reader = ws.FrameReader(sock, leftover)
        hello = json.dumps({
            "type": "hello",
            "scenario": self.scenario.name,
            "limits": {"vx": self.limits[0], "vy": self.limits[1],
                       "yaw_rate": self.limits[2]},
            "nominal_height": float(self.scenario.model.nominal_height),
            "control_period": CONTROL_PERIOD,
        })
        try:
            sock.sendall(ws.encode_frame(hello))
        except OSError:
            sock.close()
            return
        with self._clients_lock:
            self._clients.append(sock)
        try:
            while not self._stop.is_set():
                opcode, payload = reader.read_frame()
                if opcode == ws.OP_CLOSE:
                    break
                if opcode == ws.OP_PING:
                    sock.sendall(ws.encode_frame(payload, opcode=ws.OP_PONG))
                    continue
                if opcode != ws.OP_TEXT:
                    continue
                self._handle_frame(sock, payload)
        except (ConnectionError, OSError):
            pass
        finally:
            with self._clients_lock:
                if sock in self._clients:
                    self._clients.remove(sock)
            try:
                sock.close()
            except OSError:
                pass

    def _handle_frame(self, sock, payload):
        try:
            msg = json.loads(payload.decode("utf-8"))
            kind = msg["type"]
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            self._send_error(sock, f"malformed frame: {exc}")
            return
        if kind == "cmd":
            try:
                vx = float(msg.get("vx", 0.0))
                vy = float(msg.get("vy", 0.0))
                wz = float(msg.get("yaw_rate", 0.0))
            except (TypeError, ValueError) as exc:
                self._send_error(sock, f"bad cmd frame: {exc}")
                return
            cmd = np.clip([vx, vy, wz],
                          [-l for l in self.limits], list(self.limits))
            with self._cmd_lock:
                self._cmd = cmd  # latest value wins, no queueing
        elif kind == "ctrl":
            action = msg.get("action")
            if action == "pause":
                self._paused.set()
            elif action == "resume":
                self._paused.clear()
            elif action == "reset":
                self._reset_requested = True
                self._reset.set()
            elif action == "scenario":
                name = msg.get("name", "")
                try:
                    make_scenario(name)
                except ConfigError as exc:
                    self._send_error(sock, str(exc))
                    return
                self._switch_to = name
                self._reset_requested = True
                self._reset.set()
            else:
                self._send_error(sock, f"unknown ctrl action {action!r}")
        else:
            self._send_error(sock, f"unknown frame type {kind!r}")

    def _send_error(self, sock, message):
        try:
            sock.sendall(ws.encode_frame(json.dumps(
                {"type": "error", "message": message})))
        except OSError:
            pass


class TeleopClient:
    """Blocking scripted client for tests and tooling."""

    def __init__(self, port, host="127.0.0.1", timeout=10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        leftover = ws.client_handshake(self.sock, host=host)
        self.reader = ws.FrameReader(self.sock, leftover)

    def send(self, obj):
        self.sock.sendall(ws.encode_frame(json.dumps(obj), mask=True))

    def send_cmd(self, vx=0.0, vy=0.0, yaw_rate=0.0):
        self.send({"type": "cmd", "vx": vx, "vy": vy, "yaw_rate": yaw_rate})

    def recv(self):
        while True:
            opcode, payload = self.reader.read_frame()
            if opcode == ws.OP_TEXT:
                return json.loads(payload.decode("utf-8"))
            if opcode == ws.OP_CLOSE:
                raise ConnectionError("server closed")

    def recv_type(self, kind, limit=200):
        for _ in range(limit):
            msg = self.recv()
            if msg.get("type") == kind:
                return msg
        raise TimeoutError(f"no {kind!r} frame within {limit} messages")

    def close(self):
        try:
            self.sock.sendall(ws.encode_frame("", opcode=ws.OP_CLOSE,
                                              mask=True))
        except OSError:
            pass
        self.sock.close()


def serve(scenario_name_or_path, port, allow_privileged=False, realtime=True,
          seed=None):
    scenario = resolve_scenario(scenario_name_or_path, seed=seed)
    server = TeleopServer(scenario, port, allow_privileged=allow_privileged,
                          realtime=realtime)
    server.start_listener()
    return server.serve_forever()
