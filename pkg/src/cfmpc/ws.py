"""Minimal RFC 6455 WebSocket framing for the teleop bridge.

Text frames only, no extensions, no fragmentation of outgoing messages.
Enough for a browser panel and scripted test clients; not a general-purpose
WebSocket stack.
"""

import base64
import hashlib
import os
import struct

_GUID = b"258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class HandshakeError(Exception):
    pass


def accept_key(client_key):
    digest = hashlib.sha1(client_key.encode() + _GUID).digest()
    return base64.b64encode(digest).decode()


def read_http_request(sock, limit=16384):
    """Read an HTTP head; returns (request line, headers, leftover bytes).

    Frames may arrive in the same TCP batch as the handshake, so the bytes
    after the blank line must be handed to the frame reader, not dropped.
    """
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise HandshakeError("connection closed during handshake")
        data += chunk
        if len(data) > limit:
            raise HandshakeError("oversized handshake request")
    head, rest = data.split(b"\r\n\r\n", 1)
    lines = head.decode("latin-1").split("\r\n")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    return lines[0], headers, rest


def server_handshake(sock):
    """Server side of the upgrade; returns leftover bytes after the request.

    Raises HandshakeError on anything that is not a websocket upgrade."""
    request_line, headers, rest = read_http_request(sock)
    if "websocket" not in headers.get("upgrade", "").lower():
        raise HandshakeError(f"not a websocket upgrade: {request_line!r}")
    key = headers.get("sec-websocket-key")
    if not key:
        raise HandshakeError("missing Sec-WebSocket-Key")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    )
    sock.sendall(response.encode("latin-1"))
    return rest


def client_handshake(sock, host="localhost", path="/"):
    key = base64.b64encode(os.urandom(16)).decode()
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    sock.sendall(request.encode("latin-1"))
    status, headers, rest = read_http_request(sock)
    if "101" not in status:
        raise HandshakeError(f"upgrade rejected: {status!r}")
    if headers.get("sec-websocket-accept") != accept_key(key):
        raise HandshakeError("bad Sec-WebSocket-Accept")
    return rest


def encode_frame(payload, opcode=OP_TEXT, mask=False):
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    header = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        header.append(mask_bit | n)
    elif n < 65536:
        header.append(mask_bit | 126)
        header += struct.pack(">H", n)
    else:
        header.append(mask_bit | 127)
        header += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        header += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


class FrameReader:
    """Buffered frame reader that honors handshake leftovers."""

    def __init__(self, sock, initial=b""):
        self.sock = sock
        self.buffer = bytearray(initial)

    def _recv_exact(self, n):
        while len(self.buffer) < n:
            chunk = self.sock.recv(max(4096, n - len(self.buffer)))
            if not chunk:
                raise ConnectionError("peer closed")
            self.buffer += chunk
        out = bytes(self.buffer[:n])
        del self.buffer[:n]
        return out

    def read_frame(self):
        """Read one frame; returns (opcode, payload bytes)."""
        b0, b1 = self._recv_exact(2)
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        n = b1 & 0x7F
        if n == 126:
            n = struct.unpack(">H", self._recv_exact(2))[0]
        elif n == 127:
            n = struct.unpack(">Q", self._recv_exact(8))[0]
        key = self._recv_exact(4) if masked else None
        payload = self._recv_exact(n) if n else b""
        if masked:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return opcode, payload


def decode_frame(sock_or_reader):
    """Read one frame from a socket or FrameReader."""
    if isinstance(sock_or_reader, FrameReader):
        return sock_or_reader.read_frame()
    return FrameReader(sock_or_reader).read_frame()
