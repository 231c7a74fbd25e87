"""Minimal MQTT 5 subscriber.

The gateway is a pure client of an external broker: it CONNECTs,
SUBSCRIBEs to the ingest topic filter at QoS 1, and turns inbound
PUBLISH packets into gateway calls.  Publisher identity travels as the
MQTT 5 user properties `username` / `password` on each PUBLISH, because
a subscribing client cannot see broker session credentials; the gateway
verifies them against the Thing's stored credential itself.

PUBACK for a QoS-1 publish is only sent after the batch that contains
it has been flushed into the write-ahead log, which gives at-least-once
delivery end to end (duplicates are absorbed by the store's upsert).

Only the packets this role needs are implemented: CONNECT/CONNACK,
SUBSCRIBE/SUBACK, PUBLISH/PUBACK, PINGREQ/PINGRESP, DISCONNECT.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
import time

from ..errors import FairstreamError

logger = logging.getLogger(__name__)

CONNECT, CONNACK, PUBLISH, PUBACK = 1, 2, 3, 4
SUBSCRIBE, SUBACK = 8, 9
PINGREQ, PINGRESP, DISCONNECT = 12, 13, 14

PROP_USER_PROPERTY = 0x26

# properties we can skip over: id -> fixed size, or "vbi"/"utf8"/"binary"/"utf8pair"
_PROP_KINDS = {
    0x01: 1, 0x02: 4, 0x03: "utf8", 0x08: "utf8", 0x09: "binary", 0x0B: "vbi",
    0x11: 4, 0x12: "utf8", 0x13: 2, 0x15: "utf8", 0x16: "binary", 0x17: 1,
    0x18: 4, 0x19: 1, 0x1A: "utf8", 0x1C: "utf8", 0x1F: "utf8", 0x21: 2,
    0x22: 2, 0x23: 2, 0x24: 1, 0x25: 1, 0x26: "utf8pair", 0x27: 4, 0x28: 1,
    0x29: 1, 0x2A: 1,
}


class MqttProtocolError(FairstreamError):
    pass


# -- primitive encoders/decoders ----------------------------------------------

def encode_vbi(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value % 128
        value //= 128
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_vbi(data: bytes, offset: int):
    multiplier, value = 1, 0
    for i in range(4):
        if offset + i >= len(data):
            raise MqttProtocolError("truncated variable byte integer")
        byte = data[offset + i]
        value += (byte & 0x7F) * multiplier
        if not byte & 0x80:
            return value, offset + i + 1
        multiplier *= 128
    raise MqttProtocolError("variable byte integer too long")


def encode_utf8(text: str) -> bytes:
    raw = text.encode()
    return struct.pack(">H", len(raw)) + raw


def decode_utf8(data: bytes, offset: int):
    if offset + 2 > len(data):
        raise MqttProtocolError("truncated string length")
    (length,) = struct.unpack_from(">H", data, offset)
    end = offset + 2 + length
    if end > len(data):
        raise MqttProtocolError("truncated string")
    return data[offset + 2:end].decode(), end


def decode_properties(data: bytes, offset: int):
    """Returns ({user properties}, next offset); other properties skipped."""
    length, offset = decode_vbi(data, offset)
    end = offset + length
    user_props = {}
    while offset < end:
        prop_id = data[offset]
        offset += 1
        kind = _PROP_KINDS.get(prop_id)
        if kind is None:
            raise MqttProtocolError(f"unknown property 0x{prop_id:02x}")
        if kind == "utf8pair":
            key, offset = decode_utf8(data, offset)
            value, offset = decode_utf8(data, offset)
            user_props[key] = value
        elif kind == "utf8" or kind == "binary":
            _, offset = decode_utf8(data, offset)
        elif kind == "vbi":
            _, offset = decode_vbi(data, offset)
        else:
            offset += kind
    return user_props, end


def packet(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + encode_vbi(len(body)) + body


def connect_packet(client_id: str, keepalive: int = 60,
                   username: str | None = None, password: str | None = None) -> bytes:
    flags = 0x02  # clean start
    if username is not None:
        flags |= 0x80
    if password is not None:
        flags |= 0x40
    body = encode_utf8("MQTT") + bytes([5, flags]) + struct.pack(">H", keepalive)
    body += encode_vbi(0)  # no properties
    body += encode_utf8(client_id)
    if username is not None:
        body += encode_utf8(username)
    if password is not None:
        body += encode_utf8(password)
    return packet(CONNECT, 0, body)


def subscribe_packet(packet_id: int, topic_filter: str, qos: int = 1) -> bytes:
    body = struct.pack(">H", packet_id) + encode_vbi(0)
    body += encode_utf8(topic_filter) + bytes([qos])
    return packet(SUBSCRIBE, 0x02, body)


def puback_packet(packet_id: int) -> bytes:
    return packet(PUBACK, 0, struct.pack(">H", packet_id))


def publish_packet(topic: str, payload: bytes, packet_id: int | None = None,
                   qos: int = 0, user_properties: dict | None = None) -> bytes:
    """Used by tests and the replay tooling to act as a publisher."""
    flags = qos << 1
    body = encode_utf8(topic)
    if qos > 0:
        body += struct.pack(">H", packet_id)
    props = b""
    for key, value in (user_properties or {}).items():
        props += bytes([PROP_USER_PROPERTY]) + encode_utf8(key) + encode_utf8(value)
    body += encode_vbi(len(props)) + props
    body += payload
    return packet(PUBLISH, flags, body)


def parse_publish(flags: int, body: bytes):
    """Returns (topic, packet_id | None, user properties, payload)."""
    qos = (flags >> 1) & 0x03
    topic, offset = decode_utf8(body, 0)
    packet_id = None
    if qos > 0:
        if offset + 2 > len(body):
            raise MqttProtocolError("truncated packet id")
        (packet_id,) = struct.unpack_from(">H", body, offset)
        offset += 2
    user_props, offset = decode_properties(body, offset)
    return topic, packet_id, user_props, body[offset:]


# -- client ---------------------------------------------------------------------

class MqttClient:
    """Blocking MQTT 5 subscriber bound to one on_publish handler.

    on_publish(topic, payload, user_properties, ack_or_None) is invoked
    for every inbound PUBLISH; for QoS > 0 the handler owns calling ack()
    once the data is durable.
    """

    def __init__(self, host: str, port: int, client_id: str,
                 on_publish, keepalive: int = 60,
                 username: str | None = None, password: str | None = None):
        self.host = host
        self.port = port
        self.client_id = client_id
        self.on_publish = on_publish
        self.keepalive = keepalive
        self.username = username
        self.password = password
        self._sock = None
        self._stop = threading.Event()
        self._send_lock = threading.Lock()
        self._last_io = 0.0

    def connect(self, timeout: float = 10.0):
        self._sock = socket.create_connection((self.host, self.port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._send(connect_packet(self.client_id, self.keepalive,
                                  self.username, self.password))
        ptype, flags, body = self._read_packet()
        if ptype != CONNACK:
            raise MqttProtocolError(f"expected CONNACK, got type {ptype}")
        if len(body) < 2 or body[1] != 0:
            raise MqttProtocolError(f"broker refused connection, reason 0x{body[1]:02x}")
        logger.info("mqtt connected to %s:%d", self.host, self.port)

    def subscribe(self, topic_filter: str, packet_id: int = 1, qos: int = 1):
        self._send(subscribe_packet(packet_id, topic_filter, qos))
        ptype, flags, body = self._read_packet()
        if ptype != SUBACK:
            raise MqttProtocolError(f"expected SUBACK, got type {ptype}")
        reason = body[-1]
        if reason not in (0x00, 0x01, 0x02):
            raise MqttProtocolError(f"subscription refused, reason 0x{reason:02x}")
        logger.info("mqtt subscribed to %s (qos %d)", topic_filter, qos)

    def send_puback(self, packet_id: int):
        try:
            self._send(puback_packet(packet_id))
        except OSError:
            logger.warning("puback %d lost: connection gone", packet_id)

    def loop(self):
        """Read packets until stop() or the connection drops."""
        self._sock.settimeout(1.0)
        while not self._stop.is_set():
            try:
                ptype, flags, body = self._read_packet()
            except socket.timeout:
                self._keepalive_tick()
                continue
            except (OSError, MqttProtocolError) as exc:
                if not self._stop.is_set():
                    logger.warning("mqtt connection lost: %s", exc)
                return
            if ptype == PUBLISH:
                self._handle_publish(flags, body)
            elif ptype == PINGRESP:
                pass
            elif ptype == DISCONNECT:
                logger.info("broker sent DISCONNECT")
                return

    def _handle_publish(self, flags, body):
        topic, packet_id, props, payload = parse_publish(flags, body)
        ack = None
        if packet_id is not None:
            ack = lambda pid=packet_id: self.send_puback(pid)
        self.on_publish(topic, payload, props, ack)

    def _keepalive_tick(self):
        if self.keepalive and time.monotonic() - self._last_io > self.keepalive / 2:
            try:
                self._send(packet(PINGREQ, 0, b""))
            except OSError:
                pass

    def stop(self):
        self._stop.set()
        if self._sock is not None:
            try:
                self._send(packet(DISCONNECT, 0, b"\x00"))
            except OSError:
                pass
            try:
                self._sock.close()
            except OSError:
                pass

    def _send(self, data: bytes):
        with self._send_lock:
            self._sock.sendall(data)
            self._last_io = time.monotonic()

    def _recv_exact(self, n: int) -> bytes:
        chunks = b""
        while len(chunks) < n:
            chunk = self._sock.recv(n - len(chunks))
            if not chunk:
                raise OSError("connection closed")
            chunks += chunk
        return chunks

    def _read_packet(self):
        first = self._recv_exact(1)[0]
        ptype, flags = first >> 4, first & 0x0F
        length = 0
        multiplier = 1
        for _ in range(4):
            byte = self._recv_exact(1)[0]
            length += (byte & 0x7F) * multiplier
            if not byte & 0x80:
                break
            multiplier *= 128
        else:
            raise MqttProtocolError("bad remaining length")
        body = self._recv_exact(length) if length else b""
        self._last_io = time.monotonic()
        return ptype, flags, body


class MqttIngestConsumer:
    """Wires an MqttClient to the gateway with interval flushing."""

    def __init__(self, gateway, host, port, topic_prefix="fs/ingest",
                 client_id="fairstream-gateway", flush_interval_ms=1000):
        self.gateway = gateway
        self.topic_prefix = topic_prefix
        self.flush_interval_ms = flush_interval_ms
        self.client = MqttClient(host, port, client_id, self._on_publish)
        self._threads = []
        self._stop = threading.Event()

    def _on_publish(self, topic, payload, props, ack):
        self.gateway.handle_mqtt_publish(
            topic, payload,
            username=props.get("username", ""),
            secret=props.get("password", ""),
            ack=ack)

    def start(self):
        self.client.connect()
        self.client.subscribe(f"{self.topic_prefix}/+", qos=1)
        io_thread = threading.Thread(target=self.client.loop,
                                     name="mqtt-io", daemon=True)
        flush_thread = threading.Thread(target=self._flush_loop,
                                        name="mqtt-flush", daemon=True)
        io_thread.start()
        flush_thread.start()
        self._threads = [io_thread, flush_thread]

    def _flush_loop(self):
        while not self._stop.wait(self.flush_interval_ms / 1000.0):
            self.gateway.flush_mqtt()

    def stop(self):
        self._stop.set()
        self.client.stop()
        for t in self._threads:
            t.join(timeout=5)
        self.gateway.flush_mqtt()
