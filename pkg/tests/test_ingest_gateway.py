import numpy as np
import pytest

from fairstream.ingest import (
    AuthMismatch,
    IngestGateway,
    ParserProfile,
    UnknownThing,
    hash_secret,
    new_secret,
    verify_secret,
)
from fairstream.ingest.gateway import ThingInfo

S = 1_000_000_000
UUID_A = "11111111-1111-4111-8111-111111111111"
UUID_B = "22222222-2222-4222-8222-222222222222"


def profile():
    return ParserProfile(kind="csv", timestamp_column=0,
                         timestamp_format="epoch-seconds",
                         value_columns={1: "temp"}).validate()


class FakeResolver:
    def __init__(self):
        self.things = {}
        self.creds = {}  # (transport, username) -> (hash, thing_uuid)

    def add_thing(self, uuid, datastreams, transport="http", secret="s3cret",
                  username=None):
        self.things[uuid] = ThingInfo(uuid, transport, profile(), datastreams)
        self.creds[(transport, username or uuid)] = (hash_secret(secret), uuid)
        return secret

    def thing_info(self, uuid):
        return self.things.get(uuid)

    def verify_credential(self, transport, username, secret):
        entry = self.creds.get((transport, username))
        if entry and verify_secret(secret, entry[0]):
            return entry[1]
        return None


@pytest.fixture
def env(store):
    store.create_datastream(1)
    store.create_datastream(2)
    resolver = FakeResolver()
    gw = IngestGateway(store, resolver)
    return store, resolver, gw


class TestHttpPush:
    def test_accepted_rows(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1})
        report = gw.http_push(UUID_A, "s3cret", b"100,1.5\n200,2.5")
        assert report.accepted == 2
        assert report.errors == []
        assert store.count(1) == 2

    def test_wrong_token_changes_nothing(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1})
        with pytest.raises(AuthMismatch):
            gw.http_push(UUID_A, "wrong", b"100,1.5")
        assert store.count(1) == 0

    def test_unknown_thing(self, env):
        _, _, gw = env
        with pytest.raises(UnknownThing):
            gw.http_push(UUID_B, "s3cret", b"100,1.5")

    def test_partial_errors(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1})
        report = gw.http_push(UUID_A, "s3cret",
                              b"100,1.0\n200,bad\n300,3.0\nnope,4.0\n500,5.0")
        assert report.accepted == 3
        assert len(report.errors) == 2

    def test_unknown_position_reported(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"other": 2})
        report = gw.http_push(UUID_A, "s3cret", b"100,1.5")
        assert report.accepted == 0
        assert report.errors[0].reason == "unknown position:temp"

    def test_idempotent_replay(self, env, rng):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1})
        ts = np.sort(rng.choice(np.arange(10_000), size=500, replace=False))
        body = "\n".join(f"{t},{v:.4f}" for t, v in
                         zip(ts, rng.normal(size=500))).encode()
        gw.http_push(UUID_A, "s3cret", body)
        before = store.query_range(1, 0, 1 << 62)
        gw.http_push(UUID_A, "s3cret", body)
        after = store.query_range(1, 0, 1 << 62)
        assert len(before) == len(after) == 500
        np.testing.assert_array_equal(before.timestamps, after.timestamps)
        np.testing.assert_array_equal(before.values, after.values)


class TestMqttPath:
    def test_publish_then_flush_stores(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="mqtt",
                           username="logger-a", secret="pw")
        acked = []
        gw.handle_mqtt_publish(f"fs/ingest/{UUID_A}", b"100,1.0\n200,2.0",
                               username="logger-a", secret="pw",
                               ack=lambda: acked.append(1))
        assert store.count(1) == 0  # buffered until flush
        assert acked == []
        assert gw.flush_mqtt() == 2
        assert store.count(1) == 2
        assert acked == [1]

    def test_wrong_thing_credential_rejected(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="mqtt",
                           username="logger-a", secret="pw-a")
        resolver.add_thing(UUID_B, {"temp": 2}, transport="mqtt",
                           username="logger-b", secret="pw-b")
        acked = []
        gw.handle_mqtt_publish(f"fs/ingest/{UUID_A}", b"100,1.0",
                               username="logger-b", secret="pw-b",
                               ack=lambda: acked.append(1))
        gw.flush_mqtt()
        assert store.count(1) == 0
        assert gw.auth_failures == 1
        assert acked == [1]  # rejected payloads still acked, never redelivered

    def test_duplicate_publish_is_idempotent(self, env):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="mqtt",
                           username="logger-a", secret="pw")
        for _ in range(2):  # QoS-1 redelivery
            gw.handle_mqtt_publish(f"fs/ingest/{UUID_A}", b"100,1.0\n200,2.0",
                                   username="logger-a", secret="pw")
        gw.flush_mqtt()
        assert store.count(1) == 2


class TestDropDir:
    def test_files_processed_in_name_order(self, env, tmp_path):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="dropdir")
        drop = tmp_path / "drop" / UUID_A
        drop.mkdir(parents=True)
        (drop / "b.csv").write_bytes(b"200,2.0")
        (drop / "a.csv").write_bytes(b"100,1.0")
        reports = gw.dropdir_scan(tmp_path / "drop")
        assert [r.filename for r in reports] == ["a.csv", "b.csv"]
        assert all(r.status == "processed" for r in reports)
        assert (drop / "processed" / "a.csv").exists()
        assert store.query_range(1, 0, 1 << 62).values.tolist() == [1.0, 2.0]

    def test_undecodable_moved_to_failed_with_err(self, env, tmp_path):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="dropdir")
        drop = tmp_path / "drop" / UUID_A
        drop.mkdir(parents=True)
        (drop / "junk.bin").write_bytes(b"\xff\xfe\x00binary")
        reports = gw.dropdir_scan(tmp_path / "drop")
        assert reports[0].status == "failed"
        err = (drop / "failed" / "junk.bin.err").read_text()
        assert "PayloadUndecodable" in err

    def test_redrop_is_duplicate(self, env, tmp_path):
        store, resolver, gw = env
        resolver.add_thing(UUID_A, {"temp": 1}, transport="dropdir")
        drop = tmp_path / "drop" / UUID_A
        drop.mkdir(parents=True)
        (drop / "a.csv").write_bytes(b"100,1.0")
        gw.dropdir_scan(tmp_path / "drop")
        (drop / "a.csv").write_bytes(b"100,999.0")
        reports = gw.dropdir_scan(tmp_path / "drop")
        assert reports[0].status == "duplicate"
        assert store.query_range(1, 0, 1 << 62).values.tolist() == [1.0]


def test_secret_hashing_roundtrip():
    secret = new_secret()
    stored = hash_secret(secret)
    assert secret not in stored
    assert verify_secret(secret, stored)
    assert not verify_secret("other", stored)
    assert not verify_secret(secret, "garbage")
