"""Cross-module invariants that no single unit file owns."""

import itertools
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fairstream.app import build_context
from fairstream.config import Config
from fairstream.httpapi import create_app
from fairstream.ingest import IngestGateway
from fairstream.qc import flags as F
from fairstream.qc.dsl import parse_config
from fairstream.qc.functions import Series, flag_range
from fairstream.qc.pipeline import run_pipeline, SeriesFrame
from fairstream.store import TimeSeriesStore

from test_ingest_gateway import FakeResolver, UUID_A

ADMIN = "invariants-admin"
S = 1_000_000_000


def test_ingest_ordering_independence(tmp_path, rng):
    """The final store state is the same for every batch arrival order
    (distinct timestamps)."""
    batches = []
    offset = 0
    for _ in range(4):
        n = int(rng.integers(1, 60))
        ts = np.arange(offset, offset + n) * 7 + 3
        body = "\n".join(f"{t},{v:.4f}" for t, v in
                         zip(ts.tolist(), rng.normal(size=n).tolist())).encode()
        batches.append(body)
        offset += n

    states = []
    for order in itertools.permutations(range(4)):
        store = TimeSeriesStore(tmp_path / f"o{''.join(map(str, order))}")
        store.create_datastream(1)
        resolver = FakeResolver()
        resolver.add_thing(UUID_A, {"temp": 1})
        gateway = IngestGateway(store, resolver)
        for i in order:
            gateway.http_push(UUID_A, "s3cret", batches[i])
        res = store.query_range(1, 0, 1 << 62)
        states.append((res.timestamps.tolist(), res.values.tolist()))
        store.close()
    assert all(state == states[0] for state in states[1:])


def test_flag_range_masking_monotonicity(rng):
    """Raising dfilter never changes flags at points that were evaluated
    under both settings."""
    for _ in range(200):
        n = int(rng.integers(1, 80))
        values = rng.normal(scale=30, size=n)
        ts = np.arange(n, dtype=np.int64) * S
        prior = rng.choice([F.UNFLAGGED, F.GOOD, F.DOUBTFUL, F.BAD],
                           size=n).astype(np.float32)
        lo, hi = sorted(rng.normal(scale=20, size=2).tolist())
        results = {}
        for dfilter in (F.DOUBTFUL, F.BAD):
            mask = prior < dfilter
            sub = Series(ts[mask], values[mask])
            assignment = flag_range(sub, min=lo, max=hi)
            results[dfilter] = dict(zip(assignment.timestamps.tolist(),
                                        assignment.flags.tolist()))
        both = (prior < F.DOUBTFUL)  # unmasked under both settings
        for t in ts[both].tolist():
            assert results[F.DOUBTFUL].get(t) == results[F.BAD].get(t)


def make_ctx(tmp_path):
    cfg = Config(data_dir=str(tmp_path / "data"))
    cfg.auth.bootstrap_admin_token = ADMIN
    return build_context(cfg, base_url="http://testserver")


THING_SPEC = {
    "name": "hygiene", "transport": "mqtt",
    "parser_profile": {"kind": "csv", "timestamp_column": "0",
                       "timestamp_format": "epoch-seconds",
                       "value_columns": {"1": "temp"}},
    "datastreams": [{"position": "temp", "name": "temperature"}],
}


def test_secret_hygiene_nothing_plaintext_on_disk_or_logs(tmp_path, caplog):
    """After a full scenario, no issued secret may appear in any
    persistence file or captured log line."""
    import logging
    caplog.set_level(logging.DEBUG)
    ctx = make_ctx(tmp_path)
    client = TestClient(create_app(ctx), raise_server_exceptions=False)
    headers = {"Authorization": f"Bearer {ADMIN}"}
    operator = client.post("/platform/v1/tokens", json={"role": "operator"},
                           headers=headers).json()
    created = client.post("/platform/v1/things", json=THING_SPEC,
                          headers={"Authorization": f"Bearer {operator['token']}"})
    body = created.json()
    credential = body["credential"]
    ctx.gateway.handle_mqtt_publish(
        f"fs/ingest/{body['thing']['uuid']}", b"100,1.5",
        username=credential["username"], secret=credential["secret"])
    ctx.gateway.flush_mqtt()
    client.post(f"/platform/v1/things/{body['thing']['uuid']}/qc-config",
                headers=headers,
                json={"config": "temp ; flagRange(min=-40, max=60)",
                      "lookback": "365d"})
    ctx.close()

    secrets = [credential["secret"], operator["token"], ADMIN]
    for path in (tmp_path / "data").rglob("*"):
        if path.is_file():
            blob = path.read_bytes()
            for secret in secrets:
                assert secret.encode() not in blob, f"{secret[:6]}... in {path}"
    log_text = caplog.text
    for secret in secrets:
        assert secret not in log_text


def test_dashboard_provisioning_idempotent(tmp_path):
    ctx = make_ctx(tmp_path)
    thing, _ = ctx.platform.create_thing(THING_SPEC)
    first = ctx.platform.provision_dashboard(thing.uuid)
    again = ctx.platform.provision_dashboard(thing.uuid)
    assert json.dumps(first, sort_keys=True) == json.dumps(again, sort_keys=True)
    assert first["share_token"] == again["share_token"]
    ctx.close()


def test_qc_scheduling_covers_gaps_beyond_lookback(tmp_path):
    """Every point newer than the last run's high-water mark is covered
    by a later on_ingest window, even across gaps longer than lookback."""
    ctx = make_ctx(tmp_path)
    thing, credential = ctx.platform.create_thing(THING_SPEC)
    ds_id = thing.datastreams[0].id
    ctx.platform.attach_qc(thing.uuid, "temp ; flagRange(min=0, max=10)",
                           lookback="1h")

    def push(epoch_seconds, value):
        ctx.gateway.handle_mqtt_publish(
            f"fs/ingest/{thing.uuid}",
            f"{epoch_seconds},{value}".encode(),
            username=credential["username"], secret=credential["secret"])
        ctx.gateway.flush_mqtt()

    push(1_000_000, 5.0)          # first run: high-water = t1
    push(1_010_000, 99.0)         # 10000 s later: outside the 1 h lookback of
    push(1_020_000, 99.0)         # the *next* run unless high-water extends it
    flags = ctx.store.current_flags_at(
        ds_id, np.array([1_000_000, 1_010_000, 1_020_000], np.int64) * S)
    assert flags.tolist() == [F.UNFLAGGED, F.BAD, F.BAD]
    ctx.close()


def test_mqtt_publish_visible_via_sta_after_flush(tmp_path):
    """Publish rows on the ingest topic; they appear through the read API
    once the flush interval work runs."""
    ctx = make_ctx(tmp_path)
    client = TestClient(create_app(ctx), raise_server_exceptions=False)
    thing, credential = ctx.platform.create_thing(THING_SPEC)
    ds_id = thing.datastreams[0].id
    ctx.gateway.handle_mqtt_publish(
        f"fs/ingest/{thing.uuid}", b"100,1.0\n200,2.0\n300,3.0",
        username=credential["username"], secret=credential["secret"])
    ctx.gateway.flush_mqtt()
    r = client.get(f"/v1.1/Datastreams({ds_id})/Observations",
                   headers={"Authorization": f"Bearer {ADMIN}"})
    assert [o["result"] for o in r.json()["value"]] == [1.0, 2.0, 3.0]
    ctx.close()
