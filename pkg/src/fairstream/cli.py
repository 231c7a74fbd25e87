"""Operator command line.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Data goes to
stdout, diagnostics to stderr, so subcommands compose in pipelines.
Every subcommand takes an exclusive lock on the data directory; two
writers on the same store corrupt nothing because the second one simply
refuses to start.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
from filelock import FileLock, Timeout

from . import ENGINE_VERSION
from .app import build_context
from .config import load_config
from .errors import FairstreamError
from .qc import flags as qc_flags
from .qc.dsl import parse_config
from .qc.errors import BadArgument, ConfigSyntaxError, UnknownFunction
from .qc.pipeline import run_on_store
from .sta.entities import observation_iot_id, observation_properties, serialize_entity
from .store.verify import verify_store
from .timeutil import format_rfc3339_ns, parse_rfc3339_ns


def _load_ctx(config_path, base_url=None):
    if not config_path:
        raise click.UsageError(
            "no config: pass --config or set FAIRSTREAM_CONFIG")
    if not Path(config_path).is_file():
        raise click.UsageError(f"config file not found: {config_path}")
    try:
        cfg = load_config(config_path)
    except (ValueError, OSError) as exc:
        raise click.UsageError(f"bad config {config_path}: {exc}")
    return cfg


def _lock(cfg):
    cfg.data_path.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(cfg.data_path / ".fairstream.lock"))
    try:
        lock.acquire(timeout=0.5)
    except Timeout:
        click.echo(f"error: data directory {cfg.data_dir} is locked by another"
                   " fairstream process", err=True)
        sys.exit(1)
    return lock


@click.group()
@click.option("--config", "config_path", envvar="FAIRSTREAM_CONFIG",
              type=click.Path(), help="service config file (TOML);"
              " or set FAIRSTREAM_CONFIG")
@click.version_option(version=ENGINE_VERSION, prog_name="fairstream")
@click.pass_context
def main(ctx, config_path):
    """FAIR time-series management: registry, ingest, store, QC, STA."""
    ctx.obj = config_path


@main.command()
@click.pass_obj
def serve(config_path):
    """Run all services (HTTP, MQTT consumer, QC scheduler, drop watcher)."""
    import uvicorn

    from .httpapi import create_app

    cfg = _load_ctx(config_path)
    lock = _lock(cfg)
    context = build_context(cfg)
    app = create_app(context)

    import threading
    stop = threading.Event()

    def scheduler_loop():
        while not stop.wait(1.0):
            try:
                context.platform.run_due_interval_attachments()
                dropdir = cfg.dropdir_path()
                if dropdir.is_dir():
                    context.gateway.dropdir_scan(dropdir)
            except Exception as exc:  # keep the scheduler alive
                click.echo(f"scheduler error: {exc}", err=True)

    threading.Thread(target=scheduler_loop, name="scheduler", daemon=True).start()

    consumer = None
    if cfg.mqtt.enabled:
        from .ingest.mqtt import MqttIngestConsumer
        consumer = MqttIngestConsumer(
            context.gateway, cfg.mqtt.host, cfg.mqtt.port,
            topic_prefix=cfg.mqtt.topic_prefix, client_id=cfg.mqtt.client_id,
            flush_interval_ms=cfg.ingest.flush_interval_ms)
        try:
            consumer.start()
        except OSError as exc:
            click.echo(f"error: cannot reach MQTT broker "
                       f"{cfg.mqtt.host}:{cfg.mqtt.port}: {exc}", err=True)
            sys.exit(1)

    host, _, port = cfg.http.bind.rpartition(":")
    server = uvicorn.Server(uvicorn.Config(
        app, host=host or "127.0.0.1", port=int(port), log_level="warning"))

    import signal

    def request_shutdown(signum, frame):
        server.should_exit = True

    signal.signal(signal.SIGTERM, request_shutdown)
    signal.signal(signal.SIGINT, request_shutdown)
    try:
        server.run()
    except SystemExit:
        # uvicorn raises SystemExit when the bind fails
        click.echo(f"error: cannot bind {cfg.http.bind}", err=True)
        sys.exit(1)
    finally:
        stop.set()
        if consumer is not None:
            consumer.stop()
        context.gateway.flush_mqtt()
        context.close()
        lock.release()


@main.command("ingest-replay")
@click.option("--thing", "thing_uuid", required=True, help="thing uuid")
@click.option("--file", "path", required=True, type=click.Path(exists=True))
@click.option("--speed", default=0.0, show_default=True,
              help="replay pace: 0 = as fast as possible, N = N x real time")
@click.pass_obj
def ingest_replay(config_path, thing_uuid, path, speed):
    """Replay a logger file through the http_push ingestion path."""
    cfg = _load_ctx(config_path)
    lock = _lock(cfg)
    context = build_context(cfg)
    try:
        info = context.platform.thing_info(thing_uuid)
        if info is None:
            click.echo(f"error: unknown thing {thing_uuid}", err=True)
            sys.exit(1)
        body = Path(path).read_bytes()
        from .ingest.profiles import parse_payload
        rows, errors = parse_payload(info.profile, body)
        if speed > 0 and rows:
            report = _paced_replay(context.gateway, info, rows, errors, speed)
        else:
            report = context.gateway.replay_rows(info, rows, errors)
        click.echo(json.dumps(report.to_dict(), sort_keys=True))
        if report.accepted == 0 and report.errors:
            sys.exit(1)
    except FairstreamError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    finally:
        context.close()
        lock.release()


def _paced_replay(gateway, info, rows, errors, speed):
    """Feed rows with inter-row delays scaled from their timestamps."""
    from .ingest.gateway import IngestReport
    report = IngestReport(errors=list(errors))
    last_t = None
    for row in rows:
        if last_t is not None and row.timestamp > last_t:
            time.sleep(min((row.timestamp - last_t) / 1e9 / speed, 5.0))
        last_t = row.timestamp
        sub = gateway.replay_rows(info, [row], [])
        report.accepted += sub.accepted
        report.errors.extend(sub.errors)
    return report


@main.command("qc-run")
@click.option("--datastream", "ds_id", required=True, type=int)
@click.option("--config", "qc_path", required=True, type=click.Path(),
              help="QC pipeline file (.qc)")
@click.option("--from", "t_from", required=True, help="window start (RFC3339)")
@click.option("--to", "t_to", required=True, help="window end (RFC3339, exclusive)")
@click.option("--run-time", "run_time", default=None,
              help="pin the provenance run timestamp (RFC3339) for"
                   " byte-reproducible runs")
@click.pass_obj
def qc_run(config_path, ds_id, qc_path, t_from, t_to, run_time):
    """Run a QC pipeline over one datastream window; report as JSON."""
    cfg = _load_ctx(config_path)
    if not Path(qc_path).is_file():
        raise click.UsageError(f"qc config not found: {qc_path}")
    try:
        qc_config = parse_config(Path(qc_path).read_text())
    except (ConfigSyntaxError, UnknownFunction, BadArgument) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    try:
        t0 = parse_rfc3339_ns(t_from)
        t1 = parse_rfc3339_ns(t_to)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    lock = _lock(cfg)
    context = build_context(cfg)
    try:
        ds = context.platform.get_datastream(ds_id)
        thing = context.platform.get_thing(ds.thing_uuid)
        var_map = {d.position: d.id for d in thing.datastreams}
        run_time_ns = parse_rfc3339_ns(run_time) if run_time else None
        result = run_on_store(context.store, qc_config, var_map, t0, t1,
                              run_time_ns=run_time_ns)
        click.echo(json.dumps(result.report.to_dict(), sort_keys=True))
    except FairstreamError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    finally:
        context.close()
        lock.release()


@main.command()
@click.option("--datastream", "ds_id", required=True, type=int)
@click.option("--format", "fmt", type=click.Choice(["csv", "sta-json"]),
              default="csv", show_default=True)
@click.option("--flags", "scheme", type=click.Choice(["simple", "float"]),
              default="simple", show_default=True)
@click.pass_obj
def export(config_path, ds_id, fmt, scheme):
    """Export a datastream to stdout (csv or the STA serialization)."""
    cfg = _load_ctx(config_path)
    lock = _lock(cfg)
    context = build_context(cfg)
    try:
        context.platform.get_datastream(ds_id)
        res = context.store.query_range(ds_id, -(1 << 62), 1 << 62,
                                        with_flags=True)
        if fmt == "csv":
            click.echo("phenomenon_time,result,flag")
            for i in range(len(res)):
                flag = qc_flags.encode(float(res.flags[i]), scheme)
                click.echo(f"{format_rfc3339_ns(int(res.timestamps[i]))},"
                           f"{float(res.values[i])!r},{flag}")
        else:
            base_url = f"http://{cfg.http.bind}"
            value = []
            for i in range(len(res)):
                t = int(res.timestamps[i])
                rt = int(res.result_times[i]) if res.result_times[i] >= 0 else None
                props = observation_properties(ds_id, t, float(res.values[i]),
                                               rt, float(res.flags[i]), scheme)
                value.append(serialize_entity(
                    "Observation", observation_iot_id(ds_id, t), props, base_url))
            click.echo(json.dumps({"value": value}, sort_keys=True))
    except FairstreamError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    finally:
        context.close()
        lock.release()


@main.command("store-verify")
@click.option("--data", "data_dir", type=click.Path(), default=None,
              help="data directory (defaults to the config's)")
@click.pass_obj
def store_verify(config_path, data_dir):
    """Check every segment, flag column and WAL; exit 0 iff clean."""
    if data_dir is None:
        cfg = _load_ctx(config_path)
        data_dir = cfg.data_dir
        lock = _lock(cfg)
    else:
        lock = None
    try:
        report = verify_store(data_dir)
        for line in report.lines():
            click.echo(line)
        if not report.clean:
            sys.exit(1)
    finally:
        if lock is not None:
            lock.release()


if __name__ == "__main__":
    main()
