"""HTTP surface: registry, ingest, platform and the SensorThings read API.

One FastAPI app serves four prefixes:

    /registry/v1   device registration, search, mounts, exports
    /pid/...       public persistent-identifier landing documents
    /ingest/v1     HTTP push (bearer = the Thing's ingest credential)
    /platform/v1   things, QC attachments, dashboards, tokens
    /v1.1          read-only SensorThings subset

Write endpoints demand a platform bearer token (admin for registry and
token management, operator for thing/QC management); reads demand any
valid token except the public PID landing page, the root document and
share-token-scoped dashboard data.
"""

from __future__ import annotations

import json
import logging
import re

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .errors import AuthError, FairstreamError, ForbiddenError, NotFoundError, ValidationError
from .ingest.gateway import AuthMismatch, UnknownThing
from .ingest.profiles import PayloadUndecodable
from .qc import flags as qc_flags
from .qc.dsl import parse_config
from .qc.errors import BadArgument, ConfigSyntaxError, QcError, UnknownFunction, UnknownVariable
from .registry.jsonapi import export_jsonapi
from .registry.models import Contact, Device, MeasuredQuantity, Mount
from .registry.sensorml import export_sensorml
from .registry.store import AlreadyMinted, DuplicateSerial, OverlapError, UnknownDevice
from .sta.entities import NAVIGATIONS as _NAVS_OF
from .sta.query import QueryParseError, UnsupportedOption
from .timeutil import format_rfc3339_ns, parse_rfc3339_ns

logger = logging.getLogger(__name__)

_ENTITY_RE = re.compile(r"^([A-Za-z]+)\((\d+)\)$")


def _error(status: int, message: str, **fields) -> JSONResponse:
    body = {"error": {"code": status, "message": message, **fields}}
    return JSONResponse(body, status_code=status)


def _bearer(request: Request) -> str:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[7:].strip()
    return ""


def _canonical_json(doc, status_code: int = 200) -> Response:
    return Response(json.dumps(doc, sort_keys=True), media_type="application/json",
                    status_code=status_code)


def create_app(ctx) -> FastAPI:
    """ctx carries .config, .store, .registry, .platform, .gateway, .sta"""
    app = FastAPI(title="fairstream", docs_url=None, redoc_url=None)
    platform = ctx.platform
    registry = ctx.registry
    gateway = ctx.gateway
    sta = ctx.sta

    # -- error translation ---------------------------------------------------

    @app.exception_handler(FairstreamError)
    async def translate(request, exc):
        if isinstance(exc, (AuthError, AuthMismatch)):
            return _error(401, str(exc))
        if isinstance(exc, ForbiddenError):
            return _error(403, str(exc))
        if isinstance(exc, (NotFoundError, UnknownDevice, UnknownThing)):
            return _error(404, str(exc))
        if isinstance(exc, (DuplicateSerial, OverlapError, AlreadyMinted)):
            extra = {}
            if isinstance(exc, OverlapError):
                extra["conflicting_mount_id"] = exc.conflicting_mount_id
            return _error(409, str(exc), **extra)
        if isinstance(exc, ValidationError):
            return _error(422, str(exc), field=exc.field)
        if isinstance(exc, PayloadUndecodable):
            return _error(422, str(exc))
        if isinstance(exc, UnsupportedOption):
            return _error(501, str(exc), option=exc.option)
        if isinstance(exc, QueryParseError):
            return _error(400, str(exc), position=exc.position, option=exc.option)
        if isinstance(exc, (ConfigSyntaxError, UnknownFunction, BadArgument)):
            return _error(400, str(exc), line=getattr(exc, "line", None))
        if isinstance(exc, (UnknownVariable, QcError)):
            return _error(400, str(exc))
        logger.exception("unhandled domain error")
        return _error(500, str(exc))

    def require(request: Request, role=None):
        return platform.tokens.require(_bearer(request), role)

    # -- registry -----------------------------------------------------------------

    @app.post("/registry/v1/devices", status_code=201)
    async def register_device(request: Request):
        require(request, "admin")
        body = await request.json()
        attrs = (body.get("data") or {}).get("attributes") or body
        draft = Device(
            id=None, pid=None,
            short_name=attrs.get("short_name", ""),
            manufacturer=attrs.get("manufacturer", ""),
            model=attrs.get("model", ""),
            serial_number=attrs.get("serial_number", ""),
            device_type=attrs.get("device_type", ""),
            description=attrs.get("description", ""),
            properties=[MeasuredQuantity(q.get("name", ""), q.get("unit", ""),
                                         int(q.get("position_index", i)))
                        for i, q in enumerate(attrs.get("properties", []))],
            contacts=[Contact(c.get("given_name", ""), c.get("family_name", ""),
                              c.get("email", ""), c.get("organization", ""),
                              c.get("role", "owner"))
                      for c in attrs.get("contacts", [])])
        device = registry.register_device(draft)
        return Response(export_jsonapi(device, registry.mounts_for(device.id)),
                        media_type="application/vnd.api+json", status_code=201)

    @app.get("/registry/v1/devices/{device_id}")
    def get_device(device_id: int, request: Request):
        require(request)
        device = registry.get_device(device_id)
        return Response(export_jsonapi(device, registry.mounts_for(device_id)),
                        media_type="application/vnd.api+json")

    @app.get("/registry/v1/devices")
    def search_devices(request: Request, q: str = "", device_type: str = None,
                       manufacturer: str = None, page: int = 1, per_page: int = 50):
        require(request)
        result = registry.search_devices(q, device_type=device_type,
                                         manufacturer=manufacturer,
                                         page=page, per_page=per_page)
        return _canonical_json({
            "meta": {"total": result["total"], "page": result["page"],
                     "per_page": result["per_page"]},
            "data": [json.loads(export_jsonapi(d, registry.mounts_for(d.id)))["data"]
                     for d in result["devices"]],
        })

    @app.post("/registry/v1/devices/{device_id}/mounts", status_code=201)
    async def add_mount(device_id: int, request: Request):
        require(request, "admin")
        body = await request.json()
        attrs = (body.get("data") or {}).get("attributes") or body
        end = attrs.get("end")
        mount = Mount(
            id=None, device_id=device_id,
            configuration_label=attrs.get("configuration_label", ""),
            begin=parse_rfc3339_ns(attrs["begin"]),
            end=None if end is None else parse_rfc3339_ns(end),
            offset_x=float(attrs.get("offset_x", 0.0)),
            offset_y=float(attrs.get("offset_y", 0.0)),
            offset_z=float(attrs.get("offset_z", 0.0)),
            begin_description=attrs.get("begin_description", ""))
        created = registry.add_mount(device_id, mount)
        return _canonical_json({"data": {
            "type": "mount", "id": str(created.id),
            "attributes": {
                "configuration_label": created.configuration_label,
                "begin": format_rfc3339_ns(created.begin),
                "end": None if created.end is None else format_rfc3339_ns(created.end),
            }}}, status_code=201)

    @app.get("/registry/v1/devices/{device_id}/sensorml")
    def get_sensorml(device_id: int, request: Request):
        require(request)
        device = registry.get_device(device_id)
        return Response(export_sensorml(device), media_type="application/xml")

    @app.get("/pid/{prefix}/{suffix}")
    def resolve_pid(prefix: str, suffix: str):
        return _canonical_json(registry.resolve_pid(f"{prefix}/{suffix}"))

    # -- ingest --------------------------------------------------------------------

    @app.post("/ingest/v1/things/{thing_uuid}/observations")
    async def http_push(thing_uuid: str, request: Request):
        body = await request.body()
        report = gateway.http_push(thing_uuid, _bearer(request), body)
        return _canonical_json(report.to_dict())

    # -- platform --------------------------------------------------------------------

    @app.post("/platform/v1/things", status_code=201)
    async def create_thing(request: Request):
        token_id, _ = require(request, "operator")
        spec = await request.json()
        thing, credential = platform.create_thing(spec, owner_token_id=token_id)
        return _canonical_json({
            "thing": _thing_doc(thing),
            "credential": credential,  # the only time the secret is visible
            "dashboard": platform.dashboard_of(thing.uuid),
        }, status_code=201)

    @app.get("/platform/v1/things/{thing_uuid}")
    def get_thing(thing_uuid: str, request: Request):
        require(request)
        thing = platform.get_thing(thing_uuid)
        doc = _thing_doc(thing)
        doc["credentials"] = platform.credential_meta(thing_uuid)
        return _canonical_json(doc)

    @app.get("/platform/v1/things")
    def list_things(request: Request):
        require(request)
        return _canonical_json({"things": [_thing_doc(t)
                                           for t in platform.list_things()]})

    @app.post("/platform/v1/things/{thing_uuid}/qc-config", status_code=201)
    async def attach_qc(thing_uuid: str, request: Request):
        require(request, "operator")
        body = await request.json()
        attachment = platform.attach_qc(
            thing_uuid, body.get("config", ""),
            schedule=body.get("schedule", "on_ingest"),
            lookback=body.get("lookback", "1h"),
            interval=body.get("interval"),
            enabled=bool(body.get("enabled", True)))
        return _canonical_json(_attachment_doc(attachment), status_code=201)

    @app.post("/platform/v1/datastreams/{ds_id}/qc-config", status_code=201)
    async def attach_qc_datastream(ds_id: int, request: Request):
        require(request, "operator")
        body = await request.json()
        ds = platform.get_datastream(ds_id)
        attachment = platform.attach_qc(
            ds.thing_uuid, body.get("config", ""),
            schedule=body.get("schedule", "on_ingest"),
            lookback=body.get("lookback", "1h"),
            interval=body.get("interval"),
            enabled=bool(body.get("enabled", True)))
        return _canonical_json(_attachment_doc(attachment), status_code=201)

    @app.post("/platform/v1/datastreams/{ds_id}/qc-dryrun")
    async def qc_dryrun(ds_id: int, request: Request):
        require(request, "operator")
        body = await request.json()
        config_text = body.get("config", "")
        parsed = parse_config(config_text)
        result = platform.qc_dryrun(ds_id, config_text)
        flags = []
        for column in result.columns:
            flags.append({
                "variable": column.variable,
                "function": column.meta["function"],
                "entries": [
                    {"phenomenonTime": format_rfc3339_ns(int(t)),
                     "flag": qc_flags.encode(float(f), "simple")}
                    for t, f in zip(column.timestamps, column.flags)],
            })
        return _canonical_json({"report": result.report.to_dict(),
                                "canonical_config": parsed.canonical_text,
                                "config_hash": parsed.config_hash,
                                "columns": flags})

    @app.get("/platform/v1/dashboards/{share_token}")
    def get_dashboard(share_token: str):
        return _canonical_json(platform.get_dashboard(share_token))

    @app.delete("/platform/v1/things/{thing_uuid}/share-token")
    def revoke_share(thing_uuid: str, request: Request):
        require(request, "operator")
        platform.revoke_share_token(thing_uuid)
        return _canonical_json({"revoked": True})

    @app.post("/platform/v1/tokens", status_code=201)
    async def issue_token(request: Request):
        require(request, "admin")
        body = await request.json()
        role = body.get("role", "operator")
        token_id, secret = platform.tokens.issue_token(role)
        return _canonical_json({"id": token_id, "role": role, "token": secret},
                               status_code=201)

    @app.delete("/platform/v1/tokens/{token_id}")
    def revoke_token(token_id: int, request: Request):
        require(request, "admin")
        if not platform.tokens.revoke_token(token_id):
            raise NotFoundError(f"unknown token id {token_id}")
        return _canonical_json({"revoked": True})

    # -- SensorThings ------------------------------------------------------------------

    def sta_auth(request: Request, ds_scope=None):
        """Any valid platform token, or a share token whose scope covers
        the requested datastream."""
        token = _bearer(request)
        if platform.tokens.check(token):
            return
        share = request.query_params.get("share_token", "")
        if share and ds_scope is not None:
            allowed = platform.share_token_scope(share)
            if allowed is not None and ds_scope in allowed:
                return
            raise NotFoundError("share token does not cover this datastream")
        raise AuthError("missing or invalid token")

    @app.get("/v1.1/")
    @app.get("/v1.1")
    def sta_root():
        return _canonical_json(sta.root_document())

    @app.get("/v1.1/{segment}")
    def sta_first(segment: str, request: Request):
        match = _ENTITY_RE.match(segment)
        raw_query = request.url.query
        if match:
            collection, iot_id = match.group(1), int(match.group(2))
            kind = _kind_of(collection)
            query = sta.parse(kind, raw_query)
            if collection == "Datastreams":
                sta_auth(request, ds_scope=iot_id)
            else:
                sta_auth(request)
            return _canonical_json(sta.get_entity(collection, iot_id, query))
        sta_auth(request)
        kind = _kind_of(segment)
        query = sta.parse(kind, raw_query)
        return _canonical_json(sta.list_collection(segment, query))

    @app.get("/v1.1/{segment}/{navigation}")
    def sta_nested(segment: str, navigation: str, request: Request):
        match = _ENTITY_RE.match(segment)
        if match is None:
            raise NotFoundError(f"unknown path {segment}/{navigation}")
        collection, iot_id = match.group(1), int(match.group(2))
        parent_kind = _kind_of(collection)
        if navigation not in _NAVS_OF[parent_kind]:
            return _error(400, f"{parent_kind} has no navigation {navigation}")
        if navigation in ("Observations",):
            sta_auth(request, ds_scope=iot_id)
        else:
            sta_auth(request)
        raw_query = request.url.query
        if navigation in ("Datastreams", "Observations"):
            nested_kind = _kind_of(navigation)
            query = sta.parse(nested_kind, raw_query)
            return _canonical_json(
                sta.list_collection(navigation, query, (parent_kind, iot_id)))
        # single-entity navigation (Thing, Sensor, ObservedProperty, Datastream)
        doc = sta.expand(parent_kind, iot_id, navigation)
        if doc is None:
            raise NotFoundError(f"{parent_kind}({iot_id}) has no {navigation}")
        return _canonical_json(doc)

    return app


_KINDS = {"Things": "Thing", "Datastreams": "Datastream",
          "Observations": "Observation", "Sensors": "Sensor",
          "ObservedProperties": "ObservedProperty"}


def _kind_of(collection: str) -> str:
    kind = _KINDS.get(collection)
    if kind is None:
        raise NotFoundError(f"unknown collection {collection}")
    return kind


def _thing_doc(thing) -> dict:
    return {
        "uuid": thing.uuid,
        "name": thing.name,
        "description": thing.description,
        "transport": thing.transport,
        "parser_profile": thing.parser_profile.to_dict(),
        "created_at": format_rfc3339_ns(thing.created_at),
        "datastreams": [{
            "id": ds.id, "position": ds.position, "name": ds.name,
            "unit": ds.unit, "device_id": ds.device_id,
            "observed_property": {
                "name": ds.observed_property_name,
                "definition": ds.observed_property_definition or None,
            }} for ds in thing.datastreams],
    }


def _attachment_doc(a) -> dict:
    return {
        "id": a.id, "thing_uuid": a.thing_uuid, "config": a.config_text,
        "config_hash": a.config_hash, "schedule": a.schedule,
        "interval_ms": a.interval_ms, "lookback_ns": a.lookback_ns,
        "enabled": a.enabled,
    }
