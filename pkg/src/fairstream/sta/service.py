"""Read-only SensorThings service over the platform, registry and store.

Query options apply in the order filter -> orderby -> skip -> top;
"@iot.nextLink" appears exactly when more results remain.  Small
collections (Things, Datastreams, Sensors, ObservedProperties) evaluate
filters per entity; Observations evaluate vectorized over the stored
columns so large datastreams stay cheap until pagination slices them.

The service never mutates anything: it holds only read handles.
"""

from __future__ import annotations

from urllib.parse import urlencode

import numpy as np

from ..errors import NotFoundError
from .entities import (
    NAVIGATIONS,
    decode_observation_iot_id,
    observation_iot_id,
    observation_properties,
    serialize_entity,
    self_link,
)
from .query import PROPERTIES, StaQuery, parse_query

_COLLECTIONS = {
    "Things": "Thing",
    "Datastreams": "Datastream",
    "Observations": "Observation",
    "Sensors": "Sensor",
    "ObservedProperties": "ObservedProperty",
}


class UnknownNavigation(NotFoundError):
    pass


class StaService:
    def __init__(self, platform, registry, store, base_url="http://localhost",
                 max_top=1000):
        self.platform = platform
        self.registry = registry
        self.store = store
        self.base_url = base_url.rstrip("/")
        self.max_top = max_top

    # -- root ---------------------------------------------------------------

    def root_document(self) -> dict:
        return {
            "value": [
                {"name": name, "url": f"{self.base_url}/v1.1/{name}"}
                for name in sorted(_COLLECTIONS)
            ],
            "serverSettings": {
                "conformance": [
                    "entities: Thing, Datastream, Observation, Sensor,"
                    " ObservedProperty (read-only)",
                    "queryOptions: $top, $skip, $orderby, $select,"
                    " $expand (depth 1), $filter (eq ne gt ge lt le, and/or/not,"
                    " numeric and ISO-8601 literals)",
                ],
            },
        }

    def parse(self, kind: str, raw_query) -> StaQuery:
        return parse_query(raw_query, kind, navigations=NAVIGATIONS[kind],
                           max_top=self.max_top)

    # -- entity loading -------------------------------------------------------

    def _thing_rows(self):
        rows = []
        for i, thing in enumerate(self.platform.list_things(), start=1):
            rows.append((i, {
                "name": thing.name,
                "description": thing.description,
                "properties": {"uuid": thing.uuid, "transport": thing.transport},
            }, thing))
        return rows

    def _thing_iot_id(self, uuid):
        for iot_id, _, thing in self._thing_rows():
            if thing.uuid == uuid:
                return iot_id
        raise NotFoundError(f"unknown thing {uuid}")

    def _datastream_rows(self, thing_uuid=None):
        streams = (self.platform.datastreams_of(thing_uuid) if thing_uuid
                   else self.platform.list_datastreams())
        return [(ds.id, {
            "name": ds.name,
            "description": "",
            "unit": ds.unit,
            "unitOfMeasurement": {"name": None, "symbol": ds.unit, "definition": None},
            "observationType": "http://www.opengis.net/def/observationType/"
                               "OGC-OM/2.0/OM_Measurement",
        }, ds) for ds in streams]

    def _sensor_rows(self):
        rows = []
        for device_id in self.registry.device_ids():
            device = self.registry.get_device(device_id)
            rows.append((device.id, {
                "name": device.short_name,
                "description": device.description,
                "metadata": f"{self.base_url}/registry/v1/devices/{device.id}/sensorml",
            }, device))
        return rows

    def _observed_property_rows(self):
        return [(ds.id, {
            "name": ds.observed_property_name,
            "definition": ds.observed_property_definition or None,
        }, ds) for ds in self.platform.list_datastreams()]

    # -- collections ------------------------------------------------------------

    def list_collection(self, collection: str, query: StaQuery,
                        parent: tuple | None = None) -> dict:
        """parent is (kind, iot_id) for nested paths like
        Datastreams(1)/Observations."""
        kind = _COLLECTIONS.get(collection)
        if kind is None:
            raise NotFoundError(f"unknown collection {collection}")
        if kind == "Observation":
            return self._list_observations(query, parent)
        rows = self._scoped_rows(kind, parent)
        if query.filter is not None:
            rows = [r for r in rows if query.filter.eval_scalar(r[1])]
        for prop, direction in reversed(query.orderby):
            rows.sort(key=lambda r: (r[1].get(prop) is None, r[1].get(prop)),
                      reverse=(direction == "desc"))
        if not query.orderby:
            rows.sort(key=lambda r: r[0])
        total_after_filter = len(rows)
        rows = rows[query.skip:query.skip + query.top]
        value = [self._serialize_row(kind, iot_id, props, query)
                 for iot_id, props, _ in rows]
        return self._page(collection, query, value, total_after_filter, parent)

    def _scoped_rows(self, kind, parent):
        if kind == "Thing":
            return self._thing_rows()
        if kind == "Datastream":
            if parent is None:
                return self._datastream_rows()
            parent_kind, parent_id = parent
            if parent_kind == "Thing":
                things = self.platform.list_things()
                if not (1 <= parent_id <= len(things)):
                    raise NotFoundError(f"unknown Thing({parent_id})")
                return self._datastream_rows(things[parent_id - 1].uuid)
            if parent_kind == "Sensor":
                device = self.registry.get_device(parent_id)
                return [row for row in self._datastream_rows()
                        if row[2].device_id == device.id]
            raise NotFoundError(f"no Datastreams under {parent_kind}")
        if kind == "Sensor":
            return self._sensor_rows()
        if kind == "ObservedProperty":
            return self._observed_property_rows()
        raise NotFoundError(kind)

    def _list_observations(self, query: StaQuery, parent):
        if parent is None or parent[0] != "Datastream":
            raise NotFoundError("Observations are reachable through"
                                " Datastreams(id)/Observations")
        ds_id = parent[1]
        self.platform.get_datastream(ds_id)  # 404 on unknown parent
        flag_scheme = query.extra.get("flag_scheme", "simple")
        res = self.store.query_range(ds_id, -(1 << 62), 1 << 62, with_flags=True)
        columns = {
            "result": res.values,
            "phenomenonTime": res.timestamps.astype(np.float64),
            "resultTime": res.result_times.astype(np.float64),
            "resultTime?present": res.result_times >= 0,
        }
        mask = np.ones(len(res.timestamps), dtype=bool)
        if query.filter is not None:
            mask = query.filter.eval_vector(columns)
        idx = np.flatnonzero(mask)
        order_cols = query.orderby or [("phenomenonTime", "asc")]
        keys = []
        for prop, direction in order_cols:
            col = columns[prop][idx]
            keys.append(-col if direction == "desc" else col)
        keys.append(idx)  # stable tiebreak
        order = np.lexsort(tuple(reversed(keys)))
        idx = idx[order]
        total_after_filter = len(idx)
        idx = idx[query.skip:query.skip + query.top]
        value = []
        for i in idx.tolist():
            t = int(res.timestamps[i])
            rt = int(res.result_times[i]) if res.result_times[i] >= 0 else None
            props = observation_properties(
                ds_id, t, float(res.values[i]), rt, float(res.flags[i]), flag_scheme)
            value.append(serialize_entity(
                "Observation", observation_iot_id(ds_id, t), props,
                self.base_url, select=query.select))
        return self._page("Observations", query, value, total_after_filter,
                          parent)

    def _page(self, collection, query, value, total_after_filter, parent):
        doc = {"value": value}
        if query.skip + query.top < total_after_filter:
            options = query.canonical_options()
            options["$skip"] = str(query.skip + query.top)
            options.setdefault("$top", str(query.top))
            options.update(query.extra)
            qs = urlencode(sorted(options.items()))
            prefix = self.base_url + "/v1.1"
            if parent is not None:
                prefix += f"/{_collection_of_kind(parent[0])}({parent[1]})"
            doc["@iot.nextLink"] = f"{prefix}/{collection}?{qs}"
        return doc

    # -- single entities -----------------------------------------------------------

    def get_entity(self, collection: str, iot_id: int, query: StaQuery) -> dict:
        kind = _COLLECTIONS.get(collection)
        if kind is None:
            raise NotFoundError(f"unknown collection {collection}")
        if kind == "Observation":
            ds_id, t = decode_observation_iot_id(iot_id)
            self.platform.get_datastream(ds_id)
            res = self.store.query_range(ds_id, t, t + 1, with_flags=True)
            if len(res) == 0:
                raise NotFoundError(f"unknown Observation({iot_id})")
            props = observation_properties(
                ds_id, t, float(res.values[0]),
                int(res.result_times[0]) if res.result_times[0] >= 0 else None,
                float(res.flags[0]), query.extra.get("flag_scheme", "simple"))
            return serialize_entity("Observation", iot_id, props, self.base_url,
                                    select=query.select)
        for row_id, props, _ in self._scoped_rows(kind, None):
            if row_id == iot_id:
                doc = self._serialize_row(kind, iot_id, props, query)
                return doc
        raise NotFoundError(f"unknown {kind}({iot_id})")

    def _serialize_row(self, kind, iot_id, props, query):
        doc = serialize_entity(kind, iot_id, props, self.base_url,
                               select=query.select)
        if query.expand:
            doc[query.expand] = self.expand(kind, iot_id, query.expand)
        return doc

    # -- navigation ---------------------------------------------------------------

    def expand(self, kind: str, iot_id: int, navigation: str):
        """Depth-1 expansion: the related entities, fully serialized."""
        if navigation not in NAVIGATIONS[kind]:
            raise UnknownNavigation(f"{kind} has no navigation {navigation}")
        empty = StaQuery()
        if navigation == "Datastreams":
            parent_kind = "Thing" if kind == "Thing" else "Sensor"
            return self.list_collection("Datastreams", empty,
                                        (parent_kind, iot_id))["value"]
        if navigation == "Observations":
            return self.list_collection("Observations", empty,
                                        ("Datastream", iot_id))["value"]
        if navigation == "Thing":
            ds = self.platform.get_datastream(iot_id)
            thing_iot = self._thing_iot_id(ds.thing_uuid)
            return self.get_entity("Things", thing_iot, empty)
        if navigation == "Sensor":
            ds = self.platform.get_datastream(iot_id)
            if ds.device_id is None:
                return None
            return self.get_entity("Sensors", ds.device_id, empty)
        if navigation == "ObservedProperty":
            return self.get_entity("ObservedProperties", iot_id, empty)
        if navigation == "Datastream":
            ds_id, _ = decode_observation_iot_id(iot_id)
            return self.get_entity("Datastreams", ds_id, empty)
        raise UnknownNavigation(navigation)


def _collection_of_kind(kind: str) -> str:
    return kind + "s" if kind != "ObservedProperty" else "ObservedProperties"
