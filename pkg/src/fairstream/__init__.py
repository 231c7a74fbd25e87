"""fairstream: desk-scale FAIR time-series management.

Subpackages:
    registry  -- sensor metadata registry (devices, mounts, PIDs, exports)
    store     -- embedded time-series store (WAL, segments, flag columns)
    qc        -- quality-control engine (DSL, function catalog, provenance)
    ingest    -- ingest gateway (parser profiles, MQTT, HTTP push, drop dir)
    sta       -- SensorThings-style read API (entities, OData-subset queries)
    platform  -- orchestration (things, credentials, dashboards, QC scheduling)
"""

__version__ = "0.1.0"

ENGINE_VERSION = __version__
