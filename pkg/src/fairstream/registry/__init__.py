from .models import Contact, Device, MeasuredQuantity, Mount
from .store import (
    AlreadyMinted,
    DuplicateSerial,
    OverlapError,
    RegistryStore,
    UnknownDevice,
)
from .jsonapi import export_jsonapi
from .sensorml import export_sensorml, extract_sensorml, validate_sensorml

__all__ = [
    "Contact", "Device", "MeasuredQuantity", "Mount",
    "RegistryStore", "DuplicateSerial", "OverlapError", "UnknownDevice",
    "AlreadyMinted", "export_jsonapi", "export_sensorml",
    "extract_sensorml", "validate_sensorml",
]
