"""SensorML-style XML export of a device.

A deliberately small subset of the standard system description: one
PhysicalSystem with an identifier (the PID), a classification (the
device type) and one output per measured quantity in position order.
The structural schema the documents must satisfy ships as
sensorml_schema.json next to this module; validate_sensorml() checks a
parsed document against it.

Serialization is hand-rolled for byte determinism (fixed element order,
fixed indentation, XML 1.0 escaping).
"""

from __future__ import annotations

import json
import re
from importlib import resources
from xml.etree import ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from .models import Device, MeasuredQuantity

NAMESPACE = "http://www.opengis.net/sensorml/2.0"

_TOKEN_RE = re.compile(r"[^A-Za-z0-9_.\-]+")


def _load_schema() -> dict:
    data = resources.files("fairstream.registry").joinpath("sensorml_schema.json")
    return json.loads(data.read_text())


SCHEMA = _load_schema()


def output_name(quantity_name: str) -> str:
    """NCName-safe token for the output/@name attribute."""
    token = _TOKEN_RE.sub("_", quantity_name.strip())
    if not token or token[0].isdigit():
        token = "q_" + token
    return token


def export_sensorml(device: Device) -> bytes:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<PhysicalSystem xmlns="{NAMESPACE}">',
        f'  <identifier codeSpace="pid">{escape(device.pid or "")}</identifier>',
        f'  <classification>{escape(device.device_type)}</classification>',
        f'  <shortName>{escape(device.short_name)}</shortName>',
        f'  <manufacturer>{escape(device.manufacturer)}</manufacturer>',
        f'  <model>{escape(device.model)}</model>',
        f'  <serialNumber>{escape(device.serial_number)}</serialNumber>',
    ]
    if device.description:
        lines.append(f'  <description>{escape(device.description)}</description>')
    lines.append('  <outputs>')
    for q in sorted(device.properties, key=lambda q: q.position_index):
        lines.append(f'    <output name={quoteattr(output_name(q.name))}>')
        lines.append(
            f'      <Quantity label={quoteattr(q.name)} uom={quoteattr(q.unit)}'
            f' position="{q.position_index}"/>')
        lines.append('    </output>')
    lines.append('  </outputs>')
    lines.append('</PhysicalSystem>')
    return ("\n".join(lines) + "\n").encode()


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def validate_sensorml(xml_bytes: bytes) -> list:
    """Check a document against the embedded schema; returns violations."""
    problems = []
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        return [f"not well-formed: {exc}"]
    if _local(root.tag) != SCHEMA["root"]:
        problems.append(f"root element is {_local(root.tag)}, expected {SCHEMA['root']}")
    if not root.tag.startswith("{" + SCHEMA["namespace"] + "}"):
        problems.append(f"root element not in namespace {SCHEMA['namespace']}")
    _validate_element(root, problems)
    return problems


def _validate_element(element, problems):
    name = _local(element.tag)
    rules = SCHEMA["elements"].get(name)
    if rules is None:
        problems.append(f"unexpected element <{name}>")
        return
    for attr, required in rules.get("attributes", {}).items():
        if required and attr not in element.attrib:
            problems.append(f"<{name}> missing required attribute {attr!r}")
    if rules.get("text") and not (element.text or "").strip():
        problems.append(f"<{name}> must carry text")
    counts = {}
    for child in element:
        counts[_local(child.tag)] = counts.get(_local(child.tag), 0) + 1
        _validate_element(child, problems)
    for child_name, (lo, hi) in rules.get("children", {}).items():
        n = counts.pop(child_name, 0)
        if n < lo:
            problems.append(f"<{name}> needs at least {lo} <{child_name}>, has {n}")
        if hi is not None and n > hi:
            problems.append(f"<{name}> allows at most {hi} <{child_name}>, has {n}")
    for extra in counts:
        problems.append(f"<{name}> contains undeclared child <{extra}>")


def extract_sensorml(xml_bytes: bytes) -> dict:
    """Pull (pid, device_type, outputs) back out of an exported document."""
    root = ET.fromstring(xml_bytes)
    ns = {"sml": NAMESPACE}
    pid = root.findtext("sml:identifier", namespaces=ns)
    device_type = root.findtext("sml:classification", namespaces=ns)
    outputs = []
    for output in root.findall("sml:outputs/sml:output", namespaces=ns):
        quantity = output.find("sml:Quantity", namespaces=ns)
        outputs.append(MeasuredQuantity(
            name=quantity.get("label"),
            unit=quantity.get("uom"),
            position_index=int(quantity.get("position"))))
    return {"pid": pid, "device_type": device_type, "outputs": outputs}
