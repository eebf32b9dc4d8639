# caseforge/artifacts/shared_prefs.py
"""
shared_prefs XML parser and renderer.

Document shape:

    <map>
        <string name="user">alice</string>
        <int name="n" value="7" />
        <set name="tags"><string>a</string></set>
    </map>
"""

import json
import logging
import xml.etree.ElementTree as ET
from typing import List, Tuple

from pydantic import ValidationError

from caseforge.core.errors import DuplicateKey, MalformedXml
from caseforge.schemas.artifacts import PrefsDocument, PrefsType, PrefsValue

logger = logging.getLogger(__name__)

XML_DECLARATION = "<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n"


def _reject_constant(name: str):
    raise ValueError(f"{name} is not JSON")


def is_embedded_json(text: str) -> bool:
    """True only for a complete JSON object or array; scalars and trailing garbage don't count."""
    try:
        decoded = json.loads(text, parse_constant=_reject_constant)
    except ValueError:
        return False
    return isinstance(decoded, (dict, list))


def _attribute(element: ET.Element, name: str) -> str:
    value = element.get(name)
    if value is None:
        raise MalformedXml(f"<{element.tag}> is missing its '{name}' attribute")
    return value


def _parse_value(element: ET.Element) -> PrefsValue:
    tag = element.tag
    try:
        if tag == "string":
            text = element.text or ""
            return PrefsValue.string(text, json_embedded=is_embedded_json(text))
        if tag in ("int", "long"):
            return PrefsValue(type=PrefsType(tag), value=int(_attribute(element, "value")))
        if tag == "float":
            return PrefsValue(type=PrefsType.FLOAT, value=float(_attribute(element, "value")))
        if tag == "boolean":
            raw = _attribute(element, "value")
            if raw not in ("true", "false"):
                raise MalformedXml(f"boolean value '{raw}' is neither true nor false")
            return PrefsValue(type=PrefsType.BOOLEAN, value=raw == "true")
        if tag == "set":
            members = []
            for child in element:
                if child.tag != "string":
                    raise MalformedXml(f"<set> may only contain <string>, found <{child.tag}>")
                members.append(child.text or "")
            return PrefsValue(type=PrefsType.STRING_SET, value=tuple(members))
    except (ValueError, ValidationError) as e:
        raise MalformedXml(f"bad <{tag}> value: {e}")
    raise KeyError(tag)


def parse_shared_prefs(xml: bytes) -> PrefsDocument:
    """
    Parse one shared_prefs file into typed entries.

    Unknown elements are skipped and reported in the document's warnings.

    Raises:
        MalformedXml: not XML, root is not <map>, or a value cannot be typed
        DuplicateKey: the same name appears twice
    """
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as e:
        raise MalformedXml(f"not well-formed XML: {e}")
    if root.tag != "map":
        raise MalformedXml(f"root element is <{root.tag}>, expected <map>")

    entries: List[Tuple[str, PrefsValue]] = []
    seen = set()
    warnings: List[str] = []
    for element in root:
        name = element.get("name")
        try:
            value = _parse_value(element)
        except KeyError:
            message = f"UnknownElement: <{element.tag}> '{name}' skipped"
            logger.warning(message)
            warnings.append(message)
            continue
        if name is None:
            raise MalformedXml(f"<{element.tag}> entry without a name")
        if name in seen:
            raise DuplicateKey(f"key '{name}' appears more than once")
        seen.add(name)
        entries.append((name, value))

    return PrefsDocument(entries=entries, warnings=warnings)


def render_shared_prefs(document: PrefsDocument) -> bytes:
    """Render a document in the layout Android writes."""
    root = ET.Element("map")
    for name, value in document.entries:
        if value.type is PrefsType.STRING:
            element = ET.SubElement(root, "string", name=name)
            element.text = value.value
        elif value.type is PrefsType.STRING_SET:
            element = ET.SubElement(root, "set", name=name)
            for member in value.value:
                ET.SubElement(element, "string").text = member
        elif value.type is PrefsType.BOOLEAN:
            ET.SubElement(root, "boolean", name=name, value="true" if value.value else "false")
        elif value.type is PrefsType.FLOAT:
            ET.SubElement(root, "float", name=name, value=repr(value.value))
        else:
            ET.SubElement(root, value.type.value, name=name, value=str(value.value))
    ET.indent(root, space="    ")
    return (XML_DECLARATION + ET.tostring(root, encoding="unicode") + "\n").encode("utf-8")


def prefs_to_json(document: PrefsDocument) -> List[dict]:
    return [
        {"key": name, "type": value.type.value, "value": value.to_json(), "json_embedded": value.json_embedded}
        for name, value in document.entries
    ]
