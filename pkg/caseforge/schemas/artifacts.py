# caseforge/schemas/artifacts.py
from enum import Enum
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Cell = Union[None, int, float, str, bytes]


class PrefsType(str, Enum):
    STRING = "string"
    INT = "int"
    LONG = "long"
    FLOAT = "float"
    BOOLEAN = "boolean"
    STRING_SET = "set"


_INT64_MIN = -(2 ** 63)
_INT64_MAX = 2 ** 63 - 1


class PrefsValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    type: PrefsType
    value: Union[bool, int, float, str, Tuple[str, ...]]
    json_embedded: bool = False

    @model_validator(mode="after")
    def validate_typed_value(self) -> "PrefsValue":
        if self.json_embedded and self.type is not PrefsType.STRING:
            raise ValueError("json_embedded applies to string values only")
        checks = {
            PrefsType.STRING: lambda v: isinstance(v, str),
            PrefsType.INT: lambda v: type(v) is int and _INT64_MIN <= v <= _INT64_MAX,
            PrefsType.LONG: lambda v: type(v) is int and _INT64_MIN <= v <= _INT64_MAX,
            PrefsType.FLOAT: lambda v: isinstance(v, float),
            PrefsType.BOOLEAN: lambda v: isinstance(v, bool),
            PrefsType.STRING_SET: lambda v: isinstance(v, tuple),
        }
        if not checks[self.type](self.value):
            raise ValueError(f"value {self.value!r} does not fit type {self.type.value}")
        return self

    @classmethod
    def string(cls, value: str, json_embedded: bool = False) -> "PrefsValue":
        return cls(type=PrefsType.STRING, value=value, json_embedded=json_embedded)

    def to_json(self):
        if self.type is PrefsType.STRING_SET:
            return list(self.value)
        return self.value


class PrefsDocument(BaseModel):
    """Ordered key/value entries of one shared_prefs file."""
    model_config = ConfigDict(frozen=True)

    entries: List[Tuple[str, PrefsValue]] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list, exclude=True, repr=False)

    @field_validator("entries")
    @classmethod
    def validate_unique_keys(cls, entries: List[Tuple[str, PrefsValue]]) -> List[Tuple[str, PrefsValue]]:
        keys = [key for key, _ in entries]
        if len(keys) != len(set(keys)):
            raise ValueError("shared_prefs keys must be unique")
        return entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrefsDocument):
            return NotImplemented
        return self.entries == other.entries

    def get(self, key: str) -> Optional[PrefsValue]:
        return dict(self.entries).get(key)


class SqliteTable(BaseModel):
    name: str
    columns: List[str]
    rows: List[Tuple[Cell, ...]] = Field(default_factory=list)
    rowids: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_row_width(self) -> "SqliteTable":
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise ValueError(f"table {self.name}: row of {len(row)} cells, expected {width}")
        return self

    def records(self) -> List[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


class CellAnnotation(BaseModel):
    """A best-effort hint about one cell, never an assertion."""
    column: str
    rowid: Optional[int] = None
    key: Optional[str] = None
    annotation: str
