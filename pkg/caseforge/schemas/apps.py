# caseforge/schemas/apps.py
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from caseforge.validators.common_validators import validate_package_name

# Private-storage subdirectories, in report order.
CATEGORIES = ("shared_prefs", "databases", "files", "cache", "lib", "webview", "other")


class AppRecord(BaseModel):
    package: str
    private_dir: str
    categories: List[str] = Field(default_factory=list)
    external_dir: Optional[str] = None
    apk_path: Optional[str] = None
    is_system_app: bool = False

    @field_validator("package")
    @classmethod
    def validate_package(cls, package: str) -> str:
        return validate_package_name(package)

    @field_validator("categories")
    @classmethod
    def validate_categories(cls, categories: List[str]) -> List[str]:
        unknown = set(categories) - set(CATEGORIES)
        if unknown:
            raise ValueError(f"unknown categories: {', '.join(sorted(unknown))}")
        return sorted(set(categories), key=CATEGORIES.index)


class ExternalStorageRecord(BaseModel):
    package: str
    external_dir: str
    orphan: bool


class ApkOrigin(str, Enum):
    USER = "user"
    SYSTEM = "system"


class ApkRecord(BaseModel):
    package: str
    apk_path: str
    origin: ApkOrigin


class AppScanResult(BaseModel):
    apps: List[AppRecord] = Field(default_factory=list)
    external: List[ExternalStorageRecord] = Field(default_factory=list)
    apks: List[ApkRecord] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
