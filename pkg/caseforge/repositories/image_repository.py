# caseforge/repositories/image_repository.py
"""
Image Repository

Evidence images (<partition>.img) and their metadata (<partition>.img.meta).
Images are created exactly once and made read-only as soon as they are closed.
"""

import json
import logging
import os
import stat
from contextlib import contextmanager
from pathlib import Path
from typing import BinaryIO, Iterator, List

from pydantic import ValidationError

from caseforge.core.errors import EvidenceError, EvidenceOverwrite, NotFound
from caseforge.schemas.acquisition import AcquiredImage

logger = logging.getLogger(__name__)

IMAGE_SUFFIX = ".img"
META_SUFFIX = ".img.meta"
PARTIAL_SUFFIX = ".partial"
_READ_ONLY = stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH


class ImageRepository:

    def __init__(self, case_dir: Path):
        self.case_dir = Path(case_dir)

    def image_path(self, partition: str) -> Path:
        return self.case_dir / f"{partition}{IMAGE_SUFFIX}"

    def meta_path(self, partition: str) -> Path:
        return self.case_dir / f"{partition}{META_SUFFIX}"

    def exists(self, partition: str) -> bool:
        return self.image_path(partition).exists() or self.meta_path(partition).exists()

    @contextmanager
    def create(self, partition: str) -> Iterator[BinaryIO]:
        """
        Open a new image for writing. Bytes go to <partition>.img.partial and
        are linked into place only when the block exits cleanly; an existing
        image is never touched.

        Raises:
            EvidenceOverwrite: <partition>.img or its metadata already exists
        """
        path = self.image_path(partition)
        if path.exists() or self.meta_path(partition).exists():
            raise EvidenceOverwrite(f"{path.name} already exists; evidence files are never overwritten")
        partial = path.with_name(path.name + PARTIAL_SUFFIX)
        partial.unlink(missing_ok=True)
        try:
            with partial.open("xb") as handle:
                yield handle
            os.chmod(partial, _READ_ONLY)
            try:
                os.link(partial, path)
            except FileExistsError:
                raise EvidenceOverwrite(f"{path.name} appeared while acquiring; left untouched")
        finally:
            partial.unlink(missing_ok=True)

    def save_meta(self, image: AcquiredImage) -> AcquiredImage:
        path = self.meta_path(image.partition)
        try:
            with path.open("x", encoding="utf-8") as handle:
                json.dump(image.model_dump(mode="json"), handle, sort_keys=True, indent=2)
                handle.write("\n")
        except FileExistsError:
            raise EvidenceOverwrite(f"{path.name} already exists")
        os.chmod(path, _READ_ONLY)
        logger.info(f"Saved {path.name} (verified={image.verified})")
        return image

    def get_meta(self, partition: str) -> AcquiredImage:
        path = self.meta_path(partition)
        if not path.exists():
            raise NotFound(f"no image metadata for partition '{partition}'")
        try:
            return AcquiredImage.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise EvidenceError(f"{path.name} is not valid image metadata: {e.errors()[0]['msg']}")

    def get_all(self) -> List[AcquiredImage]:
        """Every acquired image, ordered by file name."""
        names = sorted(p.name[:-len(META_SUFFIX)] for p in self.case_dir.glob(f"*{META_SUFFIX}"))
        return [self.get_meta(name) for name in names]

    def read_bytes(self, partition: str) -> bytes:
        path = self.image_path(partition)
        if not path.exists():
            raise NotFound(f"no image for partition '{partition}'")
        return path.read_bytes()

    def open(self, partition: str) -> BinaryIO:
        return self.image_path(partition).open("rb")
