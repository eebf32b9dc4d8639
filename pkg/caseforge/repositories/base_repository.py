# caseforge/repositories/base_repository.py
"""
Base Repository Pattern

Common database operations for the ORM models the toolkit writes.
"""

from typing import Generic, Type, TypeVar

from sqlalchemy.orm import Session

from caseforge.db.session import Base

ModelType = TypeVar("ModelType", bound=Base)


class BaseRepository(Generic[ModelType]):
    """Base repository with the operations every model-specific repository shares."""

    def __init__(self, model: Type[ModelType], db: Session):
        self.model = model
        self.db = db

    def create(self, **data) -> ModelType:
        """Add and flush a record so constraint violations surface at the offending row."""
        instance = self.model(**data)
        self.db.add(instance)
        self.db.flush()
        return instance
