# caseforge/db/session.py
"""
SQLAlchemy plumbing for the SQLite databases the toolkit writes.

The only databases written are simulated-device artifacts (accounts.db) and
test fixtures; evidence databases are always read with the file-format reader
in caseforge.artifacts, never through SQLite itself.
"""

from pathlib import Path

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import NullPool

# Small pages force multi-page b-trees even for desk-scale databases.
DEFAULT_PAGE_SIZE = 512

# Base class for all ORM models
Base = declarative_base()


def create_sqlite_engine(path: Path, page_size: int = DEFAULT_PAGE_SIZE) -> Engine:
    """
    Create an engine for a SQLite file with a fixed page size and a rollback
    journal (no WAL), so the closed file is complete on its own.
    """
    engine = create_engine(f"sqlite:///{path}", echo=False, poolclass=NullPool)

    @event.listens_for(engine, "connect")
    def set_file_format(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute(f"PRAGMA page_size = {int(page_size)}")
        cursor.execute("PRAGMA journal_mode = DELETE")
        cursor.close()

    return engine


def session_factory(engine: Engine) -> sessionmaker:
    return sessionmaker(bind=engine, expire_on_commit=False, autoflush=False)
