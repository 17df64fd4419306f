"""
Base models for SQLAlchemy ORM.

Re-exports the declarative base and session helpers from utils.db.
"""

from utils.db import Base, db_session, init_db

__all__ = ["Base", "db_session", "init_db"]
