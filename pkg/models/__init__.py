"""
Data models package for the Low Vision GUI Checker.

This package contains SQLAlchemy ORM models for recorded check results.
"""

from models.base import Base
from models.finding import CheckedLayout, Finding

__all__ = ["Base", "CheckedLayout", "Finding"]
