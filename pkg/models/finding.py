"""
Finding models for recorded check results.

CheckedLayout is one checked file; Finding is one flagged component in it.
"""

from datetime import datetime, timezone

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import relationship

from models.base import Base


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class CheckedLayout(Base):
    """
    Model representing one layout file that went through the checker.

    Re-checking the same path updates this row and replaces its findings.
    """

    __tablename__ = "checked_layouts"

    id = Column(Integer, primary_key=True, index=True)
    path = Column(String, nullable=False, unique=True, index=True)
    n_components = Column(Integer, nullable=False, default=0)
    n_issues = Column(Integer, nullable=False, default=0)
    checked_at = Column(DateTime(timezone=True), nullable=False, default=_utcnow)

    # Relationships
    findings = relationship(
        "Finding", back_populates="layout", cascade="all, delete-orphan"
    )

    def __init__(self, path: str, n_components: int = 0, n_issues: int = 0):
        """
        Initialize a CheckedLayout instance.

        Args:
            path: Layout file path as given to the checker
            n_components: Number of component-nodes in the layout
            n_issues: Number of flagged components
        """
        self.path = path
        self.n_components = n_components
        self.n_issues = n_issues
        self.checked_at = _utcnow()

    def __repr__(self) -> str:
        return f"<CheckedLayout(path='{self.path}', n_issues={self.n_issues})>"


class Finding(Base):
    """Model representing one flagged component of a checked layout."""

    __tablename__ = "findings"

    id = Column(Integer, primary_key=True, index=True)
    layout_id = Column(Integer, ForeignKey("checked_layouts.id"), nullable=False)
    resource_id = Column(String, nullable=False)
    component_type = Column(String, nullable=False)
    class_index = Column(Integer, nullable=False, index=True)
    issue = Column(String, nullable=False)
    probability = Column(Float, nullable=False, default=1.0)  # 0.0 to 1.0
    bounds = Column(String, nullable=False)  # "[x1,y1][x2,y2]"

    # Relationships
    layout = relationship("CheckedLayout", back_populates="findings")

    def __repr__(self) -> str:
        return f"<Finding({self.resource_id} -> {self.issue})>"
