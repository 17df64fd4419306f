"""
Findings Store for the Low Vision GUI Checker.

Records check results in the database and answers questions about them:
how often each issue occurs, what was found in a given layout, and which
layouts have the most issues.
"""

import logging
from typing import Any, Dict, List, Optional

from sqlalchemy import desc, func

from checker import ISSUE_CLASSES, CheckRun, FileResult
from feature_encoder import ISSUE_NAMES
from layout_parser import format_bounds
from models.base import db_session, init_db
from models.finding import CheckedLayout, Finding
from utils.db import bind_engine, get_or_create
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)


class FindingStore:
    """
    Store and query recorded findings.

    This class provides methods to:
    1. Record the report of a checked layout (replacing older findings)
    2. Count findings per issue class
    3. List the findings of one layout
    4. List the layouts with the most issues
    """

    def __init__(self, database_url: Optional[str] = None):
        """
        Initialize the FindingStore, creating tables if needed.

        Args:
            database_url: Rebind the session factory to this database first
        """
        if database_url:
            bind_engine(database_url)
        init_db()

    def record_report(self, result: FileResult) -> Optional[int]:
        """
        Record one file's report.

        Args:
            result: Checked file; failed files are not recorded

        Returns:
            Database id of the CheckedLayout row, or None for a failed file
        """
        if not result.ok:
            logger.debug(f"Not recording failed file {result.path}")
            return None

        report = result.report
        with db_session() as db:
            layout, created = get_or_create(db, CheckedLayout, path=report.path)
            if not created:
                layout.findings.clear()

            layout.n_components = report.n_components
            layout.n_issues = len(report.flags)
            for flag in report.flags:
                layout.findings.append(
                    Finding(
                        resource_id=flag.resource_id,
                        component_type=flag.component_type,
                        class_index=flag.class_index,
                        issue=flag.issue,
                        probability=flag.probability,
                        bounds=format_bounds(flag.bounds),
                    )
                )
            db.flush()
            logger.debug(f"Recorded {len(report.flags)} findings for {report.path}")
            return layout.id

    def record_run(self, run: CheckRun) -> int:
        """Record every successful file of a run; returns how many were recorded."""
        recorded = sum(1 for result in run.results if self.record_report(result) is not None)
        logger.info(f"Recorded {recorded} checked layouts")
        return recorded

    def get_issue_frequency(self) -> List[Dict[str, Any]]:
        """
        Count findings per issue class, most frequent first.

        Every issue class is listed, with count 0 when it never occurred.

        Returns:
            List of {"class_index", "issue", "count"} dictionaries
        """
        with db_session() as db:
            rows = dict(
                db.query(Finding.class_index, func.count(Finding.id))
                .group_by(Finding.class_index)
                .all()
            )
        frequency = [
            {"class_index": int(c), "issue": ISSUE_NAMES[c], "count": int(rows.get(int(c), 0))}
            for c in ISSUE_CLASSES
        ]
        return sorted(frequency, key=lambda row: (-row["count"], row["class_index"]))

    def get_findings_for_layout(self, path: str) -> List[Dict[str, Any]]:
        """
        Get the recorded findings of one layout.

        Args:
            path: Layout path as it was checked

        Returns:
            List of finding dictionaries, empty if the layout is unknown
        """
        with db_session() as db:
            findings = (
                db.query(Finding)
                .join(CheckedLayout)
                .filter(CheckedLayout.path == path)
                .order_by(Finding.id)
                .all()
            )
            return [
                {
                    "resource_id": f.resource_id,
                    "component_type": f.component_type,
                    "class_index": f.class_index,
                    "issue": f.issue,
                    "probability": f.probability,
                    "bounds": f.bounds,
                }
                for f in findings
            ]

    def get_layouts_with_issues(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """
        Layouts with at least one finding, most issues first.

        Args:
            limit: Optional maximum number of layouts to return

        Returns:
            List of {"path", "n_components", "n_issues", "checked_at"}
        """
        with db_session() as db:
            query = (
                db.query(CheckedLayout)
                .filter(CheckedLayout.n_issues > 0)
                .order_by(desc(CheckedLayout.n_issues), CheckedLayout.path)
            )
            if limit:
                query = query.limit(limit)
            return [
                {
                    "path": layout.path,
                    "n_components": layout.n_components,
                    "n_issues": layout.n_issues,
                    "checked_at": layout.checked_at.isoformat(),
                }
                for layout in query.all()
            ]
