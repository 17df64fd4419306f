"""
Database utilities for the Low Vision GUI Checker.

This module provides the SQLAlchemy engine, session scope and table setup
behind the findings store.
"""

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Generator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from config import config
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)

# Create the Base class for declarative models
Base = declarative_base()

# Bound lazily so that --config and tests can point at another database
_engine: Optional[Engine] = None
SessionLocal = sessionmaker(autocommit=False, autoflush=False)


def bind_engine(database_url: Optional[str] = None) -> Engine:
    """
    Create the engine for a database URL and bind sessions to it.

    Args:
        database_url: SQLAlchemy URL (defaults to config DATABASE_URL)

    Returns:
        The new engine
    """
    global _engine
    url = database_url or config.DATABASE_URL
    if url.startswith("sqlite:///") and url != "sqlite:///:memory:":
        Path(url[len("sqlite:///"):]).parent.mkdir(parents=True, exist_ok=True)
    if _engine is not None:
        _engine.dispose()
    _engine = create_engine(url)
    SessionLocal.configure(bind=_engine)
    logger.debug(f"Database bound to {url}")
    return _engine


def get_engine() -> Engine:
    return _engine if _engine is not None else bind_engine()


@contextmanager
def db_session() -> Generator[Session, None, None]:
    """
    Provide a transactional scope around a series of operations.

    This context manager handles creating and closing the session,
    as well as rolling back transactions on error.

    Yields:
        SQLAlchemy session
    """
    get_engine()
    session = SessionLocal()
    try:
        yield session
        session.commit()
    except Exception as e:
        session.rollback()
        logger.error(f"Database error: {e}")
        raise
    finally:
        session.close()


def init_db() -> None:
    """
    Initialize the database by creating all tables.

    This should be called before the store is first used.
    """
    try:
        Base.metadata.create_all(bind=get_engine())
        logger.debug("Database tables created successfully")
    except Exception as e:
        logger.error(f"Error creating database tables: {e}")
        raise


def get_or_create(
    session: Session, model: Any, defaults: Optional[dict] = None, **kwargs
) -> tuple[Any, bool]:
    """
    Get an instance of a model, or create it if it doesn't exist.

    Args:
        session: SQLAlchemy session
        model: SQLAlchemy model class
        defaults: Dictionary of default values for creation
        **kwargs: Filters for query

    Returns:
        Tuple of (instance, created) where created is a boolean
    """
    instance = session.query(model).filter_by(**kwargs).first()
    if instance:
        return instance, False

    params = {**kwargs}
    if defaults:
        params.update(defaults)

    instance = model(**params)
    session.add(instance)
    session.flush()
    return instance, True
