"""
SQLAlchemy-based history ledger connection and writes.
"""

import logging
import os
from datetime import datetime
from typing import Iterable, Mapping, Optional

from sqlalchemy import create_engine, select
from sqlalchemy.orm import Session, sessionmaker

from src.models.database import Base, EpochRecord, FrameResult, SequenceRecord
from src.models.supervision import SequenceState

logger = logging.getLogger(__name__)


def init_database(db_path: str) -> sessionmaker:
    """Create the ledger tables and return a session factory."""
    if db_path == ":memory:":
        url = "sqlite://"
    else:
        # Get absolute path for database
        db_path = os.path.abspath(db_path)
        db_dir = os.path.dirname(db_path)
        if db_dir:
            os.makedirs(db_dir, exist_ok=True)
        url = f"sqlite:///{db_path}"

    engine = create_engine(url, future=True)
    Base.metadata.create_all(engine)
    logger.info("History ledger ready at %s", db_path)
    return sessionmaker(bind=engine, future=True)


def _sequence(session: Session, state: SequenceState) -> SequenceRecord:
    record = session.execute(select(SequenceRecord).filter_by(sequence_id=state.sequence_id)).scalar_one_or_none()
    if record is None:
        record = SequenceRecord(sequence_id=state.sequence_id)
        session.add(record)
    record.mode = state.mode.value
    record.unfreeze_epoch = state.unfreeze_epoch
    record.offline_height = state.offline_height
    record.h_star = state.h_star
    record.last_updated = datetime.utcnow()
    return record


def record_epoch(
    session_factory: sessionmaker,
    state: SequenceState,
    frames: Iterable[Mapping],
    frames_skipped: int = 0,
):
    """Store the state's latest epoch and its frame outcomes."""
    if not state.history:
        return
    latest = state.history[-1]
    frames = list(frames)

    with session_factory() as session:
        try:
            sequence = _sequence(session, state)
            epoch = EpochRecord(
                epoch=latest.epoch,
                epoch_height=latest.epoch_height,
                moving_height=latest.moving_height,
                h_star=latest.h_star,
                frames_used=sum(1 for f in frames if f.get("status") == "ok"),
                frames_skipped=frames_skipped,
            )
            sequence.epochs.append(epoch)
            for frame in frames:
                epoch.frames.append(
                    FrameResult(
                        frame_id=str(frame["frame_id"]),
                        status=str(frame.get("status", "ok")),
                        scaled_height=frame.get("scaled_height"),
                        inliers=int(frame.get("inliers") or 0),
                        total_loss=frame.get("total"),
                        error=frame.get("error"),
                    )
                )
            session.commit()
        except Exception as e:
            logger.error("Error recording epoch %s of %s: %s", latest.epoch, state.sequence_id, e)
            session.rollback()
            raise


def sequence_history(session_factory: sessionmaker, sequence_id: str) -> Optional[dict]:
    """Ledger view of one sequence, or None if never recorded."""
    with session_factory() as session:
        record = session.execute(select(SequenceRecord).filter_by(sequence_id=sequence_id)).scalar_one_or_none()
        return record.to_dict() if record else None
