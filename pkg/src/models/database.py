"""
SQLAlchemy models for the run-history ledger.
"""

from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class SequenceRecord(Base):
    """One optimized sequence and its latest pseudo camera height."""

    __tablename__ = "sequences"

    id = Column(Integer, primary_key=True)
    sequence_id = Column(String(200), nullable=False, unique=True)
    mode = Column(String(20), default="online")
    unfreeze_epoch = Column(Integer)
    offline_height = Column(Float)
    h_star = Column(Float)
    created_at = Column(DateTime, default=datetime.utcnow)
    last_updated = Column(DateTime)

    # Relationships
    epochs = relationship(
        "EpochRecord", back_populates="sequence", cascade="all, delete-orphan", order_by="EpochRecord.epoch"
    )

    def to_dict(self):
        return {
            "sequenceId": self.sequence_id,
            "mode": self.mode,
            "unfreezeEpoch": self.unfreeze_epoch,
            "offlineHeight": self.offline_height,
            "hStar": self.h_star,
            "epochs": [epoch.to_dict() for epoch in self.epochs],
            "lastUpdated": self.last_updated.isoformat() if self.last_updated else None,
        }


class EpochRecord(Base):
    """Epoch summary: representative height and the supervision it produced."""

    __tablename__ = "epoch_history"

    id = Column(Integer, primary_key=True)
    sequence_pk = Column(Integer, ForeignKey("sequences.id"), nullable=False)
    epoch = Column(Integer, nullable=False)
    epoch_height = Column(Float)
    moving_height = Column(Float)
    h_star = Column(Float)
    frames_used = Column(Integer, default=0)
    frames_skipped = Column(Integer, default=0)
    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    sequence = relationship("SequenceRecord", back_populates="epochs")
    frames = relationship("FrameResult", back_populates="epoch", cascade="all, delete-orphan")

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "epochHeight": self.epoch_height,
            "movingHeight": self.moving_height,
            "hStar": self.h_star,
            "framesUsed": self.frames_used,
            "framesSkipped": self.frames_skipped,
        }


class FrameResult(Base):
    """Outcome of one frame in one epoch."""

    __tablename__ = "frame_history"

    id = Column(Integer, primary_key=True)
    epoch_pk = Column(Integer, ForeignKey("epoch_history.id"), nullable=False)
    frame_id = Column(String(200), nullable=False)
    status = Column(String(20), nullable=False)
    scaled_height = Column(Float)
    inliers = Column(Integer, default=0)
    total_loss = Column(Float)
    error = Column(Text)

    # Relationships
    epoch = relationship("EpochRecord", back_populates="frames")

    def to_dict(self):
        return {
            "frameId": self.frame_id,
            "status": self.status,
            "scaledHeight": self.scaled_height,
            "inliers": self.inliers,
            "totalLoss": self.total_loss,
            "error": self.error,
        }
