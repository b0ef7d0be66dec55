import json
import logging
from datetime import datetime

from sqlalchemy import (Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text,
                        create_engine)
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import DeclarativeBase, relationship, sessionmaker

logger = logging.getLogger(__name__)


class Base(DeclarativeBase):
    pass


class AnalysisRun(Base):
    __tablename__ = 'analysis_run'

    id = Column(Integer, primary_key=True)
    command = Column(String(32), nullable=False)  # describe, classify, matrix, ...
    spec_sha256 = Column(String(64), nullable=False)
    tool_version = Column(String(32), nullable=False)
    exit_code = Column(Integer, default=0)
    payload = Column(Text)  # JSON report as written to disk
    created_at = Column(DateTime, default=datetime.utcnow)

    classifications = relationship('ClassificationRecord', back_populates='run',
                                   cascade='all, delete-orphan', order_by='ClassificationRecord.lambda_abs')

    def __repr__(self):
        return f'<AnalysisRun {self.command} ({self.spec_sha256[:12]})>'

    def to_dict(self):
        return {
            'id': self.id,
            'command': self.command,
            'spec_sha256': self.spec_sha256,
            'tool_version': self.tool_version,
            'exit_code': self.exit_code,
            'payload': json.loads(self.payload) if self.payload else None,
            'created_at': self.created_at.isoformat() if self.created_at else None,
            'classifications': [record.to_dict() for record in self.classifications],
        }


class ClassificationRecord(Base):
    __tablename__ = 'classification_record'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('analysis_run.id'), nullable=False)
    lambda_abs = Column(Float, nullable=False)
    bounded = Column(Boolean, default=False)
    hypercyclic = Column(String(64), nullable=False)  # "yes[hc-iff-sup]", "indeterminate", ...
    mixing = Column(String(64), nullable=False)
    chaotic = Column(String(64), nullable=False)
    subspace = Column(String(64), nullable=False)

    run = relationship('AnalysisRun', back_populates='classifications')

    def __repr__(self):
        return f'<ClassificationRecord |lambda|={self.lambda_abs:g} for run {self.run_id}>'

    def to_dict(self):
        return {
            'id': self.id,
            'run_id': self.run_id,
            'lambda_abs': self.lambda_abs,
            'bounded': self.bounded,
            'hypercyclic': self.hypercyclic,
            'mixing': self.mixing,
            'chaotic': self.chaotic,
            'subspace': self.subspace,
        }


def record_from_report(report):
    """ClassificationRecord from a DynamicsReport"""
    data = report.to_dict()
    return ClassificationRecord(
        lambda_abs=report.lambda_abs,
        bounded=report.bounded,
        hypercyclic=data['hypercyclic'],
        mixing=data['mixing'],
        chaotic=data['chaotic'],
        subspace=data['hypercyclic_subspace'],
    )


def record_run(url, command, spec_sha256, tool_version, payload, reports=(), exit_code=0):
    """Store one CLI run in the ledger at url; returns the run id, or None on failure."""
    try:
        engine = create_engine(url)
        Base.metadata.create_all(engine)
    except SQLAlchemyError as e:
        logger.error(f"Cannot open run ledger at {url}: {str(e)}")
        return None

    Session = sessionmaker(bind=engine)
    session = Session()
    try:
        run = AnalysisRun(
            command=command,
            spec_sha256=spec_sha256,
            tool_version=tool_version,
            exit_code=exit_code,
            payload=json.dumps(payload, sort_keys=True) if payload is not None else None,
        )
        run.classifications = [record_from_report(report) for report in reports]
        session.add(run)
        session.commit()
        logger.info(f"Recorded {command} run {run.id} with {len(run.classifications)} classification(s)")
        return run.id
    except SQLAlchemyError as e:
        session.rollback()
        logger.error(f"Error recording {command} run: {str(e)}")
        return None
    finally:
        session.close()
        engine.dispose()


def load_runs(url, command=None):
    """Ledger rows as dicts, newest first"""
    engine = create_engine(url)
    Base.metadata.create_all(engine)
    Session = sessionmaker(bind=engine)
    session = Session()
    try:
        query = session.query(AnalysisRun)
        if command:
            query = query.filter(AnalysisRun.command == command)
        return [run.to_dict() for run in query.order_by(AnalysisRun.id.desc()).all()]
    finally:
        session.close()
        engine.dispose()
