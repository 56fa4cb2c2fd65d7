__author__ = 'Tommi Enenkel @alice_und_bob'

import os
import logging
from datetime import datetime
from sqlalchemy import create_engine, Column, Integer, String, JSON, DateTime, Text
from sqlalchemy.orm import Session, declarative_base
from sqlalchemy_utils import database_exists, create_database

Base = declarative_base()

DEFAULT_CONNECTION_STRING = "sqlite:///data/cache/promptpilot.db"


class EmbeddingRecord(Base):
    __tablename__ = "embeddings"
    provider_id = Column(String(200), primary_key=True)
    digest = Column(String(64), primary_key=True)
    dimension = Column(Integer)
    values = Column(JSON)
    created = Column(DateTime)


class CompletionRecord(Base):
    __tablename__ = "completions"
    model = Column(String(200), primary_key=True)
    digest = Column(String(64), primary_key=True)
    request = Column(JSON)
    content = Column(Text)
    created = Column(DateTime)


class PromptPilotDB:
    """
    Read-through cache for everything we fetch from remote services. Embeddings are keyed by
    (provider_id, text digest), chat completions by (model, request digest), so that reruns never hit the network
    for a request they have already made.
    """

    def __init__(self, connection_string=DEFAULT_CONNECTION_STRING):
        self.logger = logging.getLogger(__name__)
        self.connection_string = connection_string
        self._engine = create_engine(connection_string)

        if not database_exists(self._engine.url):
            # ensure that the folder exists
            folder = os.path.dirname(connection_string.replace("sqlite:///", ""))
            if folder:
                os.makedirs(folder, exist_ok=True)
            create_database(self._engine.url)
        self._setup_db()

        self._session = Session(bind=self._engine)

    def _setup_db(self):
        """
        Creates the database tables if they do not exist.
        """
        Base.metadata.create_all(self._engine)

    def flush(self):
        """
        Commit pending writes.
        """
        self._session.commit()

    def close(self):
        """
        Close the database connection.
        """
        self._session.close()

    """ # Embeddings """

    def query_embedding(self, provider_id: str, digest: str) -> EmbeddingRecord:
        """
        Returns the cached embedding or None.

        :param provider_id: id of the embedding provider
        :type provider_id: str
        :param digest: sha256 hex digest of the embedded text
        :type digest: str
        :rtype: EmbeddingRecord
        """
        return self._session.get(EmbeddingRecord, (provider_id, digest))

    def write_embedding(self, provider_id: str, digest: str, values: list):
        """
        Store an embedding and commit right away. Existing entries are never overwritten.

        :param values: the embedding
        :type values: list of float
        """
        if self.query_embedding(provider_id, digest) is not None:
            return
        self._session.add(EmbeddingRecord(provider_id=provider_id, digest=digest, dimension=len(values),
                                          values=list(values), created=datetime.now()))
        self.flush()

    """ # Completions """

    def query_completion(self, model: str, digest: str) -> CompletionRecord:
        """
        Returns the cached chat completion or None.

        :param model: model name the request was sent to
        :type model: str
        :param digest: sha256 hex digest of the canonical request body
        :type digest: str
        :rtype: CompletionRecord
        """
        return self._session.get(CompletionRecord, (model, digest))

    def write_completion(self, model: str, digest: str, request: dict, content: str):
        if self.query_completion(model, digest) is not None:
            return
        self._session.add(CompletionRecord(model=model, digest=digest, request=request, content=content,
                                           created=datetime.now()))
        self.flush()
