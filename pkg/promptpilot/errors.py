__author__ = 'Tommi Enenkel @alice_und_bob'


class PromptPilotError(Exception):
    """Base class for all errors raised by promptpilot."""

    def details(self) -> dict:
        """
        Machine-readable context for the error record the CLI writes on abort.

        :return: dict of JSON-serializable details
        :rtype: dict
        """
        return {}


class ConfigError(PromptPilotError):
    pass


class EpisodeDoneError(PromptPilotError):
    pass


class InvalidActionError(PromptPilotError):
    pass


class EmbeddingError(PromptPilotError):
    pass


class RemoteServiceError(PromptPilotError):
    """Failure talking to a remote chat or embedding service."""


class RemoteTransportError(RemoteServiceError):
    """A remote service could not be reached, timed out, refused our credentials or kept failing."""

    def __init__(self, message, status_code=None):
        super().__init__(message)
        self.status_code = status_code

    def details(self) -> dict:
        return {"status_code": self.status_code}


class MalformedResponseError(RemoteServiceError):
    """A remote service answered with 2xx but the payload lacks the documented fields."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload

    def details(self) -> dict:
        return {"payload": str(self.payload)[:2000]}


class EmptyCompletionError(PromptPilotError):
    pass


class CacheMissError(PromptPilotError):
    def __init__(self, situation_key, prompt_id):
        super().__init__(f"no cached thought for situation '{situation_key}' and prompt {prompt_id}")
        self.situation_key = situation_key
        self.prompt_id = prompt_id

    def details(self) -> dict:
        return {"situation_key": self.situation_key, "prompt_id": self.prompt_id}


class CandidateParseError(PromptPilotError):
    def __init__(self, message, raw_completion):
        super().__init__(message)
        self.raw_completion = raw_completion

    def details(self) -> dict:
        return {"raw_completion": self.raw_completion}


class NonFiniteError(PromptPilotError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def details(self) -> dict:
        return {"diagnostics": self.diagnostics}


class RolloutAbortedError(PromptPilotError):
    def __init__(self, message, partial_trace):
        super().__init__(message)
        self.partial_trace = partial_trace

    def details(self) -> dict:
        return {"steps_completed": len(self.partial_trace)}


class CheckpointMismatchError(PromptPilotError):
    pass


class RunAbortedError(PromptPilotError):
    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint

    def details(self) -> dict:
        return {"last_checkpoint": str(self.last_checkpoint) if self.last_checkpoint else None}
