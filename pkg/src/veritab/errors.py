"""Exception hierarchy shared by all veritab modules."""


class VeritabError(Exception):
    """Base class for every error raised by this package."""


# --- table ingestion ---------------------------------------------------------

class MalformedRow(VeritabError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateKey(VeritabError):
    """Two table rows share the same (metric, geo, period) key."""


class DegenerateSeries(VeritabError):
    """All values in a series are equal; std is 0 and correlations are undefined."""


# --- lexicon -----------------------------------------------------------------

class SchemaError(VeritabError):
    """Lexicon file does not match the documented JSON schema."""


class CycleError(VeritabError):
    """Geo/period hierarchy is not a forest."""


class AmbiguousSynonym(VeritabError):
    """One surface form maps to more than one canonical entity."""


# --- embedding ---------------------------------------------------------------

class DimensionMismatch(VeritabError):
    """Vectors of different dimensions were combined."""


class Timeout(VeritabError):
    """A remote call did not answer within its deadline (retries included)."""


class BadResponse(VeritabError):
    """A remote endpoint answered with an unusable payload."""


# --- ranking -----------------------------------------------------------------

class EmptyStore(VeritabError):
    """The chunk store holds no chunks."""


class DuplicateChunkId(VeritabError):
    """Two chunks with the same id were offered to the store."""


# --- prompt building ---------------------------------------------------------

class MissingTemplate(VeritabError):
    def __init__(self, intent_code: int):
        super().__init__(f"no template for intent {intent_code}")
        self.intent_code = intent_code


class MalformedTemplate(VeritabError):
    """Template file is missing a required section."""


class PromptOverflow(VeritabError):
    """Even a single chunk plus the mandatory sections exceeds the token limit."""


# --- gateway -----------------------------------------------------------------

class TokenLimitExceeded(VeritabError):
    """Prompt estimate is over the provider's token limit."""


class ProviderError(VeritabError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"provider returned status {status}: {detail}")
        self.status = status


class DefectImpossible(VeritabError):
    """The faithful answer has nothing the requested adversarial mode can corrupt."""


class GatewayError(VeritabError):
    """Completion failed for reasons other than the prompt itself."""


# --- intent ------------------------------------------------------------------

class EmptyDataset(VeritabError):
    """An evaluation was requested on zero labeled queries."""


# --- service -----------------------------------------------------------------

class StoreEmpty(VeritabError):
    """A question arrived before any table was ingested."""


class UnknownThread(VeritabError):
    def __init__(self, thread_id: str):
        super().__init__(f"unknown thread: {thread_id}")
        self.thread_id = thread_id
