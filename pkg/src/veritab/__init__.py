"""veritab: tabular financial data to ranked text chunks, grounded prompts,
and hallucination-scored answers."""

from .errors import VeritabError
from .forge import DataChunk, TableRecord, TrendReport
from .lexicon import KeywordDictionary, NamedEntities, load_lexicon
from .ranking import ChunkStore, RankedSelection
from .scoring import ResponseScores
from .service import ConversationThread, Engine, ServiceConfig

__version__ = "0.1.0"

__all__ = [
    "ChunkStore",
    "ConversationThread",
    "DataChunk",
    "Engine",
    "KeywordDictionary",
    "NamedEntities",
    "RankedSelection",
    "ResponseScores",
    "ServiceConfig",
    "TableRecord",
    "TrendReport",
    "VeritabError",
    "__version__",
]
