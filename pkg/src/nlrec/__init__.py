"""nlrec: natural-language recommendation via LLM query reformulation over passage-level dense retrieval."""

from .corpus import Dataset, Item, Passage, Qrels, Query, load_dataset, validate
from .curation import AgreementReport, LabelRecord, build_qrels, cohens_kappa, label_pair
from .embedding import (
    EmbeddingCache,
    EmbeddingProviderConfig,
    PassageIndex,
    build_index,
    cosine,
    make_encoder,
)
from .evaluation import (
    AblationReport,
    MetricConfig,
    MetricsReport,
    ablation_topn,
    ndcg_at_k,
    precision_at_k,
    run_benchmark,
)
from .recommender import PassageRankRecommender, RecommendResponse
from .reformulate import (
    QRMethod,
    ReformulatedQuery,
    Reformulator,
    ScriptedStubLLM,
    concat_with_sep,
    make_llm,
    parse_eqr_output,
)
from .retrieval import ItemScore, RankedList, aggregate_item, rank_items, score_passages

__version__ = "0.1.0"

__all__ = [
    "AblationReport",
    "AgreementReport",
    "Dataset",
    "EmbeddingCache",
    "EmbeddingProviderConfig",
    "Item",
    "ItemScore",
    "LabelRecord",
    "MetricConfig",
    "MetricsReport",
    "Passage",
    "PassageIndex",
    "PassageRankRecommender",
    "QRMethod",
    "Qrels",
    "Query",
    "RankedList",
    "RecommendResponse",
    "ReformulatedQuery",
    "Reformulator",
    "ScriptedStubLLM",
    "ablation_topn",
    "aggregate_item",
    "build_index",
    "build_qrels",
    "cohens_kappa",
    "concat_with_sep",
    "cosine",
    "label_pair",
    "load_dataset",
    "make_encoder",
    "make_llm",
    "ndcg_at_k",
    "parse_eqr_output",
    "precision_at_k",
    "rank_items",
    "run_benchmark",
    "score_passages",
    "validate",
]
