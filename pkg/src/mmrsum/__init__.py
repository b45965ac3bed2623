"""MMR-guided reinforcement-learning extractive multi-document summarization."""

from .corpus import (
    AllSentencesFiltered,
    CorpusError,
    Document,
    DocumentSet,
    FilterConfig,
    Sentence,
    build_document_set,
    filter_sentences,
    load_corpus,
    save_corpus,
    tokenize,
)
from .encoder import ActionMatrix, Dims, Vocab, build_vocab, init_encoder
from .extractor import PointerExtractor, extract_summary, init_extractor
from .mmr import (
    MmrConfig,
    MmrScorer,
    MmrState,
    TfidfModel,
    combined_similarity,
    cosine,
    fit_tfidf,
    mmr_extract,
    mmr_scores,
    redundancy,
    salience,
    sentence_vector,
)
from .rouge import RougeConfig, RougeScore, rouge_l, rouge_n, rouge_su, score_all
from .synth import synth_corpus
from .training import (
    Critic,
    RewardTrace,
    TrainConfig,
    oracle_summary,
    policy_update,
    returns,
    rollout,
    train,
)

__version__ = "0.1.0"
