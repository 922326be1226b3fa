"""attnclust: text clustering on attention-derived document vectors.

Pipeline: tokenize a labeled corpus, train a hierarchical attention
classifier on one stratified half, reuse its weights to embed the other
half, cluster those vectors with seven standard algorithms, and score each
result with six validation metrics plus their average. A doc2vec-style
paragraph-vector model provides the attention-free baseline.
"""

from .corpus import (
    CorpusError,
    FilteredCorpus,
    RawRecord,
    SplitPair,
    TokenizedDocument,
    Vocabulary,
    build_vocabulary,
    filter_classes,
    load_records,
    load_tokenized,
    save_tokenized,
    split_sentences,
    stratified_split,
    tokenize_document,
)
from .embeddings import (
    EmbeddingMatrix,
    SkipgramConfig,
    init_random,
    load_pretrained,
    train_skipgram,
)
from .neural import (
    AttentionParams,
    LstmCellParams,
    ParamStore,
    attention_pool,
    bilstm_encode,
    dense_softmax_xent,
    finite_difference_check,
    lstm_cell_step,
)
from .han import (
    HanConfig,
    HanParams,
    TrainingHistory,
    encode_corpus,
    forward_classify,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .baseline import (
    ParagraphVectorConfig,
    mean_embedding_vector,
    train_doc_vectors,
    train_paragraph_vectors,
)
from .clustering import (
    NOISE,
    ClusterAssignment,
    PointSet,
    affinity_propagation,
    agglomerative,
    birch,
    dbscan,
    estimate_k_sqrt,
    kmeans,
    mean_shift,
    minibatch_kmeans,
)
from .metrics import (
    MetricReport,
    adjusted_mutual_info,
    adjusted_rand_index,
    average_evaluation,
    contingency_table,
    evaluate,
    homogeneity_completeness_v,
    silhouette_score,
)
from .vectors import DocumentVector

__version__ = "0.1.0"
