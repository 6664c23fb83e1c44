from .encoder import (
    ContextEmbedding,
    ContextEncoder,
    EmbeddingTable,
    TaskMetadata,
    apply_head,
    embed_hashed,
    embed_table,
    tokenize,
)
