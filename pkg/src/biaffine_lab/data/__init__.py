from .batching import Batch, collate, make_batches
from .conllu import parse_conllu, read_conllu, to_conllu
from .features import FeatureProvider, get_features, read_vector_file, write_vector_file
from .sample import NO_EDGE, OUTSIDE_TAG, AnnotatedGraphSample, DataError, ParseError, ValidationError
from .semgraph import parse_semgraph_json, read_semgraph_json, to_semgraph_json
from .synthetic import generate_treebank, write_treebank
from .vocab import UNK, Index, Vocabulary, build_vocabulary

__all__ = [
    "NO_EDGE",
    "OUTSIDE_TAG",
    "UNK",
    "AnnotatedGraphSample",
    "Batch",
    "DataError",
    "FeatureProvider",
    "Index",
    "ParseError",
    "ValidationError",
    "Vocabulary",
    "build_vocabulary",
    "collate",
    "generate_treebank",
    "get_features",
    "make_batches",
    "parse_conllu",
    "parse_semgraph_json",
    "read_conllu",
    "read_semgraph_json",
    "read_vector_file",
    "to_conllu",
    "to_semgraph_json",
    "write_treebank",
    "write_vector_file",
]
