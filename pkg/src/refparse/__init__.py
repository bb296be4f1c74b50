"""refparse: train and run CRF citation parsers on synthetic reference strings."""

from .corpus import (
    Corpus,
    filter_fields,
    read_conll,
    read_corpus,
    read_inline_xml,
    sample,
    split,
    write_conll,
    write_corpus,
    write_inline_xml,
)
from .crf import (
    CrfModel,
    TrainConfig,
    decode,
    load_model,
    log_partition,
    marginals,
    nll_and_gradient,
    predict_tags,
    save_model,
    score_path,
    train,
    vectorize,
    viterbi,
)
from .errors import (
    DataError,
    NumericError,
    RefparseError,
    StructuralError,
    TemplateError,
    UsageError,
)
from .features import FeatureConfig, FeatureIndex, build_index, extract
from .labels import (
    FIELD_LABELS,
    FieldSegment,
    LabeledReference,
    Token,
    normalize_segment_text,
    segments_from_tags,
    tags_from_segments,
)
from .metrics import (
    EvalReport,
    compare_reports,
    evaluate,
    field_report,
    token_report,
    write_report_csv,
)
from .synthgen import (
    BibRecord,
    StyleTemplate,
    builtin_styles,
    format_authors,
    generate_corpus,
    random_records,
    read_records,
    render,
    style_family,
    write_records,
)
from .tokenizer import TokenizerConfig, tags_from_spans, tokenize

__version__ = "0.1.0"

__all__ = [
    "BibRecord",
    "Corpus",
    "CrfModel",
    "DataError",
    "EvalReport",
    "FIELD_LABELS",
    "FeatureConfig",
    "FeatureIndex",
    "FieldSegment",
    "LabeledReference",
    "NumericError",
    "RefparseError",
    "StructuralError",
    "StyleTemplate",
    "TemplateError",
    "Token",
    "TokenizerConfig",
    "TrainConfig",
    "UsageError",
    "build_index",
    "builtin_styles",
    "compare_reports",
    "decode",
    "evaluate",
    "extract",
    "field_report",
    "filter_fields",
    "format_authors",
    "generate_corpus",
    "load_model",
    "log_partition",
    "marginals",
    "nll_and_gradient",
    "normalize_segment_text",
    "predict_tags",
    "random_records",
    "read_conll",
    "read_corpus",
    "read_inline_xml",
    "read_records",
    "render",
    "sample",
    "save_model",
    "score_path",
    "segments_from_tags",
    "split",
    "style_family",
    "tags_from_segments",
    "tags_from_spans",
    "token_report",
    "tokenize",
    "train",
    "vectorize",
    "viterbi",
    "write_conll",
    "write_corpus",
    "write_inline_xml",
    "write_records",
    "write_report_csv",
]
