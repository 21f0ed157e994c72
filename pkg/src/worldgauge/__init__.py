"""worldgauge: evaluate how faithfully a sequence model recovers a DFA world.

The library measures a generative model's implicit world model without
touching its internals: only next-token distributions (or plain accept/reject
judgments) are queried.  Alongside the metrics it ships the worlds used to
exercise them, a traversal-corpus generator, a map-reconstruction algorithm,
a detour-robustness harness, and a wire protocol for evaluating models that
live in other processes.
"""

from .automata import (
    Alphabet,
    BoundarySet,
    Dfa,
    TokenSeq,
    boundary_exists,
    compute_boundary_exact,
    compute_boundary_sampled,
    dfa_equivalent,
    dfa_from_json,
    dfa_to_json,
    load_dfa,
    minimize,
    mn_interior_member,
    reachable_states,
    run_state,
    save_dfa,
    state_of_prefix,
)
from .detour import DetourConfig, run_detours, run_detours_game
from .errors import (
    BridgeError,
    InputError,
    PartialResultError,
    ProtocolError,
    TransportError,
    WorldGaugeError,
)
from .genmodel import (
    AcceptanceRule,
    CorruptedModel,
    DEFAULT_RULE,
    ExactDfaModel,
    NgramModel,
    PerturbedDfaModel,
    RandomLogitModel,
    UniformModel,
    accepts_suffix,
    accepts_token,
    corrupt_sequences,
    find_language_mismatch,
    greedy_decode,
    load_ngram,
    make_corrupted_dfa_model,
    make_exact_dfa_model,
    make_uniform_model,
    perplexity,
    sample_corrupted_sequences,
    sample_suffixes,
    save_ngram,
    train_ngram,
)
from .metrics import (
    ExactJudge,
    MetricReport,
    boundary_precision,
    boundary_recall,
    compression_precision,
    compression_precision_judge,
    csv_table,
    distinction_metrics,
    distinction_recall_judge,
    markdown_table,
    model_boundary_from_samples,
    next_token_test,
    sample_next_token_contexts,
)
from .reconstruct import ReconParams, ReconResult, classify_edges, export_map, reconstruct

__version__ = "0.1.0"
