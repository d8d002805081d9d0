"""todsim: user-simulator harness for task-oriented dialogue systems."""

from .dialogue import (
    BudgetExceeded,
    Exemplar,
    PromptTemplate,
    Speaker,
    TerminationKind,
    TerminationReason,
    Transcript,
    Turn,
    build_prompt,
    detect_end_token,
    normalize_utterance,
)
from .diversity import (
    DependencyTree,
    DepNode,
    DiversityReport,
    diversity_report,
    mean_dep_distance,
    mtld,
    parse_conllu,
    std_dep_distance,
    tokenize,
)
from .engine import (
    RunManifest,
    SessionLimits,
    SimulationConfig,
    detect_loop,
    flag_hallucination,
    run_batch,
    run_dialogue,
    run_gold_turn,
)
from .goals import (
    DomainGoal,
    Goal,
    count_intents,
    parse_goal,
    render_natural_language,
    render_parsed_logical,
    serialize_goal,
)
from .providers import (
    CompletionParams,
    HTTPCompletion,
    HTTPTOD,
    ProviderError,
    ProviderErrorKind,
    ScriptedCompletion,
    ScriptedTOD,
    estimate_tokens,
)
from .success import (
    DialogueResult,
    Ontology,
    aggregate_by_intent,
    combined_score,
    corpus_bleu,
    evaluate_inform,
    evaluate_success,
    gsr,
    render_report,
)

__version__ = "0.1.0"
