//! The synthetic identity–item world: vocabulary, catalog, training corpus,
//! factorial benchmark pairs, knowledge pairs, and the steering eval set.

pub mod catalog;
pub mod corpus;
pub mod jsonl;
pub mod pairs;
pub mod templates;
pub mod vocab;

pub use catalog::{build_catalog, Catalog, CulturalItem, Identity};
pub use corpus::{generate_training_corpus, Corpus, EQUAL_TREATMENT_BIAS};
pub use jsonl::{
    generate_benchmark, read_benchmark, write_benchmark, BenchHeader, BenchParams, Benchmark,
};
pub use pairs::{
    check_balance, make_factorial_pairs, make_knowledge_pairs, make_steering_eval,
    validate_pair_structure, validate_pairs, BalanceReport, FactorialPair, IdentityRoleCounts,
    KnowledgePair, PairView, QuestionKind, SteeringQuestion,
};
pub use templates::{Span, SpanMap};
pub use vocab::{Vocab, EOS, OPTION_IDS, OPT_A, OPT_B, OPT_C, PAD};
