//! Automatic metrics, agreement statistics and report tables.

mod metrics;
mod outputs;
mod ratings;
mod report;
mod stats;
mod table;

pub use metrics::{bleu, rouge, tokenize, TOKENIZATION};
pub use outputs::{read_outputs_tsv, write_outputs_tsv, OutputsError, OUTPUTS_HEADER};
pub use ratings::{
    agreement, check_scale, check_unique, human_scores, AgreementCell, HumanScores, RatingError, RatingRecord,
    Scale, SCALE_MAX,
};
pub use report::{
    copy_outputs, evaluate_system, reference_content, ContentScores, EncoderCosine, EvalError, EvalReport,
    EvalSuite, PerspectiveCell, ReferenceContent, SimilarityScorer,
};
pub use stats::{average_ranks, harmonic_mean, spearman, Spearman, StatsError, EXACT_PERMUTATION_MAX_N};
pub use table::Table;
