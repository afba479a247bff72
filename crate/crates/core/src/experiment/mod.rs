//! Experiment harness: stimuli, prompt formats, trial scheduling,
//! response parsing and aggregation into per-cell datasets.

pub mod io;
pub mod prompt;
pub mod stimuli;
pub mod trials;

pub use prompt::{
    fraction_text, percentage_text, render_prompt, render_question, MoneyStyle, ProbStyle, PromptFormat,
    PromptStyle,
};
pub use stimuli::{builtin_gamble_set, builtin_gamble_sets, Gamble, GambleSet, PUBLISHED_SEEDS};
pub use trials::{aggregate, parse_response, schedule_trials, CellData, CellKey, Outcome, TrialRecord};
