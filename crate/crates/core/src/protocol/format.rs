//! Output-shape checks: reasoning text followed by one terminal token.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::templates::{EMB_TOKEN, IM_END, STAGE1_SUFFIX};
use crate::stage::TrainingStage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatViolation {
    MissingToken,
    MultipleTokens,
    TokenNotTerminal,
    EmptyReasoning,
    SuffixMismatch,
}

impl fmt::Display for FormatViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormatViolation::MissingToken => "missing-token",
            FormatViolation::MultipleTokens => "multiple-tokens",
            FormatViolation::TokenNotTerminal => "token-not-terminal",
            FormatViolation::EmptyReasoning => "empty-reasoning",
            FormatViolation::SuffixMismatch => "suffix-mismatch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVerdict {
    pub valid: bool,
    pub reason: Option<FormatViolation>,
}

impl FormatVerdict {
    pub const VALID: FormatVerdict = FormatVerdict {
        valid: true,
        reason: None,
    };

    pub fn invalid(reason: FormatViolation) -> Self {
        Self {
            valid: false,
            reason: Some(reason),
        }
    }
}

/// Drops trailing whitespace and an optional closing chat marker.
fn strip_closing(text: &str) -> &str {
    let t = text.trim_end();
    t.strip_suffix(IM_END).unwrap_or(t).trim_end()
}

pub fn validate_output_format(generated: &str, stage: TrainingStage) -> FormatVerdict {
    let body = strip_closing(generated);
    match stage {
        TrainingStage::Stage1 => {
            if body.trim_start() == STAGE1_SUFFIX {
                FormatVerdict::VALID
            } else if !body.contains(EMB_TOKEN) {
                FormatVerdict::invalid(FormatViolation::MissingToken)
            } else {
                FormatVerdict::invalid(FormatViolation::SuffixMismatch)
            }
        }
        TrainingStage::Stage2 | TrainingStage::Stage3 => {
            match body.matches(EMB_TOKEN).count() {
                0 => return FormatVerdict::invalid(FormatViolation::MissingToken),
                1 => {}
                _ => return FormatVerdict::invalid(FormatViolation::MultipleTokens),
            }
            let Some(reasoning) = body.strip_suffix(EMB_TOKEN) else {
                return FormatVerdict::invalid(FormatViolation::TokenNotTerminal);
            };
            if reasoning.trim().is_empty() {
                return FormatVerdict::invalid(FormatViolation::EmptyReasoning);
            }
            FormatVerdict::VALID
        }
    }
}
