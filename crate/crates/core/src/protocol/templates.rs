//! Prompt text for both encoder sides, reproduced byte-for-byte.

use crate::error::{Error, Result};
use crate::stage::TrainingStage;

/// Token whose hidden state is read out as the embedding.
pub const EMB_TOKEN: &str = "<emb_token>";

pub const IM_START: &str = "<|im_start|>";
pub const IM_END: &str = "<|im_end|>";

pub const STAGE1_SYSTEM: &str = "You are an intelligent retrieval expert. Your goal is to generate the optimal vector representation for the user's query.";

/// The `\n` here is the two-character escape as it appears in the reference
/// template, not a line break.
pub const STAGE1_INSTRUCT_PREFIX: &str =
    "Instruct: Given a query, retrieve relevant passages that answer the query.\\nquery: ";

pub const STAGE1_SUFFIX: &str = "The embedding is <emb_token>";

pub const STAGE2_QUERY_INSTRUCTION: &str = "You are an intelligent retrieval expert. Your task is to enrich user input by increasing semantic depth in order to achieve more effective embedded representations. For each user input, please consider the following steps step by step:
1.Identify the core concepts and their interrelationships.
2.Incorporate key definitions and terms and expand necessary context-related synonyms.
3.Infer the key contents of the ideal target document.
After the analyzed content, you MUST end every response with <emb_token>.";

pub const DOC_INSTRUCTION: &str = "You are an intelligent retrieval expert. Your task is to analyze the input text and generate a comprehensive semantic vector embedding.
You should capture core concepts, factual details, and underlying logic to ensure the representation is robust for both keyword matching and complex reasoning tasks.
The embedding must represent the text's meaning accurately for high-quality retrieval.";

pub const DOC_SEPARATOR: &str = "\n";

/// Prompt used offline to rewrite long reasoning trajectories into short
/// hypothetical passages. The query is appended after the final line.
pub const TRAJECTORY_PROMPT: &str = r#"
# Role
You are the world's most advanced search engine simulator. Your goal is to predict the **exact content**, **format**, and **style** of the ideal document that answers the user's query.

# Task
Based on the user's query, generate a **Hypothetical Document Passage** (approx. 100-200 words). Do not explain what the document *should* contain; instead, **write the document content directly**.

# Dynamic Style Guidelines (Crucial)
Analyze the query to determine the domain and adopt the matching style:

1.  **Coding & Technical Config** (e.g., Python, ROS, Pandas, Algorithms):
    * **Directly write code snippets**, CLI commands, directory trees, or log outputs.
    * Use specific library names, function names, and variable conventions (e.g., `self`, `df.interpolate`, `/catkin_ws`).
    * Do NOT provide beginner tutorials; provide the **solution code**.

2.  **Math, Logic & Physics** (e.g., Speed problems, Set theory):
    * **Solve the problem step-by-step**.
    * Use **LaTeX formatting** for formulas (e.g., $\mathcal{C}$, $\int$).
    * Show calculations, derivations, and proofs explicitly.

3.  **Academic, History & Science** (e.g., Oceanography, Banking Regulations, Sociology):
    * Write in a **dense, academic style**.
    * Hallucinate/Predict specific **dates, acts, legislation, citations, and technical terminology** (e.g., "DIDMCA", "halocline", "structural barriers").
    * Mimic the tone of a research paper abstract or a textbook excerpt.

4.  **General/Hobbyist** (e.g., Aquaponics):
    * Write in an informative blog post or forum answer style.
    * Focus on **mechanisms** and **practical functionality**.

# Constraints
* **NO** introductory filler (e.g., "Here is the code...", "The document discusses...").
* **NO** dictionary definitions unless explicitly asked.
* **Start directly** with the content.

# Input Query:
"#;

/// Query-side chat template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPromptTemplate {
    pub system_text: String,
    pub instruct_prefix: String,
    pub stage: TrainingStage,
    /// Reference assistant output. For the cold-start stage this is rendered
    /// into the prompt; later stages generate reasoning before it.
    pub expected_suffix: String,
}

impl QueryPromptTemplate {
    pub fn stage1() -> Self {
        Self {
            system_text: STAGE1_SYSTEM.to_owned(),
            instruct_prefix: STAGE1_INSTRUCT_PREFIX.to_owned(),
            stage: TrainingStage::Stage1,
            expected_suffix: STAGE1_SUFFIX.to_owned(),
        }
    }

    /// Reasoning template, shared by the alignment and reward stages.
    pub fn stage2() -> Self {
        Self {
            system_text: STAGE2_QUERY_INSTRUCTION.to_owned(),
            instruct_prefix: String::new(),
            stage: TrainingStage::Stage2,
            expected_suffix: EMB_TOKEN.to_owned(),
        }
    }

    pub fn for_stage(stage: TrainingStage) -> Self {
        match stage {
            TrainingStage::Stage1 => Self::stage1(),
            TrainingStage::Stage2 | TrainingStage::Stage3 => Self::stage2(),
        }
    }

    fn has_fixed_answer(&self) -> bool {
        self.stage == TrainingStage::Stage1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocPromptTemplate {
    pub instruction_text: String,
    pub separator: String,
}

impl Default for DocPromptTemplate {
    fn default() -> Self {
        Self {
            instruction_text: DOC_INSTRUCTION.to_owned(),
            separator: DOC_SEPARATOR.to_owned(),
        }
    }
}

fn check_text(kind: &str, text: &str) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::invalid(format!("empty {kind}")));
    }
    if text.contains(EMB_TOKEN) {
        return Err(Error::invalid(format!(
            "{kind} must not contain {EMB_TOKEN}"
        )));
    }
    Ok(())
}

/// Chat rendering up to and including the assistant header; this is what
/// the encoder continues from.
pub fn assemble_generation_prompt(query: &str, template: &QueryPromptTemplate) -> Result<String> {
    check_text("query", query)?;
    Ok(format!(
        "{IM_START}system\n{}{IM_END}\n{IM_START}user\n{}{}{IM_END}\n{IM_START}assistant\n",
        template.system_text, template.instruct_prefix, query
    ))
}

/// Full query-side rendering. The cold-start template includes its fixed
/// reference answer and closing marker.
pub fn assemble_query_prompt(query: &str, template: &QueryPromptTemplate) -> Result<String> {
    let mut out = assemble_generation_prompt(query, template)?;
    if template.has_fixed_answer() {
        out.push_str(&template.expected_suffix);
        out.push_str(IM_END);
    }
    Ok(out)
}

/// `instruction + separator + doc + <emb_token>`, no chat template.
pub fn assemble_doc_prompt(doc: &str, template: &DocPromptTemplate) -> Result<String> {
    check_text("document", doc)?;
    let mut out = String::with_capacity(
        template.instruction_text.len() + template.separator.len() + doc.len() + EMB_TOKEN.len(),
    );
    out.push_str(&template.instruction_text);
    out.push_str(&template.separator);
    out.push_str(doc);
    out.push_str(EMB_TOKEN);
    Ok(out)
}

pub fn assemble_trajectory_prompt(query: &str) -> Result<String> {
    if query.trim().is_empty() {
        return Err(Error::invalid("empty query"));
    }
    Ok(format!("{TRAJECTORY_PROMPT}{query}"))
}
