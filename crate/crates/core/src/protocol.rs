//! Prompt rendering and strict tag-structured response parsing.
//!
//! A response is valid when it consists of exactly one
//! `<think>...</think>` block immediately followed by exactly one
//! `<translate>...</translate>` block, with nothing but whitespace
//! around or between them. In [`ThinkMode::Optional`] the think block
//! may be omitted (the translate block alone is valid), but stray
//! text, duplicated blocks, truncated tags, and tag literals inside
//! block contents are rejected in both modes. Block contents are kept
//! verbatim; surrounding whitespace inside a block is preserved.

use thiserror::Error;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const TRANSLATE_OPEN: &str = "<translate>";
pub const TRANSLATE_CLOSE: &str = "</translate>";

/// The four tag literals in vocabulary order.
pub const TAG_TOKENS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, TRANSLATE_OPEN, TRANSLATE_CLOSE];

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("source and target language must differ (both were {0:?})")]
    SameLanguage(String),
    #[error("source text is empty")]
    EmptySourceText,
}

/// One translation task: a language direction, the source text, and
/// an optional reference translation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PromptInstance {
    pub src_lang: String,
    pub tgt_lang: String,
    pub src_text: String,
    pub ref_text: Option<String>,
}

impl PromptInstance {
    pub fn new(
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
        src_text: impl Into<String>,
        ref_text: Option<String>,
    ) -> Result<Self, ProtocolError> {
        let instance = Self {
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            src_text: src_text.into(),
            ref_text,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.src_lang == self.tgt_lang {
            return Err(ProtocolError::SameLanguage(self.src_lang.clone()));
        }
        if self.src_text.is_empty() {
            return Err(ProtocolError::EmptySourceText);
        }
        Ok(())
    }
}

/// Whether the think block is mandatory or merely tolerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ThinkMode {
    /// Think block then translate block, both required.
    Required,
    /// Translate block required; a leading think block is allowed.
    Optional,
}

/// Outcome of parsing a raw model response.
///
/// When `format_ok` is false both text fields are empty.
/// `raw_len_tokens` is the response length in policy tokens, supplied
/// by the caller that detokenized the response (0 when unknown).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedResponse {
    pub think_text: String,
    pub translate_text: String,
    pub format_ok: bool,
    pub raw_len_tokens: usize,
}

impl ParsedResponse {
    fn invalid() -> Self {
        Self::default()
    }

    pub fn with_raw_len(mut self, raw_len_tokens: usize) -> Self {
        self.raw_len_tokens = raw_len_tokens;
        self
    }
}

/// Renders the conversation template for one instance. The returned
/// string ends with the assistant cue the policy completes from.
pub fn render_prompt(instance: &PromptInstance) -> String {
    format!(
        "A conversation between User and Assistant. The User asks for a translation \
         from {src_language} to {tgt_language}, and the Assistant solves it. The \
         Assistant first thinks about the reasoning process in the mind and then \
         provides the user with the final translation. The reasoning process and \
         final translation are enclosed within <think> </think> and \
         <translate> </translate> tags, respectively, i.e., <think> reasoning \
         process here </think><translate> final translation here </translate>. \
         \nUser:{src_text} \nAssistant:",
        src_language = instance.src_lang,
        tgt_language = instance.tgt_lang,
        src_text = instance.src_text,
    )
}

/// Extracts `content` following `open` up to the first matching
/// `close`, rejecting contents that embed any other tag literal.
/// Returns the content and the remaining input after the close tag.
fn take_block<'a>(input: &'a str, open: &str, close: &str) -> Option<(&'a str, &'a str)> {
    let body = input.strip_prefix(open)?;
    let end = body.find(close)?;
    let content = &body[..end];
    for tag in TAG_TOKENS {
        if tag != close && content.contains(tag) {
            return None;
        }
    }
    Some((content, &body[end + close.len()..]))
}

/// Parses a raw response against the block grammar for `mode`.
/// Never fails: malformed input yields `format_ok == false`.
pub fn parse_response(raw: &str, mode: ThinkMode) -> ParsedResponse {
    let trimmed = raw.trim();
    let mut think_text = "";
    let mut rest = trimmed;

    if rest.starts_with(THINK_OPEN) {
        match take_block(rest, THINK_OPEN, THINK_CLOSE) {
            Some((content, after)) => {
                think_text = content;
                rest = after.trim_start();
            }
            None => return ParsedResponse::invalid(),
        }
    } else if mode == ThinkMode::Required {
        return ParsedResponse::invalid();
    }

    let (translate_text, after) = match take_block(rest, TRANSLATE_OPEN, TRANSLATE_CLOSE) {
        Some(parts) => parts,
        None => return ParsedResponse::invalid(),
    };
    if !after.trim().is_empty() {
        return ParsedResponse::invalid();
    }
    ParsedResponse {
        think_text: think_text.to_string(),
        translate_text: translate_text.to_string(),
        format_ok: true,
        raw_len_tokens: 0,
    }
}

/// The format half of the reward: +1 for a valid response, -1 otherwise.
pub fn format_score(parsed: &ParsedResponse) -> i32 {
    if parsed.format_ok {
        1
    } else {
        -1
    }
}
