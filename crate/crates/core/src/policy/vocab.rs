//! Token vocabulary with a fixed special-token prefix.
//!
//! Ids `0..=7` are reserved: padding, begin-of-sequence,
//! end-of-sequence, unknown, and the four protocol tags as atomic
//! tokens. Content tokens follow in first-seen order. The whole table
//! is capped at 256 entries so a token id always fits in a byte.

use std::collections::HashMap;

use crate::metrics::{tokenize, TokenizeMode};
use crate::protocol::{THINK_CLOSE, THINK_OPEN, TRANSLATE_CLOSE, TRANSLATE_OPEN};

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;
pub const THINK_OPEN_ID: usize = 4;
pub const THINK_CLOSE_ID: usize = 5;
pub const TRANSLATE_OPEN_ID: usize = 6;
pub const TRANSLATE_CLOSE_ID: usize = 7;

/// Number of reserved ids preceding content tokens.
pub const N_SPECIAL: usize = 8;

/// Hard cap on vocabulary size.
pub const MAX_VOCAB: usize = 256;

const PAD_TOKEN: &str = "<pad>";
const BOS_TOKEN: &str = "<bos>";
const EOS_TOKEN: &str = "<eos>";
const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("vocabulary needs {0} entries, the maximum is {MAX_VOCAB}")]
    TooLarge(usize),
    #[error("token {0:?} collides with a reserved special token")]
    Reserved(String),
    #[error("token {0:?} contains whitespace")]
    Whitespace(String),
    #[error("empty string is not a valid token")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from content tokens. Duplicates are
    /// dropped, first occurrence wins; order is otherwise preserved.
    pub fn new<I>(content: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut tokens: Vec<String> = [
            PAD_TOKEN,
            BOS_TOKEN,
            EOS_TOKEN,
            UNK_TOKEN,
            THINK_OPEN,
            THINK_CLOSE,
            TRANSLATE_OPEN,
            TRANSLATE_CLOSE,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

        for tok in content {
            if tok.is_empty() {
                return Err(VocabError::Empty);
            }
            if tok.chars().any(char::is_whitespace) {
                return Err(VocabError::Whitespace(tok));
            }
            if let Some(&id) = index.get(&tok) {
                if id < N_SPECIAL {
                    return Err(VocabError::Reserved(tok));
                }
                continue;
            }
            index.insert(tok.clone(), tokens.len());
            tokens.push(tok);
        }
        if tokens.len() > MAX_VOCAB {
            return Err(VocabError::TooLarge(tokens.len()));
        }
        Ok(Self { tokens, index })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tag_ids() -> [usize; 4] {
        [
            THINK_OPEN_ID,
            THINK_CLOSE_ID,
            TRANSLATE_OPEN_ID,
            TRANSLATE_CLOSE_ID,
        ]
    }

    /// Whitespace tokenization followed by id lookup; unknown words
    /// map to [`UNK_ID`].
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        tokenize(text, TokenizeMode::Whitespace)
            .iter()
            .map(|t| self.id_or_unk(t))
            .collect()
    }

    /// Renders token ids back to text, joining with single spaces.
    /// Padding, begin, and end markers are skipped; every other id
    /// (tags and `<unk>` included) renders its literal surface form.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == PAD_ID || id == BOS_ID || id == EOS_ID {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&self.tokens[id]);
        }
        out
    }

    /// FNV-1a over the token table, with a separator byte between
    /// entries so the hash pins both surfaces and boundaries.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for tok in &self.tokens {
            for &b in tok.as_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
