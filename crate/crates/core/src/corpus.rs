//! Synthetic parallel corpora and batch scheduling.
//!
//! A toy language pair is defined by a concept inventory: source
//! sentences are sequences of concept words, and the reference
//! translation applies a word-order rule and maps every concept to the
//! first of its target synonyms. Surface forms are pronounceable
//! two-syllable pseudo-words drawn from disjoint ranges for the two
//! languages, so the copy shortcut scores nothing.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{tokenize, TokenizeMode};
use crate::policy::{stream_seed, VocabError, Vocabulary};
use crate::protocol::{PromptInstance, ProtocolError};
use crate::scorer::{LexiconError, SynonymLexicon};

const CONSONANTS: [char; 14] = [
    'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
const N_SYLLABLES: usize = CONSONANTS.len() * VOWELS.len();
const N_WORDS: usize = N_SYLLABLES * N_SYLLABLES;

/// Start of the target-language word range; everything below is
/// reserved for source words.
const TARGET_BASE: usize = N_WORDS / 2;
/// Synonym slots reserved per concept in the target range.
const SYNONYM_STRIDE: usize = 8;

/// Deterministic two-syllable pseudo-word for an index below 4900.
pub fn pseudo_word(index: usize) -> String {
    assert!(index < N_WORDS, "pseudo-word index {index} out of range");
    let syllable = |s: usize| -> [char; 2] { [CONSONANTS[s / VOWELS.len()], VOWELS[s % VOWELS.len()]] };
    let hi = syllable(index / N_SYLLABLES);
    let lo = syllable(index % N_SYLLABLES);
    [hi[0], hi[1], lo[0], lo[1]].iter().collect()
}

/// Word-order transformation applied when producing the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReorderRule {
    #[default]
    Identity,
    SwapAdjacent,
    Reverse,
}

impl ReorderRule {
    pub fn apply<T: Copy>(self, seq: &[T]) -> Vec<T> {
        let mut out = seq.to_vec();
        match self {
            ReorderRule::Identity => {}
            ReorderRule::SwapAdjacent => {
                for pair in out.chunks_exact_mut(2) {
                    pair.swap(0, 1);
                }
            }
            ReorderRule::Reverse => out.reverse(),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub src_lang: String,
    pub tgt_lang: String,
    pub n_concepts: usize,
    pub n_synonyms: usize,
    pub reorder: ReorderRule,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for LanguageSpec {
    fn default() -> Self {
        Self {
            src_lang: "Kovari".into(),
            tgt_lang: "Selmic".into(),
            n_concepts: 50,
            n_synonyms: 2,
            reorder: ReorderRule::Identity,
            min_len: 4,
            max_len: 12,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{field}: {reason}")]
    BadSpec {
        field: &'static str,
        reason: String,
    },
    #[error(
        "cannot draw {requested} distinct sentences from a space of about \
         {space:.0}; shrink the request or enlarge the language"
    )]
    SpaceTooSmall { requested: usize, space: f64 },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LanguageSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.src_lang.is_empty() || self.tgt_lang.is_empty() {
            return Err(CorpusError::BadSpec {
                field: "src_lang/tgt_lang",
                reason: "language names must be non-empty".into(),
            });
        }
        if self.src_lang == self.tgt_lang {
            return Err(CorpusError::BadSpec {
                field: "tgt_lang",
                reason: "languages must differ".into(),
            });
        }
        if self.n_concepts < 2 || self.n_concepts > TARGET_BASE {
            return Err(CorpusError::BadSpec {
                field: "n_concepts",
                reason: format!("must be in 2..={TARGET_BASE}, got {}", self.n_concepts),
            });
        }
        if self.n_synonyms < 1 || self.n_synonyms > SYNONYM_STRIDE {
            return Err(CorpusError::BadSpec {
                field: "n_synonyms",
                reason: format!("must be in 1..={SYNONYM_STRIDE}, got {}", self.n_synonyms),
            });
        }
        if self.n_concepts * SYNONYM_STRIDE > N_WORDS - TARGET_BASE {
            return Err(CorpusError::BadSpec {
                field: "n_concepts",
                reason: "target word range exhausted".into(),
            });
        }
        if self.min_len < 1 || self.max_len < self.min_len {
            return Err(CorpusError::BadSpec {
                field: "min_len/max_len",
                reason: format!("need 1 <= min <= max, got {}..{}", self.min_len, self.max_len),
            });
        }
        Ok(())
    }

    pub fn source_word(&self, concept: usize) -> String {
        pseudo_word(concept)
    }

    pub fn target_word(&self, concept: usize, synonym: usize) -> String {
        pseudo_word(TARGET_BASE + concept * SYNONYM_STRIDE + synonym)
    }

    /// The synonym lexicon induced by this language pair.
    pub fn lexicon(&self) -> Result<SynonymLexicon, CorpusError> {
        self.validate()?;
        let source = (0..self.n_concepts).map(|c| self.source_word(c)).collect();
        let target = (0..self.n_concepts)
            .map(|c| (0..self.n_synonyms).map(|s| self.target_word(c, s)).collect())
            .collect();
        Ok(SynonymLexicon::new(source, target)?)
    }

    /// Vocabulary covering both sides of the language pair.
    pub fn vocabulary(&self) -> Result<Vocabulary, CorpusError> {
        Ok(Vocabulary::new(self.lexicon()?.all_tokens())?)
    }

    /// Number of distinct source sentences, saturating for large
    /// languages.
    fn sentence_space(&self) -> f64 {
        let mut total = 0.0_f64;
        for len in self.min_len..=self.max_len {
            total += (self.n_concepts as f64).powi(len as i32);
            if total > 1e18 {
                return 1e18;
            }
        }
        total
    }

    fn reference_for(&self, concepts: &[usize]) -> String {
        let reordered = self.reorder.apply(concepts);
        let words: Vec<String> = reordered.iter().map(|&c| self.target_word(c, 0)).collect();
        words.join(" ")
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub spec: LanguageSpec,
    pub train: Vec<PromptInstance>,
    pub test: Vec<PromptInstance>,
}

/// Generates disjoint train and test splits of distinct source
/// sentences. Sentence length and concepts are uniform; splits are
/// disjoint by source text via rejection, which the up-front space
/// check keeps cheap.
pub fn generate_corpus(
    spec: &LanguageSpec,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let requested = n_train + n_test;
    if requested == 0 {
        return Err(CorpusError::BadSpec {
            field: "n_train/n_test",
            reason: "at least one sentence must be requested".into(),
        });
    }
    let space = spec.sentence_space();
    if (requested as f64) * 2.0 > space {
        return Err(CorpusError::SpaceTooSmall {
            requested,
            space,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 0, 0, 0, PURPOSE_CORPUS));
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(requested);
    let mut sentences: Vec<Vec<usize>> = Vec::with_capacity(requested);
    while sentences.len() < requested {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let concepts: Vec<usize> = (0..len).map(|_| rng.gen_range(0..spec.n_concepts)).collect();
        if seen.insert(concepts.clone()) {
            sentences.push(concepts);
        }
    }

    let mut instances = Vec::with_capacity(requested);
    for concepts in &sentences {
        let src: Vec<String> = concepts.iter().map(|&c| spec.source_word(c)).collect();
        instances.push(PromptInstance::new(
            spec.src_lang.clone(),
            spec.tgt_lang.clone(),
            src.join(" "),
            Some(spec.reference_for(concepts)),
        )?);
    }
    let test = instances.split_off(n_train);
    Ok(Corpus {
        spec: spec.clone(),
        train: instances,
        test,
    })
}

const PURPOSE_CORPUS: u64 = 4;
const PURPOSE_EPOCH: u64 = 3;

/// Input format for parallel files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    /// One `source<TAB>reference` pair per line.
    Tsv,
    /// One JSON object per line with `src`, `ref`, and optional
    /// `src_lang`/`tgt_lang` overrides.
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped_malformed: usize,
    pub skipped_short: usize,
}

#[derive(Deserialize)]
struct JsonlRecord {
    src: String,
    #[serde(rename = "ref")]
    reference: String,
    src_lang: Option<String>,
    tgt_lang: Option<String>,
}

/// Reads a parallel file, skipping malformed rows and sources shorter
/// than `min_chars` Unicode scalars, and says how many of each it saw.
pub fn load_parallel_file(
    path: &Path,
    format: FileFormat,
    src_lang: &str,
    tgt_lang: &str,
    min_chars: usize,
) -> Result<(Vec<PromptInstance>, LoadReport), CorpusError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    let mut report = LoadReport::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Option<(String, String, String, String)> = match format {
            FileFormat::Tsv => line.split_once('\t').and_then(|(s, r)| {
                let (s, r) = (s.trim(), r.trim());
                if s.is_empty() || r.is_empty() {
                    None
                } else {
                    Some((s.into(), r.into(), src_lang.into(), tgt_lang.into()))
                }
            }),
            FileFormat::Jsonl => serde_json::from_str::<JsonlRecord>(&line).ok().and_then(|rec| {
                if rec.src.trim().is_empty() || rec.reference.trim().is_empty() {
                    None
                } else {
                    Some((
                        rec.src,
                        rec.reference,
                        rec.src_lang.unwrap_or_else(|| src_lang.into()),
                        rec.tgt_lang.unwrap_or_else(|| tgt_lang.into()),
                    ))
                }
            }),
        };
        let Some((src, reference, sl, tl)) = parsed else {
            report.skipped_malformed += 1;
            continue;
        };
        if src.chars().count() < min_chars {
            report.skipped_short += 1;
            continue;
        }
        match PromptInstance::new(sl, tl, src, Some(reference)) {
            Ok(instance) => {
                out.push(instance);
                report.loaded += 1;
            }
            Err(_) => report.skipped_malformed += 1,
        }
    }
    Ok((out, report))
}

/// Vocabulary covering every source and reference token of a loaded
/// corpus, in first-seen order. Generated corpora should prefer
/// [`LanguageSpec::vocabulary`], which also covers synonyms that the
/// references never use.
pub fn vocabulary_from_instances(
    instances: &[PromptInstance],
) -> Result<Vocabulary, VocabError> {
    let mut seen = HashSet::new();
    let mut tokens = Vec::new();
    for instance in instances {
        let texts = [Some(instance.src_text.as_str()), instance.ref_text.as_deref()];
        for text in texts.into_iter().flatten() {
            for tok in tokenize(text, TokenizeMode::Whitespace) {
                if seen.insert(tok.clone()) {
                    tokens.push(tok);
                }
            }
        }
    }
    Vocabulary::new(tokens)
}

/// Stateless epoch-shuffled batch schedule: the batch for any step is
/// a pure function of the seed, so a resumed run sees exactly the
/// prompts the uninterrupted run would have seen.
#[derive(Debug, Clone, Copy)]
pub struct EpochSampler {
    n: usize,
    batch: usize,
    seed: u64,
}

impl EpochSampler {
    pub fn new(n: usize, batch: usize, seed: u64) -> Self {
        assert!(n >= 1, "empty corpus");
        assert!(batch >= 1, "empty batch");
        Self { n, batch, seed }
    }

    pub fn batches_per_epoch(&self) -> u64 {
        (self.n as u64).div_ceil(self.batch as u64)
    }

    /// Indices for optimization step `step`. Every index appears
    /// exactly once per epoch; the final batch of an epoch may be
    /// short.
    pub fn batch_at(&self, step: u64) -> Vec<usize> {
        let per_epoch = self.batches_per_epoch();
        let epoch = step / per_epoch;
        let k = (step % per_epoch) as usize;
        let mut perm: Vec<usize> = (0..self.n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.seed, epoch, 0, 0, PURPOSE_EPOCH));
        perm.shuffle(&mut rng);
        let start = k * self.batch;
        let end = (start + self.batch).min(self.n);
        perm[start..end].to_vec()
    }
}
