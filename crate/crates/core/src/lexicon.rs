//! Sentiment scoring against five word lists with a shared negation rule:
//! a positive hit is discarded when any of the three preceding tokens is a
//! negator; negative hits always count.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file {path}, line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The five lexicons, in the fixed order used everywhere a score vector is
/// produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconName {
    LoughranMcdonald,
    Vader,
    Afinn,
    Sentiwordnet,
    Opinion,
}

pub const LEXICON_ORDER: [LexiconName; 5] = [
    LexiconName::LoughranMcdonald,
    LexiconName::Vader,
    LexiconName::Afinn,
    LexiconName::Sentiwordnet,
    LexiconName::Opinion,
];

impl LexiconName {
    pub fn as_str(self) -> &'static str {
        match self {
            LexiconName::LoughranMcdonald => "loughran_mcdonald",
            LexiconName::Vader => "vader",
            LexiconName::Afinn => "afinn",
            LexiconName::Sentiwordnet => "sentiwordnet",
            LexiconName::Opinion => "opinion",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: LexiconName,
    pub positive: BTreeSet<String>,
    pub negative: BTreeSet<String>,
}

impl Lexicon {
    pub fn empty(name: LexiconName) -> Self {
        Self { name, positive: BTreeSet::new(), negative: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentimentScore {
    pub lexicon: LexiconName,
    pub value: f64,
    pub positives_counted: u32,
    pub negatives_counted: u32,
}

/// Parse a `word<TAB>score` file. Valence scores are binarized by sign;
/// zero-valence entries are dropped. Words that end up in both polarity sets
/// are dropped entirely, with a warning returned rather than an error, so
/// third-party files load as-is.
pub fn load_lexicon(
    path: impl AsRef<Path>,
    name: LexiconName,
) -> Result<(Lexicon, Vec<String>), LexiconError> {
    let path = path.as_ref();
    let data = std::fs::read_to_string(path)?;
    parse_lexicon(&data, name, &path.display().to_string())
}

pub fn parse_lexicon(
    data: &str,
    name: LexiconName,
    source: &str,
) -> Result<(Lexicon, Vec<String>), LexiconError> {
    let mut lexicon = Lexicon::empty(name);
    let mut warnings = Vec::new();
    for (i, raw_line) in data.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let word = parts.next().unwrap_or("").trim().to_lowercase();
        let score_str = parts.next().map(str::trim).unwrap_or("");
        if word.is_empty() || score_str.is_empty() {
            return Err(LexiconError::Parse {
                path: source.to_string(),
                line: i + 1,
                message: "expected `word<TAB>score`".into(),
            });
        }
        let score: f64 = score_str.parse().map_err(|e| LexiconError::Parse {
            path: source.to_string(),
            line: i + 1,
            message: format!("bad score `{score_str}`: {e}"),
        })?;
        if score > 0.0 {
            lexicon.positive.insert(word);
        } else if score < 0.0 {
            lexicon.negative.insert(word);
        }
        // zero valence: dropped
    }
    let overlap: Vec<String> = lexicon.positive.intersection(&lexicon.negative).cloned().collect();
    for word in overlap {
        lexicon.positive.remove(&word);
        lexicon.negative.remove(&word);
        warnings.push(format!("{source}: `{word}` appears with both polarities; dropped"));
    }
    Ok((lexicon, warnings))
}

/// Default negator set; the three-token lookback consults it.
pub fn default_negators() -> BTreeSet<String> {
    ["no", "not", "never", "n't", "without", "none"].iter().map(|s| s.to_string()).collect()
}

/// Count polarity hits over the token stream and score (p - n) / (p + n),
/// or 0 when nothing hits. A positive hit is suppressed if any of the three
/// immediately preceding tokens is a negator.
pub fn sentiment_score(
    tokens: &[String],
    lexicon: &Lexicon,
    negators: &BTreeSet<String>,
) -> SentimentScore {
    let mut positives = 0u32;
    let mut negatives = 0u32;
    for (i, token) in tokens.iter().enumerate() {
        if lexicon.positive.contains(token) {
            let negated =
                tokens[i.saturating_sub(3)..i].iter().any(|prev| negators.contains(prev));
            if !negated {
                positives += 1;
            }
        } else if lexicon.negative.contains(token) {
            negatives += 1;
        }
    }
    let total = positives + negatives;
    let value = if total == 0 {
        0.0
    } else {
        (f64::from(positives) - f64::from(negatives)) / f64::from(total)
    };
    SentimentScore { lexicon: lexicon.name, value, positives_counted: positives, negatives_counted: negatives }
}

/// The five lexicons in canonical order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexiconSet(pub [Lexicon; 5]);

impl LexiconSet {
    /// Load `<name>.tsv` for each of the five lexicons from one directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<(Self, Vec<String>), LexiconError> {
        let dir = dir.as_ref();
        let mut warnings = Vec::new();
        let mut loaded = Vec::with_capacity(5);
        for name in LEXICON_ORDER {
            let path = dir.join(format!("{}.tsv", name.as_str()));
            let (lex, mut w) = load_lexicon(&path, name)?;
            warnings.append(&mut w);
            loaded.push(lex);
        }
        Ok((Self(loaded.try_into().expect("five lexicons")), warnings))
    }

    pub fn feature_names(&self) -> Vec<String> {
        LEXICON_ORDER.iter().map(|n| format!("sent_{}", n.as_str())).collect()
    }
}

/// One score per lexicon, in `LEXICON_ORDER`.
pub fn score_all(tokens: &[String], lexicons: &LexiconSet, negators: &BTreeSet<String>) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, lex) in lexicons.0.iter().enumerate() {
        out[i] = sentiment_score(tokens, lex, negators).value;
    }
    out
}
