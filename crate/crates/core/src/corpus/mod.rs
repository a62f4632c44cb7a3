//! News ingestion and preprocessing: article cleaning, company-relevant
//! sentence extraction, token normalization, and per-(company, day)
//! aggregation.

pub mod porter;

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::RowKey;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown pid `{0}` in alias table")]
    UnknownPid(String),
    #[error("mixed keys in aggregation: {0} vs {1}")]
    MixedKeys(RowKey, RowKey),
    #[error("invalid article: {0}")]
    InvalidArticle(String),
    #[error("invalid boilerplate pattern `{pattern}`: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: Box<regex::Error>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Article format as tagged by the upstream feed. The tag decides whether an
/// article is dropped outright (machine-generated, unverified) and whether it
/// tends to cover multiple companies (market snapshots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatTag {
    Story,
    MarketSnapshot,
    EarningsSummary,
    MachineGenerated,
    Unverified,
    Other,
}

impl FormatTag {
    pub fn is_multi_company(self) -> bool {
        matches!(self, FormatTag::MarketSnapshot)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawArticle {
    pub pid: String,
    pub date: NaiveDate,
    pub headline: String,
    pub body: String,
    pub format_tag: FormatTag,
}

impl RawArticle {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.pid.is_empty() {
            return Err(CorpusError::InvalidArticle("empty pid".into()));
        }
        if self.body.is_empty() && self.headline.is_empty() {
            return Err(CorpusError::InvalidArticle(format!(
                "article {}@{} has neither headline nor body",
                self.pid, self.date
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompanyAliases {
    pub name: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
}

impl CompanyAliases {
    /// Lowercased terms an article sentence may be matched against:
    /// the canonical name first, then the aliases.
    pub fn match_terms(&self) -> Vec<String> {
        let mut terms = vec![self.name.to_lowercase()];
        terms.extend(self.aliases.iter().map(|a| a.to_lowercase()));
        terms
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompanyAliasTable(pub BTreeMap<String, CompanyAliases>);

impl CompanyAliasTable {
    pub fn get(&self, pid: &str) -> Option<&CompanyAliases> {
        self.0.get(pid)
    }

    pub fn insert(&mut self, pid: impl Into<String>, entry: CompanyAliases) {
        self.0.insert(pid.into(), entry);
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let data = std::fs::read_to_string(path)?;
        serde_json::from_str(&data).map_err(|e| CorpusError::Json { line: 0, source: e })
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| CorpusError::Json { line: 0, source: e })?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// One preprocessed row per company per day: the normalized tokens of every
/// surviving article for that key, concatenated in article order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub pid: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
    pub sentences_kept: usize,
    pub articles_merged: usize,
}

impl CleanDocument {
    pub fn key(&self) -> RowKey {
        RowKey::new(self.pid.clone(), self.date)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanConfig {
    /// Cleaned bodies with fewer whitespace-separated tokens than this are
    /// dropped as small machine-ish pieces.
    pub min_body_tokens: usize,
    pub strip_html: bool,
    /// Regexes applied per line; matching lines are removed (feed headers,
    /// footers, metadata).
    pub boilerplate_patterns: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self { min_body_tokens: 20, strip_html: true, boilerplate_patterns: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    MachineGenerated,
    Unverified,
    BodyTooShort,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CleanOutcome {
    Kept(CleanedArticle),
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedArticle {
    /// Headline and body cleaned and joined with a newline.
    pub text: String,
}

pub struct Cleaner {
    config: CleanConfig,
    patterns: Vec<Regex>,
    html: Regex,
}

impl Cleaner {
    pub fn new(config: CleanConfig) -> Result<Self, CorpusError> {
        let patterns = config
            .boilerplate_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|e| CorpusError::BadPattern {
                    pattern: p.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let html = Regex::new(r"<[^<>\n]*>").expect("static regex");
        Ok(Self { config, patterns, html })
    }

    /// Lowercase, strip markup and boilerplate lines, normalize whitespace.
    /// Idempotent: cleaning already-clean text returns it byte-identical.
    pub fn clean_text(&self, text: &str) -> String {
        let mut text = text.to_lowercase();
        if self.config.strip_html {
            // repeat to a fixpoint so nested fragments like <<b>> vanish too
            loop {
                let next = self.html.replace_all(&text, " ").into_owned();
                if next == text {
                    break;
                }
                text = next;
            }
        }
        text.lines()
            .filter(|line| !self.patterns.iter().any(|p| p.is_match(line)))
            .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
            .filter(|line| !line.is_empty())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn clean_article(&self, raw: &RawArticle) -> Result<CleanOutcome, CorpusError> {
        raw.validate()?;
        match raw.format_tag {
            FormatTag::MachineGenerated => {
                return Ok(CleanOutcome::Dropped(DropReason::MachineGenerated))
            }
            FormatTag::Unverified => return Ok(CleanOutcome::Dropped(DropReason::Unverified)),
            _ => {}
        }
        let headline = self.clean_text(&raw.headline);
        let body = self.clean_text(&raw.body);
        if body.split_whitespace().count() < self.config.min_body_tokens {
            return Ok(CleanOutcome::Dropped(DropReason::BodyTooShort));
        }
        let text = match (headline.is_empty(), body.is_empty()) {
            (true, _) => body,
            (false, true) => headline,
            (false, false) => format!("{headline}\n{body}"),
        };
        Ok(CleanOutcome::Kept(CleanedArticle { text }))
    }
}

/// Similarity in [0, 1]: 1 minus the Levenshtein distance normalized by the
/// longer string. Identical strings (including two empties) score 1.0.
pub fn fuzzy_match_score(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

/// Split on terminal punctuation (. ! ?) followed by whitespace or end of
/// text. Punctuation stays attached to its sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0;
    for (i, &(pos, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.get(i + 1).map_or(true, |&(_, next)| next.is_whitespace());
            if boundary {
                let end = pos + c.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence.to_string());
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Keep the sentences that talk about `pid`. Single-company formats pass
/// through whole; multi-company text keeps a sentence iff it contains an
/// exact alias substring or a token window fuzzy-matching an alias at or
/// above `threshold`.
pub fn extract_relevant_sentences(
    text: &str,
    pid: &str,
    aliases: &CompanyAliasTable,
    threshold: f64,
    multi_company: bool,
) -> Result<Vec<String>, CorpusError> {
    let entry = aliases.get(pid).ok_or_else(|| CorpusError::UnknownPid(pid.to_string()))?;
    let sentences = split_sentences(text);
    if !multi_company {
        return Ok(sentences);
    }
    let terms = entry.match_terms();
    Ok(sentences.into_iter().filter(|s| sentence_mentions(s, &terms, threshold)).collect())
}

fn sentence_mentions(sentence: &str, terms: &[String], threshold: f64) -> bool {
    for term in terms {
        if !term.is_empty() && sentence.contains(term.as_str()) {
            return true;
        }
    }
    let words: Vec<&str> =
        sentence.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    for term in terms {
        let term_len = term.split_whitespace().count();
        if term_len == 0 || words.len() < term_len {
            continue;
        }
        for window in words.windows(term_len) {
            if fuzzy_match_score(&window.join(" "), term) >= threshold {
                return true;
            }
        }
    }
    false
}

/// Split on non-alphanumeric boundaries, drop stop words, optionally apply
/// Porter stemming. Output is lowercase and never contains a stop word.
pub fn tokenize_and_normalize(
    text: &str,
    stopwords: &BTreeSet<String>,
    stemming: bool,
) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| !stopwords.contains(t))
        .map(|t| if stemming { porter::stem(&t) } else { t })
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Tokens of a single surviving article, ready for per-day aggregation.
#[derive(Debug, Clone)]
pub struct ArticleTokens {
    pub pid: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
    pub sentences_kept: usize,
}

/// Concatenate all articles sharing one (pid, date) into one document.
pub fn aggregate_company_day(articles: &[ArticleTokens]) -> Result<CleanDocument, CorpusError> {
    let first = articles.first().ok_or(CorpusError::EmptyInput)?;
    let key = RowKey::new(first.pid.clone(), first.date);
    let mut tokens = Vec::new();
    let mut sentences_kept = 0;
    for a in articles {
        if a.pid != first.pid || a.date != first.date {
            return Err(CorpusError::MixedKeys(key, RowKey::new(a.pid.clone(), a.date)));
        }
        tokens.extend(a.tokens.iter().cloned());
        sentences_kept += a.sentences_kept;
    }
    Ok(CleanDocument {
        pid: first.pid.clone(),
        date: first.date,
        tokens,
        sentences_kept,
        articles_merged: articles.len(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub clean: CleanConfig,
    pub fuzzy_threshold: f64,
    /// Stemming during corpus preprocessing is off by default: lexicon
    /// scoring needs surface forms, so stemming is applied downstream by the
    /// featurizers that want it.
    pub stemming: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { clean: CleanConfig::default(), fuzzy_threshold: 0.85, stemming: false }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PreprocessStats {
    pub articles_in: usize,
    pub articles_kept: usize,
    pub dropped_machine_generated: usize,
    pub dropped_unverified: usize,
    pub dropped_body_too_short: usize,
    pub dropped_no_relevant_tokens: usize,
    pub documents: usize,
}

/// Full preprocessing pass: clean every article, keep company-relevant
/// sentences, tokenize, and aggregate to one document per (pid, date).
/// Documents come back sorted by key.
pub fn preprocess_corpus(
    articles: &[RawArticle],
    aliases: &CompanyAliasTable,
    stopwords: &BTreeSet<String>,
    config: &PreprocessConfig,
) -> Result<(Vec<CleanDocument>, PreprocessStats), CorpusError> {
    let cleaner = Cleaner::new(config.clean.clone())?;
    let mut stats = PreprocessStats { articles_in: articles.len(), ..Default::default() };
    let mut grouped: BTreeMap<RowKey, Vec<ArticleTokens>> = BTreeMap::new();

    for raw in articles {
        match cleaner.clean_article(raw)? {
            CleanOutcome::Dropped(DropReason::MachineGenerated) => {
                stats.dropped_machine_generated += 1
            }
            CleanOutcome::Dropped(DropReason::Unverified) => stats.dropped_unverified += 1,
            CleanOutcome::Dropped(DropReason::BodyTooShort) => stats.dropped_body_too_short += 1,
            CleanOutcome::Kept(cleaned) => {
                let sentences = extract_relevant_sentences(
                    &cleaned.text,
                    &raw.pid,
                    aliases,
                    config.fuzzy_threshold,
                    raw.format_tag.is_multi_company(),
                )?;
                let joined = sentences.join(" ");
                let tokens = tokenize_and_normalize(&joined, stopwords, config.stemming);
                if tokens.is_empty() {
                    stats.dropped_no_relevant_tokens += 1;
                    continue;
                }
                stats.articles_kept += 1;
                grouped.entry(RowKey::new(raw.pid.clone(), raw.date)).or_default().push(
                    ArticleTokens {
                        pid: raw.pid.clone(),
                        date: raw.date,
                        tokens,
                        sentences_kept: sentences.len(),
                    },
                );
            }
        }
    }

    let mut documents = Vec::with_capacity(grouped.len());
    for (_, group) in grouped {
        documents.push(aggregate_company_day(&group)?);
    }
    stats.documents = documents.len();
    Ok((documents, stats))
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>, CorpusError> {
    let data = std::fs::read_to_string(path)?;
    Ok(data
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.to_lowercase())
        .collect())
}

pub fn read_articles_jsonl(path: impl AsRef<Path>) -> Result<Vec<RawArticle>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article: RawArticle = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Json { line: i + 1, source: e })?;
        out.push(article);
    }
    Ok(out)
}

pub fn write_articles_jsonl(
    path: impl AsRef<Path>,
    articles: &[RawArticle],
) -> Result<(), CorpusError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for a in articles {
        serde_json::to_writer(&mut file, a).map_err(|e| CorpusError::Json { line: 0, source: e })?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_clean_documents_jsonl(
    path: impl AsRef<Path>,
) -> Result<Vec<CleanDocument>, CorpusError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CleanDocument = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Json { line: i + 1, source: e })?;
        out.push(doc);
    }
    Ok(out)
}

pub fn write_clean_documents_jsonl(
    path: impl AsRef<Path>,
    docs: &[CleanDocument],
) -> Result<(), CorpusError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in docs {
        serde_json::to_writer(&mut file, d).map_err(|e| CorpusError::Json { line: 0, source: e })?;
        file.write_all(b"\n")?;
    }
    Ok(())
}
