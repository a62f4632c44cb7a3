//! Dense document vectors, two ways: averaging pre-trained word vectors and
//! training PV-DM paragraph vectors from scratch.

pub mod doc2vec;

pub use doc2vec::{
    cosine, infer_doc_vector, pvdm_point_grads, pvdm_point_loss, train_doc2vec_dm, Doc2VecModel,
    Doc2VecParams, PvdmPoint,
};

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::RowKey;

#[derive(Debug, Error)]
pub enum EmbeddingsError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite component")]
    NonFinite { line: usize },
    #[error("line {line}: bad float `{value}`")]
    BadFloat { line: usize, value: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Serde(#[from] serde_json::Error),
}

/// An immutable word -> vector lookup loaded from a `.vec` text file.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, words: Vec::new(), index: HashMap::new(), data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Insert a word; duplicate words keep the first vector and report false.
    pub fn insert(&mut self, word: &str, vector: &[f32]) -> bool {
        assert_eq!(vector.len(), self.dim, "vector width must match table dim");
        if self.index.contains_key(word) {
            return false;
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
        self.data.extend_from_slice(vector);
        true
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Parse the `.vec` text format: a `<count> <dim>` header, then one
/// space-separated `<word> <f1> ... <fdim>` row per word. Duplicates keep
/// the first occurrence; a count that disagrees with the actual number of
/// rows is tolerated. Both conditions come back as warnings.
pub fn load_vec_file(
    path: impl AsRef<Path>,
) -> Result<(WordVectorTable, Vec<String>), EmbeddingsError> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut parts = header.split_whitespace();
    let declared: usize = parts
        .next()
        .ok_or_else(|| EmbeddingsError::MalformedHeader("missing count".into()))?
        .parse()
        .map_err(|e| EmbeddingsError::MalformedHeader(format!("bad count: {e}")))?;
    let dim: usize = parts
        .next()
        .ok_or_else(|| EmbeddingsError::MalformedHeader("missing dimension".into()))?
        .parse()
        .map_err(|e| EmbeddingsError::MalformedHeader(format!("bad dimension: {e}")))?;
    if parts.next().is_some() {
        return Err(EmbeddingsError::MalformedHeader("trailing header fields".into()));
    }
    if dim == 0 {
        return Err(EmbeddingsError::MalformedHeader("zero dimension".into()));
    }

    let mut table = WordVectorTable::new(dim);
    let mut warnings = Vec::new();
    let mut buffer = Vec::with_capacity(dim);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a first field");
        buffer.clear();
        for field in fields {
            let value: f32 = field.parse().map_err(|_| EmbeddingsError::BadFloat {
                line: line_no,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(EmbeddingsError::NonFinite { line: line_no });
            }
            buffer.push(value);
        }
        if buffer.len() != dim {
            return Err(EmbeddingsError::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: buffer.len(),
            });
        }
        if !table.insert(word, &buffer) {
            warnings.push(format!("line {line_no}: duplicate word `{word}` ignored"));
        }
    }
    if table.len() != declared {
        warnings.push(format!(
            "header declared {declared} words but {} were loaded",
            table.len()
        ));
    }
    Ok((table, warnings))
}

/// Write a table in `.vec` format with 9 significant digits per component,
/// enough for an exact f32 round-trip.
pub fn save_vec_file(table: &WordVectorTable, path: impl AsRef<Path>) -> Result<(), EmbeddingsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for word in table.words() {
        write!(w, "{word}")?;
        for value in table.get(word).expect("word iterates its own table") {
            write!(w, " {value:.8e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A document vector with how much of the document backed it.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedVector {
    pub vector: Vec<f64>,
    /// Fraction of tokens found in the vocabulary; 0 means the vector
    /// carries no information (all-zero for the averaging path).
    pub coverage: f64,
}

/// Arithmetic mean of the vectors of in-vocabulary tokens, each occurrence
/// counted. No in-vocabulary tokens yields the zero vector with coverage 0.
pub fn doc_embedding_average(table: &WordVectorTable, tokens: &[String]) -> AveragedVector {
    let dim = table.dim();
    let mut sum = vec![0.0f64; dim];
    let mut found = 0usize;
    for token in tokens {
        if let Some(vector) = table.get(token) {
            found += 1;
            for (acc, &v) in sum.iter_mut().zip(vector) {
                *acc += f64::from(v);
            }
        }
    }
    if found == 0 {
        return AveragedVector { vector: vec![0.0; dim], coverage: 0.0 };
    }
    for v in &mut sum {
        *v /= found as f64;
    }
    let coverage = found as f64 / tokens.len() as f64;
    AveragedVector { vector: sum, coverage }
}

/// A keyed document embedding, as exported to CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocEmbedding {
    pub pid: String,
    pub date: NaiveDate,
    pub vector: Vec<f64>,
    pub coverage: f64,
}

impl DocEmbedding {
    pub fn new(key: &RowKey, averaged: AveragedVector) -> Self {
        Self {
            pid: key.pid.clone(),
            date: key.date,
            vector: averaged.vector,
            coverage: averaged.coverage,
        }
    }
}

pub fn write_doc_embeddings_csv(
    path: impl AsRef<Path>,
    embeddings: &[DocEmbedding],
) -> Result<(), EmbeddingsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = embeddings.first().map_or(0, |e| e.vector.len());
    let header: Vec<String> = (1..=dim).map(|i| format!("f{i}")).collect();
    writeln!(w, "pid,date,coverage,{}", header.join(","))?;
    for e in embeddings {
        write!(w, "{},{},{}", e.pid, e.date, e.coverage)?;
        for v in &e.vector {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn write_tmp(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.vec");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn literal_parse() {
        let (_dir, path) = write_tmp("2 3\na 1 0 0\nb 0 1 0\n");
        let (table, warnings) = load_vec_file(&path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(table.dim(), 3);
        assert_eq!(table.get("a").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(table.get("b").unwrap(), &[0.0, 1.0, 0.0]);
        assert!(table.get("c").is_none());
    }

    #[test]
    fn dimension_mismatch_reports_the_line() {
        let (_dir, path) = write_tmp("2 3\na 1 0 0\nb 0 1\n");
        let err = load_vec_file(&path).unwrap_err();
        assert!(
            matches!(err, EmbeddingsError::DimensionMismatch { line: 3, expected: 3, found: 2 })
        );
    }

    #[test]
    fn malformed_header_is_an_error() {
        let (_dir, path) = write_tmp("notanumber 3\n");
        assert!(matches!(load_vec_file(&path), Err(EmbeddingsError::MalformedHeader(_))));
        let (_dir, path) = write_tmp("3\n");
        assert!(matches!(load_vec_file(&path), Err(EmbeddingsError::MalformedHeader(_))));
    }

    #[test]
    fn duplicates_keep_first_and_count_mismatch_warns() {
        let (_dir, path) = write_tmp("5 2\na 1 2\na 3 4\n");
        let (table, warnings) = load_vec_file(&path).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get("a").unwrap(), &[1.0, 2.0]);
        assert_eq!(warnings.len(), 2, "{warnings:?}");
    }

    #[test]
    fn non_finite_components_are_rejected() {
        let (_dir, path) = write_tmp("1 2\na NaN 0\n");
        assert!(matches!(load_vec_file(&path), Err(EmbeddingsError::NonFinite { line: 2 })));
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let mut table = WordVectorTable::new(3);
        table.insert("a", &[0.123456789, -1.5e-7, 3.0]);
        table.insert("b", &[f32::MIN_POSITIVE, 1.0 / 3.0, -0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.vec");
        save_vec_file(&table, &path).unwrap();
        let (loaded, warnings) = load_vec_file(&path).unwrap();
        assert!(warnings.is_empty());
        for word in table.words() {
            assert_eq!(loaded.get(word).unwrap(), table.get(word).unwrap(), "word {word}");
        }
    }

    #[test]
    fn average_of_single_word_is_its_vector() {
        let mut table = WordVectorTable::new(3);
        table.insert("a", &[1.0, 0.0, 0.0]);
        let avg = doc_embedding_average(&table, &toks(&["a"]));
        assert_eq!(avg.vector, vec![1.0, 0.0, 0.0]);
        assert_eq!(avg.coverage, 1.0);
    }

    #[test]
    fn average_of_two_words() {
        let mut table = WordVectorTable::new(3);
        table.insert("a", &[1.0, 0.0, 0.0]);
        table.insert("b", &[0.0, 1.0, 0.0]);
        let avg = doc_embedding_average(&table, &toks(&["a", "b"]));
        assert_eq!(avg.vector, vec![0.5, 0.5, 0.0]);
        assert_eq!(avg.coverage, 1.0);
    }

    #[test]
    fn oov_only_documents_get_the_zero_vector() {
        let mut table = WordVectorTable::new(3);
        table.insert("a", &[1.0, 0.0, 0.0]);
        let avg = doc_embedding_average(&table, &toks(&["zzz"]));
        assert_eq!(avg.vector, vec![0.0, 0.0, 0.0]);
        assert_eq!(avg.coverage, 0.0);
        let avg = doc_embedding_average(&table, &[]);
        assert_eq!(avg.coverage, 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn averaging_is_permutation_invariant_and_repeat_stable(
                perm_seed in 0u64..1000,
                repeats in 1usize..4,
            ) {
                let mut table = WordVectorTable::new(2);
                table.insert("a", &[1.0, 2.0]);
                table.insert("b", &[-0.5, 0.25]);
                table.insert("c", &[4.0, -8.0]);
                let tokens = toks(&["a", "b", "c", "a", "zzz"]);

                let base = doc_embedding_average(&table, &tokens);

                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = tokens.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
                shuffled.shuffle(&mut rng);
                let permuted = doc_embedding_average(&table, &shuffled);
                for (x, y) in base.vector.iter().zip(&permuted.vector) {
                    prop_assert!((x - y).abs() < 1e-12);
                }

                let repeated: Vec<String> =
                    std::iter::repeat_n(tokens.clone(), repeats).flatten().collect();
                let rep = doc_embedding_average(&table, &repeated);
                for (x, y) in base.vector.iter().zip(&rep.vector) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
                prop_assert!((base.coverage - rep.coverage).abs() < 1e-12);
                prop_assert!(base.vector.iter().all(|v| v.is_finite()));
            }
        }
    }
}
