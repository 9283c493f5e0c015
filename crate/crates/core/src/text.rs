//! Tokenization and TF-IDF statistics shared by the claim analyzer, the
//! need graph and the matcher.

use std::collections::{BTreeMap, BTreeSet};

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "being", "between", "both", "but", "by", "can", "could", "do", "does", "each", "for", "from", "further", "has",
    "have", "having", "he", "her", "here", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "more",
    "most", "no", "nor", "not", "of", "on", "one", "only", "or", "other", "our", "out", "over", "said", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
    "those", "through", "to", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "wherein",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercase alphanumeric runs, in order, stopwords included.
pub fn raw_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase()).collect()
}

/// Lowercase alphanumeric tokens with stopwords and bare numbers removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    raw_tokens(text).into_iter().filter(|t| !is_stopword(t) && !t.chars().all(|c| c.is_ascii_digit())).collect()
}

pub fn token_set(text: &str) -> BTreeSet<String> {
    content_tokens(text).into_iter().collect()
}

/// Jaccard index of two sets; two empty sets score 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn term_counts(text: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in content_tokens(text) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Document frequencies over a corpus. Order of documents does not matter.
#[derive(Debug, Clone, Default)]
pub struct IdfTable {
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn from_documents<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = IdfTable::default();
        for doc in docs {
            table.n_docs += 1;
            for t in token_set(doc) {
                *table.df.entry(t).or_insert(0) += 1;
            }
        }
        table
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`;
    /// always positive, so TF-IDF vectors stay nonnegative.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    pub fn vectorize(&self, text: &str) -> BTreeMap<String, f64> {
        term_counts(text)
            .into_iter()
            .map(|(t, c)| {
                let w = c as f64 * self.idf(&t);
                (t, w)
            })
            .collect()
    }
}

/// Cosine similarity of two sparse vectors. Zero vectors score 0.
pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, va)| b.get(k).map(|vb| va * vb)).sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Top `n` terms of `text` by TF-IDF weight; ties broken alphabetically.
pub fn top_terms(idf: &IdfTable, text: &str, n: usize) -> Vec<String> {
    let mut weighted: Vec<(String, f64)> = idf.vectorize(text).into_iter().collect();
    weighted.sort_by(|(ta, wa), (tb, wb)| wb.total_cmp(wa).then_with(|| ta.cmp(tb)));
    weighted.into_iter().take(n).map(|(t, _)| t).collect()
}
