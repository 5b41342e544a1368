//! Markov models of categorical sequences and text.
//!
//! Sequences are indices into an [`Alphabet`] of characters. Counting,
//! fitting and entropies follow the sliding-window convention without
//! wraparound: a sequence of length `n` has `n - r + 1` windows of length `r`.

mod entropy;
mod generate;
mod model;
mod ngram;

pub use entropy::{
    cond_entropy, cond_entropy_of_counts, entropy_rate_markov1, gram_entropy, kappa, kappa_counts,
    moving_threshold_chain, order_scan, redundancy, test_order, OrderScan, OrderStep,
};
pub use generate::{anneal, generate, mix_additive, mix_multiplicative, Generated, Mixed};
pub use model::{fit_conditional, ConditionalModel};
pub use ngram::{count_ngrams, NGramTable};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The blank symbol produced by whitespace.
pub const BLANK: char = ' ';

/// Ordered set of distinct symbols.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<char>", into = "Vec<char>")]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, u32>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for Alphabet {}

impl TryFrom<Vec<char>> for Alphabet {
    type Error = Error;

    fn try_from(symbols: Vec<char>) -> Result<Self> {
        Alphabet::new(symbols)
    }
}

impl From<Alphabet> for Vec<char> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::domain("empty alphabet"));
        }
        if symbols.len() > u32::MAX as usize {
            return Err(Error::domain("alphabet too large"));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i as u32).is_some() {
                return Err(Error::domain(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// Sorted distinct characters of `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut symbols: Vec<char> = text.chars().collect();
        symbols.sort_unstable();
        symbols.dedup();
        Self::new(symbols)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, i: u32) -> char {
        self.symbols[i as usize]
    }

    pub fn index_of(&self, c: char) -> Option<u32> {
        self.index.get(&c).copied()
    }

    /// Indices of the characters of `s`.
    pub fn encode(&self, s: &str) -> Result<Vec<u32>> {
        s.chars()
            .map(|c| self.index_of(c).ok_or_else(|| Error::Parse(format!("symbol {c:?} is not in the alphabet"))))
            .collect()
    }

    pub fn decode(&self, xs: &[u32]) -> String {
        xs.iter().map(|&x| self.symbol(x)).collect()
    }
}

/// How raw text becomes a symbol sequence.
///
/// Whitespace always maps to [`BLANK`], and leading and trailing blanks are
/// dropped. Punctuation means any character that is neither alphanumeric nor
/// whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationSpec {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    /// Punctuation characters kept when stripping, e.g. `"-'"`.
    pub keep: String,
    pub collapse_whitespace: bool,
    /// Fixed alphabet; inferred from the text when absent.
    pub alphabet: Option<Vec<char>>,
}

impl NormalizationSpec {
    /// Lowercase letters and digits, punctuation removed, single blanks.
    pub fn letters_and_blank() -> Self {
        Self { lowercase: true, strip_punctuation: true, collapse_whitespace: true, ..Self::default() }
    }

    pub fn apply(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let push = |c: char, out: &mut String| {
            if c.is_whitespace() {
                if !(self.collapse_whitespace && out.ends_with(BLANK)) {
                    out.push(BLANK);
                }
            } else if !(self.strip_punctuation && !c.is_alphanumeric() && !self.keep.contains(c)) {
                out.push(c);
            }
        };
        for c in text.chars() {
            if self.lowercase {
                c.to_lowercase().for_each(|l| push(l, &mut out));
            } else {
                push(c, &mut out);
            }
        }
        out.trim_matches(BLANK).to_string()
    }
}

/// A sequence of symbol indices over an alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    alphabet: Alphabet,
    data: Vec<u32>,
}

impl SymbolSequence {
    pub fn new(alphabet: Alphabet, data: Vec<u32>) -> Result<Self> {
        let m = alphabet.len() as u32;
        if let Some(bad) = data.iter().find(|&&x| x >= m) {
            return Err(Error::domain(format!("symbol index {bad} out of range 0..{m}")));
        }
        Ok(Self { alphabet, data })
    }

    /// Each character is one symbol; the alphabet is inferred.
    pub fn from_text(text: &str) -> Result<Self> {
        let alphabet = Alphabet::from_text(text)?;
        let data = alphabet.encode(text)?;
        Ok(Self { alphabet, data })
    }

    pub fn with_alphabet(text: &str, alphabet: Alphabet) -> Result<Self> {
        let data = alphabet.encode(text)?;
        Ok(Self { alphabet, data })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn m(&self) -> usize {
        self.alphabet.len()
    }

    pub fn to_text(&self) -> String {
        self.alphabet.decode(&self.data)
    }
}

/// Normalizes `text` and encodes it.
pub fn ingest_corpus(text: &str, norm: &NormalizationSpec) -> Result<SymbolSequence> {
    let clean = norm.apply(text);
    if clean.is_empty() {
        return Err(Error::Parse("no symbols left after normalization".into()));
    }
    match &norm.alphabet {
        Some(symbols) => SymbolSequence::with_alphabet(&clean, Alphabet::new(symbols.clone())?),
        None => SymbolSequence::from_text(&clean),
    }
}
