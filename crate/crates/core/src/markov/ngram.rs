use std::collections::HashMap;

use rayon::prelude::*;

use super::{Alphabet, SymbolSequence};
use crate::error::{Error, Result};

// dense storage up to this many possible grams
const DENSE_LIMIT: u64 = 1 << 20;
// below this many windows counting stays sequential
const PARALLEL_MIN: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

/// Counts of the length-`r` windows of a sequence. Grams are keyed by their
/// base-`m` code with the first symbol most significant, so code order is
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramTable {
    order: usize,
    m: usize,
    total: u64,
    counts: Counts,
}

fn gram_space(m: usize, r: usize) -> Result<u64> {
    u32::try_from(r)
        .ok()
        .and_then(|r| (m as u64).checked_pow(r))
        .ok_or_else(|| Error::domain(format!("{m}^{r} grams do not fit in 64-bit codes")))
}

impl NGramTable {
    fn empty(m: usize, order: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("empty alphabet"));
        }
        let space = gram_space(m, order)?;
        let counts = if space <= DENSE_LIMIT { Counts::Dense(vec![0; space as usize]) } else { Counts::Sparse(HashMap::new()) };
        Ok(Self { order, m, total: 0, counts })
    }

    /// Builds a table from explicit gram counts, e.g. for synthetic checks.
    pub fn from_counts(m: usize, order: usize, grams: &[(Vec<u32>, u64)]) -> Result<Self> {
        let mut t = Self::empty(m, order)?;
        for (g, c) in grams {
            Error::check_len(order, g.len())?;
            if g.iter().any(|&x| x as usize >= m) {
                return Err(Error::domain(format!("gram {g:?} uses a symbol outside 0..{m}")));
            }
            t.add(t.encode(g), *c);
        }
        Ok(t)
    }

    fn add(&mut self, code: u64, c: u64) {
        if c == 0 {
            return;
        }
        self.total += c;
        match &mut self.counts {
            Counts::Dense(v) => v[code as usize] += c,
            Counts::Sparse(h) => *h.entry(code).or_insert(0) += c,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (code, c) in other.codes() {
            self.add(code, c);
        }
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    /// Number of windows counted.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn encode(&self, gram: &[u32]) -> u64 {
        gram.iter().fold(0u64, |acc, &x| acc * self.m as u64 + u64::from(x))
    }

    pub fn decode(&self, mut code: u64) -> Vec<u32> {
        let mut g = vec![0u32; self.order];
        for slot in g.iter_mut().rev() {
            *slot = (code % self.m as u64) as u32;
            code /= self.m as u64;
        }
        g
    }

    pub fn count(&self, gram: &[u32]) -> u64 {
        if gram.len() != self.order || gram.iter().any(|&x| x as usize >= self.m) {
            return 0;
        }
        let code = self.encode(gram);
        match &self.counts {
            Counts::Dense(v) => v[code as usize],
            Counts::Sparse(h) => h.get(&code).copied().unwrap_or(0),
        }
    }

    /// Nonzero `(code, count)` pairs in code order.
    pub fn codes(&self) -> Vec<(u64, u64)> {
        match &self.counts {
            Counts::Dense(v) => v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i as u64, c)).collect(),
            Counts::Sparse(h) => {
                let mut out: Vec<(u64, u64)> = h.iter().filter(|(_, &c)| c > 0).map(|(&k, &c)| (k, c)).collect();
                out.sort_unstable();
                out
            }
        }
    }

    /// Nonzero `(gram, count)` pairs in lexicographic order.
    pub fn entries(&self) -> Vec<(Vec<u32>, u64)> {
        self.codes().into_iter().map(|(k, c)| (self.decode(k), c)).collect()
    }

    /// Gram strings with their counts.
    pub fn labeled(&self, alphabet: &Alphabet) -> Vec<(String, u64)> {
        self.entries().into_iter().map(|(g, c)| (alphabet.decode(&g), c)).collect()
    }

    fn marginal(&self, k: usize, keep_prefix: bool) -> Result<Self> {
        if k > self.order {
            return Err(Error::domain(format!("cannot marginalize order {} onto order {k}", self.order)));
        }
        let mut t = Self::empty(self.m, k)?;
        let drop = gram_space(self.m, self.order - k)?;
        let keep = gram_space(self.m, k)?;
        for (code, c) in self.codes() {
            t.add(if keep_prefix { code / drop } else { code % keep }, c);
        }
        Ok(t)
    }

    /// Counts of the first `k` symbols of each counted window.
    pub fn prefix_marginal(&self, k: usize) -> Result<Self> {
        self.marginal(k, true)
    }

    /// Counts of the last `k` symbols of each counted window.
    pub fn suffix_marginal(&self, k: usize) -> Result<Self> {
        self.marginal(k, false)
    }

    /// Shannon entropy of the gram frequencies, in nats.
    pub fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let h: f64 = self.codes().iter().map(|&(_, c)| {
            let p = c as f64 / n;
            -p * p.ln()
        }).sum();
        h.max(0.0)
    }
}

fn count_range(data: &[u32], m: usize, r: usize, start: usize, end: usize) -> Result<NGramTable> {
    let mut t = NGramTable::empty(m, r)?;
    if r == 0 {
        t.add(0, (end - start) as u64);
        return Ok(t);
    }
    let high = gram_space(m, r - 1)?;
    let mut code = 0u64;
    for &x in &data[start..start + r - 1] {
        code = code * m as u64 + u64::from(x);
    }
    for w in start..end {
        code = (code % high) * m as u64 + u64::from(data[w + r - 1]);
        t.add(code, 1);
    }
    Ok(t)
}

/// Sliding-window counts of all length-`r` grams, `n - r + 1` windows.
/// Long sequences are split into shards counted in parallel.
pub fn count_ngrams(s: &SymbolSequence, r: usize) -> Result<NGramTable> {
    if r > s.len() {
        return Err(Error::domain(format!("order {r} exceeds sequence length {}", s.len())));
    }
    count_windows(s, r, s.len() - r + 1)
}

/// Counts of the first `windows` length-`r` windows.
pub(crate) fn count_windows(s: &SymbolSequence, r: usize, windows: usize) -> Result<NGramTable> {
    if r > s.len() || windows > s.len() + 1 - r {
        return Err(Error::domain(format!("order {r} exceeds sequence length {}", s.len())));
    }
    let m = s.m();
    let data = s.data();
    if windows < PARALLEL_MIN {
        return count_range(data, m, r, 0, windows);
    }
    let shards = rayon::current_num_threads().max(1) * 4;
    let step = windows.div_ceil(shards);
    let parts: Vec<NGramTable> = (0..shards)
        .into_par_iter()
        .map(|i| (i * step, ((i + 1) * step).min(windows)))
        .filter(|(a, b)| a < b)
        .map(|(a, b)| count_range(data, m, r, a, b))
        .collect::<Result<_>>()?;
    let mut it = parts.into_iter();
    let first = it.next().map_or_else(|| NGramTable::empty(m, r), Ok)?;
    Ok(it.fold(first, NGramTable::merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(text: &str) -> SymbolSequence {
        SymbolSequence::from_text(text).unwrap()
    }

    #[test]
    fn small_examples() {
        let s = seq("aab");
        let t = count_ngrams(&s, 1).unwrap();
        assert_eq!(t.entries(), vec![(vec![0], 2), (vec![1], 1)]);
        let full = count_ngrams(&s, 3).unwrap();
        assert_eq!(full.total(), 1);
        assert_eq!(full.count(&[0, 0, 1]), 1);
        assert!(count_ngrams(&s, 4).is_err());
        let zero = count_ngrams(&s, 0).unwrap();
        assert_eq!(zero.total(), 4);
    }

    #[test]
    fn marginals() {
        let s = seq("abbab");
        let t = count_ngrams(&s, 2).unwrap();
        let pre = t.prefix_marginal(1).unwrap();
        let suf = t.suffix_marginal(1).unwrap();
        assert_eq!(pre.entries(), vec![(vec![0], 2), (vec![1], 2)]);
        assert_eq!(suf.entries(), vec![(vec![0], 1), (vec![1], 3)]);
    }

    #[test]
    fn sparse_storage_for_large_orders() {
        let text: String = (0..300).map(|i| char::from(b'a' + ((i * 7 + i / 3) % 26) as u8)).collect();
        let s = seq(&text);
        let t = count_ngrams(&s, 6).unwrap();
        assert!(matches!(t.counts, Counts::Sparse(_)));
        assert_eq!(t.total(), 295);
        let g = s.data()[10..16].to_vec();
        assert!(t.count(&g) >= 1);
        assert!(count_ngrams(&s, 13).is_ok());
        assert!(count_ngrams(&s, 14).is_err());
        let big = SymbolSequence::new(Alphabet::new((0..300).map(|i| char::from_u32(0x100 + i).unwrap()).collect()).unwrap(), vec![0; 10]).unwrap();
        assert!(count_ngrams(&big, 8).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let data: Vec<u32> = (0..(PARALLEL_MIN as u64 + 12345)).map(|i| ((i * 2654435761) >> 7) as u32 % 5).collect();
        let s = SymbolSequence::new(Alphabet::new(vec!['a', 'b', 'c', 'd', 'e']).unwrap(), data).unwrap();
        let par = count_ngrams(&s, 3).unwrap();
        let seq = count_range(s.data(), 5, 3, 0, s.len() - 2).unwrap();
        assert_eq!(par, seq);
    }

    proptest! {
        #[test]
        fn conservation(data in proptest::collection::vec(0u32..3, 1..200), r in 0usize..6) {
            prop_assume!(r <= data.len());
            let s = SymbolSequence::new(Alphabet::new(vec!['x', 'y', 'z']).unwrap(), data.clone()).unwrap();
            let t = count_ngrams(&s, r).unwrap();
            prop_assert_eq!(t.total(), (data.len() - r + 1) as u64);
            prop_assert_eq!(t.entries().iter().map(|e| e.1).sum::<u64>(), t.total());
            if r >= 1 {
                // every (r-1)-gram count bounds the transitions out of it
                let shorter = count_ngrams(&s, r - 1).unwrap();
                let out = t.prefix_marginal(r - 1).unwrap();
                for (g, c) in out.entries() {
                    prop_assert!(c <= shorter.count(&g));
                }
                prop_assert_eq!(out.total() + 1, shorter.total());
            }
        }
    }
}
