//! Failure-aggregate vectors and their lexicographic order.
//!
//! Storage is ascending: index `i` holds `p_i`. Comparison walks from the top
//! index down, and vectors of different capacity are compared as if the
//! shorter one were zero-extended. Truncating a vector is therefore a plain
//! length cut.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Anything that can be read as a zero-extended integer vector.
pub trait LexVector {
    /// Highest stored index.
    fn capacity(&self) -> usize;
    /// Entry at `i`; zero above the capacity.
    fn entry(&self, i: usize) -> i64;
}

/// Lexicographic comparison from the highest index down to index 0.
pub fn lex_compare<A, B>(a: &A, b: &B) -> Ordering
where
    A: LexVector + ?Sized,
    B: LexVector + ?Sized,
{
    let top = a.capacity().max(b.capacity());
    for i in (0..=top).rev() {
        match a.entry(i).cmp(&b.entry(i)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Expanded failure aggregate `<p_rho, ..., p_0>` of a placement of size `rho`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FailureAggregate {
    counts: Vec<u64>,
}

impl FailureAggregate {
    pub fn zeros(rho: usize) -> Self {
        FailureAggregate {
            counts: vec![0; rho + 1],
        }
    }

    /// Builds from ascending storage (`counts[i] = p_i`).
    pub fn from_ascending(counts: Vec<u64>) -> Self {
        assert!(!counts.is_empty(), "aggregate needs at least p_0");
        FailureAggregate { counts }
    }

    /// Builds from display order (`p_rho` first).
    pub fn from_descending(display: &[u64]) -> Self {
        let mut counts = display.to_vec();
        counts.reverse();
        FailureAggregate::from_ascending(counts)
    }

    pub fn rho(&self) -> usize {
        self.counts.len() - 1
    }

    /// `p_i`; zero above `rho`.
    pub fn get(&self, i: usize) -> u64 {
        self.counts.get(i).copied().unwrap_or(0)
    }

    pub fn ascending(&self) -> &[u64] {
        &self.counts
    }

    /// Entries in display order, `p_rho` first.
    pub fn descending(&self) -> Vec<u64> {
        self.counts.iter().rev().copied().collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub(crate) fn increment(&mut self, i: usize) {
        self.counts[i] += 1;
    }

    /// Cuts to `capacity`, failing if a non-zero entry would be lost.
    pub fn truncate(&self, capacity: usize) -> Result<CompactAggregate> {
        if self.counts.iter().skip(capacity + 1).any(|&c| c != 0) {
            return Err(Error::CapacityExceeded { target: capacity });
        }
        let mut entries: Vec<i64> = self.counts.iter().map(|&c| c as i64).collect();
        entries.resize(capacity + 1, 0);
        Ok(CompactAggregate { entries })
    }
}

impl LexVector for FailureAggregate {
    fn capacity(&self) -> usize {
        self.rho()
    }

    fn entry(&self, i: usize) -> i64 {
        self.get(i) as i64
    }
}

impl Ord for FailureAggregate {
    fn cmp(&self, other: &Self) -> Ordering {
        lex_compare(self, other)
    }
}

impl PartialOrd for FailureAggregate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FailureAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (k, c) in self.counts.iter().rev().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(">")
    }
}

impl FromStr for FailureAggregate {
    type Err = Error;

    /// Parses `<p_rho,...,p_0>`; no whitespace is accepted.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::MalformedAggregate(s.to_string());
        let inner = s
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(bad)?;
        let display = inner
            .split(',')
            .map(|tok| {
                if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad());
                }
                tok.parse::<u64>().map_err(|_| bad())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FailureAggregate::from_descending(&display))
    }
}

/// Truncated signed vector with entries `0..=capacity`.
///
/// Pure aggregates are non-negative; differences of aggregates may not be.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompactAggregate {
    entries: Vec<i64>,
}

impl CompactAggregate {
    pub fn zeros(capacity: usize) -> Self {
        CompactAggregate {
            entries: vec![0; capacity + 1],
        }
    }

    pub fn from_entries(entries: Vec<i64>) -> Self {
        assert!(!entries.is_empty(), "compact aggregate needs index 0");
        CompactAggregate { entries }
    }

    /// Unit vector with a one at `index`.
    pub fn unit(capacity: usize, index: usize) -> Result<Self> {
        let mut v = CompactAggregate::zeros(capacity);
        v.bump(index)?;
        Ok(v)
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> i64 {
        self.entries.get(i).copied().unwrap_or(0)
    }

    pub fn total(&self) -> i64 {
        self.entries.iter().sum()
    }

    /// Increments entry `index` by one.
    pub fn bump(&mut self, index: usize) -> Result<()> {
        self.bump_by(index, 1)
    }

    pub fn bump_by(&mut self, index: usize, amount: i64) -> Result<()> {
        let capacity = self.capacity();
        let slot = self
            .entries
            .get_mut(index)
            .ok_or(Error::IndexOutOfRange { index, capacity })?;
        *slot += amount;
        Ok(())
    }

    /// Grows to at least `capacity`, zero-filling.
    pub fn widen(&mut self, capacity: usize) {
        if self.entries.len() < capacity + 1 {
            self.entries.resize(capacity + 1, 0);
        }
    }

    /// Pointwise `self += other`, widening to the larger capacity.
    pub fn add_assign(&mut self, other: &impl LexVector) {
        self.widen(other.capacity());
        for i in 0..=other.capacity() {
            self.entries[i] += other.entry(i);
        }
    }

    /// Pointwise `self -= other`, widening to the larger capacity.
    pub fn sub_assign(&mut self, other: &impl LexVector) {
        self.widen(other.capacity());
        for i in 0..=other.capacity() {
            self.entries[i] -= other.entry(i);
        }
    }

    /// Zero-extends into an aggregate of size `rho`.
    pub fn expand(&self, rho: usize) -> Result<FailureAggregate> {
        expand(self, rho)
    }
}

impl LexVector for CompactAggregate {
    fn capacity(&self) -> usize {
        self.entries.len() - 1
    }

    fn entry(&self, i: usize) -> i64 {
        self.get(i)
    }
}

impl fmt::Display for CompactAggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (k, c) in self.entries.iter().rev().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(">")
    }
}

/// Difference `b - a` of two aggregates; ordered lexicographically like any vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AggregateDiff(CompactAggregate);

impl AggregateDiff {
    pub fn as_compact(&self) -> &CompactAggregate {
        &self.0
    }

    pub fn into_compact(self) -> CompactAggregate {
        self.0
    }
}

impl LexVector for AggregateDiff {
    fn capacity(&self) -> usize {
        self.0.capacity()
    }

    fn entry(&self, i: usize) -> i64 {
        self.0.get(i)
    }
}

/// Pointwise sum; the result has the larger capacity.
pub fn add(a: &impl LexVector, b: &impl LexVector) -> CompactAggregate {
    let mut out = CompactAggregate::zeros(a.capacity().max(b.capacity()));
    out.add_assign(a);
    out.add_assign(b);
    out
}

/// Pointwise difference `a - b`.
pub fn subtract(a: &impl LexVector, b: &impl LexVector) -> AggregateDiff {
    let mut out = CompactAggregate::zeros(a.capacity().max(b.capacity()));
    out.add_assign(a);
    out.sub_assign(b);
    AggregateDiff(out)
}

/// Copy of `a` with entry `k` incremented.
pub fn bump(a: &CompactAggregate, k: usize) -> Result<CompactAggregate> {
    let mut out = a.clone();
    out.bump(k)?;
    Ok(out)
}

/// Sums vectors into one buffer sized to the largest capacity; cost is the
/// sum of the operand lengths plus the buffer.
pub fn sum_all<'a, V, I>(vectors: I) -> CompactAggregate
where
    V: LexVector + 'a,
    I: IntoIterator<Item = &'a V>,
    I::IntoIter: Clone,
{
    let iter = vectors.into_iter();
    let cap = iter.clone().map(|v| v.capacity()).max().unwrap_or(0);
    let mut out = CompactAggregate::zeros(cap);
    for v in iter {
        for i in 0..=v.capacity() {
            out.entries[i] += v.entry(i);
        }
    }
    out
}

/// Zero-extends a compact aggregate to size `rho`.
pub fn expand(c: &CompactAggregate, rho: usize) -> Result<FailureAggregate> {
    if c.capacity() > rho {
        return Err(Error::CapacityExceeded { target: rho });
    }
    let mut counts = vec![0u64; rho + 1];
    for (i, &v) in c.entries.iter().enumerate() {
        counts[i] = u64::try_from(v)
            .map_err(|_| Error::MalformedAggregate(format!("negative entry {v} at index {i}")))?;
    }
    Ok(FailureAggregate::from_ascending(counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(display: &[u64]) -> FailureAggregate {
        FailureAggregate::from_descending(display)
    }

    fn compact(display: &[i64]) -> CompactAggregate {
        let mut e = display.to_vec();
        e.reverse();
        CompactAggregate::from_entries(e)
    }

    #[test]
    fn compares_from_the_top() {
        assert_eq!(
            lex_compare(&agg(&[2, 1, 3, 7]), &agg(&[1, 1, 4, 7])),
            Ordering::Greater
        );
        assert_eq!(
            lex_compare(&agg(&[1, 1, 7, 0]), &agg(&[1, 3, 3, 2])),
            Ordering::Less
        );
        let v = agg(&[0, 4, 1]);
        assert_eq!(lex_compare(&v, &v), Ordering::Equal);
    }

    #[test]
    fn pointwise_arithmetic() {
        assert_eq!(
            add(&compact(&[0, 1, 2]), &compact(&[1, 0, 0])),
            compact(&[1, 1, 2])
        );
        assert_eq!(
            subtract(&compact(&[1, 0, 2]), &compact(&[0, 1, 1])).into_compact(),
            compact(&[1, -1, 1])
        );
        assert_eq!(
            bump(&CompactAggregate::zeros(2), 1).unwrap(),
            compact(&[0, 1, 0])
        );
        assert_eq!(
            CompactAggregate::zeros(2).bump(3),
            Err(Error::IndexOutOfRange {
                index: 3,
                capacity: 2
            })
        );
    }

    #[test]
    fn expand_zero_extends() {
        assert_eq!(compact(&[1, 3]).expand(3).unwrap(), agg(&[0, 0, 1, 3]));
        assert_eq!(compact(&[5]).expand(2).unwrap(), agg(&[0, 0, 5]));
        assert_eq!(
            compact(&[1, 0, 0]).expand(1),
            Err(Error::CapacityExceeded { target: 1 })
        );
        let c = compact(&[2, 0, 9]);
        assert_eq!(c.expand(6).unwrap().truncate(2).unwrap(), c);
    }

    #[test]
    fn sum_all_uses_max_capacity() {
        let parts = [compact(&[1, 1]), compact(&[3]), compact(&[1, 0, 0])];
        assert_eq!(sum_all(parts.iter()), compact(&[1, 1, 4]));
    }

    #[test]
    fn text_round_trip() {
        let a: FailureAggregate = "<1,1,4,7>".parse().unwrap();
        assert_eq!(a, agg(&[1, 1, 4, 7]));
        assert_eq!(a.to_string(), "<1,1,4,7>");
        assert_eq!("<13>".parse::<FailureAggregate>().unwrap().rho(), 0);
        for bad in ["1,2", "<>", "<1, 2>", "<1,,2>", "<-1>", "<1,2"] {
            assert!(bad.parse::<FailureAggregate>().is_err(), "{bad}");
        }
    }
}
