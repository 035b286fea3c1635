//! Multi-indices for partial derivatives and monomials.

use std::fmt;

use crate::error::{Error, Result};

/// A multi-index `α = (α₁, …, α_n)` of nonnegative integers.
///
/// Ordering is lexicographic on the component vector, which gives every
/// enumeration in this crate a deterministic canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        assert!(!components.is_empty(), "multi-index needs at least one axis");
        MultiIndex(components)
    }

    /// The zero multi-index in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit multi-index `e_axis` in dimension `dim` (`axis` is 0-based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        let mut c = vec![0; dim];
        c[axis] = 1;
        MultiIndex(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The order `|α| = Σ αᵢ`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn component(&self, axis: usize) -> u32 {
        self.0[axis]
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `α + e_axis`.
    pub fn bump(&self, axis: usize) -> Self {
        let mut c = self.0.clone();
        c[axis] += 1;
        MultiIndex(c)
    }

    /// Component-wise sum; dimensions must agree.
    pub fn add(&self, other: &MultiIndex) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    /// All multi-indices of dimension `dim` with `|α| ≤ max_order`,
    /// lexicographically sorted.
    pub fn enumerate_up_to(dim: usize, max_order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = vec![0u32; dim];
        collect(&mut out, &mut current, 0, max_order);
        out.sort();
        out
    }

    /// All multi-indices of dimension `dim` with `|α| = order` exactly.
    pub fn enumerate_exact(dim: usize, order: u32) -> Vec<MultiIndex> {
        Self::enumerate_up_to(dim, order)
            .into_iter()
            .filter(|a| a.order() == order)
            .collect()
    }

    /// Parses "a1,a2,…,an".
    pub fn parse(text: &str) -> Result<Self> {
        let comps: std::result::Result<Vec<u32>, _> =
            text.split(',').map(|t| t.trim().parse::<u32>()).collect();
        match comps {
            Ok(c) if !c.is_empty() => Ok(MultiIndex(c)),
            _ => Err(Error::InvalidArgument(format!(
                "cannot parse multi-index from {text:?}"
            ))),
        }
    }
}

fn collect(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, axis: usize, budget: u32) {
    if axis == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in 0..=budget {
        current[axis] = v;
        collect(out, current, axis + 1, budget - v);
    }
    current[axis] = 0;
}

impl fmt::Display for MultiIndex {
    /// Renders as "a1+a2+…+an", e.g. "2+0" (CSV-safe: no commas).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("+"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_counts_match_binomials() {
        // #{|α| ≤ m in dim n} = C(n+m, n).
        assert_eq!(MultiIndex::enumerate_up_to(2, 2).len(), 6);
        assert_eq!(MultiIndex::enumerate_up_to(2, 4).len(), 15);
        assert_eq!(MultiIndex::enumerate_up_to(3, 3).len(), 20);
    }

    #[test]
    fn enumerate_exact_counts() {
        assert_eq!(MultiIndex::enumerate_exact(2, 2).len(), 3);
        assert_eq!(MultiIndex::enumerate_exact(3, 2).len(), 6);
    }

    #[test]
    fn ordering_is_lexicographic_and_stable() {
        let all = MultiIndex::enumerate_up_to(2, 1);
        let shown: Vec<String> = all.iter().map(|a| a.to_string()).collect();
        assert_eq!(shown, vec!["0+0", "0+1", "1+0"]);
    }

    #[test]
    fn parse_round_trips() {
        let a = MultiIndex::parse("2,0,1").unwrap();
        assert_eq!(a.order(), 3);
        assert_eq!(a.to_string(), "2+0+1");
        assert!(MultiIndex::parse("x,1").is_err());
    }

    #[test]
    fn bump_and_add() {
        let a = MultiIndex::zero(2).bump(1);
        let b = MultiIndex::unit(2, 1);
        assert_eq!(a, b);
        assert_eq!(a.add(&b).unwrap().order(), 2);
        assert!(a.add(&MultiIndex::zero(3)).is_err());
    }
}
