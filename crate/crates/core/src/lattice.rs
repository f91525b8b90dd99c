//! Power-set lattice over the attribute set `{1..L}`.
//!
//! Subsets are ordered by cardinality, ties broken by ascending bit mask, so
//! stage 1 is the empty set and stage `2^L` is the full attribute set. Stage
//! indices are 1-based throughout the crate.

use std::fmt;

use crate::error::{Error, Result};

/// Largest attribute count the lattice will enumerate.
pub const MAX_ATTRIBUTES: usize = 20;

/// A subset of `{1..L}` stored as a bit mask; bit `a - 1` marks attribute `a`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeSubset(u32);

impl AttributeSubset {
    pub const EMPTY: AttributeSubset = AttributeSubset(0);

    pub fn from_mask(mask: u32) -> Self {
        AttributeSubset(mask)
    }

    /// Builds a subset from 1-based attribute indices.
    pub fn from_members(members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &a in members {
            if a == 0 || a > MAX_ATTRIBUTES {
                return Err(Error::Index {
                    index: a,
                    max: MAX_ATTRIBUTES,
                });
            }
            mask |= 1 << (a - 1);
        }
        Ok(AttributeSubset(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, attribute: usize) -> bool {
        (1..=32).contains(&attribute) && self.0 & (1 << (attribute - 1)) != 0
    }

    /// 1-based attribute indices in ascending order.
    pub fn members(self) -> Vec<usize> {
        (1..=32).filter(|&a| self.contains(a)).collect()
    }

    /// True iff every member of `self` is a member of `other`.
    pub fn is_subset(self, other: AttributeSubset) -> bool {
        self.0 & !other.0 == 0
    }
}

impl fmt::Display for AttributeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        let members: Vec<String> = self.members().iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", members.join(","))
    }
}

pub fn is_subset(a: AttributeSubset, b: AttributeSubset) -> bool {
    a.is_subset(b)
}

/// The ordered power set of `{1..L}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeLattice {
    attributes: usize,
    order: Vec<AttributeSubset>,
}

impl AttributeLattice {
    /// Enumerates all `2^L` subsets sorted by `(cardinality, mask)`.
    pub fn new(attributes: usize) -> Result<Self> {
        if attributes > MAX_ATTRIBUTES {
            return Err(Error::Size(attributes, MAX_ATTRIBUTES));
        }
        let m = 1u32 << attributes;
        let mut order: Vec<AttributeSubset> = (0..m).map(AttributeSubset).collect();
        order.sort_by_key(|s| (s.len(), s.mask()));
        Ok(AttributeLattice { attributes, order })
    }

    /// Number of attributes `L`.
    pub fn attributes(&self) -> usize {
        self.attributes
    }

    /// Number of subsets (messages / stages), `M = 2^L`.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn subsets(&self) -> &[AttributeSubset] {
        &self.order
    }

    /// The subset labelling stage `i` (1-based).
    pub fn subset(&self, stage: usize) -> Result<AttributeSubset> {
        self.check_stage(stage)?;
        Ok(self.order[stage - 1])
    }

    fn check_stage(&self, stage: usize) -> Result<()> {
        if stage == 0 || stage > self.order.len() {
            return Err(Error::Index {
                index: stage,
                max: self.order.len(),
            });
        }
        Ok(())
    }

    /// Stages `j < i` whose subsets are contained in the subset of stage `i`,
    /// ascending. These are exactly the strict subsets of `A_i`.
    pub fn sub_support(&self, stage: usize) -> Result<Vec<usize>> {
        let target = self.subset(stage)?;
        Ok(self.order[..stage - 1]
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_subset(target))
            .map(|(j, _)| j + 1)
            .collect())
    }

    /// Stage indices grouped by subset cardinality, level 0 first.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![Vec::new(); self.attributes + 1];
        for (j, s) in self.order.iter().enumerate() {
            levels[s.len()].push(j + 1);
        }
        levels
    }
}

pub fn enumerate_subsets(attributes: usize) -> Result<AttributeLattice> {
    AttributeLattice::new(attributes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(members: &[usize]) -> AttributeSubset {
        AttributeSubset::from_members(members).unwrap()
    }

    #[test]
    fn zero_attributes_is_single_empty_set() {
        let lat = enumerate_subsets(0).unwrap();
        assert_eq!(lat.subsets(), &[AttributeSubset::EMPTY]);
    }

    #[test]
    fn two_attributes_order() {
        let lat = enumerate_subsets(2).unwrap();
        assert_eq!(lat.subsets(), &[set(&[]), set(&[1]), set(&[2]), set(&[1, 2])]);
    }

    #[test]
    fn three_attributes_prefix() {
        let lat = enumerate_subsets(3).unwrap();
        assert_eq!(lat.len(), 8);
        assert_eq!(&lat.subsets()[..4], &[set(&[]), set(&[1]), set(&[2]), set(&[3])]);
        assert_eq!(lat.subset(8).unwrap(), set(&[1, 2, 3]));
    }

    #[test]
    fn too_many_attributes() {
        assert!(matches!(enumerate_subsets(21), Err(Error::Size(21, 20))));
    }

    #[test]
    fn subset_relation() {
        assert!(is_subset(set(&[]), set(&[1, 2])));
        assert!(is_subset(set(&[1]), set(&[1, 2])));
        assert!(!is_subset(set(&[2]), set(&[1])));
    }

    #[test]
    fn sub_support_examples() {
        let lat = enumerate_subsets(2).unwrap();
        assert_eq!(lat.sub_support(1).unwrap(), Vec::<usize>::new());
        assert_eq!(lat.sub_support(2).unwrap(), vec![1]);
        assert_eq!(lat.sub_support(3).unwrap(), vec![1]);
        assert_eq!(lat.sub_support(4).unwrap(), vec![1, 2, 3]);
        assert!(matches!(lat.sub_support(0), Err(Error::Index { .. })));
        assert!(matches!(lat.sub_support(5), Err(Error::Index { .. })));
    }

    #[test]
    fn sub_support_is_strictly_lower_cardinality() {
        for l in 0..=6 {
            let lat = enumerate_subsets(l).unwrap();
            for i in 1..=lat.len() {
                let ai = lat.subset(i).unwrap();
                let support = lat.sub_support(i).unwrap();
                // Every strict subset of A_i must appear.
                assert_eq!(support.len(), (1usize << ai.len()) - 1);
                for j in support {
                    assert!(j < i);
                    assert!(lat.subset(j).unwrap().len() < ai.len());
                }
            }
        }
    }

    #[test]
    fn levels_partition_stages() {
        let lat = enumerate_subsets(3).unwrap();
        let levels = lat.levels();
        assert_eq!(levels, vec![vec![1], vec![2, 3, 4], vec![5, 6, 7], vec![8]]);
    }

    #[test]
    fn display() {
        assert_eq!(set(&[]).to_string(), "∅");
        assert_eq!(set(&[1, 3]).to_string(), "{1,3}");
    }
}
