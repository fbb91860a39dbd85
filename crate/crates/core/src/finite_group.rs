//! Finite groups given by an explicit multiplication table.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Elements are the indices `0..order`; `mul(a, b)` is `a * b`.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<u32>,
    identity: usize,
    inverses: Vec<usize>,
}

impl FiniteGroup {
    /// Builds the table of a concrete group by multiplying every pair and
    /// looking the product up by key. Fails if the set is not closed or has no
    /// identity.
    pub fn from_elements<T, K, M, F>(elements: &[T], mul: M, key: F) -> Result<Self>
    where
        T: Sync,
        K: Hash + Eq + Send + Sync,
        M: Fn(&T, &T) -> T + Sync,
        F: Fn(&T) -> K + Sync,
    {
        let n = elements.len();
        let index: HashMap<K, usize> = elements.iter().enumerate().map(|(i, e)| (key(e), i)).collect();
        if index.len() != n {
            return Err(Error::VerificationFailed("duplicate group elements".into()));
        }
        let rows: Vec<Option<Vec<u32>>> = elements
            .par_iter()
            .map(|a| {
                elements
                    .iter()
                    .map(|b| index.get(&key(&mul(a, b))).map(|&k| k as u32))
                    .collect::<Option<Vec<u32>>>()
            })
            .collect();
        let mut table = Vec::with_capacity(n * n);
        for row in rows {
            table.extend(row.ok_or_else(|| Error::VerificationFailed("set is not closed under products".into()))?);
        }
        Self::from_table(n, table)
    }

    pub fn from_table(order: usize, table: Vec<u32>) -> Result<Self> {
        if table.len() != order * order {
            return Err(Error::WrongCardinality { expected: order * order, found: table.len() });
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|a| table[e * order + a] as usize == a && table[a * order + e] as usize == a))
            .ok_or_else(|| Error::VerificationFailed("no identity element".into()))?;
        let inverses = (0..order)
            .map(|a| {
                (0..order)
                    .find(|&b| table[a * order + b] as usize == identity)
                    .ok_or_else(|| Error::VerificationFailed("element without inverse".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { order, table, identity, inverses })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b] as usize
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverses[a]
    }

    pub fn pow(&self, a: usize, k: usize) -> usize {
        (0..k).fold(self.identity, |acc, _| self.mul(acc, a))
    }

    /// `g a g^-1`
    pub fn conj(&self, g: usize, a: usize) -> usize {
        self.mul(self.mul(g, a), self.inv(g))
    }

    pub fn element_order(&self, a: usize) -> usize {
        let mut x = a;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }

    pub fn is_associative(&self) -> bool {
        let n = self.order;
        (0..n).into_par_iter().all(|a| {
            (0..n).all(|b| (0..n).all(|c| self.mul(self.mul(a, b), c) == self.mul(a, self.mul(b, c))))
        })
    }

    /// Subgroup generated by `gens`, as a sorted set.
    pub fn closure(&self, gens: &[usize]) -> BTreeSet<usize> {
        let mut set = BTreeSet::from([self.identity]);
        let mut frontier = vec![self.identity];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if set.insert(y) {
                    frontier.push(y);
                }
            }
        }
        set
    }

    pub fn is_subgroup(&self, set: &BTreeSet<usize>) -> bool {
        set.contains(&self.identity) && set.iter().all(|&a| set.iter().all(|&b| set.contains(&self.mul(a, b))))
    }

    /// Normal in the subgroup `within`.
    pub fn is_normal_in(&self, sub: &BTreeSet<usize>, within: &BTreeSet<usize>) -> bool {
        within.iter().all(|&g| sub.iter().all(|&h| sub.contains(&self.conj(g, h))))
    }

    pub fn is_normal(&self, sub: &BTreeSet<usize>) -> bool {
        (0..self.order).all(|g| sub.iter().all(|&h| sub.contains(&self.conj(g, h))))
    }

    /// Conjugacy classes of the subgroup `within`, each sorted, ordered by their
    /// smallest element.
    pub fn conjugacy_classes(&self, within: &BTreeSet<usize>) -> Vec<Vec<usize>> {
        let mut seen = BTreeSet::new();
        let mut classes = Vec::new();
        for &a in within {
            if seen.contains(&a) {
                continue;
            }
            let class: BTreeSet<usize> = within.iter().map(|&g| self.conj(g, a)).collect();
            seen.extend(class.iter().copied());
            classes.push(class.into_iter().collect());
        }
        classes
    }

    pub fn center(&self, within: &BTreeSet<usize>) -> BTreeSet<usize> {
        within
            .iter()
            .copied()
            .filter(|&a| within.iter().all(|&g| self.mul(a, g) == self.mul(g, a)))
            .collect()
    }

    pub fn all(&self) -> BTreeSet<usize> {
        (0..self.order).collect()
    }
}
