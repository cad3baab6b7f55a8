//! Permutation-symmetric sector of the annealing Hamiltonian.
//!
//! Each sub-graph is a block of interchangeable spins, represented by its
//! Dicke ladder `|m⟩` (`m` = number of up spins). When a catalyst pair lives
//! in a sub-graph, that sub-graph splits into a 2-spin pair block (states
//! both-down, symmetric one-up, both-up) and a ladder over the remaining
//! spins. The pair-antisymmetric singlet is dropped.
//!
//! Collective operators on an `N`-spin block:
//!
//! ```text
//! Σ σ^z |m⟩ = (2m − N) |m⟩
//! ⟨m+1| Σ σ^x |m⟩ = √((m+1)(N−m))
//! ```
//!
//! and on the pair block `σ^x σ^x` swaps both-down with both-up and leaves the
//! symmetric one-up state with eigenvalue `+1`.

use crate::error::{Error, Result};
use crate::hamiltonian::{CatalystSpec, DenseOperator};
use crate::mwis::{IsingEncoding, MwisInstance};
use crate::system::AnnealSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Ladder,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub sub_graph: usize,
    pub spins: usize,
    pub kind: BlockKind,
}

impl Block {
    pub fn levels(&self) -> usize {
        self.spins + 1
    }
}

/// Reduced basis: one label per block, enumerated lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    blocks: Vec<Block>,
    labels: Vec<Vec<usize>>,
    pair_block: Option<usize>,
}

impl SectorBasis {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn pair_block(&self) -> Option<usize> {
        self.pair_block
    }

    /// Mixed-radix index of a label (block 0 most significant).
    pub fn index_of(&self, label: &[usize]) -> usize {
        self.blocks
            .iter()
            .zip(label)
            .fold(0, |acc, (b, &m)| acc * b.levels() + m)
    }

    /// Per-sub-graph up counts for a label.
    pub fn sub_graph_counts(&self, label: &[usize], k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for (b, &m) in self.blocks.iter().zip(label) {
            counts[b.sub_graph] += m;
        }
        counts
    }

    /// Number of computational basis states folded into a label.
    pub fn multiplicity(&self, label: &[usize]) -> f64 {
        self.blocks
            .iter()
            .zip(label)
            .map(|(b, &m)| binomial(b.spins, m))
            .product()
    }

    /// Label of the symmetric state containing a given per-block occupation.
    /// Block occupations must respect block sizes.
    pub fn label_for_block_counts(&self, counts: &[usize]) -> Option<usize> {
        if counts.len() != self.blocks.len()
            || counts.iter().zip(&self.blocks).any(|(&m, b)| m > b.spins)
        {
            return None;
        }
        Some(self.index_of(counts))
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Builds the sector basis. At most one catalyst pair is supported and both of
/// its qubits must belong to the same sub-graph.
pub fn sector_basis(sizes: &[usize], spec: Option<&CatalystSpec>) -> Result<SectorBasis> {
    let n: usize = sizes.iter().sum();
    let pair_sub_graph = match spec {
        Some(spec) if !spec.pairs.is_empty() => {
            spec.validate(n)?;
            if spec.pairs.len() > 1 {
                return Err(Error::SectorUnsupported(format!(
                    "{} catalyst pairs; at most one is supported",
                    spec.pairs.len()
                )));
            }
            let (i, j) = spec.pairs[0];
            let of = |q: usize| {
                let mut acc = 0;
                sizes
                    .iter()
                    .position(|&na| {
                        acc += na;
                        q < acc
                    })
                    .unwrap()
            };
            if of(i) != of(j) {
                return Err(Error::SectorUnsupported(format!(
                    "pair ({i}, {j}) spans sub-graphs {} and {}",
                    of(i),
                    of(j)
                )));
            }
            Some(of(i))
        }
        _ => None,
    };

    let mut blocks = Vec::new();
    let mut pair_block = None;
    for (a, &na) in sizes.iter().enumerate() {
        if Some(a) == pair_sub_graph {
            pair_block = Some(blocks.len());
            blocks.push(Block {
                sub_graph: a,
                spins: 2,
                kind: BlockKind::Pair,
            });
            blocks.push(Block {
                sub_graph: a,
                spins: na - 2,
                kind: BlockKind::Ladder,
            });
        } else {
            blocks.push(Block {
                sub_graph: a,
                spins: na,
                kind: BlockKind::Ladder,
            });
        }
    }

    let mut labels: Vec<Vec<usize>> = vec![vec![]];
    for b in &blocks {
        labels = labels
            .into_iter()
            .flat_map(|prefix| {
                (0..b.levels()).map(move |m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }

    Ok(SectorBasis {
        blocks,
        labels,
        pair_block,
    })
}

/// Sector basis for an instance and optional catalyst.
pub fn sector_basis_for(instance: &MwisInstance, spec: Option<&CatalystSpec>) -> Result<SectorBasis> {
    sector_basis(instance.sub_graph_sizes(), spec)
}

/// `H(s)` restricted to the symmetric sector.
pub fn sector_hamiltonian(
    encoding: &IsingEncoding,
    spec: &CatalystSpec,
    s: f64,
) -> Result<DenseOperator> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ScheduleOutOfRange(s));
    }
    let system = AnnealSystem::sector(encoding, spec)?;
    Ok(DenseOperator::new(system.hamiltonian(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(sector_basis(&[2, 3], None).unwrap().dim(), 12);
        let spec = CatalystSpec::single(2, 3, 0.3);
        assert_eq!(sector_basis(&[2, 3], Some(&spec)).unwrap().dim(), 18);
        assert_eq!(sector_basis(&[1, 1], None).unwrap().dim(), 4);
        // Zero-strength pairs still split the block so layouts stay fixed across sweeps.
        let spec0 = CatalystSpec::single(0, 1, 0.0);
        assert_eq!(sector_basis(&[2, 3], Some(&spec0)).unwrap().dim(), 3 * 4);
    }

    #[test]
    fn rejects_spanning_and_multiple_pairs() {
        let spanning = CatalystSpec::single(1, 2, 1.0);
        assert!(matches!(
            sector_basis(&[2, 3], Some(&spanning)),
            Err(Error::SectorUnsupported(_))
        ));
        let two = CatalystSpec {
            pairs: vec![(2, 3), (3, 4)],
            jxx: 1.0,
        };
        assert!(sector_basis(&[2, 3], Some(&two)).is_err());
    }

    #[test]
    fn labels_are_lexicographic_and_indexed() {
        let b = sector_basis(&[2, 3], None).unwrap();
        assert_eq!(b.labels()[0], vec![0, 0]);
        assert_eq!(b.labels()[1], vec![0, 1]);
        assert_eq!(b.labels()[4], vec![1, 0]);
        for (i, l) in b.labels().iter().enumerate() {
            assert_eq!(b.index_of(l), i);
        }
    }

    #[test]
    fn multiplicities_sum_to_full_dimension() {
        let spec = CatalystSpec::single(2, 3, 1.0);
        let b = sector_basis(&[2, 3], Some(&spec)).unwrap();
        let total: f64 = b.labels().iter().map(|l| b.multiplicity(l)).sum();
        assert_eq!(total, 32.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
    }
}
