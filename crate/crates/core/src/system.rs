//! A prepared annealing problem in either the full computational basis or the
//! symmetric sector. Holds the three schedule-independent parts of `H(s)` in
//! sparse form and assembles dense matrices on demand.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{schedule_coefficients, CatalystSpec, FULL_SPACE_CAP};
use crate::mwis::IsingEncoding;
use crate::sector::{binomial, sector_basis, BlockKind, SectorBasis};
use crate::spectrum::{eigh, Eigenpairs};

/// Which Hilbert space to diagonalize in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceMode {
    Full,
    Sector,
    /// Full space up to [`FULL_SPACE_CAP`] qubits, sector beyond.
    #[default]
    Auto,
}

#[derive(Debug, Clone)]
enum Basis {
    Full,
    Sector(SectorBasis),
}

#[derive(Debug, Clone)]
pub struct AnnealSystem {
    encoding: IsingEncoding,
    catalyst: CatalystSpec,
    basis: Basis,
    dim: usize,
    problem_diag: Vec<f64>,
    /// `(row, col, value)` entries of `H_d`, both triangles.
    driver_terms: Vec<(usize, usize, f64)>,
    /// Entries of `H_c` (strength included), both triangles plus any diagonal.
    catalyst_terms: Vec<(usize, usize, f64)>,
}

impl AnnealSystem {
    pub fn new(encoding: &IsingEncoding, catalyst: &CatalystSpec, mode: SpaceMode) -> Result<Self> {
        match mode {
            SpaceMode::Full => Self::full(encoding, catalyst),
            SpaceMode::Sector => Self::sector(encoding, catalyst),
            SpaceMode::Auto if encoding.n() > FULL_SPACE_CAP => Self::sector(encoding, catalyst),
            SpaceMode::Auto => Self::full(encoding, catalyst),
        }
    }

    pub fn full(encoding: &IsingEncoding, catalyst: &CatalystSpec) -> Result<Self> {
        let n = encoding.n();
        if n > FULL_SPACE_CAP {
            return Err(Error::CapExceeded {
                qubits: n,
                cap: FULL_SPACE_CAP,
                what: "dense full-space operators",
            });
        }
        catalyst.validate(n)?;
        let dim = 1usize << n;
        let problem_diag = (0..dim).map(|m| encoding.energy(m as u64)).collect();
        let mut driver_terms = Vec::with_capacity(dim * n);
        for state in 0..dim {
            for i in 0..n {
                driver_terms.push((state, state ^ (1 << i), -1.0));
            }
        }
        let mut catalyst_terms = Vec::new();
        if catalyst.jxx != 0.0 {
            for flip in catalyst.flip_masks() {
                for state in 0..dim {
                    catalyst_terms.push((state, state ^ flip as usize, catalyst.jxx));
                }
            }
        }
        Ok(Self {
            encoding: encoding.clone(),
            catalyst: catalyst.clone(),
            basis: Basis::Full,
            dim,
            problem_diag,
            driver_terms,
            catalyst_terms,
        })
    }

    pub fn sector(encoding: &IsingEncoding, catalyst: &CatalystSpec) -> Result<Self> {
        let basis = sector_basis(encoding.sub_graph_sizes(), Some(catalyst))?;
        let k = encoding.k();
        let dim = basis.dim();
        let blocks = basis.blocks().to_vec();

        let problem_diag = basis
            .labels()
            .iter()
            .map(|l| encoding.energy_by_counts(&basis.sub_graph_counts(l, k)))
            .collect();

        let mut driver_terms = Vec::new();
        let mut catalyst_terms = Vec::new();
        for (row, label) in basis.labels().iter().enumerate() {
            for (b, block) in blocks.iter().enumerate() {
                let m = label[b];
                if m < block.spins {
                    let mut up = label.clone();
                    up[b] += 1;
                    let col = basis.index_of(&up);
                    let amp = (((m + 1) * (block.spins - m)) as f64).sqrt();
                    driver_terms.push((row, col, -amp));
                    driver_terms.push((col, row, -amp));
                }
                if block.kind == BlockKind::Pair && catalyst.jxx != 0.0 {
                    match m {
                        0 => {
                            let mut both = label.clone();
                            both[b] = 2;
                            let col = basis.index_of(&both);
                            catalyst_terms.push((row, col, catalyst.jxx));
                            catalyst_terms.push((col, row, catalyst.jxx));
                        }
                        1 => catalyst_terms.push((row, row, catalyst.jxx)),
                        _ => {}
                    }
                }
            }
        }
        Ok(Self {
            encoding: encoding.clone(),
            catalyst: catalyst.clone(),
            basis: Basis::Sector(basis),
            dim,
            problem_diag,
            driver_terms,
            catalyst_terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.encoding.n()
    }

    pub fn encoding(&self) -> &IsingEncoding {
        &self.encoding
    }

    pub fn catalyst(&self) -> &CatalystSpec {
        &self.catalyst
    }

    pub fn is_sector(&self) -> bool {
        matches!(self.basis, Basis::Sector(_))
    }

    pub fn sector_basis(&self) -> Option<&SectorBasis> {
        match &self.basis {
            Basis::Sector(b) => Some(b),
            Basis::Full => None,
        }
    }

    /// Diagonal of `H_p` in this basis.
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.problem_diag
    }

    /// Dense `H(s)`.
    pub fn hamiltonian(&self, s: f64) -> DMatrix<f64> {
        let (cd, cc, cp) = schedule_coefficients(s);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for (i, &e) in self.problem_diag.iter().enumerate() {
            h[(i, i)] = cp * e;
        }
        for &(r, c, v) in &self.driver_terms {
            h[(r, c)] += cd * v;
        }
        for &(r, c, v) in &self.catalyst_terms {
            h[(r, c)] += cc * v;
        }
        h
    }

    /// `out = H(s) x` without forming the dense matrix.
    pub fn apply(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let (cd, cc, cp) = schedule_coefficients(s);
        for (o, (&e, &xi)) in out.iter_mut().zip(self.problem_diag.iter().zip(x)) {
            *o = cp * e * xi;
        }
        for &(r, c, v) in &self.driver_terms {
            out[r] += cd * v * x[c];
        }
        for &(r, c, v) in &self.catalyst_terms {
            out[r] += cc * v * x[c];
        }
    }

    /// Driver ground state: the uniform superposition, expressed in this basis.
    pub fn initial_state(&self) -> DVector<f64> {
        let n = self.n() as i32;
        let norm = 2f64.powi(-n).sqrt();
        match &self.basis {
            Basis::Full => DVector::from_element(self.dim, norm),
            Basis::Sector(b) => DVector::from_iterator(
                self.dim,
                b.labels().iter().map(|l| b.multiplicity(l).sqrt() * norm),
            ),
        }
    }

    /// Basis index of the state with every vertex of sub-graph `a` included.
    pub fn optimum_index(&self, a: usize) -> usize {
        match &self.basis {
            Basis::Full => self.encoding.sub_graph_mask(a) as usize,
            Basis::Sector(b) => {
                let counts = b
                    .blocks()
                    .iter()
                    .map(|blk| if blk.sub_graph == a { blk.spins } else { 0 })
                    .collect::<Vec<_>>();
                b.index_of(&counts)
            }
        }
    }

    /// `⟨v|x⟩` for the computational basis state `x` given as a bitmask.
    pub fn amplitude_of_mask(&self, v: &DVector<f64>, mask: u64) -> f64 {
        match &self.basis {
            Basis::Full => v[mask as usize],
            Basis::Sector(b) => {
                let offsets = sub_graph_offsets(self.encoding.sub_graph_sizes());
                let pair = self.catalyst.pairs.first().copied();
                let counts = b
                    .blocks()
                    .iter()
                    .map(|blk| {
                        let lo = offsets[blk.sub_graph];
                        let hi = offsets[blk.sub_graph + 1];
                        let in_pair = |q: usize| pair.is_some_and(|(i, j)| q == i || q == j);
                        (lo..hi)
                            .filter(|&q| mask >> q & 1 == 1)
                            .filter(|&q| match blk.kind {
                                BlockKind::Pair => in_pair(q),
                                BlockKind::Ladder => !in_pair(q),
                            })
                            .count()
                    })
                    .collect::<Vec<_>>();
                let weight: f64 = b
                    .blocks()
                    .iter()
                    .zip(&counts)
                    .map(|(blk, &m)| binomial(blk.spins, m))
                    .product();
                v[b.index_of(&counts)] / weight.sqrt()
            }
        }
    }

    /// `⟨v|H_c|v⟩` for the catalyst operator at full strength.
    pub fn catalyst_expectation(&self, v: &DVector<f64>) -> f64 {
        self.catalyst_terms.iter().map(|&(r, c, x)| v[r] * x * v[c]).sum()
    }

    /// Per-sub-graph number of included vertices for a basis index.
    pub fn counts_of_index(&self, i: usize) -> Vec<usize> {
        match &self.basis {
            Basis::Full => self.encoding.counts_of(i as u64),
            Basis::Sector(b) => b.sub_graph_counts(&b.labels()[i], self.encoding.k()),
        }
    }

    /// Lowest `k` eigenpairs of `H(s)`.
    pub fn eigenpairs(&self, s: f64, k: usize) -> Eigenpairs {
        eigh(self.hamiltonian(s), k)
    }

    /// Ascending eigenvalues of `H(s)`.
    pub fn eigenvalues(&self, s: f64) -> Vec<f64> {
        let mut v = self.hamiltonian(s).symmetric_eigenvalues().as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `E_1(s) − E_0(s)`.
    pub fn gap01(&self, s: f64) -> f64 {
        let v = self.eigenvalues(s);
        v[1] - v[0]
    }

    /// The same system with a different catalyst strength.
    pub fn with_jxx(&self, jxx: f64) -> Result<Self> {
        let spec = self.catalyst.with_jxx(jxx);
        match self.basis {
            Basis::Full => Self::full(&self.encoding, &spec),
            Basis::Sector(_) => Self::sector(&self.encoding, &spec),
        }
    }
}

fn sub_graph_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0];
    for &n in sizes {
        out.push(out.last().unwrap() + n);
    }
    out
}
