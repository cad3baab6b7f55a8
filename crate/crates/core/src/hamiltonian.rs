//! Driver, catalyst and problem operators in the computational basis, and the
//! interpolated annealing Hamiltonian
//!
//! ```text
//! H(s) = (1 − s) H_d + s (1 − s) H_c + s H_p
//! ```
//!
//! with `H_d = −Σ σ^x_i` and `H_c = J_xx Σ_{(i,j)} σ^x_i σ^x_j`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mwis::{IsingEncoding, MwisInstance};

/// Largest qubit count for which dense full-space operators are built.
pub const FULL_SPACE_CAP: usize = 14;

/// XX-catalyst: a set of qubit pairs sharing the strength `J_xx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalystSpec {
    pub pairs: Vec<(usize, usize)>,
    pub jxx: f64,
}

impl CatalystSpec {
    pub fn none() -> Self {
        Self {
            pairs: Vec::new(),
            jxx: 0.0,
        }
    }

    pub fn single(i: usize, j: usize, jxx: f64) -> Self {
        Self {
            pairs: vec![(i, j)],
            jxx,
        }
    }

    /// One coupling between the first two qubits of sub-graph `sub_graph`.
    pub fn in_sub_graph(instance: &MwisInstance, sub_graph: usize, jxx: f64) -> Result<Self> {
        let sizes = instance.sub_graph_sizes();
        if sub_graph >= sizes.len() {
            return Err(Error::InvalidCatalyst(format!(
                "sub-graph {sub_graph} does not exist (k = {})",
                sizes.len()
            )));
        }
        if sizes[sub_graph] < 2 {
            return Err(Error::InvalidCatalyst(format!(
                "sub-graph {sub_graph} has fewer than two vertices"
            )));
        }
        let first = instance.offsets()[sub_graph];
        Ok(Self::single(first, first + 1, jxx))
    }

    pub fn with_jxx(&self, jxx: f64) -> Self {
        Self {
            pairs: self.pairs.clone(),
            jxx,
        }
    }

    pub fn is_active(&self) -> bool {
        !self.pairs.is_empty() && self.jxx != 0.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.jxx >= 0.0) || !self.jxx.is_finite() {
            return Err(Error::InvalidCatalyst(format!(
                "J_xx must be a finite non-negative number, got {}",
                self.jxx
            )));
        }
        let mut seen = Vec::with_capacity(self.pairs.len());
        for &(i, j) in &self.pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidCatalyst(format!(
                    "pair ({i}, {j}) out of range for {n} qubits"
                )));
            }
            if i == j {
                return Err(Error::InvalidCatalyst(format!("pair ({i}, {j}) couples a qubit to itself")));
            }
            let key = (i.min(j), i.max(j));
            if seen.contains(&key) {
                return Err(Error::InvalidCatalyst(format!("duplicate pair ({i}, {j})")));
            }
            seen.push(key);
        }
        Ok(())
    }

    /// Bitmasks flipped by each coupling.
    pub(crate) fn flip_masks(&self) -> Vec<u64> {
        self.pairs.iter().map(|&(i, j)| (1u64 << i) | (1u64 << j)).collect()
    }
}

/// A dense real symmetric operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator(DMatrix<f64>);

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.0;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in i + 1..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    /// Writes an 8-byte little-endian dimension header followed by the entries
    /// in row-major order as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        out.write_all(&(d as u64).to_le_bytes())?;
        for i in 0..d {
            for j in 0..d {
                out.write_all(&self.0[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated matrix dump"));
        let header: [u8; 8] = bytes.get(..8).ok_or_else(bad)?.try_into().unwrap();
        let d = u64::from_le_bytes(header) as usize;
        let body = &bytes[8..];
        if body.len() != d * d * 8 {
            return Err(bad());
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        Ok(Self(DMatrix::from_row_iterator(d, d, values)))
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > FULL_SPACE_CAP {
        return Err(Error::CapExceeded {
            qubits: n,
            cap: FULL_SPACE_CAP,
            what: "dense full-space operators",
        });
    }
    Ok(())
}

fn check_schedule(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ScheduleOutOfRange(s));
    }
    Ok(())
}

/// `H_d = −Σ_i σ^x_i`.
pub fn driver_matrix(n: usize) -> Result<DenseOperator> {
    check_cap(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for state in 0..dim {
        for i in 0..n {
            m[(state, state ^ (1 << i))] = -1.0;
        }
    }
    Ok(DenseOperator(m))
}

/// Diagonal `H_p` with the encoded basis-state energies.
pub fn problem_matrix(encoding: &IsingEncoding) -> Result<DenseOperator> {
    let n = encoding.n();
    check_cap(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for state in 0..dim {
        m[(state, state)] = encoding.energy(state as u64);
    }
    Ok(DenseOperator(m))
}

/// `H_c = J_xx Σ_{(i,j)} σ^x_i σ^x_j`.
pub fn catalyst_matrix(n: usize, spec: &CatalystSpec) -> Result<DenseOperator> {
    check_cap(n)?;
    spec.validate(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for flip in spec.flip_masks() {
        for state in 0..dim {
            m[(state, state ^ flip as usize)] += spec.jxx;
        }
    }
    Ok(DenseOperator(m))
}

/// Full-space `H(s)` assembled from its parts.
pub fn total_hamiltonian(
    encoding: &IsingEncoding,
    spec: &CatalystSpec,
    s: f64,
) -> Result<DenseOperator> {
    check_schedule(s)?;
    let n = encoding.n();
    let hd = driver_matrix(n)?.into_inner();
    let hc = catalyst_matrix(n, spec)?.into_inner();
    let hp = problem_matrix(encoding)?.into_inner();
    Ok(DenseOperator(hd * (1.0 - s) + hc * (s * (1.0 - s)) + hp * s))
}

/// Coefficients `(driver, catalyst, problem)` of `H(s)`.
pub fn schedule_coefficients(s: f64) -> (f64, f64, f64) {
    (1.0 - s, s * (1.0 - s), s)
}
