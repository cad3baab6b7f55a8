//! Complete k-partite MWIS instances and their Ising encoding.
//!
//! Vertices are numbered sub-graph by sub-graph: the `n_0` vertices of `G_0`
//! come first, then the `n_1` vertices of `G_1`, and so on. A basis state is an
//! `n`-bit mask where bit `i` set means vertex `i` is in the set, i.e. its
//! `σ^z` eigenvalue is `+1`.
//!
//! The problem Hamiltonian is
//!
//! ```text
//! H_p = Σ_i (c_i J_zz − 2 w_i) σ^z_i + Σ_{(i,j) ∈ edges} J_zz σ^z_i σ^z_j
//! ```
//!
//! with `c_i` the degree of vertex `i`. Raw weights and the raw edge penalty
//! are rescaled by `E_scale · K`, where `K` fixes the spread between the
//! all-included state and the optimum to `n · E_scale`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default limit for exhaustive enumeration of basis states.
pub const ENUMERATION_CAP: usize = 20;

/// Energy scale that places the catalyst-free 5-vertex crossing at `s ≈ 0.9`
/// for both reference parameter settings.
pub const DEFAULT_E_SCALE: f64 = 15.0;

/// A complete k-partite MWIS instance with evenly split sub-graph weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwisInstance {
    sub_graph_sizes: Vec<usize>,
    sub_graph_weights_raw: Vec<f64>,
    jzz_raw: f64,
    e_scale: f64,
}

impl MwisInstance {
    /// Builds an instance with default weights `W'_a = 1 + (k − 1 − a)·δW`.
    ///
    /// For two sub-graphs this is `W'_0 = 1 + δW`, `W'_1 = 1`.
    pub fn new(sizes: &[usize], delta_w: f64, jzz_raw: f64, e_scale: f64) -> Result<Self> {
        if !(delta_w > 0.0) || !delta_w.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "delta_w must be positive (got {delta_w}); equal weights give degenerate optima"
            )));
        }
        let k = sizes.len();
        let weights = (0..k)
            .map(|a| 1.0 + (k - 1 - a) as f64 * delta_w)
            .collect::<Vec<_>>();
        Self::with_weights(sizes, &weights, jzz_raw, e_scale)
    }

    /// Builds an instance from an explicit, strictly decreasing weight list.
    pub fn with_weights(
        sizes: &[usize],
        weights_raw: &[f64],
        jzz_raw: f64,
        e_scale: f64,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least two sub-graphs, got {}",
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidInstance("sub-graph sizes must be >= 1".into()));
        }
        if weights_raw.len() != sizes.len() {
            return Err(Error::InvalidInstance(format!(
                "{} weights given for {} sub-graphs",
                weights_raw.len(),
                sizes.len()
            )));
        }
        if weights_raw.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInstance("weights must be positive".into()));
        }
        if weights_raw.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidInstance(
                "sub-graph weights must be strictly decreasing (unique optimum)".into(),
            ));
        }
        if !(e_scale > 0.0) || !e_scale.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "e_scale must be positive, got {e_scale}"
            )));
        }
        if !(jzz_raw > 0.0) || !jzz_raw.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "jzz_raw must be positive, got {jzz_raw}"
            )));
        }
        let instance = Self {
            sub_graph_sizes: sizes.to_vec(),
            sub_graph_weights_raw: weights_raw.to_vec(),
            jzz_raw,
            e_scale,
        };
        let floor = instance.base_weight() / instance.n_edges() as f64;
        if jzz_raw <= floor {
            return Err(Error::InvalidInstance(format!(
                "jzz_raw = {jzz_raw} must exceed {floor} for a positive normalization"
            )));
        }
        if let Some((ind, dep)) = instance.clustering_violation() {
            return Err(Error::InvalidInstance(format!(
                "jzz_raw = {jzz_raw} too small: an independent set (E = {ind}) is not below \
                 every dependent set (E = {dep})"
            )));
        }
        Ok(instance)
    }

    pub fn sub_graph_sizes(&self) -> &[usize] {
        &self.sub_graph_sizes
    }

    pub fn sub_graph_weights_raw(&self) -> &[f64] {
        &self.sub_graph_weights_raw
    }

    pub fn jzz_raw(&self) -> f64 {
        self.jzz_raw
    }

    pub fn e_scale(&self) -> f64 {
        self.e_scale
    }

    /// Total number of vertices (qubits).
    pub fn n(&self) -> usize {
        self.sub_graph_sizes.iter().sum()
    }

    /// Number of sub-graphs.
    pub fn k(&self) -> usize {
        self.sub_graph_sizes.len()
    }

    pub fn n_edges(&self) -> usize {
        let s = &self.sub_graph_sizes;
        let mut total = 0;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                total += s[a] * s[b];
            }
        }
        total
    }

    /// `W'_0 − W'_1` for the bipartite family.
    pub fn delta_w(&self) -> f64 {
        self.sub_graph_weights_raw[0] - self.sub_graph_weights_raw[1]
    }

    /// Raw weight carried by every sub-graph except `G_0`.
    fn base_weight(&self) -> f64 {
        self.sub_graph_weights_raw[1..].iter().sum()
    }

    /// Normalization constant `K = n / (4 (N_edges J'_zz − Σ_{a≥1} W'_a))`.
    pub fn normalization(&self) -> f64 {
        self.n() as f64 / (4.0 * (self.n_edges() as f64 * self.jzz_raw - self.base_weight()))
    }

    /// First qubit index of each sub-graph, plus a final entry equal to `n`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.k() + 1);
        let mut acc = 0;
        out.push(0);
        for &n in &self.sub_graph_sizes {
            acc += n;
            out.push(acc);
        }
        out
    }

    pub fn encode(&self) -> IsingEncoding {
        let scale = self.e_scale * self.normalization();
        let n = self.n();
        let sizes = self.sub_graph_sizes.clone();
        let field_per_sub_graph = sizes
            .iter()
            .zip(&self.sub_graph_weights_raw)
            .map(|(&na, &wa)| {
                let degree = (n - na) as f64;
                let vertex_weight = wa / na as f64;
                scale * (degree * self.jzz_raw - 2.0 * vertex_weight)
            })
            .collect::<Vec<_>>();
        let sub_graph_of = sizes
            .iter()
            .enumerate()
            .flat_map(|(a, &na)| std::iter::repeat_n(a, na))
            .collect::<Vec<_>>();
        let local_fields = sub_graph_of.iter().map(|&a| field_per_sub_graph[a]).collect();
        IsingEncoding {
            sub_graph_sizes: sizes,
            sub_graph_of,
            local_fields,
            field_per_sub_graph,
            coupling: scale * self.jzz_raw,
            normalization_k: self.normalization(),
            e_scale: self.e_scale,
        }
    }

    /// Returns `(max independent energy, min dependent energy)` when the
    /// independent sets do not all lie strictly below the dependent ones.
    fn clustering_violation(&self) -> Option<(f64, f64)> {
        let enc = self.encode();
        let mut max_ind = f64::NEG_INFINITY;
        let mut min_dep = f64::INFINITY;
        for counts in occupation_counts(&self.sub_graph_sizes) {
            let e = enc.energy_by_counts(&counts);
            if counts.iter().filter(|&&m| m > 0).count() <= 1 {
                max_ind = max_ind.max(e);
            } else {
                min_dep = min_dep.min(e);
            }
        }
        (max_ind >= min_dep).then_some((max_ind, min_dep))
    }
}

/// All per-sub-graph occupation vectors `(m_0, …, m_{k−1})`, `0 ≤ m_a ≤ n_a`,
/// in lexicographic order.
pub fn occupation_counts(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=n).map(move |m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }
    out
}

/// Normalized Ising coefficients of the problem Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingEncoding {
    sub_graph_sizes: Vec<usize>,
    sub_graph_of: Vec<usize>,
    local_fields: Vec<f64>,
    field_per_sub_graph: Vec<f64>,
    coupling: f64,
    normalization_k: f64,
    e_scale: f64,
}

impl IsingEncoding {
    pub fn n(&self) -> usize {
        self.local_fields.len()
    }

    pub fn k(&self) -> usize {
        self.sub_graph_sizes.len()
    }

    pub fn sub_graph_sizes(&self) -> &[usize] {
        &self.sub_graph_sizes
    }

    pub fn sub_graph_of(&self, qubit: usize) -> usize {
        self.sub_graph_of[qubit]
    }

    pub fn local_fields(&self) -> &[f64] {
        &self.local_fields
    }

    /// The `σ^z` coefficient shared by all vertices of sub-graph `a`.
    pub fn field_of_sub_graph(&self, a: usize) -> f64 {
        self.field_per_sub_graph[a]
    }

    /// Coupling carried by every cross-sub-graph pair.
    pub fn cross_coupling(&self) -> f64 {
        self.coupling
    }

    /// `J_ij`: the cross coupling for vertices in different sub-graphs, zero otherwise.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        if i != j && self.sub_graph_of[i] != self.sub_graph_of[j] {
            self.coupling
        } else {
            0.0
        }
    }

    pub fn normalization_k(&self) -> f64 {
        self.normalization_k
    }

    pub fn e_scale(&self) -> f64 {
        self.e_scale
    }

    /// Bitmask of every vertex in sub-graph `a`. Requires `n ≤ 64`.
    pub fn sub_graph_mask(&self, a: usize) -> u64 {
        assert!(self.n() <= 64, "bitmasks need n <= 64");
        self.sub_graph_of
            .iter()
            .enumerate()
            .filter(|&(_, &g)| g == a)
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    /// Per-sub-graph count of set bits in `mask`.
    pub fn counts_of(&self, mask: u64) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for (i, &a) in self.sub_graph_of.iter().enumerate() {
            if mask >> i & 1 == 1 {
                counts[a] += 1;
            }
        }
        counts
    }

    /// Energy from per-sub-graph occupations, using collective `Z_a = 2 m_a − n_a`.
    pub fn energy_by_counts(&self, counts: &[usize]) -> f64 {
        let z = counts
            .iter()
            .zip(&self.sub_graph_sizes)
            .map(|(&m, &na)| 2.0 * m as f64 - na as f64)
            .collect::<Vec<_>>();
        let mut e = 0.0;
        for a in 0..z.len() {
            e += self.field_per_sub_graph[a] * z[a];
            for b in a + 1..z.len() {
                e += self.coupling * z[a] * z[b];
            }
        }
        e
    }

    /// Energy of a basis state by direct per-qubit and per-edge summation.
    pub fn energy(&self, mask: u64) -> f64 {
        let n = self.n();
        let z = |i: usize| if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for i in 0..n {
            e += self.local_fields[i] * z(i);
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.sub_graph_of[i] != self.sub_graph_of[j] {
                    e += self.coupling * z(i) * z(j);
                }
            }
        }
        e
    }

    /// Whether the vertex set in `mask` is independent: all members share one sub-graph.
    pub fn is_independent(&self, mask: u64) -> bool {
        self.counts_of(mask).iter().filter(|&&m| m > 0).count() <= 1
    }

    pub fn basis_state(&self, mask: u64) -> BasisState {
        let counts = self.counts_of(mask);
        BasisState {
            mask,
            energy: self.energy_by_counts(&counts),
            independent: counts.iter().filter(|&&m| m > 0).count() <= 1,
            hamming_weight_per_sub_graph: counts,
        }
    }

    /// Every basis state sorted by energy (ties broken by mask).
    pub fn enumerate_problem_states(&self, cap: usize) -> Result<Vec<BasisState>> {
        let n = self.n();
        if n > cap {
            return Err(Error::CapExceeded {
                qubits: n,
                cap,
                what: "exhaustive enumeration",
            });
        }
        let mut states = (0..1u64 << n).map(|m| self.basis_state(m)).collect::<Vec<_>>();
        states.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.mask.cmp(&b.mask)));
        Ok(states)
    }

    /// The `n` states one bit flip away from `state`, in qubit order.
    pub fn neighbourhood(&self, state: &BasisState) -> Vec<BasisState> {
        (0..self.n())
            .map(|i| self.basis_state(state.mask ^ (1 << i)))
            .collect()
    }

    /// JSON form: per-qubit fields, cross-sub-graph couplings as `[i, j, J]`, and `K`.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.n();
        let mut couplings = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = self.coupling(i, j);
                if c != 0.0 {
                    couplings.push(serde_json::json!([i, j, c]));
                }
            }
        }
        serde_json::json!({
            "n": n,
            "sub_graph_sizes": self.sub_graph_sizes,
            "e_scale": self.e_scale,
            "normalization_k": self.normalization_k,
            "local_fields": self.local_fields,
            "couplings": couplings,
        })
    }
}

/// A computational basis state of the problem Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisState {
    pub mask: u64,
    pub energy: f64,
    pub independent: bool,
    pub hamming_weight_per_sub_graph: Vec<usize>,
}
