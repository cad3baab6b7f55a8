//! Perturbative oracles: second-order driver corrections to the two lowest
//! problem states, the first-order catalyst shift of instantaneous levels, and
//! the decomposition of instantaneous states over the single-sub-graph sets.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::CatalystSpec;
use crate::mwis::IsingEncoding;
use crate::spectrum::{csv_err, fmt12};
use crate::system::{AnnealSystem, SpaceMode};

#[derive(Debug, Clone, Serialize)]
pub struct PerturbedEnergies {
    pub lambda: Vec<f64>,
    /// `E_0(λ)` and `E_1(λ)` per grid point.
    pub energies: Vec<[f64; 2]>,
    /// `Σ_{b∈N(a)} 1/(E_b − E_a)` for `a = 0, 1`.
    pub sums: [f64; 2],
    pub crossing_lambda: Option<f64>,
}

impl PerturbedEnergies {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "E0", "E1"]).map_err(csv_err)?;
        for (l, e) in self.lambda.iter().zip(&self.energies) {
            w.write_record([fmt12(*l), fmt12(e[0]), fmt12(e[1])]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Second-order energy sum over the unit-Hamming-distance neighbourhood.
pub fn neighbourhood_sum(encoding: &IsingEncoding, mask: u64) -> f64 {
    let state = encoding.basis_state(mask);
    encoding
        .neighbourhood(&state)
        .iter()
        .map(|b| 1.0 / (b.energy - state.energy))
        .sum()
}

/// `E_a(λ) = E_a − λ² S_a` for the two lowest problem states under
/// `H_p + λ H_d`. The first-order term vanishes because the driver has no
/// diagonal.
pub fn driver_pt_energies(encoding: &IsingEncoding, lambda: &[f64]) -> Result<PerturbedEnergies> {
    let masks = [encoding.sub_graph_mask(0), encoding.sub_graph_mask(1)];
    let e = masks.map(|m| encoding.energy(m));
    if (e[1] - e[0]).abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "optima energies {:.12} and {:.12} coincide",
            e[0], e[1]
        )));
    }
    let sums = masks.map(|m| neighbourhood_sum(encoding, m));
    let crossing_lambda = if sums[1] > sums[0] {
        Some(((e[1] - e[0]) / (sums[1] - sums[0])).sqrt())
    } else {
        None
    };
    let energies = lambda
        .iter()
        .map(|&l| [e[0] - l * l * sums[0], e[1] - l * l * sums[1]])
        .collect();
    Ok(PerturbedEnergies {
        lambda: lambda.to_vec(),
        energies,
        sums,
        crossing_lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CatalystShift {
    /// `dE_a/dμ` at `μ = 0` for `H(s) + μ H_c`.
    pub shift: f64,
    /// Smallest distance from `E_a(s)` to another level.
    pub level_spacing: f64,
    pub near_degenerate: bool,
}

/// First-order change of level `a` when the catalyst `H_c` is switched on with
/// weight `μ` on top of the catalyst-free `H(s)`:
/// `2 J_xx Σ_{(j,k)} ⟨E_a(s)|j⟩⟨E_a(s)|k⟩` over basis pairs linked by the
/// catalyst's double flip.
pub fn first_order_catalyst_shift(
    encoding: &IsingEncoding,
    spec: &CatalystSpec,
    s: f64,
    level: usize,
    mode: SpaceMode,
) -> Result<CatalystShift> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ScheduleOutOfRange(s));
    }
    let base = AnnealSystem::new(encoding, &spec.with_jxx(0.0), mode)?;
    let pairs = base.eigenpairs(s, level + 2);
    let v = pairs.vector(level);
    let shift = match base.sector_basis() {
        None => {
            let flips = spec.flip_masks();
            let mut sum = 0.0;
            for j in 0..base.dim() {
                for &f in &flips {
                    let k = j ^ f as usize;
                    if j < k {
                        sum += v[j] * v[k];
                    }
                }
            }
            2.0 * spec.jxx * sum
        }
        Some(_) => AnnealSystem::new(encoding, spec, mode)?.catalyst_expectation(&v),
    };
    let e = &pairs.values;
    let mut level_spacing = f64::INFINITY;
    if level > 0 {
        level_spacing = e[level] - e[level - 1];
    }
    if level + 1 < e.len() {
        level_spacing = level_spacing.min(e[level + 1] - e[level]);
    }
    Ok(CatalystShift {
        shift,
        level_spacing,
        near_degenerate: level_spacing < 1e-8,
    })
}

/// Weight of a state on the single-sub-graph sets `P_0^ext`, `P_1^ext` and on
/// everything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetMasses {
    pub p0: f64,
    pub p1: f64,
    pub rest: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtSetDecomposition {
    pub s: Vec<f64>,
    pub ground: Vec<SetMasses>,
    pub first_excited: Vec<SetMasses>,
}

impl ExtSetDecomposition {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "E0_p0", "E0_p1", "E0_rest", "E1_p0", "E1_p1", "E1_rest"])
            .map_err(csv_err)?;
        for i in 0..self.s.len() {
            let (g, x) = (self.ground[i], self.first_excited[i]);
            w.write_record([self.s[i], g.p0, g.p1, g.rest, x.p0, x.p1, x.rest].map(fmt12))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which set a basis index belongs to: 0 or 1 for a nonempty subset of that
/// sub-graph, 2 otherwise. The empty set belongs to neither.
fn ext_class(counts: &[usize]) -> usize {
    let occupied: Vec<usize> = (0..counts.len()).filter(|&a| counts[a] > 0).collect();
    match occupied.as_slice() {
        [a] if *a < 2 => *a,
        _ => 2,
    }
}

fn masses(classes: &[usize], v: &nalgebra::DVector<f64>) -> SetMasses {
    let mut m = [0.0; 3];
    for (i, &c) in classes.iter().enumerate() {
        m[c] += v[i] * v[i];
    }
    SetMasses {
        p0: m[0],
        p1: m[1],
        rest: m[2],
    }
}

/// Masses of `|E_0(s)⟩` and `|E_1(s)⟩` on `P_0^ext`, `P_1^ext` and the rest.
pub fn ext_set_overlaps(
    encoding: &IsingEncoding,
    spec: &CatalystSpec,
    s_window: &[f64],
    mode: SpaceMode,
) -> Result<ExtSetDecomposition> {
    if encoding.k() != 2 {
        return Err(Error::InvalidInstance(format!(
            "set decomposition needs a bipartite instance, got k = {}",
            encoding.k()
        )));
    }
    let system = AnnealSystem::new(encoding, spec, mode)?;
    let classes: Vec<usize> = (0..system.dim()).map(|i| ext_class(&system.counts_of_index(i))).collect();
    let mut out = ExtSetDecomposition {
        s: Vec::with_capacity(s_window.len()),
        ground: Vec::with_capacity(s_window.len()),
        first_excited: Vec::with_capacity(s_window.len()),
    };
    for &s in s_window {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScheduleOutOfRange(s));
        }
        let pairs = system.eigenpairs(s, 2);
        out.s.push(s);
        out.ground.push(masses(&classes, &pairs.vector(0)));
        out.first_excited.push(masses(&classes, &pairs.vector(1)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mwis::MwisInstance;

    #[test]
    fn lambda_zero_is_exact() {
        let enc = MwisInstance::new(&[2, 3], 0.01, 5.33, 15.0).unwrap().encode();
        let pt = driver_pt_energies(&enc, &[0.0]).unwrap();
        assert_eq!(pt.energies[0][0], enc.energy(enc.sub_graph_mask(0)));
        assert_eq!(pt.energies[0][1], enc.energy(enc.sub_graph_mask(1)));
    }

    #[test]
    fn crossing_depends_on_geometry() {
        let forward = MwisInstance::new(&[2, 3], 0.01, 5.33, 15.0).unwrap().encode();
        assert!(driver_pt_energies(&forward, &[]).unwrap().crossing_lambda.is_some());
        let reversed = MwisInstance::new(&[3, 2], 0.01, 5.33, 15.0).unwrap().encode();
        assert!(driver_pt_energies(&reversed, &[]).unwrap().crossing_lambda.is_none());
    }

    #[test]
    fn crossing_lambda_equalizes_energies() {
        let enc = MwisInstance::new(&[2, 3], 0.37, 37.5, 15.0).unwrap().encode();
        let pt = driver_pt_energies(&enc, &[]).unwrap();
        let l = pt.crossing_lambda.unwrap();
        let at = driver_pt_energies(&enc, &[l]).unwrap();
        assert!((at.energies[0][0] - at.energies[0][1]).abs() < 1e-9);
    }

    #[test]
    fn ext_classes() {
        assert_eq!(ext_class(&[0, 0]), 2);
        assert_eq!(ext_class(&[2, 0]), 0);
        assert_eq!(ext_class(&[0, 1]), 1);
        assert_eq!(ext_class(&[1, 1]), 2);
    }

    #[test]
    fn masses_are_complete() {
        let enc = MwisInstance::new(&[2, 3], 0.01, 5.33, 15.0).unwrap().encode();
        let spec = CatalystSpec::single(2, 3, 0.5);
        for mode in [SpaceMode::Full, SpaceMode::Sector] {
            let d = ext_set_overlaps(&enc, &spec, &[0.3, 0.85, 0.95], mode).unwrap();
            for m in d.ground.iter().chain(&d.first_excited) {
                assert!((m.p0 + m.p1 + m.rest - 1.0).abs() < 1e-10);
            }
        }
    }
}
