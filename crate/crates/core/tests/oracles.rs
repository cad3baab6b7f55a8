//! Independent oracles: brute force, finite differences, full-space
//! diagonalization and property checks.

use anneal_lab::dynamics::{evolve, EvolveOptions};
use anneal_lab::hamiltonian::{catalyst_matrix, total_hamiltonian};
use anneal_lab::perturbation::{driver_pt_energies, first_order_catalyst_shift};
use anneal_lab::spectrum::{scan_spectrum, uniform_grid};
use anneal_lab::sweeps::linear_fit;
use anneal_lab::{AnnealSystem, CatalystSpec, MwisInstance, ScanOptions, SpaceMode};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn sgs(sizes: &[usize]) -> MwisInstance {
    MwisInstance::new(sizes, 0.01, 5.33, 15.0).unwrap()
}

#[test]
fn energy_spread_by_brute_force() {
    for inst in [sgs(&[2, 3]), sgs(&[3, 4]), MwisInstance::new(&[2, 3], 0.37, 37.5, 15.0).unwrap(), sgs(&[2, 4, 3])] {
        let enc = inst.encode();
        let energies: Vec<f64> = (0..1u64 << enc.n()).map(|m| enc.energy(m)).collect();
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo - 15.0 * enc.n() as f64).abs() < 1e-10);
        // The optimum is the heaviest sub-graph taken whole.
        assert_eq!(lo, enc.energy(enc.sub_graph_mask(0)).min(enc.energy(enc.sub_graph_mask(1))));
    }
}

#[test]
fn independent_sets_sit_below_dependent_sets() {
    let enc = sgs(&[3, 3]).encode();
    let worst_independent = (0..1u64 << 6)
        .filter(|&m| enc.is_independent(m))
        .map(|m| enc.energy(m))
        .fold(f64::NEG_INFINITY, f64::max);
    let best_dependent = (0..1u64 << 6)
        .filter(|&m| !enc.is_independent(m))
        .map(|m| enc.energy(m))
        .fold(f64::INFINITY, f64::min);
    assert!(worst_independent < best_dependent);
}

#[test]
fn sector_levels_are_full_levels() {
    for sizes in [[2, 3], [3, 3], [2, 4]] {
        let inst = sgs(&sizes);
        let enc = inst.encode();
        for jxx in [0.0, 0.3] {
            let spec = CatalystSpec::in_sub_graph(&inst, 1, jxx).unwrap();
            let sector = AnnealSystem::sector(&enc, &spec).unwrap();
            let full = AnnealSystem::full(&enc, &spec).unwrap();
            for s in [0.1, 0.5, 0.9] {
                let fv = sorted_eigenvalues(full.hamiltonian(s));
                let sv = sector.eigenvalues(s);
                for e in &sv {
                    assert!(fv.iter().any(|x| (x - e).abs() < 1e-10), "{sizes:?} J={jxx} s={s}: {e}");
                }
                assert!((sv[0] - fv[0]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn system_matches_reference_assembly() {
    let inst = sgs(&[2, 3]);
    let enc = inst.encode();
    let spec = CatalystSpec::in_sub_graph(&inst, 1, 1.3).unwrap();
    let system = AnnealSystem::full(&enc, &spec).unwrap();
    for s in [0.0, 0.37, 1.0] {
        let reference = total_hamiltonian(&enc, &spec, s).unwrap().into_inner();
        assert!((system.hamiltonian(s) - reference).amax() < 1e-12);
    }
}

#[test]
fn catalyst_shift_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(7);
    let mu = 1e-5;
    for _ in 0..12 {
        let sizes = if rng.random_bool(0.5) { [2, 3] } else { [3, 3] };
        let inst = sgs(&sizes);
        let enc = inst.encode();
        let s = rng.random_range(0.1..0.8);
        let spec = CatalystSpec::in_sub_graph(&inst, 1, rng.random_range(0.1..2.0)).unwrap();
        let level = rng.random_range(0..2usize);
        let shift = first_order_catalyst_shift(&enc, &spec, s, level, SpaceMode::Full).unwrap();
        let base = AnnealSystem::full(&enc, &spec.with_jxx(0.0)).unwrap().hamiltonian(s);
        let hc = catalyst_matrix(enc.n(), &spec).unwrap().into_inner();
        let fd = (sorted_eigenvalues(&base + &hc * mu)[level] - sorted_eigenvalues(&base - &hc * mu)[level]) / (2.0 * mu);
        assert!((fd - shift.shift).abs() <= 1e-4 * shift.shift.abs(), "s={s} fd={fd} shift={}", shift.shift);
    }
}

#[test]
fn sector_catalyst_shift_agrees_with_full() {
    let inst = sgs(&[2, 3]);
    let enc = inst.encode();
    let spec = CatalystSpec::in_sub_graph(&inst, 1, 0.8).unwrap();
    for s in [0.3, 0.6, 0.85] {
        let full = first_order_catalyst_shift(&enc, &spec, s, 0, SpaceMode::Full).unwrap();
        let sector = first_order_catalyst_shift(&enc, &spec, s, 0, SpaceMode::Sector).unwrap();
        assert!((full.shift - sector.shift).abs() < 1e-9);
    }
}

#[test]
fn catalyst_raises_stoquastic_ground_below_crossing() {
    let inst = sgs(&[2, 3]);
    let spec = CatalystSpec::in_sub_graph(&inst, 1, 1.0).unwrap();
    let shift = first_order_catalyst_shift(&inst.encode(), &spec, 0.88, 0, SpaceMode::Full).unwrap();
    assert!(shift.shift > 0.0);
}

#[test]
fn driver_pt_residual_is_at_least_cubic() {
    let enc = sgs(&[2, 3]).encode();
    let free = AnnealSystem::full(&enc, &CatalystSpec::none()).unwrap();
    let hp = DMatrix::from_diagonal(&DVector::from_column_slice(free.problem_diagonal()));
    let hd = free.hamiltonian(0.0);
    let lambdas: Vec<f64> = (0..5).map(|k| 0.05 / 2f64.powi(k)).collect();
    let pt = driver_pt_energies(&enc, &lambdas).unwrap();
    let residual: Vec<f64> = lambdas
        .iter()
        .zip(&pt.energies)
        .map(|(l, e)| (e[0] - sorted_eigenvalues(&hp + &hd * *l)[0]).abs())
        .collect();
    let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = residual.iter().map(|r| r.ln()).collect();
    assert!(linear_fit(&x, &y).slope > 2.9);
}

#[test]
fn stoquastic_ground_vectors_are_nonnegative() {
    for sizes in [[2, 3], [3, 2], [3, 4]] {
        let enc = sgs(&sizes).encode();
        for mode in [SpaceMode::Full, SpaceMode::Sector] {
            let system = AnnealSystem::new(&enc, &CatalystSpec::none(), mode).unwrap();
            let scan = scan_spectrum(&system, &uniform_grid(101), &ScanOptions::default()).unwrap();
            for v in &scan.ground_vectors {
                assert!(v.min() >= -1e-12);
                assert!((v.norm_squared() - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn sector_and_full_dynamics_agree() {
    let inst = sgs(&[2, 3]);
    let enc = inst.encode();
    let spec = CatalystSpec::in_sub_graph(&inst, 1, 1.92).unwrap();
    let options = EvolveOptions {
        total_time: 20.0,
        checkpoints: 20,
        ..Default::default()
    };
    let full = evolve(&AnnealSystem::full(&enc, &spec).unwrap(), &options).unwrap();
    let sector = evolve(&AnnealSystem::sector(&enc, &spec).unwrap(), &options).unwrap();
    for (a, b) in full.populations.iter().zip(&sector.populations) {
        assert!((a[0] - b[0]).abs() < 1e-7);
    }
    assert!(full.max_norm_drift() < 1e-6);
    // Completeness of the instantaneous eigenbasis: populations add up to ‖ψ‖².
    for (total, norm) in full.total_population.iter().zip(&full.norm) {
        assert!((total - norm * norm).abs() < 1e-8);
    }
}

#[test]
fn diabatic_populations_converge_in_tolerance() {
    let inst = sgs(&[2, 3]);
    let spec = CatalystSpec::in_sub_graph(&inst, 1, 1.92).unwrap();
    let system = AnnealSystem::full(&inst.encode(), &spec).unwrap();
    let run = |tolerance| {
        let options = EvolveOptions {
            tolerance,
            checkpoints: 10,
            ..Default::default()
        };
        evolve(&system, &options).unwrap()
    };
    let (a, b) = (run(1e-10), run(5e-11));
    for (x, y) in a.final_populations().iter().zip(b.final_populations()) {
        assert!((x - y).abs() < 1e-4);
    }
    assert!(a.max_norm_drift() < 1e-6);
    assert!((a.energy[0] + 5.0).abs() < 1e-9);
}

fn geometry() -> impl Strategy<Value = (usize, usize)> {
    (1usize..4, 2usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hamiltonian_is_symmetric((n0, n1) in geometry(), s in 0.0f64..=1.0, jxx in 0.0f64..3.0) {
        let inst = sgs(&[n0, n1]);
        let spec = CatalystSpec::in_sub_graph(&inst, 1, jxx).unwrap();
        for system in [AnnealSystem::full(&inst.encode(), &spec).unwrap(), AnnealSystem::sector(&inst.encode(), &spec).unwrap()] {
            let h = system.hamiltonian(s);
            prop_assert_eq!(&h, &h.transpose());
        }
    }

    #[test]
    fn relabelling_within_a_sub_graph_keeps_energies((n0, n1) in geometry(), mask in 0u64..128, swap in 0usize..6) {
        let enc = sgs(&[n0, n1]).encode();
        let n = n0 + n1;
        let mask = mask & ((1 << n) - 1);
        // Swap two qubits of the same sub-graph.
        let (i, j) = if swap % 2 == 0 || n0 < 2 { (n0, n0 + 1) } else { (0, 1) };
        let bi = (mask >> i) & 1;
        let bj = (mask >> j) & 1;
        let swapped = mask & !(1 << i) & !(1 << j) | (bj << i) | (bi << j);
        prop_assert!((enc.energy(mask) - enc.energy(swapped)).abs() < 1e-12);
    }

    #[test]
    fn pair_choice_within_sub_graph_keeps_spectrum(s in 0.05f64..0.95, jxx in 0.0f64..2.5) {
        let enc = sgs(&[2, 4]).encode();
        let a = AnnealSystem::full(&enc, &CatalystSpec::single(2, 3, jxx)).unwrap();
        let b = AnnealSystem::full(&enc, &CatalystSpec::single(4, 5, jxx)).unwrap();
        let (ea, eb) = (sorted_eigenvalues(a.hamiltonian(s)), sorted_eigenvalues(b.hamiltonian(s)));
        for (x, y) in ea.iter().zip(&eb) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
