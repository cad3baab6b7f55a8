//! Eigendecomposition along the schedule: gap curves, gauge-fixed ground-state
//! overlaps, gap minima and the sign-change point `s_-`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::DenseOperator;
use crate::optimize::golden_min;
use crate::system::AnnealSystem;

/// Lowest eigenpairs, values ascending, vectors as columns.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigenpairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }
}

/// Lowest `k` eigenpairs of a symmetric operator.
pub fn eigensolve(h: &DenseOperator, k: usize) -> Result<Eigenpairs> {
    let scale = h.matrix().amax().max(1.0);
    let asym = h.max_asymmetry();
    if asym > 1e-14 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(eigh(h.matrix().clone(), k))
}

pub(crate) fn eigh(m: DMatrix<f64>, k: usize) -> Eigenpairs {
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k.min(dim));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(dim, order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Eigenpairs { values, vectors }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    /// Eigenvalues kept per grid point.
    pub levels: usize,
    /// Consecutive ground vectors overlapping less than this trigger bisection.
    pub overlap_threshold: f64,
    /// A point whose gap is this factor below its neighbourhood median is refined.
    pub gap_dip_factor: f64,
    /// Rounds of gap-driven midpoint insertion.
    pub gap_refine_rounds: usize,
    /// Deepest bisection level for gauge continuity.
    pub max_gauge_depth: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            levels: 4,
            overlap_threshold: 0.5,
            gap_dip_factor: 10.0,
            gap_refine_rounds: 6,
            max_gauge_depth: 40,
        }
    }
}

/// Uniform grid of `points` values from 0 to 1.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let m = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| i as f64 / m).collect()
}

#[derive(Debug, Clone)]
struct Point {
    s: f64,
    values: Vec<f64>,
    ground: DVector<f64>,
    unreliable: bool,
}

impl Point {
    fn compute(system: &AnnealSystem, s: f64, levels: usize) -> Self {
        let pairs = system.eigenpairs(s, levels.max(2));
        let unreliable = pairs.values[1] - pairs.values[0] < 1e-12;
        Self {
            s,
            values: pairs.values.iter().take(levels).copied().collect(),
            ground: pairs.vector(0),
            unreliable,
        }
    }

    fn gap(&self) -> f64 {
        self.values[1] - self.values[0]
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumScan {
    system: AnnealSystem,
    options: ScanOptions,
    pub s: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
    pub gap01: Vec<f64>,
    /// Signed `⟨E_0(s)|E_a⟩` for each sub-graph optimum `a`.
    pub overlaps: Vec<Vec<f64>>,
    /// Points where the gauge could not be made continuous or the gap vanished.
    pub unreliable: Vec<bool>,
    pub ground_vectors: Vec<DVector<f64>>,
}

impl SpectrumScan {
    pub fn system(&self) -> &AnnealSystem {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Overlap trace with the optimum of sub-graph `a`.
    pub fn overlap_trace(&self, a: usize) -> Vec<f64> {
        self.overlaps.iter().map(|o| o[a]).collect()
    }

    /// Global minimum of the gap curve over the grid, refined by golden section
    /// when it sits in the interior.
    pub fn min_gap(&self, refine_tol: f64) -> GapFeature {
        let i = argmin(&self.gap01);
        if i == 0 || i + 1 == self.len() {
            return GapFeature {
                location: self.s[i],
                value: self.gap01[i],
                kind: FeatureKind::Boundary,
            };
        }
        let (location, value) = refine_minimum(&self.system, self.s[i - 1], self.s[i], self.s[i + 1], self.gap01[i], refine_tol);
        GapFeature {
            location,
            value,
            kind: FeatureKind::PrimaryCrossing,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.levels.first().map_or(0, Vec::len);
        let tracked = self.overlaps.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = vec!["s".into()];
        header.extend((0..k).map(|i| format!("E{i}")));
        header.push("gap01".into());
        header.extend((0..tracked).map(|a| format!("ov_E{a}")));
        header.push("unreliable".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut row = vec![fmt12(self.s[i])];
            row.extend(self.levels[i].iter().map(|&v| fmt12(v)));
            row.push(fmt12(self.gap01[i]));
            row.extend(self.overlaps[i].iter().map(|&v| fmt12(v)));
            row.push(u8::from(self.unreliable[i]).to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Twelve significant digits.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidGrid("points must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("points must be strictly increasing".into()));
    }
    Ok(())
}

/// Diagonalizes along `grid`, refines around gap dips and gauge jumps, and
/// fixes eigenvector signs by continuity from the positive driver ground state.
pub fn scan_spectrum(system: &AnnealSystem, grid: &[f64], options: &ScanOptions) -> Result<SpectrumScan> {
    validate_grid(grid)?;
    let levels = options.levels.max(2);
    let mut points: Vec<Point> = grid
        .par_iter()
        .map(|&s| Point::compute(system, s, levels))
        .collect();

    for _ in 0..options.gap_refine_rounds {
        let gaps: Vec<f64> = points.iter().map(Point::gap).collect();
        let m = gaps.len();
        let mut flagged = vec![false; m];
        for i in 0..m {
            let lo = i.saturating_sub(5);
            let hi = (i + 6).min(m);
            let mut window = gaps[lo..hi].to_vec();
            if gaps[i] * options.gap_dip_factor < median(&mut window) {
                flagged[i] = true;
            }
        }
        let mids: Vec<f64> = (0..m - 1)
            .filter(|&i| flagged[i] || flagged[i + 1])
            .map(|i| 0.5 * (points[i].s + points[i + 1].s))
            .collect();
        if mids.is_empty() {
            break;
        }
        let extra: Vec<Point> = mids
            .par_iter()
            .map(|&s| Point::compute(system, s, levels))
            .collect();
        points.extend(extra);
        points.sort_by(|a, b| a.s.total_cmp(&b.s));
    }

    // Sequential gauge pass, bisecting wherever continuity is doubtful.
    let mut iter = points.into_iter();
    let mut first = iter.next().expect("grid has points");
    if first.ground.dot(&system.initial_state()) < 0.0 {
        first.ground.neg_mut();
    }
    let mut fixed = vec![first];
    for p in iter {
        advance_gauge(system, &mut fixed, p, 0, levels, options);
    }

    let tracked: Vec<usize> = (0..system.encoding().k()).map(|a| system.optimum_index(a)).collect();
    let mut scan = SpectrumScan {
        system: system.clone(),
        options: *options,
        s: Vec::with_capacity(fixed.len()),
        levels: Vec::with_capacity(fixed.len()),
        gap01: Vec::with_capacity(fixed.len()),
        overlaps: Vec::with_capacity(fixed.len()),
        unreliable: Vec::with_capacity(fixed.len()),
        ground_vectors: Vec::with_capacity(fixed.len()),
    };
    for p in fixed {
        scan.s.push(p.s);
        scan.gap01.push(p.gap());
        scan.overlaps.push(tracked.iter().map(|&i| p.ground[i]).collect());
        scan.levels.push(p.values);
        scan.unreliable.push(p.unreliable);
        scan.ground_vectors.push(p.ground);
    }
    Ok(scan)
}

fn advance_gauge(
    system: &AnnealSystem,
    fixed: &mut Vec<Point>,
    mut next: Point,
    depth: usize,
    levels: usize,
    options: &ScanOptions,
) {
    let prev = fixed.last().expect("seeded");
    let ov = prev.ground.dot(&next.ground);
    let narrow = next.s - prev.s < 1e-12;
    if ov.abs() >= options.overlap_threshold || depth >= options.max_gauge_depth || narrow {
        if ov < 0.0 {
            next.ground.neg_mut();
        }
        if ov.abs() < options.overlap_threshold {
            next.unreliable = true;
        }
        fixed.push(next);
        return;
    }
    let mid = Point::compute(system, 0.5 * (prev.s + next.s), levels);
    advance_gauge(system, fixed, mid, depth + 1, levels, options);
    advance_gauge(system, fixed, next, depth + 1, levels, options);
}

/// Sign-fixes `v` against a reference vector.
pub(crate) fn align(v: &mut DVector<f64>, reference: &DVector<f64>) {
    if v.dot(reference) < 0.0 {
        v.neg_mut();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PrimaryCrossing,
    SecondaryMinimum,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapFeature {
    pub location: f64,
    pub value: f64,
    pub kind: FeatureKind,
}

fn refine_minimum(system: &AnnealSystem, a: f64, mid: f64, b: f64, g_mid: f64, tol: f64) -> (f64, f64) {
    let (x, g) = golden_min(|s| system.gap01(s), a, b, tol);
    if g <= g_mid {
        (x, g)
    } else {
        (mid, g_mid)
    }
}

/// Smallest relative depth, measured against the lower rim, for a gap dip to
/// count as a feature. Dips from the overall `s` prefactor of `H_p` near
/// `s = 1` reach about 4e-3; the shallowest second minimum of interest about
/// 1.2e-2.
pub const FEATURE_PROMINENCE: f64 = 6e-3;

/// Interior local minima of the gap curve, each refined by golden section to
/// `refine_tol` in `s`. The minimum closest to `reference_sx` (the
/// catalyst-free crossing, or the latest minimum when absent) is labelled
/// primary and the rest secondary.
pub fn find_gap_minima(scan: &SpectrumScan, refine_tol: f64, reference_sx: Option<f64>) -> Vec<GapFeature> {
    let g = &scan.gap01;
    let m = g.len();
    if m < 3 {
        return Vec::new();
    }
    let g_max = g.iter().copied().fold(0.0, f64::max);
    let floor = 1e-9 * g_max.max(1e-300);
    let mut features = Vec::new();
    let mut i = 1;
    while i + 1 < m {
        if g[i] <= g[i - 1] && g[i] <= g[i + 1] {
            // Walk across flat stretches so a plateau counts once.
            let mut j = i;
            while j + 1 < m && g[j + 1] == g[i] {
                j += 1;
            }
            if j + 1 < m && g[j + 1] > g[i] {
                let left_peak = climb(g[..i].iter().rev(), g[i]);
                let right_peak = climb(g[j + 1..].iter(), g[i]);
                let rim = left_peak.min(right_peak);
                if rim - g[i] > floor && rim - g[i] > FEATURE_PROMINENCE * rim {
                    let (location, value) =
                        refine_minimum(&scan.system, scan.s[i - 1], scan.s[i], scan.s[j + 1], g[i], refine_tol);
                    features.push(GapFeature {
                        location,
                        value,
                        kind: FeatureKind::SecondaryMinimum,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let primary = match reference_sx {
        Some(r) => features
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.location - r).abs().total_cmp(&(b.1.location - r).abs()))
            .map(|(i, _)| i),
        None => features.len().checked_sub(1),
    };
    if let Some(p) = primary {
        features[p].kind = FeatureKind::PrimaryCrossing;
    }
    features
}

/// Highest value reached while walking uphill from `start`.
fn climb<'a>(values: impl Iterator<Item = &'a f64>, start: f64) -> f64 {
    let mut top = start;
    for &x in values {
        if x < top {
            break;
        }
        top = x;
    }
    top
}

/// Primary feature and earliest secondary minimum before it, if any.
pub fn split_features(features: &[GapFeature]) -> (Option<GapFeature>, Option<GapFeature>) {
    let primary = features.iter().find(|f| f.kind == FeatureKind::PrimaryCrossing).copied();
    let secondary = features
        .iter()
        .filter(|f| f.kind == FeatureKind::SecondaryMinimum)
        .filter(|f| primary.is_none_or(|p| f.location < p.location))
        .copied()
        .next();
    (primary, secondary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    E0,
    E1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChange {
    pub s: f64,
    pub component: Component,
}

/// Negative values below this magnitude are treated as roundoff.
pub const SIGN_TOLERANCE: f64 = 1e-10;

/// Smallest `s` where `⟨E_0(s)|E_0⟩` or `⟨E_0(s)|E_1⟩` crosses zero from above,
/// bisected to `tol`.
pub fn locate_sign_change(scan: &SpectrumScan, tol: f64) -> Option<SignChange> {
    let mut best: Option<(usize, Component)> = None;
    for (c, comp) in [(0, Component::E0), (1, Component::E1)] {
        let hit = (1..scan.len()).find(|&i| scan.overlaps[i - 1][c] >= 0.0 && scan.overlaps[i][c] < -SIGN_TOLERANCE);
        if let Some(i) = hit {
            if best.is_none_or(|(b, _)| i < b) {
                best = Some((i, comp));
            }
        }
    }
    let (i, component) = best?;
    let c = match component {
        Component::E0 => 0,
        Component::E1 => 1,
    };
    let system = &scan.system;
    let index = system.optimum_index(c);
    let levels = scan.options.levels.max(2);
    let (mut lo, mut hi) = (scan.s[i - 1], scan.s[i]);
    let mut v_lo = scan.ground_vectors[i - 1].clone();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let mut v = Point::compute(system, mid, levels).ground;
        align(&mut v, &v_lo);
        if v[index] >= 0.0 {
            lo = mid;
            v_lo = v;
        } else {
            hi = mid;
        }
    }
    Some(SignChange {
        s: 0.5 * (lo + hi),
        component,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{driver_matrix, problem_matrix, CatalystSpec};
    use crate::mwis::MwisInstance;

    fn sgs() -> AnnealSystem {
        let enc = MwisInstance::new(&[2, 3], 0.01, 5.33, 15.0).unwrap().encode();
        AnnealSystem::full(&enc, &CatalystSpec::none()).unwrap()
    }

    #[test]
    fn driver_lowest_is_minus_n() {
        let e = eigensolve(&driver_matrix(5).unwrap(), 6).unwrap();
        assert!((e.values[0] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum_is_sorted_diagonal() {
        let enc = MwisInstance::new(&[2, 3], 0.01, 5.33, 15.0).unwrap().encode();
        let hp = problem_matrix(&enc).unwrap();
        let e = eigensolve(&hp, 32).unwrap();
        let mut d: Vec<f64> = hp.matrix().diagonal().iter().copied().collect();
        d.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&d) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 1.0;
        assert!(matches!(eigensolve(&DenseOperator::new(m), 2), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn grid_validation() {
        let sys = sgs();
        assert!(scan_spectrum(&sys, &[0.5], &ScanOptions::default()).is_err());
        assert!(scan_spectrum(&sys, &[0.0, 1.2], &ScanOptions::default()).is_err());
        assert!(scan_spectrum(&sys, &[0.5, 0.2], &ScanOptions::default()).is_err());
    }

    #[test]
    fn seed_is_positive_uniform() {
        let scan = scan_spectrum(&sgs(), &uniform_grid(11), &ScanOptions::default()).unwrap();
        let amp = 2f64.powf(-2.5);
        for &x in scan.ground_vectors[0].iter() {
            assert!((x - amp).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoints_only_grid_has_no_feature() {
        let enc = MwisInstance::new(&[1, 1], 0.2, 5.33, 1.0).unwrap().encode();
        let sys = AnnealSystem::full(&enc, &CatalystSpec::none()).unwrap();
        let scan = scan_spectrum(&sys, &[0.0, 1.0], &ScanOptions::default()).unwrap();
        assert!(find_gap_minima(&scan, 1e-6, None).is_empty());
    }

    #[test]
    fn csv_has_expected_columns() {
        let scan = scan_spectrum(&sgs(), &uniform_grid(5), &ScanOptions::default()).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "s,E0,E1,E2,E3,gap01,ov_E0,ov_E1,unreliable");
        assert_eq!(text.lines().count(), 1 + scan.len());
        assert!(text.lines().nth(1).unwrap().starts_with("0.00000000000e0,"));
    }
}
