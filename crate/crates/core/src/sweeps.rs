//! Parameter studies built on spectrum scans: catalyst-strength sweeps, the
//! gap-maximizing and gap-closing `J_xx`, `J'_zz` calibration, system-size
//! scaling and the `δW` intermediate-regime study.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::CatalystSpec;
use crate::mwis::MwisInstance;
use crate::optimize::{bisect, golden_max, golden_min};
use crate::spectrum::{
    csv_err, find_gap_minima, fmt12, locate_sign_change, scan_spectrum, split_features, uniform_grid, Component,
    FeatureKind, ScanOptions,
};
use crate::system::{AnnealSystem, SpaceMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    /// Base `s` grid size for every scan.
    pub grid_points: usize,
    pub scan: ScanOptions,
    /// Golden-section tolerance in `s` for gap minima.
    pub refine_tol: f64,
    /// Bisection tolerance in `s` for `s_-`.
    pub sign_tol: f64,
    /// Coarse `J_xx` grid: `0, step, …, max`.
    pub jxx_step: f64,
    pub jxx_max: f64,
    /// Golden-section tolerance in `J_xx` for the gap maximum.
    pub jxx_tol: f64,
    /// Tolerances used when refining a closing, in `J_xx` and in `s`.
    pub closing_jxx_tol: f64,
    pub closing_s_tol: f64,
    /// A closing is declared below `closing_factor · n · E_scale`.
    pub closing_factor: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid_points: 201,
            scan: ScanOptions::default(),
            refine_tol: 1e-6,
            sign_tol: 1e-6,
            jxx_step: 0.02,
            jxx_max: 3.0,
            jxx_tol: 1e-4,
            closing_jxx_tol: 1e-10,
            closing_s_tol: 1e-11,
            closing_factor: 1e-8,
        }
    }
}

impl SweepSettings {
    pub fn jxx_grid(&self) -> Vec<f64> {
        let m = (self.jxx_max / self.jxx_step).round() as usize;
        (0..=m).map(|i| i as f64 * self.jxx_step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub jxx: f64,
    /// Primary crossing, or the global gap minimum when no interior minimum exists.
    pub sx: f64,
    pub gap_at_sx: f64,
    pub sx_kind: FeatureKind,
    pub sn: Option<f64>,
    pub gap_at_sn: Option<f64>,
    pub s_minus: Option<f64>,
    pub crossed_component: Option<Component>,
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["jxx", "sx", "gap_at_sx", "sn", "gap_at_sn", "s_minus", "crossed_component"])
        .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt12).unwrap_or_default();
    for r in records {
        let comp = match r.crossed_component {
            Some(Component::E0) => "E0",
            Some(Component::E1) => "E1",
            None => "none",
        };
        w.write_record([
            fmt12(r.jxx),
            fmt12(r.sx),
            fmt12(r.gap_at_sx),
            opt(r.sn),
            opt(r.gap_at_sn),
            opt(r.s_minus),
            comp.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Location of the catalyst-free primary crossing, used to label features.
pub fn reference_crossing(base: &AnnealSystem, settings: &SweepSettings) -> Result<Option<f64>> {
    let free = base.with_jxx(0.0)?;
    let scan = scan_spectrum(&free, &uniform_grid(settings.grid_points), &settings.scan)?;
    let (primary, _) = split_features(&find_gap_minima(&scan, settings.refine_tol, None));
    Ok(primary.map(|f| f.location))
}

fn evaluate(base: &AnnealSystem, jxx: f64, settings: &SweepSettings, reference: Option<f64>, s_tol: f64) -> Result<SweepRecord> {
    let system = base.with_jxx(jxx)?;
    let scan = scan_spectrum(&system, &uniform_grid(settings.grid_points), &settings.scan)?;
    let features = find_gap_minima(&scan, s_tol, reference);
    let (primary, secondary) = split_features(&features);
    let primary = primary.unwrap_or_else(|| scan.min_gap(s_tol));
    let sign = locate_sign_change(&scan, settings.sign_tol);
    Ok(SweepRecord {
        jxx,
        sx: primary.location,
        gap_at_sx: primary.value,
        sx_kind: primary.kind,
        sn: secondary.map(|f| f.location),
        gap_at_sn: secondary.map(|f| f.value),
        s_minus: sign.map(|c| c.s),
        crossed_component: sign.map(|c| c.component),
    })
}

/// Single sweep point.
pub fn sweep_point(base: &AnnealSystem, jxx: f64, settings: &SweepSettings) -> Result<SweepRecord> {
    let reference = reference_crossing(base, settings)?;
    evaluate(base, jxx, settings, reference, settings.refine_tol)
}

/// Scan, gap features and sign change for each catalyst strength, in input order.
pub fn catalyst_sweep(base: &AnnealSystem, jxx_grid: &[f64], settings: &SweepSettings) -> Result<Vec<SweepRecord>> {
    if let Some(j) = jxx_grid.iter().find(|j| !(**j >= 0.0)) {
        return Err(Error::InvalidCatalyst(format!("negative J_xx {j} in sweep grid")));
    }
    let reference = reference_crossing(base, settings)?;
    jxx_grid
        .par_iter()
        .map(|&j| evaluate(base, j, settings, reference, settings.refine_tol))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct JxxOptimum {
    pub jxx: f64,
    pub gap: f64,
    pub sx: f64,
    /// The coarse maximum sat on the edge of the search range.
    pub at_boundary: bool,
    pub coarse: Vec<SweepRecord>,
}

/// Maximizes the gap at the primary crossing: coarse grid, then golden section
/// over the bracket around the best coarse point.
pub fn optimize_jxx(base: &AnnealSystem, settings: &SweepSettings) -> Result<JxxOptimum> {
    let coarse = catalyst_sweep(base, &settings.jxx_grid(), settings)?;
    let best = coarse
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gap_at_sx.total_cmp(&b.1.gap_at_sx))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidGrid("empty J_xx grid".into()))?;
    if best == 0 || best + 1 == coarse.len() {
        let r = coarse[best];
        return Ok(JxxOptimum {
            jxx: r.jxx,
            gap: r.gap_at_sx,
            sx: r.sx,
            at_boundary: true,
            coarse,
        });
    }
    let reference = reference_crossing(base, settings)?;
    let (lo, hi) = (coarse[best - 1].jxx, coarse[best + 1].jxx);
    let mut failure = None;
    let (j, g) = golden_max(
        |j| match evaluate(base, j, settings, reference, settings.refine_tol) {
            Ok(r) => r.gap_at_sx,
            Err(e) => {
                failure = Some(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        settings.jxx_tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (jxx, gap, sx) = if g >= coarse[best].gap_at_sx {
        let r = evaluate(base, j, settings, reference, settings.refine_tol)?;
        (j, g, r.sx)
    } else {
        (coarse[best].jxx, coarse[best].gap_at_sx, coarse[best].sx)
    };
    Ok(JxxOptimum {
        jxx,
        gap,
        sx,
        at_boundary: false,
        coarse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosingCandidate {
    pub kind: FeatureKind,
    pub jxx: f64,
    pub s: f64,
    pub gap: f64,
    /// The refined gap fell below the closing threshold.
    pub closing: bool,
}

fn feature_gap(base: &AnnealSystem, jxx: f64, which: FeatureKind, settings: &SweepSettings, reference: Option<f64>) -> Result<Option<(f64, f64)>> {
    let r = evaluate(base, jxx, settings, reference, settings.closing_s_tol)?;
    Ok(match which {
        FeatureKind::PrimaryCrossing if r.sx_kind == FeatureKind::PrimaryCrossing => Some((r.sx, r.gap_at_sx)),
        FeatureKind::SecondaryMinimum => r.sn.zip(r.gap_at_sn),
        _ => None,
    })
}

/// Every local dip of the chosen feature's gap along the coarse `J_xx` grid,
/// refined in `J_xx` by golden section.
pub fn closing_candidates(base: &AnnealSystem, which: FeatureKind, settings: &SweepSettings) -> Result<Vec<ClosingCandidate>> {
    let reference = reference_crossing(base, settings)?;
    let grid = settings.jxx_grid();
    let coarse: Vec<Option<(f64, f64)>> = grid
        .par_iter()
        .map(|&j| feature_gap(base, j, which, settings, reference))
        .collect::<Result<_>>()?;
    let threshold = settings.closing_factor * base.n() as f64 * base.encoding().e_scale();
    let gap_at = |i: usize| coarse.get(i).copied().flatten().map(|(_, g)| g);

    let dips: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let Some(g) = gap_at(i) else { return false };
            let left = i.checked_sub(1).and_then(gap_at);
            let right = gap_at(i + 1);
            left.is_none_or(|l| g < l) && right.is_none_or(|r| g <= r) && (left.is_some() || right.is_some())
        })
        .collect();

    dips.par_iter()
        .map(|&i| {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            let mut failure = None;
            let (j, g) = golden_min(
                |j| match feature_gap(base, j, which, settings, reference) {
                    Ok(Some((_, g))) => g,
                    Ok(None) => f64::INFINITY,
                    Err(e) => {
                        failure = Some(e);
                        f64::INFINITY
                    }
                },
                lo,
                hi,
                settings.closing_jxx_tol,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let (j, (s, g)) = if g <= coarse[i].unwrap().1 {
                (j, feature_gap(base, j, which, settings, reference)?.unwrap_or((f64::NAN, g)))
            } else {
                (grid[i], coarse[i].unwrap())
            };
            Ok(ClosingCandidate {
                kind: which,
                jxx: j,
                s,
                gap: g,
                closing: g < threshold,
            })
        })
        .collect()
}

/// Lowest catalyst strength at which the chosen feature's gap closes, if any.
pub fn find_closing_jxx(base: &AnnealSystem, which: FeatureKind, settings: &SweepSettings) -> Result<Option<ClosingCandidate>> {
    Ok(closing_candidates(base, which, settings)?
        .into_iter()
        .filter(|c| c.closing)
        .min_by(|a, b| a.jxx.total_cmp(&b.jxx)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub jzz_raw: f64,
    pub sx: f64,
    /// `(J'_zz, s_x)` pairs evaluated while bracketing.
    pub probes: Vec<(f64, Option<f64>)>,
}

/// Catalyst-free primary crossing of a freshly built instance.
pub fn catalyst_free_sx(instance: &MwisInstance, mode: SpaceMode, settings: &SweepSettings) -> Result<Option<f64>> {
    let system = AnnealSystem::new(&instance.encode(), &CatalystSpec::none(), mode)?;
    let scan = scan_spectrum(&system, &uniform_grid(settings.grid_points), &settings.scan)?;
    let (primary, _) = split_features(&find_gap_minima(&scan, settings.refine_tol, None));
    Ok(primary.map(|f| f.location))
}

/// Finds `J'_zz` placing the catalyst-free crossing at `target_sx`, by
/// widening a bracket over a geometric ladder and then bisecting.
pub fn calibrate_jzz(sizes: &[usize], delta_w: f64, e_scale: f64, target_sx: f64, settings: &SweepSettings) -> Result<Calibration> {
    let mode = SpaceMode::Auto;
    let n_edges: f64 = {
        let mut acc = 0.0;
        for a in 0..sizes.len() {
            for b in a + 1..sizes.len() {
                acc += (sizes[a] * sizes[b]) as f64;
            }
        }
        acc
    };
    let k = sizes.len();
    let floor = (1..k).map(|a| 1.0 + (k - 1 - a) as f64 * delta_w).sum::<f64>() / n_edges;
    let sx_at = |jzz: f64| -> Result<Option<f64>> {
        match MwisInstance::new(sizes, delta_w, jzz, e_scale) {
            Ok(inst) => catalyst_free_sx(&inst, mode, settings),
            Err(Error::InvalidInstance(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let ladder = [1.05, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 89.0, 144.0, 233.0, 377.0];
    let mut probes = Vec::new();
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for m in ladder {
        let jzz = floor * m;
        let sx = sx_at(jzz)?;
        probes.push((jzz, sx));
        if let Some(sx) = sx {
            if let Some((pj, psx)) = prev {
                if (psx - target_sx) * (sx - target_sx) <= 0.0 {
                    bracket = Some((pj, jzz));
                    break;
                }
            }
            prev = Some((jzz, sx));
        }
    }
    let Some((lo, hi)) = bracket else {
        let listing = probes
            .iter()
            .map(|(j, s)| format!("{j:.4}->{}", s.map_or("none".into(), |s| format!("{s:.4}"))))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::Calibration(format!("no bracket for s_x = {target_sx}: {listing}")));
    };
    let mut failure = None;
    let jzz = bisect(
        |j| match sx_at(j) {
            Ok(Some(sx)) => sx - target_sx,
            Ok(None) => f64::NAN,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-6 * hi,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let sx = sx_at(jzz)?.ok_or_else(|| Error::Calibration(format!("no crossing at calibrated J'_zz = {jzz}")))?;
    Ok(Calibration { jzz_raw: jzz, sx, probes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingSetting {
    Sgs,
    Wgs,
    NoAc,
}

impl ScalingSetting {
    /// `(δW, J'_zz)` of the 5-vertex reference.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            ScalingSetting::Sgs | ScalingSetting::NoAc => (0.01, 5.33),
            ScalingSetting::Wgs => (0.37, 37.5),
        }
    }

    /// `(n_0, n_1)` for odd `n`.
    pub fn sizes(self, n: usize) -> (usize, usize) {
        match self {
            ScalingSetting::NoAc => (n.div_ceil(2), n / 2),
            _ => (n / 2, n.div_ceil(2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JxxPolicy {
    None,
    Fixed,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub jxx_used: f64,
    pub min_gap: f64,
    pub location: f64,
    pub kind: FeatureKind,
}

pub fn write_scaling_csv<W: Write>(records: &[ScalingRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "n0", "n1", "jxx_used", "min_gap", "location"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.n0.to_string(),
            r.n1.to_string(),
            fmt12(r.jxx_used),
            fmt12(r.min_gap),
            fmt12(r.location),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub setting: ScalingSetting,
    pub policy: JxxPolicy,
    /// Strength for the fixed policy.
    pub jxx: f64,
    pub delta_w: f64,
    pub jzz_raw: f64,
    pub e_scale: f64,
    pub mode: SpaceMode,
}

impl ScalingSpec {
    pub fn new(setting: ScalingSetting, policy: JxxPolicy) -> Self {
        let (delta_w, jzz_raw) = setting.parameters();
        Self {
            setting,
            policy,
            jxx: 0.0,
            delta_w,
            jzz_raw,
            e_scale: crate::mwis::DEFAULT_E_SCALE,
            mode: SpaceMode::Sector,
        }
    }
}

/// Minimum gap per system size. The 5-vertex `(δW, J'_zz)` is reused
/// verbatim at every `n`; the catalyst pair is the first two qubits of `G_1`.
pub fn scaling_study(spec: &ScalingSpec, n_list: &[usize], settings: &SweepSettings) -> Result<Vec<ScalingRecord>> {
    n_list
        .iter()
        .map(|&n| {
            if n < 3 || n % 2 == 0 {
                return Err(Error::InvalidInstance(format!("scaling sizes must be odd and at least 3, got {n}")));
            }
            let (n0, n1) = spec.setting.sizes(n);
            let instance = MwisInstance::new(&[n0, n1], spec.delta_w, spec.jzz_raw, spec.e_scale)?;
            let encoding = instance.encode();
            let jxx = match spec.policy {
                JxxPolicy::None => 0.0,
                JxxPolicy::Fixed => spec.jxx,
                JxxPolicy::Optimized => 0.0,
            };
            let pair_host = if n1 >= 2 { 1 } else { 0 };
            let catalyst = CatalystSpec::in_sub_graph(&instance, pair_host, jxx)?;
            let base = AnnealSystem::new(&encoding, &catalyst, spec.mode)?;
            let system = match spec.policy {
                JxxPolicy::Optimized => base.with_jxx(optimize_jxx(&base, settings)?.jxx)?,
                _ => base,
            };
            let scan = scan_spectrum(&system, &uniform_grid(settings.grid_points), &settings.scan)?;
            let min = scan.min_gap(settings.refine_tol);
            Ok(ScalingRecord {
                n,
                n0,
                n1,
                jxx_used: system.catalyst().jxx,
                min_gap: min.value,
                location: min.location,
                kind: min.kind,
            })
        })
        .collect()
}

/// Least-squares line through `(x, y)` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2: if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) },
    }
}

/// Fit of `ln(min_gap)` against `n`.
pub fn log_gap_fit(records: &[ScalingRecord]) -> LinearFit {
    let x: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = records.iter().map(|r| r.min_gap.ln()).collect();
    linear_fit(&x, &y)
}

#[derive(Debug, Clone, Serialize)]
pub struct IntermediateRow {
    pub delta_w: f64,
    pub jzz_calibrated: f64,
    pub sx: f64,
    /// Closing strengths from both feature kinds, ascending.
    pub closings: Vec<ClosingCandidate>,
    pub jxx_close_primary: Option<f64>,
    pub jxx_close_secondary: Option<f64>,
}

pub fn write_intermediate_csv<W: Write>(rows: &[IntermediateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta_w", "jzz_calibrated", "sx", "jxx_close_primary", "jxx_close_secondary"])
        .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt12).unwrap_or_default();
    for r in rows {
        w.write_record([
            fmt12(r.delta_w),
            fmt12(r.jzz_calibrated),
            fmt12(r.sx),
            opt(r.jxx_close_primary),
            opt(r.jxx_close_secondary),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// For each `δW`: calibrate the 5-vertex `J'_zz` to `s_x = target_sx`, then
/// collect every closing strength of either gap feature. The lower closing is
/// reported as the primary branch and the next as the secondary branch.
pub fn intermediate_regime_study(delta_w_list: &[f64], e_scale: f64, target_sx: f64, settings: &SweepSettings) -> Result<Vec<IntermediateRow>> {
    delta_w_list
        .iter()
        .map(|&dw| {
            let cal = calibrate_jzz(&[2, 3], dw, e_scale, target_sx, settings)?;
            let instance = MwisInstance::new(&[2, 3], dw, cal.jzz_raw, e_scale)?;
            let catalyst = CatalystSpec::in_sub_graph(&instance, 1, 0.0)?;
            let base = AnnealSystem::new(&instance.encode(), &catalyst, SpaceMode::Sector)?;
            let mut closings: Vec<ClosingCandidate> = Vec::new();
            for kind in [FeatureKind::PrimaryCrossing, FeatureKind::SecondaryMinimum] {
                for c in closing_candidates(&base, kind, settings)? {
                    if c.closing && !closings.iter().any(|d| (d.jxx - c.jxx).abs() < 1e-3) {
                        closings.push(c);
                    }
                }
            }
            closings.sort_by(|a, b| a.jxx.total_cmp(&b.jxx));
            Ok(IntermediateRow {
                delta_w: dw,
                jzz_calibrated: cal.jzz_raw,
                sx: cal.sx,
                jxx_close_primary: closings.first().map(|c| c.jxx),
                jxx_close_secondary: closings.get(1).map(|c| c.jxx),
                closings,
            })
        })
        .collect()
}
