//! Closed-system Schrödinger evolution under `H(t/T)` with ħ = 1, and
//! populations of the instantaneous eigenstates along the way.
//!
//! The complex state `ψ = x + i y` is carried as two real vectors, so the
//! equation of motion `i dψ/dt = H ψ` becomes `dx/dt = H y`, `dy/dt = −H x`.
//! Integration uses an adaptive Dormand–Prince 5(4) pair.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{csv_err, fmt12};
use crate::system::AnnealSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Annealing time.
    pub total_time: f64,
    /// Relative and absolute error tolerance per step.
    pub tolerance: f64,
    /// Output checkpoints, uniform in `t`, not counting `t = 0`.
    pub checkpoints: usize,
    /// Instantaneous levels whose populations are reported.
    pub levels: usize,
    /// Allowed `|‖ψ‖ − 1|` before the run is repeated at a tighter tolerance.
    pub norm_tolerance: f64,
    pub max_retries: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            total_time: 1000.0,
            tolerance: 1e-10,
            checkpoints: 500,
            levels: 4,
            norm_tolerance: 1e-6,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsTrace {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    /// `|⟨E_a(s)|ψ(t)⟩|²` for `a < levels`.
    pub populations: Vec<Vec<f64>>,
    /// Population summed over every instantaneous eigenstate.
    pub total_population: Vec<f64>,
    pub norm: Vec<f64>,
    pub energy: Vec<f64>,
    /// Tolerance of the run that was accepted.
    pub tolerance: f64,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl DynamicsTrace {
    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().map_or(&[], Vec::as_slice)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.populations.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "s".to_string()];
        header.extend((0..k).map(|a| format!("pop_{a}")));
        header.push("norm".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.t.len() {
            let mut row = vec![fmt12(self.t[i]), fmt12(self.s[i])];
            row.extend(self.populations[i].iter().map(|&p| fmt12(p)));
            row.push(fmt12(self.norm[i]));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Rhs<'a> {
    system: &'a AnnealSystem,
    total_time: f64,
    dim: usize,
    scratch: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        let (x, im) = y.split_at(self.dim);
        let (dx, dim_) = dy.split_at_mut(self.dim);
        self.system.apply(s, im, dx);
        self.system.apply(s, x, &mut self.scratch);
        for (d, h) in dim_.iter_mut().zip(&self.scratch) {
            *d = -h;
        }
    }
}

struct Stepper {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
    h: f64,
    steps: usize,
    rejected: usize,
}

impl Stepper {
    fn new(len: usize, h: f64) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
            next: vec![0.0; len],
            h,
            steps: 0,
            rejected: 0,
        }
    }

    /// Advances `y` from `t0` to exactly `t1`. `k[0]` must hold `f(t0, y)`.
    fn advance(&mut self, rhs: &mut Rhs, y: &mut [f64], t0: f64, t1: f64, tol: f64) -> Result<()> {
        let mut t = t0;
        while t < t1 {
            let last = self.h >= t1 - t;
            let h = if last { t1 - t } else { self.h };
            for stage in 1..7 {
                for (i, (out, &yi)) in self.tmp.iter_mut().zip(y.iter()).enumerate() {
                    let mut acc = yi;
                    for (j, a) in A[stage][..stage].iter().enumerate() {
                        acc += h * a * self.k[j][i];
                    }
                    *out = acc;
                }
                rhs.eval(t + C[stage] * h, &self.tmp, &mut self.k[stage]);
                if stage == 6 {
                    self.next.copy_from_slice(&self.tmp);
                }
            }
            let mut err = 0.0;
            for (i, (yi, ni)) in y.iter().zip(&self.next).enumerate() {
                let e: f64 = E.iter().zip(&self.k).map(|(c, k)| c * k[i]).sum::<f64>() * h;
                let scale = tol + tol * yi.abs().max(ni.abs());
                err += (e / scale).powi(2);
            }
            let err = (err / y.len() as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite error estimate at t = {t}")));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                y.copy_from_slice(&self.next);
                t = if last { t1 } else { t + h };
                // First-same-as-last: the final stage is f at the new point.
                self.k.swap(0, 6);
                self.steps += 1;
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor;
                self.rejected += 1;
            }
            if self.h < 4.0 * f64::EPSILON * t.abs().max(1e-300) {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
        Ok(())
    }
}

fn run_once(system: &AnnealSystem, options: &EvolveOptions, tol: f64) -> Result<DynamicsTrace> {
    let dim = system.dim();
    let total_time = options.total_time;
    let mut y = vec![0.0; 2 * dim];
    y[..dim].copy_from_slice(system.initial_state().as_slice());

    let mut rhs = Rhs {
        system,
        total_time,
        dim,
        scratch: vec![0.0; dim],
    };
    let mut stepper = Stepper::new(2 * dim, total_time / options.checkpoints.max(1) as f64 * 1e-3);
    rhs.eval(0.0, &y, &mut stepper.k[0]);

    let mut trace = DynamicsTrace {
        t: Vec::new(),
        s: Vec::new(),
        populations: Vec::new(),
        total_population: Vec::new(),
        norm: Vec::new(),
        energy: Vec::new(),
        tolerance: tol,
        steps: 0,
        rejected_steps: 0,
    };
    let checkpoints = options.checkpoints.max(1);
    let mut hy = vec![0.0; dim];
    for c in 0..=checkpoints {
        let t = total_time * c as f64 / checkpoints as f64;
        if c > 0 {
            let t0 = *trace.t.last().unwrap();
            stepper.advance(&mut rhs, &mut y, t0, t, tol)?;
        }
        let s = (t / total_time).clamp(0.0, 1.0);
        let (x, im) = y.split_at(dim);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        system.apply(s, x, &mut hy);
        let mut energy: f64 = x.iter().zip(&hy).map(|(a, b)| a * b).sum();
        system.apply(s, im, &mut hy);
        energy += im.iter().zip(&hy).map(|(a, b)| a * b).sum::<f64>();

        // Populations are insensitive to eigenvector signs, so no gauge is needed here.
        let pairs = system.eigenpairs(s, dim);
        let mut pops = Vec::with_capacity(dim);
        for a in 0..pairs.len() {
            let v = pairs.vectors.column(a);
            let re: f64 = v.iter().zip(x).map(|(p, q)| p * q).sum();
            let imag: f64 = v.iter().zip(im).map(|(p, q)| p * q).sum();
            pops.push(re * re + imag * imag);
        }
        trace.total_population.push(pops.iter().sum());
        pops.truncate(options.levels);
        trace.t.push(t);
        trace.s.push(s);
        trace.populations.push(pops);
        trace.norm.push(norm);
        trace.energy.push(energy);
    }
    trace.steps = stepper.steps;
    trace.rejected_steps = stepper.rejected;
    Ok(trace)
}

/// Evolves the driver ground state under the linear schedule `s = t/T`.
/// A run whose norm drifts beyond `norm_tolerance` is repeated with the step
/// tolerance tightened tenfold, up to `max_retries` times.
pub fn evolve(system: &AnnealSystem, options: &EvolveOptions) -> Result<DynamicsTrace> {
    if !(options.total_time > 0.0) {
        return Err(Error::Integration(format!("annealing time must be positive, got {}", options.total_time)));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::Integration(format!("tolerance must be positive, got {}", options.tolerance)));
    }
    let mut tol = options.tolerance;
    let mut drifts = Vec::new();
    for _ in 0..=options.max_retries {
        let trace = run_once(system, options, tol)?;
        let drift = trace.max_norm_drift();
        if drift <= options.norm_tolerance {
            return Ok(trace);
        }
        drifts.push((tol, drift));
        tol *= 0.1;
    }
    let detail = drifts
        .iter()
        .map(|(t, d)| format!("tolerance {t:.1e}: drift {d:.3e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::Integration(format!("norm drift persisted ({detail})")))
}
