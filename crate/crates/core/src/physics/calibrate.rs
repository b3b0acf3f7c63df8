use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::network::{RcNetwork, Zone};
use super::simulate::{resolve_drivers, trajectories, Drivers};
use crate::error::{Error, Result};
use crate::timeseries::TimeSeriesFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Full sweeps over all parameters.
    pub max_cycles: u32,
    /// Stop once a cycle improves RMSE by less than this fraction.
    pub tolerance: f64,
    /// Golden-section reductions per parameter and cycle.
    pub golden_iterations: u32,
    /// Each line search brackets `[p / f, p * f]` around the current value.
    pub bracket_factor: f64,
    /// Every parameter stays within `[p0 / f, p0 * f]` of its initial value.
    pub bounds_factor: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            max_cycles: 20,
            tolerance: 1e-4,
            golden_iterations: 12,
            bracket_factor: 3.0,
            bounds_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub network: RcNetwork,
    /// °C, one per zone, on the overlapping rows.
    pub rmse_per_zone: Vec<f64>,
    /// Pooled RMSE over all zones.
    pub rmse: f64,
    pub initial_rmse: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Pooled RMSE after each completed cycle, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Parameters the calibration may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Capacitance,
    EnvelopeResistance,
    HeatingGain,
    SolarAperture,
    OccupantGain,
    WindowConductance,
}

impl Parameter {
    pub const ALL: [Parameter; 6] = [
        Parameter::Capacitance,
        Parameter::EnvelopeResistance,
        Parameter::HeatingGain,
        Parameter::SolarAperture,
        Parameter::OccupantGain,
        Parameter::WindowConductance,
    ];

    pub fn get(self, z: &Zone) -> f64 {
        match self {
            Parameter::Capacitance => z.capacitance,
            Parameter::EnvelopeResistance => z.r_out,
            Parameter::HeatingGain => z.heating_gain,
            Parameter::SolarAperture => z.solar_aperture,
            Parameter::OccupantGain => z.occupant_gain,
            Parameter::WindowConductance => z.window_conductance,
        }
    }

    pub fn set(self, z: &mut Zone, v: f64) {
        match self {
            Parameter::Capacitance => z.capacitance = v,
            Parameter::EnvelopeResistance => z.r_out = v,
            Parameter::HeatingGain => z.heating_gain = v,
            Parameter::SolarAperture => z.solar_aperture = v,
            Parameter::OccupantGain => z.occupant_gain = v,
            Parameter::WindowConductance => z.window_conductance = v,
        }
    }
}

struct Objective<'a> {
    drivers: Drivers,
    targets: &'a TimeSeriesFrame,
    /// (driver row, target row)
    pairs: Vec<(usize, usize)>,
    step_seconds: f64,
}

impl Objective<'_> {
    fn per_zone(&self, net: &RcNetwork) -> Vec<f64> {
        let traj = trajectories(net, &self.drivers, self.step_seconds, 1);
        traj.iter()
            .zip(self.targets.columns())
            .map(|(sim, target)| {
                let (mut sse, mut n) = (0.0, 0usize);
                for &(d, t) in &self.pairs {
                    let y = target.values[t];
                    if y.is_nan() {
                        continue;
                    }
                    sse += (sim[d] - y).powi(2);
                    n += 1;
                }
                if n == 0 {
                    0.0
                } else {
                    (sse / n as f64).sqrt()
                }
            })
            .collect()
    }

    /// Residuals scaled so their sum of squares is the pooled MSE.
    fn residuals(&self, net: &RcNetwork) -> Vec<f64> {
        let traj = trajectories(net, &self.drivers, self.step_seconds, 1);
        let nz = traj.len() as f64;
        let mut out = Vec::new();
        for (sim, target) in traj.iter().zip(self.targets.columns()) {
            let start = out.len();
            for &(d, t) in &self.pairs {
                let y = target.values[t];
                if !y.is_nan() {
                    out.push(sim[d] - y);
                }
            }
            let n = (out.len() - start) as f64;
            let w = 1.0 / (n * nz).sqrt();
            out[start..].iter_mut().for_each(|r| *r *= w);
        }
        out
    }

    fn pooled(&self, net: &RcNetwork) -> f64 {
        let z = self.per_zone(net);
        let v = (z.iter().map(|r| r * r).sum::<f64>() / z.len() as f64).sqrt();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn align(drivers: &TimeSeriesFrame, targets: &TimeSeriesFrame) -> Vec<(usize, usize)> {
    let (a, b) = (drivers.timestamps(), targets.timestamps());
    let (mut i, mut j) = (0, 0);
    let mut pairs = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                pairs.push((i, j));
                i += 1;
                j += 1;
            }
        }
    }
    pairs
}

const MIN_WIDTH: f64 = 1e-6;
/// Gauss-Newton steps attempted after each coordinate sweep.
const GAUSS_NEWTON_STEPS: usize = 4;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Fits zone capacitances, envelope resistances and gain coefficients so the
/// simulation tracks `targets` (one column per zone, in zone order).
///
/// Coordinate-wise search: each positive parameter in turn gets a
/// golden-section line search in log space; a move is kept only if it lowers
/// the pooled RMSE, so the objective never increases.
pub fn calibrate(
    network: &RcNetwork,
    drivers: &TimeSeriesFrame,
    targets: &TimeSeriesFrame,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    network.validate()?;
    if targets.columns().len() != network.n_zones() {
        return Err(Error::DimensionMismatch {
            expected: network.n_zones(),
            got: targets.columns().len(),
        }
        .context("calibration targets"));
    }
    if options.bracket_factor <= 1.0 || options.bounds_factor <= 1.0 {
        return Err(Error::invalid("bracket_factor and bounds_factor must exceed 1"));
    }
    let pairs = align(drivers, targets);
    if pairs.is_empty() {
        return Err(Error::Empty("drivers and targets do not overlap in time".into()));
    }
    let objective = Objective {
        drivers: resolve_drivers(network, drivers)?,
        targets,
        pairs,
        step_seconds: f64::from(drivers.step_minutes()) * 60.0,
    };

    let mut net = network.clone();
    let initial_rmse = objective.pooled(&net);
    let mut best = initial_rmse;
    let mut trace = vec![initial_rmse];
    let mut converged = false;
    let mut cycles = 0;
    // Per-coordinate bracket half-widths: start at the full factor, then
    // track the size of recent moves so later cycles refine precisely.
    let max_width = options.bracket_factor.ln();
    let ln_bound = options.bounds_factor.ln();
    let bounds: Vec<[(f64, f64); N_COORDS]> = net
        .zones
        .iter()
        .map(|z| Parameter::ALL.map(|p| {
            let v = p.get(z);
            if v > 0.0 {
                (v.ln() - ln_bound, v.ln() + ln_bound)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        }))
        .collect();
    let mut widths = vec![[max_width; N_COORDS]; net.n_zones()];

    while cycles < options.max_cycles {
        let before = best;
        for zi in 0..net.n_zones() {
            for coord in 0..N_COORDS {
                let base = encode(&net.zones[zi]);
                let u0 = base[coord];
                if !u0.is_finite() {
                    continue;
                }
                let mut candidate = net.clone();
                let bounds = &bounds[zi];
                let mut eval = |u: f64| {
                    let mut v = base;
                    v[coord] = u;
                    decode(&mut candidate.zones[zi], &v);
                    if within(&candidate.zones[zi], bounds) {
                        objective.pooled(&candidate)
                    } else {
                        f64::INFINITY
                    }
                };
                let half_width = widths[zi][coord];
                let (mut lo, mut hi) = (u0 - half_width, u0 + half_width);
                let mut c = hi - INV_PHI * (hi - lo);
                let mut d = lo + INV_PHI * (hi - lo);
                let (mut fc, mut fd) = (eval(c), eval(d));
                let (mut best_u, mut best_f) = (u0, best);
                for (u, f) in [(c, fc), (d, fd)] {
                    if f < best_f {
                        best_u = u;
                        best_f = f;
                    }
                }
                for _ in 0..options.golden_iterations {
                    if fc <= fd {
                        hi = d;
                        d = c;
                        fd = fc;
                        c = hi - INV_PHI * (hi - lo);
                        fc = eval(c);
                        if fc < best_f {
                            best_u = c;
                            best_f = fc;
                        }
                    } else {
                        lo = c;
                        c = d;
                        fc = fd;
                        d = lo + INV_PHI * (hi - lo);
                        fd = eval(d);
                        if fd < best_f {
                            best_u = d;
                            best_f = fd;
                        }
                    }
                }
                let moved = (best_u - u0).abs();
                widths[zi][coord] = if best_f < best {
                    (4.0 * moved).clamp(MIN_WIDTH, max_width)
                } else {
                    (0.5 * half_width).max(MIN_WIDTH)
                };
                if best_f < best {
                    let mut v = base;
                    v[coord] = best_u;
                    decode(&mut net.zones[zi], &v);
                    best = best_f;
                }
            }
        }
        // A damped Gauss-Newton step in the same coordinates. Coordinate
        // sweeps zig-zag along the narrow valleys that correlated inputs
        // produce; this step follows them directly.
        for _ in 0..GAUSS_NEWTON_STEPS {
            match gauss_newton_step(&objective, &net, best, &bounds) {
                Some((moved, f)) => {
                    net = moved;
                    best = f;
                }
                None => break,
            }
        }
        cycles += 1;
        trace.push(best);
        let improvement = if before > 0.0 { (before - best) / before } else { 0.0 };
        if best == 0.0 || improvement < options.tolerance {
            converged = true;
            break;
        }
    }

    Ok(CalibrationResult {
        rmse_per_zone: objective.per_zone(&net),
        network: net,
        rmse: best,
        initial_rmse,
        iterations: cycles,
        converged,
        trace,
    })
}

const N_COORDS: usize = 6;

/// Search coordinates of one zone, all in log space: the time constant
/// `R C`, the envelope resistance `R`, and each gain coefficient times `R`
/// (its steady-state temperature effect). These decouple far better than the
/// raw parameters. Zero gains map to `-inf` and stay fixed.
fn encode(z: &Zone) -> [f64; N_COORDS] {
    let ln = |v: f64| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY };
    let r = z.r_out.ln();
    [
        z.capacitance.ln() + r,
        r,
        ln(z.heating_gain) + r,
        ln(z.solar_aperture) + r,
        ln(z.occupant_gain) + r,
        ln(z.window_conductance) + r,
    ]
}

fn within(z: &Zone, bounds: &[(f64, f64); N_COORDS]) -> bool {
    Parameter::ALL.iter().zip(bounds).all(|(p, &(lo, hi))| {
        let v = p.get(z);
        v <= 0.0 || (lo..=hi).contains(&v.ln())
    })
}

fn decode(z: &mut Zone, u: &[f64; N_COORDS]) {
    let r = u[1];
    let exp = |v: f64| if v.is_finite() { (v - r).exp() } else { 0.0 };
    z.r_out = r.exp();
    z.capacitance = (u[0] - r).exp();
    z.heating_gain = exp(u[2]);
    z.solar_aperture = exp(u[3]);
    z.occupant_gain = exp(u[4]);
    z.window_conductance = exp(u[5]);
}

/// Jacobian columns come from forward differences; the damping is chosen
/// from a short ladder. Returns the best candidate only if it improves.
fn gauss_newton_step(
    objective: &Objective<'_>,
    net: &RcNetwork,
    current: f64,
    bounds: &[[(f64, f64); N_COORDS]],
) -> Option<(RcNetwork, f64)> {
    const H: f64 = 1e-4;
    let coords: Vec<[f64; N_COORDS]> = net.zones.iter().map(encode).collect();
    let active: Vec<(usize, usize)> = coords
        .iter()
        .enumerate()
        .flat_map(|(zi, u)| (0..N_COORDS).filter(move |&k| u[k].is_finite()).map(move |k| (zi, k)))
        .collect();
    let at = |delta: &[f64]| -> RcNetwork {
        let mut cand = net.clone();
        let mut u = coords.clone();
        for (&(zi, k), d) in active.iter().zip(delta) {
            u[zi][k] += d;
        }
        for (z, v) in cand.zones.iter_mut().zip(&u) {
            decode(z, v);
        }
        cand
    };

    let r0 = objective.residuals(net);
    let m = r0.len();
    let p = active.len();
    let mut jac = DMatrix::<f64>::zeros(m, p);
    let mut delta = vec![0.0; p];
    for j in 0..p {
        delta[j] = H;
        let r = objective.residuals(&at(&delta));
        delta[j] = 0.0;
        for i in 0..m {
            jac[(i, j)] = (r[i] - r0[i]) / H;
        }
    }
    if !jac.iter().all(|v| v.is_finite()) {
        return None;
    }
    // Coordinates with no visible effect (a window that never opens) would
    // make the normal equations singular; they stay put.
    let norms: Vec<f64> = (0..p).map(|j| jac.column(j).norm()).collect();
    let largest = norms.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..p).filter(|&j| norms[j] > 1e-8 * largest).collect();
    if keep.is_empty() {
        return None;
    }
    let jac = jac.select_columns(&keep);
    let jtj = jac.transpose() * &jac;
    let jtr = jac.transpose() * DVector::from_vec(r0);
    let mut best: Option<(RcNetwork, f64)> = None;
    for lambda in [1e-9, 1e-6, 1e-4, 1e-2, 1.0, 100.0] {
        let mut a = jtj.clone();
        for k in 0..keep.len() {
            a[(k, k)] += lambda * jtj[(k, k)];
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
            continue;
        };
        // Shorter steps along the same direction when the full one overshoots.
        for shrink in [1.0, 0.5, 0.25] {
            let mut delta = vec![0.0; p];
            for (&j, v) in keep.iter().zip(step.iter()) {
                delta[j] = -shrink * v;
            }
            let cand = at(&delta);
            if !cand.zones.iter().zip(bounds).all(|(z, b)| within(z, b)) {
                continue;
            }
            let f = objective.pooled(&cand);
            if f < best.as_ref().map_or(current, |b| b.1) {
                best = Some((cand, f));
                break;
            }
        }
    }
    best
}
