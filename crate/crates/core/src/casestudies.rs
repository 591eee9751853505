//! Ground-truth generators: the two-regime algebraic example, the
//! interacting two-tank hybrid ODE with an RK4 integrator, and the polymer
//! zero-shear-viscosity piecewise scaling law, with optional Gaussian noise.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{format_float, Dataset};

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("tank level went negative: {0}")]
    NegativeLevel(f64),
    #[error("state left the valid domain at t = {t}: h1 = {h1}, h2 = {h2}")]
    DivergedState { t: f64, h1: f64, h2: f64 },
    #[error("flow schedule must start at or before t = 0 and be increasing")]
    BadSchedule,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Deterministic standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The two-regime target of the illustrative example.
pub fn case1_truth(x1: f64, x2: f64) -> f64 {
    if x1 * x1 + x2 * x2 <= 2.5 {
        x1 * x1 + x2 * x2
    } else {
        x1 * x1 + x2
    }
}

/// True regime label: `true` inside the disk `x1^2 + x2^2 <= 2.5`.
pub fn case1_region(x1: f64, x2: f64) -> bool {
    x1 * x1 + x2 * x2 <= 2.5
}

/// Uniform samples of the two-regime example on [-2, 2]^2.
pub fn gen_case1(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(-2.0..2.0);
        let x2 = rng.gen_range(-2.0..2.0);
        rows.push(vec![x1, x2]);
        ys.push(case1_truth(x1, x2));
    }
    Dataset::new(vec!["x1".into(), "x2".into()], rows, ys).expect("rectangular by construction")
}

const CV: f64 = 0.5;
const CV2: f64 = 0.5;
const AREA1: f64 = 1.0;

/// Right-hand side of the interacting two-tank system. The coupling flow
/// switches direction with the sign of `h1 - h2`; the second tank also
/// drains through its outlet valve.
pub fn two_tank_rhs(h1: f64, h2: f64, f1: f64, f2: f64) -> Result<(f64, f64), CaseStudyError> {
    if h1 < -1e-9 || h2 < -1e-9 {
        return Err(CaseStudyError::NegativeLevel(h1.min(h2)));
    }
    let (h1, h2) = (h1.max(0.0), h2.max(0.0));
    let coupling = CV * (h1 - h2).abs().sqrt();
    let outlet = CV2 * h2.sqrt();
    let (dh1, dh2) = if h1 > h2 {
        (f1 - coupling, f2 + coupling - outlet)
    } else {
        (f1 + coupling, f2 - coupling - outlet)
    };
    Ok((dh1 / AREA1, dh2 / AREA1))
}

/// Piecewise-constant inlet flow schedule.
#[derive(Clone, Debug)]
pub struct FlowSchedule {
    segments: Vec<(f64, f64, f64)>,
}

impl FlowSchedule {
    pub fn new(segments: Vec<(f64, f64, f64)>) -> Result<Self, CaseStudyError> {
        if segments.is_empty()
            || segments[0].0 > 0.0
            || segments.windows(2).any(|w| w[0].0 >= w[1].0)
            || segments.iter().any(|&(_, f1, f2)| f1 < 0.0 || f2 < 0.0)
        {
            return Err(CaseStudyError::BadSchedule);
        }
        Ok(FlowSchedule { segments })
    }

    /// Steps through both-regime-covering inlet levels every 2 time units.
    pub fn default_schedule() -> Self {
        FlowSchedule {
            segments: vec![
                (0.0, 1.0, 0.3),
                (2.0, 0.2, 1.2),
                (4.0, 1.4, 0.1),
                (6.0, 0.6, 0.9),
            ],
        }
    }

    pub fn flows_at(&self, t: f64) -> (f64, f64) {
        let mut current = (self.segments[0].1, self.segments[0].2);
        for &(start, f1, f2) in &self.segments {
            if start <= t {
                current = (f1, f2);
            } else {
                break;
            }
        }
        current
    }
}

/// A simulated trajectory with exact right-hand-side derivative targets at
/// every stored grid point.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub dh1: Vec<f64>,
    pub dh2: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Training dataset for the first tank's derivative: features
    /// (h1, h2, F1, F2), target dh1/dt; optionally truncated to `n` rows.
    pub fn to_dataset(&self, n: Option<usize>) -> Dataset {
        let take = n.unwrap_or(self.len()).min(self.len());
        let mut rows = Vec::with_capacity(take);
        for i in 0..take {
            rows.push(vec![self.h1[i], self.h2[i], self.f1[i], self.f2[i]]);
        }
        Dataset::new(
            vec!["h1".into(), "h2".into(), "F1".into(), "F2".into()],
            rows,
            self.dh1[..take].to_vec(),
        )
        .expect("rectangular by construction")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,h1,h2,F1,F2,dh1,dh2\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                format_float(self.times[i]),
                format_float(self.h1[i]),
                format_float(self.h2[i]),
                format_float(self.f1[i]),
                format_float(self.f2[i]),
                format_float(self.dh1[i]),
                format_float(self.dh2[i]),
            );
        }
        out
    }
}

/// Classic fixed-step RK4 on the hybrid right-hand side; the regime switch
/// lives inside the RHS evaluation.
pub fn simulate_two_tank(
    initial: (f64, f64),
    schedule: &FlowSchedule,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, CaseStudyError> {
    if dt <= 0.0 || t_end <= 0.0 {
        return Err(CaseStudyError::BadParameter(
            "t_end and dt must be positive".into(),
        ));
    }
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        h1: Vec::with_capacity(steps + 1),
        h2: Vec::with_capacity(steps + 1),
        f1: Vec::with_capacity(steps + 1),
        f2: Vec::with_capacity(steps + 1),
        dh1: Vec::with_capacity(steps + 1),
        dh2: Vec::with_capacity(steps + 1),
    };
    let (mut h1, mut h2) = initial;
    for step in 0..=steps {
        let t = step as f64 * dt;
        if h1 < -1e-9 || h2 < -1e-9 || !h1.is_finite() || !h2.is_finite() {
            return Err(CaseStudyError::DivergedState { t, h1, h2 });
        }
        let (f1, f2) = schedule.flows_at(t);
        let (d1, d2) = two_tank_rhs(h1, h2, f1, f2)?;
        traj.times.push(t);
        traj.h1.push(h1);
        traj.h2.push(h2);
        traj.f1.push(f1);
        traj.f2.push(f2);
        traj.dh1.push(d1);
        traj.dh2.push(d2);
        if step == steps {
            break;
        }
        let rhs = |h1: f64, h2: f64, t: f64| -> Result<(f64, f64), CaseStudyError> {
            let (f1, f2) = schedule.flows_at(t);
            two_tank_rhs(h1.max(0.0), h2.max(0.0), f1, f2)
        };
        let (k1a, k1b) = rhs(h1, h2, t)?;
        let (k2a, k2b) = rhs(h1 + 0.5 * dt * k1a, h2 + 0.5 * dt * k1b, t + 0.5 * dt)?;
        let (k3a, k3b) = rhs(h1 + 0.5 * dt * k2a, h2 + 0.5 * dt * k2b, t + 0.5 * dt)?;
        let (k4a, k4b) = rhs(h1 + dt * k3a, h2 + dt * k3b, t + dt)?;
        h1 += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        h2 += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    }
    Ok(traj)
}

/// Exact log-space parameters of the piecewise viscosity scaling law.
#[derive(Clone, Copy, Debug)]
pub struct ViscosityTruth {
    pub slope_low: f64,
    pub intercept_low: f64,
    pub slope_high: f64,
    pub intercept_high: f64,
    /// Crossover location in log10(M).
    pub threshold: f64,
}

impl ViscosityTruth {
    pub fn exact(m_c: f64, eta_c: f64) -> Self {
        let log_mc = m_c.log10();
        let log_ec = eta_c.log10();
        ViscosityTruth {
            slope_low: 1.0,
            intercept_low: log_ec - log_mc,
            slope_high: 3.4,
            intercept_high: log_ec - 3.4 * log_mc,
            threshold: log_mc,
        }
    }

    /// log10 of the zero-shear viscosity at molecular weight `m`.
    pub fn log_viscosity(&self, m: f64) -> f64 {
        let x = m.log10();
        if x < self.threshold {
            self.slope_low * x + self.intercept_low
        } else {
            self.slope_high * x + self.intercept_high
        }
    }
}

pub const DEFAULT_M_C: f64 = 31200.0;
pub const DEFAULT_ETA_C: f64 = 1e4;

/// Molecular weights sampled uniformly in log scale over (10^3, 10^6);
/// target is log10 viscosity with optional Gaussian noise in log space.
pub fn gen_viscosity(n: usize, m_c: f64, eta_c: f64, sigma: f64, seed: u64) -> Dataset {
    let truth = ViscosityTruth::exact(m_c, eta_c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(3.0..6.0);
        let m = 10f64.powf(x);
        let mut y = truth.log_viscosity(m);
        if sigma > 0.0 {
            y += sigma * gaussian(&mut rng);
        }
        rows.push(vec![m]);
        ys.push(y);
    }
    Dataset::new(vec!["M".into()], rows, ys).expect("rectangular by construction")
}
