//! Brute-force equilibrium search for cross-checking the analytic solvers.
//!
//! Everything here is evaluated straight from the raw model definitions on a
//! lattice of lane-1 flows. There is no root finding and no greedy loading,
//! so a bug in the solvers cannot hide behind a matching bug here.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FlowDistribution, PerDecision, Scenario, VehicleClass};

pub const MAX_AXIS_POINTS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Lattice spacing of each lane-1 flow axis, in vehicles per unit time.
    pub resolution: f64,
    /// Slack on the cost inequalities.
    pub tolerance: f64,
}

impl GridSpec {
    pub fn new(resolution: f64, tolerance: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be positive and finite"));
        }
        if !(tolerance >= 0.0) {
            return Err(Error::invalid("tolerance", "must be non-negative"));
        }
        Ok(GridSpec { resolution, tolerance })
    }
}

/// Raw per-class inputs recomputed from the scenario's primitive fields.
struct Raw {
    /// Commuters per vehicle.
    n: [f64; 4],
    /// Effective weight of one vehicle.
    w: [f64; 4],
    /// Vehicle demand.
    dv: [f64; 4],
    alpha: [f64; 3],
    tau: [f64; 3],
}

impl Raw {
    fn new(s: &Scenario) -> Self {
        let d = s.demand().get();
        let (n_lo, n_ho) = (s.occupancy().n_lo(), s.occupancy().n_ho());
        let mu = s.headway().get();
        let n = [n_lo, n_ho, n_lo, n_ho];
        let w = [1.0, 1.0, mu, mu];
        let d = [d.hv_lo, d.hv_ho, d.av_lo, d.av_ho];
        let dv = [d[0] / n[0], d[1] / n[1], d[2] / n[2], d[3] / n[3]];
        let a = s.misbehavior();
        let t = s.toll().per_class();
        Raw { n, w, dv, alpha: [a.hv_lo, a.hv_ho, a.av_lo], tau: [t.hv_lo, t.hv_ho, t.av_lo] }
    }

    fn honest(&self, i: usize) -> f64 {
        self.dv[i] * (1.0 - self.alpha[i])
    }

    /// Lane-1 effective flow that does not choose: AV_HO plus misbehaving vehicles.
    fn fixed(&self) -> f64 {
        self.w[3] * self.dv[3] + (0..3).map(|i| self.w[i] * self.dv[i] * self.alpha[i]).sum::<f64>()
    }

    fn flows(&self, f1: [f64; 3]) -> (f64, f64) {
        let mut phi1 = self.fixed();
        let mut phi2 = 0.0;
        for i in 0..3 {
            phi1 += self.w[i] * f1[i];
            phi2 += self.w[i] * (self.honest(i) - f1[i]);
        }
        (phi1, phi2)
    }

    fn accepts(&self, s: &Scenario, f1: [f64; 3], tol: f64) -> bool {
        let (phi1, phi2) = self.flows(f1);
        let d1 = s.delays().lane1(phi1);
        let d2 = s.delays().lane2(phi2);
        (0..3).all(|i| {
            let c1 = d1 + self.tau[i];
            let on1 = f1[i] > 0.0;
            let on2 = self.honest(i) - f1[i] > 0.0;
            (!on1 || c1 - d2 <= tol) && (!on2 || d2 - c1 <= tol)
        })
    }

    fn total_delay(&self, s: &Scenario, f1: [f64; 3]) -> f64 {
        let (phi1, phi2) = self.flows(f1);
        let mut l1 = self.n[3] * self.dv[3];
        let mut l2 = 0.0;
        for i in 0..3 {
            l1 += self.n[i] * (f1[i] + self.dv[i] * self.alpha[i]);
            l2 += self.n[i] * (self.honest(i) - f1[i]);
        }
        l1 * s.delays().lane1(phi1) + l2 * s.delays().lane2(phi2)
    }
}

/// Lattice `0, r, 2r, ...` up to and including `extent`.
fn axis(extent: f64, r: f64) -> Result<Vec<f64>> {
    let extent = extent.max(0.0);
    let steps = (extent / r - 1e-9).ceil().max(0.0);
    let points = steps as usize + 1;
    if points > MAX_AXIS_POINTS {
        return Err(Error::GridTooLarge { points, limit: MAX_AXIS_POINTS });
    }
    let mut v: Vec<f64> = (0..steps as usize).map(|k| k as f64 * r).collect();
    v.push(extent);
    Ok(v)
}

fn to_flow(raw: &Raw, f1: [f64; 3]) -> FlowDistribution {
    let lane1 = PerDecision::new(f1[0], f1[1], f1[2]);
    let lane2 = PerDecision::new(raw.honest(0) - f1[0], raw.honest(1) - f1[1], raw.honest(2) - f1[2]);
    FlowDistribution { lane1, lane2 }
}

/// Whether the lane-1 flows of honest decision vehicles satisfy every
/// per-class no-switch inequality within `tol`.
pub fn accepts(scenario: &Scenario, lane1: &PerDecision<f64>, tol: f64) -> bool {
    Raw::new(scenario).accepts(scenario, [lane1.hv_lo, lane1.hv_ho, lane1.av_lo], tol)
}

/// Every lattice flow that passes the equilibrium inequalities, in
/// lexicographic order of `(HV_LO, HV_HO, AV_LO)` lane-1 flows.
pub fn brute_force_equilibria(scenario: &Scenario, grid: GridSpec) -> Result<Vec<FlowDistribution>> {
    let raw = Raw::new(scenario);
    let r = grid.resolution;
    let axes = [axis(raw.honest(0), r)?, axis(raw.honest(1), r)?, axis(raw.honest(2), r)?];
    let found = axes[0]
        .par_iter()
        .flat_map_iter(|&a| {
            let raw = &raw;
            let axes = &axes;
            axes[1].iter().flat_map(move |&b| {
                axes[2].iter().filter_map(move |&c| {
                    let f1 = [a, b, c];
                    raw.accepts(scenario, f1, grid.tolerance).then(|| to_flow(raw, f1))
                })
            })
        })
        .collect();
    Ok(found)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JExtremes {
    pub j_min: f64,
    pub j_max: f64,
    pub argmin: FlowDistribution,
    pub argmax: FlowDistribution,
}

/// Extremes of total commuter delay over lattice flows whose effective
/// lane-1 load equals `phi_1_star`. The HV_LO and HV_HO flows run over the
/// lattice and the AV_LO flow is whatever closes the load.
pub fn brute_force_j_extremes(scenario: &Scenario, phi_1_star: f64, grid: GridSpec) -> Result<JExtremes> {
    let raw = Raw::new(scenario);
    let r = grid.resolution;
    let budget = phi_1_star - raw.fixed();
    let slack = 1e-9 * budget.abs().max(1.0);
    let reach = |i: usize| raw.honest(i).min(budget.max(0.0) / raw.w[i]);
    let (xs, ys) = (axis(reach(0), r)?, axis(reach(1), r)?);
    let cap = raw.honest(2);

    let mut best: Option<(f64, [f64; 3])> = None;
    let mut worst: Option<(f64, [f64; 3])> = None;
    for &x in &xs {
        for &y in &ys {
            let z = (budget - raw.w[0] * x - raw.w[1] * y) / raw.w[2];
            if z < -slack || z > cap + slack {
                continue;
            }
            let f1 = [x, y, z.clamp(0.0, cap)];
            let j = raw.total_delay(scenario, f1);
            if best.map_or(true, |(b, _)| j < b) {
                best = Some((j, f1));
            }
            if worst.map_or(true, |(w, _)| j > w) {
                worst = Some((j, f1));
            }
        }
    }
    match (best, worst) {
        (Some((j_min, lo)), Some((j_max, hi))) => Ok(JExtremes {
            j_min,
            j_max,
            argmin: to_flow(&raw, lo),
            argmax: to_flow(&raw, hi),
        }),
        _ => Err(Error::NotApplicable(format!("no lattice flow carries lane-1 load {phi_1_star}"))),
    }
}

/// Lattice flow nearest to `flow`, kept within each class's honest demand.
pub fn snap(scenario: &Scenario, flow: &PerDecision<f64>, resolution: f64) -> PerDecision<f64> {
    let raw = Raw::new(scenario);
    PerDecision::from_fn(|p: VehicleClass| {
        let i = p.index();
        ((flow[p] / resolution).round() * resolution).clamp(0.0, raw.honest(i))
    })
}
