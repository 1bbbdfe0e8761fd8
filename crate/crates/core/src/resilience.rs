//! How lane delays and total commuter delay respond to misbehaving vehicles
//! that ride lane 1 without paying.
//!
//! When some class `g` straddles both lanes at the misbehavior-free
//! equilibrium, honest `g` vehicles leave lane 1 one-for-one (in effective
//! flow) as misbehaving vehicles join it, so lane delays stay put until the
//! honest `g` share on lane 1 runs out. Each lower-tolled class can play the
//! same role once `g` is exhausted, giving further regions of constant lane
//! delays. Outside these regions nothing analytic is claimed and sweep rows
//! are labelled `uncharacterized`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hetero::solve_hetero_equilibrium;
use crate::model::{PerDecision, Scenario, VehicleClass};
use crate::roots::bisect_increasing;

/// Relative slack when testing region membership.
const MEMBERSHIP_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DelayVariation {
    /// No misbehaving class is charged more than the split class.
    Unchanged,
    /// Every misbehaving higher-tolled class has lower mobility than the split class.
    Increasing,
    /// Every misbehaving higher-tolled class has higher mobility than the split class.
    Decreasing,
    /// Both kinds are present; no sign is claimed.
    Mixed,
}

/// A region of misbehavior proportions over which lane delays do not move.
///
/// With `A = sum over classes not in q_minus of delta[p] * alpha[p]`, the
/// region is `lower + delta[g] * alpha[g] <= A <= upper`; the primary region
/// has no lower side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResilientRegion {
    /// Class whose honest vehicles absorb the misbehaving flow.
    pub split_class: VehicleClass,
    /// Effective lane-1 flow held fixed inside the region.
    pub phi_1: f64,
    pub q_minus: Vec<VehicleClass>,
    pub q_plus: Vec<VehicleClass>,
    pub upper: f64,
    pub lower: Option<f64>,
}

impl ResilientRegion {
    fn new(scenario: &Scenario, split_class: VehicleClass, phi_1: f64, secondary: bool) -> Self {
        let tolls = scenario.toll().per_class();
        let eff = &scenario.effective().effective_demand;
        let tg = tolls[split_class];
        let q_minus: Vec<_> =
            VehicleClass::DECISION.into_iter().filter(|&p| tolls[p] > 0.0 && tolls[p] < tg).collect();
        let q_plus: Vec<_> = VehicleClass::DECISION.into_iter().filter(|&p| tolls[p] > tg).collect();
        let upper = phi_1 - eff.av_ho - q_minus.iter().map(|&q| eff[q]).sum::<f64>();
        let lower = secondary.then(|| upper - eff[split_class]);
        ResilientRegion { split_class, phi_1, q_minus, q_plus, upper, lower }
    }

    /// Effective misbehaving flow of the classes outside `q_minus`.
    pub fn aggregate(&self, scenario: &Scenario, alpha: &PerDecision<f64>) -> f64 {
        let eff = &scenario.effective().effective_demand;
        VehicleClass::DECISION
            .into_iter()
            .filter(|p| !self.q_minus.contains(p))
            .map(|p| eff[p] * alpha[p])
            .sum()
    }

    pub fn contains(&self, scenario: &Scenario, alpha: &PerDecision<f64>) -> bool {
        let eff = &scenario.effective().effective_demand;
        let agg = self.aggregate(scenario, alpha);
        let slack = |b: f64| MEMBERSHIP_RTOL * b.abs().max(1.0);
        if agg > self.upper + slack(self.upper) {
            return false;
        }
        match self.lower {
            None => true,
            Some(l) => {
                let l = l + eff[self.split_class] * alpha[self.split_class];
                agg >= l - slack(l)
            }
        }
    }

    /// Interval of `alpha[class]` inside the region when `class` is the only
    /// misbehaving class, or `None` when no proportion in [0, 1] qualifies.
    pub fn alpha_interval(&self, scenario: &Scenario, class: VehicleClass) -> Option<(f64, f64)> {
        let eff = &scenario.effective().effective_demand;
        // aggregate = a * alpha, lower side = l0 + b * alpha
        let a = if self.q_minus.contains(&class) { 0.0 } else { eff[class] };
        let b = if class == self.split_class { eff[class] } else { 0.0 };
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        // a * alpha <= upper
        if a > 0.0 {
            hi = hi.min(self.upper / a);
        } else if self.upper < 0.0 {
            return None;
        }
        if let Some(l0) = self.lower {
            // (a - b) * alpha >= l0
            let c = a - b;
            if c > 0.0 {
                lo = lo.max(l0 / c);
            } else if c < 0.0 {
                hi = hi.min(l0 / c);
            } else if l0 > 0.0 {
                return None;
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

fn without_misbehavior(scenario: &Scenario) -> Result<Scenario> {
    scenario.with_misbehavior(PerDecision::splat(0.0))
}

/// Region anchored at the class that straddles the lanes when nobody misbehaves.
pub fn primary_resilient_region(scenario: &Scenario) -> Result<ResilientRegion> {
    let clean = without_misbehavior(scenario)?;
    let eq = solve_hetero_equilibrium(&clean)?;
    let g = eq.split_class.ok_or(Error::NoSplitClass)?;
    let tolls = clean.toll().per_class();
    if VehicleClass::DECISION.iter().any(|&p| p != g && tolls[p] == tolls[g]) {
        return Err(Error::NotApplicable(format!("another class shares the split toll of {g}")));
    }
    Ok(ResilientRegion::new(&clean, g, eq.phi_1, false))
}

/// Further regions, one per lower-tolled class of the primary region, in
/// descending toll order.
pub fn secondary_resilient_regions(scenario: &Scenario) -> Result<Vec<ResilientRegion>> {
    let primary = primary_resilient_region(scenario)?;
    let tolls = scenario.toll().per_class();
    let delays = scenario.delays();
    let total = scenario.total_effective();
    let mut anchors = primary.q_minus.clone();
    anchors.sort_by(|a, b| tolls[*b].total_cmp(&tolls[*a]));
    let mut regions = Vec::with_capacity(anchors.len());
    for g in anchors {
        let tau = tolls[g];
        let gap = |phi: f64| delays.lane1(phi) + tau - delays.lane2(total - phi);
        let Ok(phi) = bisect_increasing(gap, 0.0, total) else {
            continue;
        };
        regions.push(ResilientRegion::new(scenario, g, phi, true));
    }
    Ok(regions)
}

/// Sign of the total-delay response inside `region` for the scenario's
/// misbehavior proportions.
pub fn classify_delay_variation(region: &ResilientRegion, scenario: &Scenario) -> DelayVariation {
    let nu = &scenario.effective().mobility;
    let alpha = scenario.misbehavior();
    let ng = nu[region.split_class];
    let (mut below, mut above) = (0, 0);
    for &s in region.q_plus.iter().filter(|&&s| alpha[s] > 0.0) {
        if nu[s] < ng {
            below += 1;
        } else if nu[s] > ng {
            above += 1;
        }
    }
    match (below, above) {
        (0, 0) => DelayVariation::Unchanged,
        (_, 0) => DelayVariation::Increasing,
        (0, _) => DelayVariation::Decreasing,
        _ => DelayVariation::Mixed,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResilienceReport {
    pub split_class: VehicleClass,
    pub q_minus: Vec<VehicleClass>,
    pub q_plus: Vec<VehicleClass>,
    pub misbehaving: Vec<VehicleClass>,
    pub phi_1_star: f64,
    pub primary: ResilientRegion,
    pub secondary: Vec<ResilientRegion>,
    pub variation: DelayVariation,
}

pub fn resilience_report(scenario: &Scenario) -> Result<ResilienceReport> {
    let primary = primary_resilient_region(scenario)?;
    let secondary = secondary_resilient_regions(scenario)?;
    let alpha = scenario.misbehavior();
    Ok(ResilienceReport {
        split_class: primary.split_class,
        q_minus: primary.q_minus.clone(),
        q_plus: primary.q_plus.clone(),
        misbehaving: VehicleClass::DECISION.into_iter().filter(|&p| alpha[p] > 0.0).collect(),
        phi_1_star: primary.phi_1,
        variation: classify_delay_variation(&primary, scenario),
        primary,
        secondary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLabel {
    Primary,
    Secondary,
    Uncharacterized,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Primary => "primary",
            RegionLabel::Secondary => "secondary",
            RegionLabel::Uncharacterized => "uncharacterized",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MisbehaviorRow {
    pub alpha: f64,
    pub d1: f64,
    pub d2: f64,
    pub j: f64,
    pub region: RegionLabel,
}

impl MisbehaviorRow {
    pub fn in_resilient_region(&self) -> bool {
        self.region != RegionLabel::Uncharacterized
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MisbehaviorSweep {
    pub class: VehicleClass,
    pub rows: Vec<MisbehaviorRow>,
}

/// Solves the equilibrium at each misbehaving proportion of `class` (other
/// proportions taken from the scenario) and labels each point with the
/// analytic region it falls in.
pub fn sweep_misbehavior(scenario: &Scenario, class: VehicleClass, alpha_grid: &[f64]) -> Result<MisbehaviorSweep> {
    if !class.is_decision() {
        return Err(Error::invalid("class", "AV_HO vehicles never pay a toll"));
    }
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for w in alpha_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("alpha_grid", "must be strictly increasing"));
        }
    }
    if alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("alpha_grid", "proportions must lie in [0, 1]"));
    }

    let (primary, secondary) = match primary_resilient_region(scenario) {
        Ok(p) => (Some(p), secondary_resilient_regions(scenario)?),
        Err(Error::NoSplitClass | Error::NotApplicable(_)) => (None, Vec::new()),
        Err(e) => return Err(e),
    };

    let rows = alpha_grid
        .par_iter()
        .map(|&a| {
            let mut alpha = *scenario.misbehavior();
            alpha[class] = a;
            let s = scenario.with_misbehavior(alpha)?;
            let eq = solve_hetero_equilibrium(&s)?;
            let region = if primary.as_ref().is_some_and(|r| r.contains(&s, &alpha)) {
                RegionLabel::Primary
            } else if secondary.iter().any(|r| r.contains(&s, &alpha)) {
                RegionLabel::Secondary
            } else {
                RegionLabel::Uncharacterized
            };
            Ok(MisbehaviorRow { alpha: a, d1: eq.d1, d2: eq.d2, j: eq.j, region })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MisbehaviorSweep { class, rows })
}
