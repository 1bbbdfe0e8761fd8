//! Equilibria under class-differentiated tolls, with optional misbehaving
//! (non-paying) vehicles, and the two-step differentiation that turns a
//! non-unique uniform-toll equilibrium into a unique best-case one.
//!
//! Honest classes sort themselves by toll: at equilibrium every class charged
//! less than the marginal level rides lane 1, every class charged more rides
//! lane 2, and at most one toll level is split between the lanes.

use serde::Serialize;

use crate::equilibrium::uniqueness_thresholds;
use crate::error::{Error, Result};
use crate::model::{total_commuter_delay, FlowDistribution, PerDecision, Scenario, VehicleClass};
use crate::roots::bisect_increasing;

/// Per-class lane-1 tolls. Entries must be positive; duplicates are allowed.
pub type TollVector = PerDecision<f64>;

/// Relative slack for the boundary comparisons of the differentiation case
/// table, absorbing round-off in a bisected `phi_1_star`.
const CASE_BOUNDARY_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LaneAssignment {
    Lane1,
    Lane2,
    Split,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeteroEquilibrium {
    pub phi_1: f64,
    pub phi_2: f64,
    pub split_class: Option<VehicleClass>,
    pub lane_assignment: PerDecision<LaneAssignment>,
    /// Honest flows; the best-case point when several classes share the split toll.
    pub flow: FlowDistribution,
    pub is_unique: bool,
    pub d1: f64,
    pub d2: f64,
    pub j: f64,
}

fn toll_levels(tolls: &PerDecision<f64>) -> Vec<f64> {
    let mut levels: Vec<f64> = VehicleClass::DECISION.iter().map(|&p| tolls[p]).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Solves the lane-choice equilibrium of the honest vehicles under the
/// scenario's per-class tolls (a uniform toll is treated as equal entries)
/// and misbehavior proportions.
pub fn solve_hetero_equilibrium(scenario: &Scenario) -> Result<HeteroEquilibrium> {
    let tolls = scenario.toll().per_class();
    let honest_eff = scenario.honest_effective_demand();
    let honest = scenario.honest_vehicle_demand();
    let nu = scenario.effective().mobility;
    let headway = scenario.headway();
    let delays = scenario.delays();
    let total = scenario.total_effective();

    let mut lower = scenario.fixed_lane1_load();
    let mut split: Option<(f64, f64)> = None;
    let mut boundary: Option<f64> = None;
    for level in toll_levels(&tolls) {
        let upper = lower
            + VehicleClass::DECISION
                .iter()
                .filter(|&&p| tolls[p] == level)
                .map(|&p| honest_eff[p])
                .sum::<f64>();
        let gap = |phi: f64| delays.lane1(phi) + level - delays.lane2(total - phi);
        if gap(lower) >= 0.0 {
            boundary = Some(level);
            break;
        }
        if gap(upper) > 0.0 {
            let phi = bisect_increasing(gap, lower, upper)?;
            split = Some((level, phi));
            break;
        }
        lower = upper;
    }

    let mut lane1 = PerDecision::splat(0.0);
    let mut assignment = PerDecision::splat(LaneAssignment::Lane2);
    let cutoff = split.map(|(level, _)| level).or(boundary).unwrap_or(f64::INFINITY);
    for p in VehicleClass::DECISION {
        if tolls[p] < cutoff {
            lane1[p] = honest[p];
            assignment[p] = LaneAssignment::Lane1;
        }
    }

    let mut split_class = None;
    let mut is_unique = true;
    let phi_1 = match split {
        None => lower,
        Some((level, phi)) => {
            let mut members: Vec<VehicleClass> =
                VehicleClass::DECISION.into_iter().filter(|&p| tolls[p] == level).collect();
            members.sort_by(|a, b| nu[*b].total_cmp(&nu[*a]));
            is_unique = members.iter().filter(|&&p| honest_eff[p] > 0.0).count() <= 1;
            let mut remaining = phi - lower;
            for &p in &members {
                let take = remaining.min(honest_eff[p]);
                if take >= honest_eff[p] {
                    lane1[p] = honest[p];
                    assignment[p] = LaneAssignment::Lane1;
                } else {
                    lane1[p] = take / headway.weight(p);
                    assignment[p] = if take > 0.0 { LaneAssignment::Split } else { LaneAssignment::Lane2 };
                    if split_class.is_none() && honest_eff[p] > 0.0 {
                        split_class = Some(p);
                        assignment[p] = LaneAssignment::Split;
                    }
                }
                remaining = (remaining - take).max(0.0);
            }
            phi
        }
    };

    let flow = FlowDistribution::from_lane1(lane1, &honest);
    let phi_2 = total - phi_1;
    Ok(HeteroEquilibrium {
        phi_1,
        phi_2,
        split_class,
        lane_assignment: assignment,
        flow,
        is_unique,
        d1: delays.lane1(phi_1),
        d2: delays.lane2(phi_2),
        j: total_commuter_delay(&flow, scenario),
    })
}

/// Which class the differentiated tolls favour and which one is left
/// indifferent at the uniform toll.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Differentiation {
    pub tolls: TollVector,
    /// Class with the larger mobility degree among HV_HO and AV_LO.
    pub prioritized: VehicleClass,
    /// Class charged the uniform toll; it uses both lanes.
    pub split: VehicleClass,
}

/// Differentiated tolls with the default spread `tau_minus = tau_star / 2`
/// and `tau_plus = 2 * tau_star`.
pub fn differentiate_tolls(scenario: &Scenario, tau_star: f64, phi_1_star: f64) -> Result<Differentiation> {
    differentiate_tolls_with(scenario, tau_star, phi_1_star, 0.5 * tau_star, 2.0 * tau_star)
}

/// Picks per-class tolls that make the best-case equilibrium of the uniform
/// toll `tau_star` the unique equilibrium: the class straddling the lanes at
/// that point keeps `tau_star`, classes the best case puts on lane 1 get
/// `tau_minus`, and classes it keeps off lane 1 get `tau_plus`.
pub fn differentiate_tolls_with(
    scenario: &Scenario,
    tau_star: f64,
    phi_1_star: f64,
    tau_minus: f64,
    tau_plus: f64,
) -> Result<Differentiation> {
    if !(tau_star > 0.0) {
        return Err(Error::NotApplicable(format!("uniform toll must be positive, got {tau_star}")));
    }
    if uniqueness_thresholds(scenario).is_unique(tau_star) {
        return Err(Error::NotApplicable(format!(
            "uniform toll {tau_star} already induces a unique equilibrium"
        )));
    }
    if !(tau_minus > 0.0 && tau_minus < tau_star) {
        return Err(Error::invalid("tau_minus", format!("must lie in (0, {tau_star}), got {tau_minus}")));
    }
    if !(tau_plus > tau_star && tau_plus.is_finite()) {
        return Err(Error::invalid("tau_plus", format!("must exceed {tau_star}, got {tau_plus}")));
    }

    let eff = &scenario.effective().effective_demand;
    let nu = &scenario.effective().mobility;
    let le = |x: f64, bound: f64| x <= bound + CASE_BOUNDARY_RTOL * bound.abs().max(1.0);

    let (first, second) = if nu.hv_ho <= nu.av_lo {
        (VehicleClass::AvLo, VehicleClass::HvHo)
    } else {
        (VehicleClass::HvHo, VehicleClass::AvLo)
    };
    let first_cum = eff[first] + eff.av_ho;
    let second_cum = first_cum + eff[second];

    let mut tolls = PerDecision::splat(0.0);
    let split = if le(phi_1_star, first_cum) {
        tolls[VehicleClass::HvLo] = tau_plus;
        tolls[second] = tau_plus;
        tolls[first] = tau_star;
        first
    } else if le(phi_1_star, second_cum) {
        tolls[VehicleClass::HvLo] = tau_plus;
        tolls[first] = tau_minus;
        tolls[second] = tau_star;
        second
    } else {
        tolls[VehicleClass::HvLo] = tau_star;
        tolls[first] = tau_minus;
        tolls[second] = tau_minus;
        VehicleClass::HvLo
    };
    Ok(Differentiation { tolls, prioritized: first, split })
}
