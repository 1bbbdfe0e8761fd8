//! Lane-choice equilibria under a uniform toll.
//!
//! The equilibrium is either a corner (every decision-making vehicle on one
//! lane) or sits at the unique effective lane-1 flow `phi_1_star` where the
//! tolled lane-1 cost equals the lane-2 cost. In the latter case every split
//! of the lane-1 effective budget among the decision classes is an
//! equilibrium; these form a simplex whose extreme total-delay points are
//! found by filling the budget in mobility order.
//!
//! Lane policies that force a class onto lane 1 (`pinned`) move its demand
//! into the fixed lane-1 load and remove it from the decision set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    effective_flows, lane_costs, total_commuter_delay, FlowDistribution, Lane, PerDecision, Scenario, VehicleClass,
};
use crate::roots::bisect_increasing;

pub const DEFAULT_VERIFY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    UniqueAllLane2,
    UniqueAllLane1,
    UniqueSingleClassSplit,
    Simplex,
}

impl EquilibriumKind {
    pub fn is_unique(self) -> bool {
        self != EquilibriumKind::Simplex
    }
}

/// Toll levels at and beyond which the equilibrium is a corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UniquenessThresholds {
    /// At or above this toll every decision-making vehicle uses lane 2.
    pub tau_high: f64,
    /// At or below this toll every decision-making vehicle uses lane 1.
    pub tau_low: f64,
    /// At most one decision class has positive demand, so every toll gives
    /// a unique equilibrium.
    pub single_class: bool,
}

impl UniquenessThresholds {
    pub fn is_unique(&self, tau: f64) -> bool {
        self.single_class || tau >= self.tau_high || tau <= self.tau_low
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumResult {
    pub kind: EquilibriumKind,
    pub toll: f64,
    pub thresholds: UniquenessThresholds,
    pub phi_1_star: f64,
    /// Effective lane-1 flow available to the decision classes.
    pub simplex_budget: f64,
    pub best: FlowDistribution,
    pub worst: FlowDistribution,
    pub j_best: f64,
    pub j_worst: f64,
    /// Classes forced onto lane 1 by a lane policy.
    pub pinned: Vec<VehicleClass>,
}

impl EquilibriumResult {
    pub fn is_unique(&self) -> bool {
        self.kind.is_unique()
    }
}

/// Split of the effective demand into a fixed lane-1 load and the classes
/// that still choose.
struct Loading<'a> {
    scenario: &'a Scenario,
    pinned: Vec<VehicleClass>,
    free: Vec<VehicleClass>,
    base: f64,
    total: f64,
    honest_eff: PerDecision<f64>,
}

impl<'a> Loading<'a> {
    fn new(scenario: &'a Scenario, pinned: &[VehicleClass]) -> Self {
        let honest_eff = scenario.honest_effective_demand();
        let pinned: Vec<_> = VehicleClass::DECISION.into_iter().filter(|p| pinned.contains(p)).collect();
        let free = VehicleClass::DECISION.into_iter().filter(|p| !pinned.contains(p)).collect();
        let base = scenario.fixed_lane1_load() + pinned.iter().map(|&p| honest_eff[p]).sum::<f64>();
        Loading { scenario, pinned, free, base, total: scenario.total_effective(), honest_eff }
    }

    fn thresholds(&self) -> UniquenessThresholds {
        let d = self.scenario.delays();
        UniquenessThresholds {
            tau_high: d.lane2(self.total - self.base) - d.lane1(self.base),
            tau_low: d.lane2(0.0) - d.lane1(self.total),
            single_class: self.free.iter().filter(|&&p| self.honest_eff[p] > 0.0).count() <= 1,
        }
    }

    fn cost_gap(&self, tau: f64) -> impl Fn(f64) -> f64 + '_ {
        let d = self.scenario.delays();
        let total = self.total;
        move |phi1| d.lane1(phi1) + tau - d.lane2(total - phi1)
    }

    fn interior_root(&self, tau: f64) -> Result<f64> {
        let th = self.thresholds();
        if !(tau > th.tau_low && tau < th.tau_high) {
            return Err(Error::NoInteriorRoot { tau, tau_low: th.tau_low, tau_high: th.tau_high });
        }
        bisect_increasing(self.cost_gap(tau), self.base, self.total)
    }

    /// Lane-1 flows with the pinned classes on lane 1 and `budget` effective
    /// flow handed to the free classes in `order`.
    fn fill(&self, budget: f64, order: &[VehicleClass]) -> FlowDistribution {
        let honest = self.scenario.honest_vehicle_demand();
        let headway = self.scenario.headway();
        let mut lane1 = PerDecision::splat(0.0);
        for &p in &self.pinned {
            lane1[p] = honest[p];
        }
        // the root is only known to a few ulps of the total, so a residue that
        // small is rounding and must not split a class
        let slack = 8.0 * f64::EPSILON * self.total;
        let mut remaining = budget.max(0.0);
        for &p in order {
            if remaining <= slack {
                break;
            }
            let take = remaining.min(self.honest_eff[p]);
            lane1[p] = if take + slack >= self.honest_eff[p] { honest[p] } else { take / headway.weight(p) };
            remaining = (remaining - take).max(0.0);
        }
        FlowDistribution::from_lane1(lane1, &honest)
    }

    fn by_mobility(&self, descending: bool) -> Vec<VehicleClass> {
        let nu = &self.scenario.effective().mobility;
        let mut order = self.free.clone();
        // stable: equal mobility keeps HV_HO ahead of AV_LO
        if descending {
            order.sort_by(|a, b| nu[*b].total_cmp(&nu[*a]));
        } else {
            order.sort_by(|a, b| nu[*a].total_cmp(&nu[*b]));
        }
        order
    }

    fn solve(&self) -> Result<EquilibriumResult> {
        let tau = self.scenario.toll().uniform().ok_or(Error::UniformTollRequired)?;
        let thresholds = self.thresholds();
        let (kind, phi_1_star) = if tau >= thresholds.tau_high {
            (EquilibriumKind::UniqueAllLane2, self.base)
        } else if tau <= thresholds.tau_low {
            (EquilibriumKind::UniqueAllLane1, self.total)
        } else {
            let phi = self.interior_root(tau)?;
            let kind = if thresholds.single_class {
                EquilibriumKind::UniqueSingleClassSplit
            } else {
                EquilibriumKind::Simplex
            };
            (kind, phi)
        };
        let budget = phi_1_star - self.base;
        let best = self.fill(budget, &self.by_mobility(true));
        let worst = self.fill(budget, &self.by_mobility(false));
        let j_best = total_commuter_delay(&best, self.scenario);
        let j_worst = total_commuter_delay(&worst, self.scenario);
        Ok(EquilibriumResult {
            kind,
            toll: tau,
            thresholds,
            phi_1_star,
            simplex_budget: budget,
            best,
            worst,
            j_best,
            j_worst,
            pinned: self.pinned.clone(),
        })
    }
}

pub fn uniqueness_thresholds(scenario: &Scenario) -> UniquenessThresholds {
    Loading::new(scenario, &[]).thresholds()
}

pub fn uniqueness_thresholds_pinned(scenario: &Scenario, pinned: &[VehicleClass]) -> UniquenessThresholds {
    Loading::new(scenario, pinned).thresholds()
}

/// Effective lane-1 flow balancing the two lane costs at the scenario's
/// uniform toll. Fails with [`Error::NoInteriorRoot`] for corner tolls.
pub fn solve_phi1_star(scenario: &Scenario) -> Result<f64> {
    let tau = scenario.toll().uniform().ok_or(Error::UniformTollRequired)?;
    Loading::new(scenario, &[]).interior_root(tau)
}

pub fn solve_equilibrium(scenario: &Scenario) -> Result<EquilibriumResult> {
    Loading::new(scenario, &[]).solve()
}

/// Equilibrium with the `pinned` classes forced onto lane 1 toll-free.
pub fn solve_equilibrium_pinned(scenario: &Scenario, pinned: &[VehicleClass]) -> Result<EquilibriumResult> {
    Loading::new(scenario, pinned).solve()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub class: VehicleClass,
    pub lane: Lane,
    /// Flow on `lane` times the cost excess of `lane` over the other lane.
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EquilibriumCheck {
    pub violations: Vec<Violation>,
}

impl EquilibriumCheck {
    pub fn is_equilibrium(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the per-class equilibrium inequalities at `flow`, using the
/// scenario's (uniform or per-class) tolls and misbehavior proportions.
pub fn verify_equilibrium(flow: &FlowDistribution, scenario: &Scenario, tol: f64) -> EquilibriumCheck {
    verify_equilibrium_for(flow, scenario, &VehicleClass::DECISION, tol)
}

/// Like [`verify_equilibrium`] but only for `classes`; pinned classes do not
/// choose and are skipped by callers.
pub fn verify_equilibrium_for(
    flow: &FlowDistribution,
    scenario: &Scenario,
    classes: &[VehicleClass],
    tol: f64,
) -> EquilibriumCheck {
    let (phi1, phi2) = effective_flows(flow, scenario.effective(), scenario.headway(), scenario.misbehavior());
    let (c1, c2) = lane_costs(phi1, phi2, &scenario.toll().per_class(), scenario.delays());
    let mut violations = Vec::new();
    for &p in classes {
        let on1 = flow.lane1[p] * (c1[p] - c2);
        if on1 > tol {
            violations.push(Violation { class: p, lane: Lane::Lane1, amount: on1 });
        }
        let on2 = flow.lane2[p] * (c2 - c1[p]);
        if on2 > tol {
            violations.push(Violation { class: p, lane: Lane::Lane2, amount: on2 });
        }
    }
    EquilibriumCheck { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scenario;
    use crate::model::Toll;

    fn example1a(tau: f64) -> Scenario {
        scenario([5.0, 4.0, 3.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(tau))
    }

    fn example1b(tau: f64) -> Scenario {
        scenario([5.0, 4.0, 3.0, 4.0], 2.0, 0.4, 10.0, Toll::Uniform(tau))
    }

    fn assert_lane1(f: &FlowDistribution, expected: [f64; 3], tol: f64) {
        let got = [f.lane1.hv_lo, f.lane1.hv_ho, f.lane1.av_lo];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() <= tol, "lane1 {got:?} vs {expected:?}");
        }
    }

    #[test]
    fn thresholds_example_one() {
        let th = uniqueness_thresholds(&example1a(0.5));
        assert!((th.tau_high - 0.7).abs() < 1e-12);
        let th = uniqueness_thresholds(&example1b(0.5));
        assert!((th.tau_high - 0.74).abs() < 1e-12);
    }

    #[test]
    fn single_class_always_unique() {
        let s = scenario([0.0, 0.0, 0.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(0.1));
        let th = uniqueness_thresholds(&s);
        assert!(th.single_class);
        for tau in [0.0, 0.1, 0.5, 2.0] {
            assert!(th.is_unique(tau));
        }
    }

    #[test]
    fn phi1_star_examples() {
        assert!((solve_phi1_star(&example1a(0.5)).unwrap() - 1.5).abs() < 1e-12);
        assert!((solve_phi1_star(&example1b(0.5)).unwrap() - 2.0).abs() < 1e-12);
        let sym = scenario([2.0, 2.0, 2.0, 2.0], 2.0, 0.5, 10.0, Toll::Uniform(0.0));
        let phi = solve_phi1_star(&sym).unwrap();
        assert!((phi - sym.total_effective() / 2.0).abs() < 1e-12);
        assert!(matches!(solve_phi1_star(&example1a(0.8)), Err(Error::NoInteriorRoot { .. })));
    }

    #[test]
    fn vertices_example_one() {
        let r = solve_equilibrium(&example1a(0.5)).unwrap();
        assert_eq!(r.kind, EquilibriumKind::Simplex);
        assert_lane1(&r.best, [0.0, 1.0, 0.0], 1e-12);
        assert_lane1(&r.worst, [1.0, 0.0, 0.0], 1e-12);
        assert!((r.j_best - 54.4).abs() < 1e-10);
        assert!((r.j_worst - 55.9).abs() < 1e-10);

        let r = solve_equilibrium(&example1b(0.5)).unwrap();
        assert_lane1(&r.best, [0.0, 0.0, 3.0], 1e-10);
        assert_lane1(&r.worst, [1.2, 0.0, 0.0], 1e-10);
    }

    #[test]
    fn high_toll_corner() {
        let r = solve_equilibrium(&example1a(0.8)).unwrap();
        assert_eq!(r.kind, EquilibriumKind::UniqueAllLane2);
        assert_lane1(&r.best, [0.0, 0.0, 0.0], 0.0);
        assert_eq!(r.phi_1_star, 0.5);
        assert_eq!(r.j_best, r.j_worst);
    }

    #[test]
    fn zero_toll_vertices_tie() {
        let r = solve_equilibrium(&example1a(0.0)).unwrap();
        assert_eq!(r.kind, EquilibriumKind::Simplex);
        assert!((r.j_best - r.j_worst).abs() < 1e-10);
    }

    #[test]
    fn mobility_tie_uses_fixed_order() {
        // n_ho = 2, mu = 0.5: HV_HO and AV_LO both have mobility 2
        let s = scenario([6.0, 2.0, 1.0, 1.0], 2.0, 0.5, 10.0, Toll::Uniform(0.5));
        let r = solve_equilibrium(&s).unwrap();
        assert_eq!(r.best.lane1.hv_lo, 0.0);
        assert!(r.worst.lane1.hv_lo > 0.0);
        // HV_HO is loaded before AV_LO in the best vertex
        assert!(r.best.lane1.hv_ho > 0.0);
        assert!(r.j_best <= r.j_worst);
    }

    #[test]
    fn verifier_cases() {
        let s = example1a(0.5);
        let r = solve_equilibrium(&s).unwrap();
        assert!(verify_equilibrium(&r.best, &s, 1e-8).is_equilibrium());
        assert!(verify_equilibrium(&r.worst, &s, 1e-8).is_equilibrium());

        let all1 = FlowDistribution::from_lane1(PerDecision::new(5.0, 1.0, 3.0), &s.honest_vehicle_demand());
        let check = verify_equilibrium(&all1, &s, 1e-8);
        assert!(!check.is_equilibrium());
        assert!(check.violations.iter().all(|v| v.lane == Lane::Lane1));

        let only = scenario([0.0, 0.0, 0.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(0.5));
        assert!(verify_equilibrium(&FlowDistribution::default(), &only, 1e-8).is_equilibrium());
    }

    #[test]
    fn pinned_class_stays_on_lane1() {
        let s = example1a(0.3);
        let r = solve_equilibrium_pinned(&s, &[VehicleClass::HvHo]).unwrap();
        assert_eq!(r.best.lane1.hv_ho, 1.0);
        assert_eq!(r.worst.lane1.hv_ho, 1.0);
        assert_eq!(r.best.lane2.hv_ho, 0.0);
        let free = [VehicleClass::HvLo, VehicleClass::AvLo];
        assert!(verify_equilibrium_for(&r.best, &s, &free, 1e-8).is_equilibrium());
        assert!(verify_equilibrium_for(&r.worst, &s, &free, 1e-8).is_equilibrium());
    }

    #[test]
    fn differentiated_toll_rejected() {
        let s = example1a(0.5).with_toll(Toll::Differentiated(PerDecision::new(0.3, 0.2, 0.1))).unwrap();
        assert_eq!(solve_equilibrium(&s).unwrap_err(), Error::UniformTollRequired);
    }
}
