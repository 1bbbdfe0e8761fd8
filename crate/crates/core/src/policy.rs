//! Design searches over the uniform toll, the high-occupancy threshold and
//! the lane-access policy.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve_equilibrium_pinned, uniqueness_thresholds, EquilibriumResult};
use crate::error::{Error, Result};
use crate::model::{CommuterDemand, OccupancyProfile, PerClass, Scenario, Toll, VehicleClass};
use crate::roots::golden_section_min;

/// Ties in the objective closer than this (relative) go to the smaller design value.
const TIE_RTOL: f64 = 1e-12;
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignObjective {
    BestCaseJ,
    WorstCaseJ,
}

impl DesignObjective {
    fn of_result(self, r: &EquilibriumResult) -> f64 {
        match self {
            DesignObjective::BestCaseJ => r.j_best,
            DesignObjective::WorstCaseJ => r.j_worst,
        }
    }

    fn of_row(self, r: &SweepRow) -> f64 {
        match self {
            DesignObjective::BestCaseJ => r.j_best,
            DesignObjective::WorstCaseJ => r.j_worst,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Design variable: a toll or an occupancy threshold.
    pub x: f64,
    pub j_best: f64,
    pub j_worst: f64,
    pub phi1: f64,
    pub unique: bool,
}

impl SweepRow {
    fn from_result(x: f64, r: &EquilibriumResult) -> Self {
        SweepRow { x, j_best: r.j_best, j_worst: r.j_worst, phi1: r.phi_1_star, unique: r.is_unique() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    fn argmin(&self, objective: DesignObjective) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let v = objective.of_row(row);
            match best {
                Some((_, b)) if v >= b - TIE_RTOL * b.abs().max(1.0) => {}
                _ => best = Some((i, v)),
            }
        }
        best.map(|(i, _)| i)
    }
}

fn sorted_grid(grid: &[f64], field: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(field, "grid values must be finite"));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

fn solve_at_toll(scenario: &Scenario, pinned: &[VehicleClass], tau: f64) -> Result<EquilibriumResult> {
    solve_equilibrium_pinned(&scenario.with_toll(Toll::Uniform(tau))?, pinned)
}

/// Tolls `0, step, 2 step, ...` reaching past the uniqueness threshold by a
/// margin of a quarter of the threshold or ten steps, whichever is larger.
pub fn default_tau_grid(scenario: &Scenario, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("grid_step", "must be positive and finite"));
    }
    let high = uniqueness_thresholds(scenario).tau_high.max(0.0);
    let upper = high + (0.25 * high).max(10.0 * step);
    let n = (upper / step).ceil();
    if n >= MAX_GRID_POINTS as f64 {
        return Err(Error::GridTooLarge { points: n as usize + 1, limit: MAX_GRID_POINTS });
    }
    Ok((0..=n as usize).map(|k| k as f64 * step).collect())
}

/// Best and worst total commuter delay at each toll in `tau_grid`, with the
/// `pinned` classes forced onto lane 1.
pub fn sweep_uniform_toll(scenario: &Scenario, pinned: &[VehicleClass], tau_grid: &[f64]) -> Result<SweepTable> {
    let grid = sorted_grid(tau_grid, "tau_grid")?;
    let rows = grid
        .par_iter()
        .map(|&tau| solve_at_toll(scenario, pinned, tau).map(|r| SweepRow::from_result(tau, &r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// Toll minimising the objective: grid argmin, then a golden-section search
/// over the neighbouring grid cells. The refined toll replaces the grid toll
/// only when it is strictly better.
pub fn optimize_uniform_toll(
    scenario: &Scenario,
    objective: DesignObjective,
    tau_grid: &[f64],
) -> Result<(f64, SweepTable)> {
    let table = sweep_uniform_toll(scenario, &[], tau_grid)?;
    let i = table.argmin(objective).ok_or(Error::EmptyGrid)?;
    let rows = &table.rows;
    let (tau_grid_best, j_grid_best) = (rows[i].x, objective.of_row(&rows[i]));
    if rows.len() < 2 {
        return Ok((tau_grid_best, table));
    }
    let a = rows[i.saturating_sub(1)].x;
    let b = rows[(i + 1).min(rows.len() - 1)].x;
    let f = |tau: f64| {
        solve_at_toll(scenario, &[], tau).map(|r| objective.of_result(&r)).unwrap_or(f64::INFINITY)
    };
    let (tau_ref, j_ref) = golden_section_min(f, a, b, 1e-10 * (b - a).abs().max(1e-300));
    let tau_star = if j_ref < j_grid_best - TIE_RTOL * j_grid_best.abs().max(1.0) {
        tau_ref
    } else {
        tau_grid_best
    };
    Ok((tau_star, table))
}

/// Probability that a commuter carpools when vehicles need `n` occupants to
/// count as high-occupancy.
pub trait CarpoolProbability: fmt::Debug + Send + Sync {
    fn probability(&self, n: f64) -> f64;
}

/// `u(n) = 1 / n`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Reciprocal;

impl CarpoolProbability for Reciprocal {
    fn probability(&self, n: f64) -> f64 {
        1.0 / n
    }
}

#[derive(Clone, Debug)]
pub struct CarpoolModel {
    pub probability: Arc<dyn CarpoolProbability>,
    /// Commuter demand of human drivers before the carpool split.
    pub hv_demand: f64,
    pub av_demand: f64,
    pub n_min: f64,
    pub n_max: f64,
}

impl CarpoolModel {
    pub fn new(
        probability: Arc<dyn CarpoolProbability>,
        hv_demand: f64,
        av_demand: f64,
        n_min: f64,
        n_max: f64,
    ) -> Result<Self> {
        for (field, d) in [("hv_demand", hv_demand), ("av_demand", av_demand)] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(field, "must be finite and non-negative"));
            }
        }
        if hv_demand + av_demand <= 0.0 {
            return Err(Error::invalid("hv_demand", "total demand must be positive"));
        }
        if !(n_min >= 2.0 && n_max >= n_min && n_max.is_finite()) {
            return Err(Error::invalid("n_min", "need 2 <= n_min <= n_max"));
        }
        Ok(CarpoolModel { probability, hv_demand, av_demand, n_min, n_max })
    }

    pub fn reciprocal(hv_demand: f64, av_demand: f64, n_min: f64, n_max: f64) -> Result<Self> {
        Self::new(Arc::new(Reciprocal), hv_demand, av_demand, n_min, n_max)
    }

    /// Commuter demands at threshold `n`.
    pub fn demand(&self, n: f64) -> Result<CommuterDemand> {
        let u = self.probability.probability(n);
        CommuterDemand::new(PerClass::new(
            self.hv_demand * (1.0 - u),
            self.hv_demand * u,
            self.av_demand * (1.0 - u),
            self.av_demand * u,
        ))
    }

    fn check_grid(&self, grid: &[f64]) -> Result<()> {
        let mut prev = f64::INFINITY;
        for &n in grid {
            if n < self.n_min || n > self.n_max {
                return Err(Error::invalid("n_grid", format!("{n} outside [{}, {}]", self.n_min, self.n_max)));
            }
            let u = self.probability.probability(n);
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::InvalidCarpoolModel(format!("u({n}) = {u} is not a probability")));
            }
            if u > prev {
                return Err(Error::InvalidCarpoolModel(format!("u increases at n = {n}")));
            }
            prev = u;
        }
        Ok(())
    }
}

/// Occupancy threshold minimising the objective over `n_grid`, with demands
/// rebuilt from the carpool model at each threshold. Headway, toll and delays
/// come from `template`; the low-occupancy class carries one commuter.
pub fn optimize_occupancy_threshold(
    carpool: &CarpoolModel,
    template: &Scenario,
    objective: DesignObjective,
    n_grid: &[f64],
) -> Result<(f64, SweepTable)> {
    let tau = template.toll().uniform().ok_or(Error::UniformTollRequired)?;
    let grid = sorted_grid(n_grid, "n_grid")?;
    carpool.check_grid(&grid)?;
    let rows = grid
        .par_iter()
        .map(|&n| {
            let s = template.with_demand(carpool.demand(n)?, OccupancyProfile::new(1.0, n)?)?;
            let r = solve_at_toll(&s, &[], tau)?;
            Ok(SweepRow::from_result(n, &r))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = SweepTable { rows };
    let i = table.argmin(objective).ok_or(Error::EmptyGrid)?;
    Ok((table.rows[i].x, table))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LanePolicy {
    /// Every decision class chooses its lane under the toll.
    TollFramework,
    /// High-occupancy human-driven vehicles ride lane 1 toll-free.
    Hovl,
    /// Low-occupancy autonomous vehicles ride lane 1 toll-free.
    Dla,
}

impl LanePolicy {
    pub const ALL: [LanePolicy; 3] = [LanePolicy::TollFramework, LanePolicy::Hovl, LanePolicy::Dla];

    pub fn pinned(self) -> &'static [VehicleClass] {
        match self {
            LanePolicy::TollFramework => &[],
            LanePolicy::Hovl => &[VehicleClass::HvHo],
            LanePolicy::Dla => &[VehicleClass::AvLo],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LanePolicy::TollFramework => "toll",
            LanePolicy::Hovl => "hovl",
            LanePolicy::Dla => "dla",
        }
    }
}

impl fmt::Display for LanePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn compare_policies(
    scenario: &Scenario,
    policies: &[LanePolicy],
    tau_grid: &[f64],
) -> Result<BTreeMap<LanePolicy, SweepTable>> {
    policies
        .iter()
        .map(|&p| sweep_uniform_toll(scenario, p.pinned(), tau_grid).map(|t| (p, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scenario;

    fn example1() -> Scenario {
        scenario([5.0, 4.0, 3.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(0.5))
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    }

    #[test]
    fn worst_case_toll_is_zero() {
        let s = example1();
        let g = default_tau_grid(&s, 0.01).unwrap();
        let (tau, table) = optimize_uniform_toll(&s, DesignObjective::WorstCaseJ, &g).unwrap();
        assert_eq!(tau, 0.0);
        assert_eq!(table.rows.len(), g.len());
    }

    #[test]
    fn best_case_toll_near_quarter() {
        let s = example1();
        let g = default_tau_grid(&s, 0.01).unwrap();
        let (tau, _) = optimize_uniform_toll(&s, DesignObjective::BestCaseJ, &g).unwrap();
        assert!((tau - 0.25).abs() <= 0.05, "tau* = {tau}");
    }

    #[test]
    fn only_free_class_gives_zero_toll() {
        let s = scenario([0.0, 0.0, 0.0, 3.0], 4.0, 0.5, 10.0, Toll::Uniform(0.5));
        let (tau, table) = optimize_uniform_toll(&s, DesignObjective::BestCaseJ, &grid(0.0, 1.0, 0.1)).unwrap();
        assert_eq!(tau, 0.0);
        let j0 = table.rows[0].j_best;
        assert!(table.rows.iter().all(|r| r.j_best == j0 && r.j_worst == j0));
    }

    #[test]
    fn empty_grid() {
        let s = example1();
        assert_eq!(optimize_uniform_toll(&s, DesignObjective::BestCaseJ, &[]).unwrap_err(), Error::EmptyGrid);
    }

    #[test]
    fn sweep_rows_sorted_and_consistent() {
        let s = example1();
        let t = sweep_uniform_toll(&s, &[], &[0.9, 0.1, 0.5, 0.1]).unwrap();
        let xs: Vec<_> = t.rows.iter().map(|r| r.x).collect();
        assert_eq!(xs, vec![0.1, 0.5, 0.9]);
        for r in &t.rows {
            assert!(r.j_best <= r.j_worst);
            if r.unique {
                assert!((r.j_best - r.j_worst).abs() <= 1e-10);
            }
        }
    }

    fn example3() -> (CarpoolModel, Scenario) {
        let carpool = CarpoolModel::reciprocal(9.0, 7.0, 2.0, 4.0).unwrap();
        let template = scenario([4.5, 4.5, 3.5, 3.5], 2.0, 0.5, 10.0, Toll::Uniform(0.5));
        (carpool, template)
    }

    #[test]
    fn example3_worst_case_non_decreasing() {
        let (carpool, template) = example3();
        let (_, table) =
            optimize_occupancy_threshold(&carpool, &template, DesignObjective::WorstCaseJ, &grid(2.0, 4.0, 0.05))
                .unwrap();
        for w in table.rows.windows(2) {
            assert!(w[1].j_worst >= w[0].j_worst - 1e-12, "{w:?}");
        }
        let first = table.rows[0].j_best;
        assert!(table.rows.iter().all(|r| (r.j_best - first).abs() < 0.1 * first));
    }

    #[derive(Debug)]
    struct Never;
    impl CarpoolProbability for Never {
        fn probability(&self, _: f64) -> f64 {
            0.0
        }
    }

    #[derive(Debug)]
    struct Rising;
    impl CarpoolProbability for Rising {
        fn probability(&self, n: f64) -> f64 {
            n / 10.0
        }
    }

    #[test]
    fn no_carpooling_makes_threshold_irrelevant() {
        let (_, template) = example3();
        let carpool = CarpoolModel::new(Arc::new(Never), 9.0, 7.0, 2.0, 4.0).unwrap();
        let (_, table) =
            optimize_occupancy_threshold(&carpool, &template, DesignObjective::WorstCaseJ, &grid(2.0, 4.0, 0.5))
                .unwrap();
        let r0 = table.rows[0];
        assert!(table.rows.iter().all(|r| r.j_best == r0.j_best && r.j_worst == r0.j_worst));
    }

    #[test]
    fn increasing_carpool_probability_rejected() {
        let (_, template) = example3();
        let carpool = CarpoolModel::new(Arc::new(Rising), 9.0, 7.0, 2.0, 4.0).unwrap();
        let err = optimize_occupancy_threshold(&carpool, &template, DesignObjective::BestCaseJ, &[2.0, 3.0])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidCarpoolModel(_)));
    }

    #[test]
    fn hovl_no_worse_than_dla() {
        let s = example1();
        let g = grid(0.0, 1.0, 0.01);
        let map = compare_policies(&s, &LanePolicy::ALL, &g).unwrap();
        let hovl = &map[&LanePolicy::Hovl];
        let dla = &map[&LanePolicy::Dla];
        for (h, d) in hovl.rows.iter().zip(&dla.rows) {
            assert!(h.j_worst <= d.j_worst + 1e-12, "tau {}: {} > {}", h.x, h.j_worst, d.j_worst);
        }
    }

    #[test]
    fn empty_pinned_class_matches_toll_framework() {
        let g = grid(0.0, 1.0, 0.05);
        let s = scenario([5.0, 0.0, 3.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(0.5));
        let map = compare_policies(&s, &[LanePolicy::TollFramework, LanePolicy::Hovl], &g).unwrap();
        assert_eq!(map[&LanePolicy::TollFramework], map[&LanePolicy::Hovl]);

        let s = scenario([5.0, 4.0, 0.0, 4.0], 4.0, 0.5, 10.0, Toll::Uniform(0.5));
        let map = compare_policies(&s, &[LanePolicy::TollFramework, LanePolicy::Dla], &g).unwrap();
        assert_eq!(map[&LanePolicy::TollFramework], map[&LanePolicy::Dla]);
    }
}
