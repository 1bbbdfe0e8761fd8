#![allow(dead_code)]

use lanechoice::{
    uniqueness_thresholds, Bpr, CommuterDemand, DelayModel, HeadwayRatio, OccupancyProfile, PerClass,
    PerDecision, Scenario, Toll,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

pub fn config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..Config::default()
    }
}

pub fn bpr() -> impl Strategy<Value = Bpr> {
    (1.0..5.0f64, 0.2..2.0f64, prop_oneof![Just(1.0), Just(2.0), 1.0..4.0f64], 5.0..30.0f64)
        .prop_map(|(t, g, b, m)| Bpr::new(t, g, b, m).unwrap())
}

fn demand_value() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 6 => 0.5..10.0f64]
}

/// Random small scenario with a zero uniform toll.
pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        [demand_value(), demand_value(), demand_value(), demand_value()],
        2.0..5.0f64,
        0.2..0.9f64,
        bpr(),
        bpr(),
    )
        .prop_filter("some demand", |(d, ..)| d.iter().sum::<f64>() > 0.0)
        .prop_map(|(d, n_ho, mu, l1, l2)| {
            Scenario::new(
                CommuterDemand::new(PerClass::new(d[0], d[1], d[2], d[3])).unwrap(),
                OccupancyProfile::new(1.0, n_ho).unwrap(),
                HeadwayRatio::new(mu).unwrap(),
                DelayModel::bpr(l1, l2).unwrap(),
                Toll::Uniform(0.0),
            )
            .unwrap()
        })
}

/// Scenario whose uniform toll leaves a non-degenerate equilibrium simplex.
pub fn interior_scenario() -> impl Strategy<Value = Scenario> {
    (scenario(), 0.05..0.95f64).prop_filter_map("no interior simplex", |(s, u)| {
        let th = uniqueness_thresholds(&s);
        let lo = th.tau_low.max(0.0);
        if th.single_class || th.tau_high <= lo {
            return None;
        }
        let tau = lo + u * (th.tau_high - lo);
        let s = s.with_toll(Toll::Uniform(tau)).unwrap();
        (!uniqueness_thresholds(&s).is_unique(tau)).then_some(s)
    })
}

/// Scenario with three distinct positive per-class tolls scaled to the
/// delay spread, so every class can end up on either lane.
pub fn differentiated_scenario() -> impl Strategy<Value = Scenario> {
    (scenario(), [0.01..1.2f64, 0.01..1.2f64, 0.01..1.2f64]).prop_filter_map("flat spread", |(s, u)| {
        let spread = uniqueness_thresholds(&s).tau_high;
        if spread <= 1e-3 || u[0] == u[1] || u[1] == u[2] || u[0] == u[2] {
            return None;
        }
        let tolls = PerDecision::new(u[0] * spread, u[1] * spread, u[2] * spread);
        Some(s.with_toll(Toll::Differentiated(tolls)).unwrap())
    })
}

pub fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1.0)
}
