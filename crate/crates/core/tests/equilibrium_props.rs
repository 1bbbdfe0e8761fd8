mod common;

use common::{config, interior_scenario, scenario};
use lanechoice::model::total_commuter_delay;
use lanechoice::oracle::{brute_force_j_extremes, GridSpec};
use lanechoice::{solve_equilibrium, verify_equilibrium, FlowDistribution, Toll, VehicleClass};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config(200, 0x22))]

    #[test]
    fn interior_root_balances_costs(s in interior_scenario()) {
        let eq = solve_equilibrium(&s).unwrap();
        let d = s.delays();
        let gap = d.lane1(eq.phi_1_star) + eq.toll - d.lane2(s.total_effective() - eq.phi_1_star);
        prop_assert!(gap.abs() <= 1e-8, "gap {gap}");
    }

    #[test]
    fn vertices_are_equilibria(s in interior_scenario()) {
        let eq = solve_equilibrium(&s).unwrap();
        prop_assert!(verify_equilibrium(&eq.best, &s, 1e-8).is_equilibrium());
        prop_assert!(verify_equilibrium(&eq.worst, &s, 1e-8).is_equilibrium());
    }

    #[test]
    fn vertices_bound_every_simplex_point(s in interior_scenario()) {
        let eq = solve_equilibrium(&s).unwrap();
        let resolution = eq.simplex_budget.max(1e-6) / 100.0;
        let grid = GridSpec::new(resolution, 0.0).unwrap();
        let scan = brute_force_j_extremes(&s, eq.phi_1_star, grid).unwrap();
        prop_assert!(eq.j_best <= scan.j_min + 1e-8, "{} > {}", eq.j_best, scan.j_min);
        prop_assert!(scan.j_max <= eq.j_worst + 1e-8, "{} > {}", scan.j_max, eq.j_worst);
    }

    #[test]
    fn exchange_changes_delay_by_mobility_gap(s in interior_scenario()) {
        let eq = solve_equilibrium(&s).unwrap();
        let honest = s.honest_vehicle_demand();
        let lane1 = lanechoice::PerDecision::from_fn(|p| 0.5 * (eq.best.lane1[p] + eq.worst.lane1[p]));
        let mid = FlowDistribution::from_lane1(lane1, &honest);
        let j0 = total_commuter_delay(&mid, &s);
        let d1 = s.delays().lane1(eq.phi_1_star);
        let d2 = s.delays().lane2(s.total_effective() - eq.phi_1_star);
        let nu = &s.effective().mobility;
        let eps = 1e-3;
        for p in VehicleClass::DECISION {
            for q in VehicleClass::DECISION {
                if p == q {
                    continue;
                }
                let (wp, wq) = (s.headway().weight(p), s.headway().weight(q));
                let mut moved = mid.lane1;
                moved[p] -= eps / wp;
                moved[q] += eps / wq;
                if moved[p] < 0.0 || moved[q] > honest[q] {
                    continue;
                }
                let j = total_commuter_delay(&FlowDistribution::from_lane1(moved, &honest), &s);
                let expected = (nu[q] - nu[p]) * eps * (d1 - d2);
                prop_assert!((j - j0 - expected).abs() <= 1e-9, "{p}->{q}: {} vs {expected}", j - j0);
                if nu[q] > nu[p] {
                    prop_assert!(j < j0);
                }
            }
        }
    }

    #[test]
    fn zero_toll_collapses_simplex(s in scenario()) {
        let eq = solve_equilibrium(&s.with_toll(Toll::Uniform(0.0)).unwrap()).unwrap();
        prop_assert!((eq.j_best - eq.j_worst).abs() <= 1e-10);
    }
}
