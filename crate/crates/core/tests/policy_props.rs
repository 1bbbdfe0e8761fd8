mod common;

use common::{config, interior_scenario, scenario};
use lanechoice::policy::{default_tau_grid, sweep_uniform_toll};
use lanechoice::{solve_equilibrium_pinned, uniqueness_thresholds, LanePolicy, Toll};
use proptest::prelude::*;

proptest! {
    #![proptest_config(config(200, 0x44))]

    #[test]
    fn unique_rows_have_equal_extremes(s in scenario()) {
        let grid = default_tau_grid(&s, 0.02).unwrap();
        let table = sweep_uniform_toll(&s, &[], &grid).unwrap();
        for row in &table.rows {
            prop_assert!(row.j_best <= row.j_worst + 1e-10);
            if row.unique {
                prop_assert!((row.j_best - row.j_worst).abs() <= 1e-10, "{row:?}");
            }
        }
    }

    #[test]
    fn no_jump_at_uniqueness_threshold(s in interior_scenario()) {
        let step = 0.01;
        let high = uniqueness_thresholds(&s).tau_high;
        let i = (high / step).floor() as i64;
        prop_assume!(i >= 1);
        let grid: Vec<f64> = (i - 1..=i + 2).map(|k| k as f64 * step).collect();
        let rows = sweep_uniform_toll(&s, &[], &grid).unwrap().rows;
        for j in [|r: &lanechoice::SweepRow| r.j_best, |r: &lanechoice::SweepRow| r.j_worst] {
            let left = (j(&rows[1]) - j(&rows[0])).abs() / step;
            let right = (j(&rows[3]) - j(&rows[2])).abs() / step;
            let jump = (j(&rows[2]) - j(&rows[1])).abs();
            prop_assert!(jump <= left.max(right) * step * 10.0 + 1e-9, "jump {jump}, secants {left} {right}");
        }
    }

    #[test]
    fn pinned_class_stays_on_lane1(s in scenario(), tau in 0.0..2.0f64) {
        let s = s.with_toll(Toll::Uniform(tau)).unwrap();
        let honest = s.honest_vehicle_demand();
        for policy in [LanePolicy::Hovl, LanePolicy::Dla] {
            let eq = solve_equilibrium_pinned(&s, policy.pinned()).unwrap();
            for &p in policy.pinned() {
                for flow in [&eq.best, &eq.worst] {
                    prop_assert_eq!(flow.lane1[p], honest[p]);
                    prop_assert_eq!(flow.lane2[p], 0.0);
                }
            }
        }
    }
}
