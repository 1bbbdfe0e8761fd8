mod common;

use common::{config, interior_scenario};
use lanechoice::oracle::{accepts, brute_force_j_extremes, snap, GridSpec};
use lanechoice::{solve_equilibrium, Scenario};
use proptest::prelude::*;

/// Largest slope of either lane delay over the feasible range; delays are
/// convex here so the slope peaks at full load.
fn max_delay_slope(s: &Scenario) -> f64 {
    let total = s.total_effective();
    let h = 1e-6 * total.max(1.0);
    let d = s.delays();
    ((d.lane1(total + h) - d.lane1(total)) / h).max((d.lane2(total + h) - d.lane2(total)) / h)
}

proptest! {
    #![proptest_config(config(50, 0x66))]

    #[test]
    fn lattice_extremes_match_vertices(s in interior_scenario()) {
        let eq = solve_equilibrium(&s).unwrap();
        let resolution = eq.simplex_budget.max(1e-6) / 100.0;
        let scan = brute_force_j_extremes(&s, eq.phi_1_star, GridSpec::new(resolution, 0.0).unwrap()).unwrap();
        // one lattice step in each free coordinate moves the implied AV_LO flow by at most 2 / mu steps
        let mu = s.headway().get();
        let tol = 4.0 * resolution * s.occupancy().n_ho() * (1.0 + 1.0 / mu) * eq.toll + 1e-9;
        prop_assert!(scan.j_min - eq.j_best <= tol, "{} vs {} (tol {tol})", scan.j_min, eq.j_best);
        prop_assert!(eq.j_worst - scan.j_max <= tol, "{} vs {} (tol {tol})", scan.j_max, eq.j_worst);
    }

    #[test]
    fn snapped_vertices_pass_oracle(s in interior_scenario(), k in 1u32..4) {
        let eq = solve_equilibrium(&s).unwrap();
        let resolution = 0.05 * k as f64;
        let mu = s.headway().get();
        // snapping shifts each class by half a step, and clamping by at most as much
        let shift = 0.5 * resolution * (2.0 + mu);
        let tol = 2.0 * shift * max_delay_slope(&s) + 1e-9;
        for vertex in [&eq.best, &eq.worst] {
            prop_assert!(accepts(&s, &vertex.lane1, 1e-8));
            let snapped = snap(&s, &vertex.lane1, resolution);
            prop_assert!(accepts(&s, &snapped, tol), "{snapped:?} at tol {tol}");
        }
    }
}
