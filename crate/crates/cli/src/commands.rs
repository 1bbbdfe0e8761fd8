use std::io::Write;
use std::path::Path;

use anyhow::anyhow;
use lanechoice::equilibrium::uniqueness_thresholds_pinned;
use lanechoice::hetero::differentiate_tolls_with;
use lanechoice::policy::{default_tau_grid, optimize_occupancy_threshold, optimize_uniform_toll};
use lanechoice::resilience::{resilience_report, sweep_misbehavior};
use lanechoice::{
    compare_policies, solve_equilibrium, solve_hetero_equilibrium, solve_phi1_star, verify_equilibrium,
    CarpoolModel, DesignObjective, EquilibriumKind, EquilibriumResult, FlowDistribution, HeteroEquilibrium,
    LanePolicy, PerDecision, Scenario, SweepTable, Toll, VehicleClass,
};
use serde_json::json;

use crate::format::{csv_table, num};
use crate::scenario_file;
use crate::{Cli, CliError, Command, Common, Objective, Policy};

const DEFAULT_VERIFY_TOL: f64 = 1e-8;
const SWEEP_HEADER: [&str; 5] = ["x", "j_best", "j_worst", "phi1", "unique"];
const RESILIENCE_HEADER: [&str; 5] = ["alpha", "d1", "d2", "j", "region"];

pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Solve { scenario, verify } => solve(common, scenario, verify.as_deref()),
        Command::DesignToll { scenario, objective } => design_toll(common, scenario, *objective),
        Command::DesignThreshold { scenario, objective, n_min, n_max } => {
            design_threshold(common, scenario, *objective, *n_min, *n_max)
        }
        Command::ComparePolicy { scenario, policies, tau_max } => compare_policy(common, scenario, policies, *tau_max),
        Command::Differentiate { scenario, tau_star, tau_minus, tau_plus } => {
            differentiate(common, scenario, *tau_star, *tau_minus, *tau_plus)
        }
        Command::Resilience { scenario, class } => resilience(common, scenario, class),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

fn write_stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::Output(format!("stdout: {e}")))
}

fn to_json(value: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Run(e.into()))
}

/// Sends a CSV to `--out` or stdout, then the summary: as JSON when
/// requested, and to stderr when stdout already carries the CSV.
fn emit(common: &Common, csv: Vec<u8>, summary: String, summary_json: serde_json::Value) -> Result<(), CliError> {
    match &common.out {
        Some(path) => {
            write_file(path, &csv)?;
            if common.json {
                write_stdout(to_json(&summary_json)?.as_bytes())
            } else {
                println!("{summary}");
                Ok(())
            }
        }
        None if common.json => write_stdout(to_json(&summary_json)?.as_bytes()),
        None => {
            write_stdout(&csv)?;
            eprintln!("{summary}");
            Ok(())
        }
    }
}

/// `lo, lo + step, ...` up to `hi`; `hi` itself is always included.
fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Input(format!("--grid-step must be positive, got {step}")));
    }
    if !(hi >= lo) {
        return Err(CliError::Input(format!("empty range [{lo}, {hi}]")));
    }
    let cells = (hi - lo) / step;
    if cells > 1e6 {
        return Err(CliError::Input(format!("grid of {cells:.0} cells is too fine")));
    }
    let n = cells.round();
    // integral cell counts are spaced by division so round values land exactly
    let mut g: Vec<f64> = if (cells - n).abs() < 1e-9 {
        (0..=n as usize).map(|k| lo + (hi - lo) * (k as f64 / n.max(1.0))).collect()
    } else {
        (0..=cells.floor() as usize).map(|k| lo + k as f64 * step).collect()
    };
    if *g.last().unwrap() < hi {
        g.push(hi);
    }
    g.dedup();
    Ok(g)
}

fn triple(v: &PerDecision<f64>) -> String {
    format!("({}, {}, {})", num(v.hv_lo), num(v.hv_ho), num(v.av_lo))
}

fn objective(o: Objective) -> DesignObjective {
    match o {
        Objective::Best => DesignObjective::BestCaseJ,
        Objective::Worst => DesignObjective::WorstCaseJ,
    }
}

fn objective_label(o: Objective) -> &'static str {
    match o {
        Objective::Best => "best-case J",
        Objective::Worst => "worst-case J",
    }
}

fn sweep_csv(table: &SweepTable) -> anyhow::Result<Vec<u8>> {
    csv_table(
        &SWEEP_HEADER,
        table.rows.iter().map(|r| {
            vec![num(r.x), num(r.j_best), num(r.j_worst), num(r.phi1), r.unique.to_string()]
        }),
    )
}

fn uniform_report(s: &Scenario, r: &EquilibriumResult) -> String {
    let th = &r.thresholds;
    let total = s.total_effective();
    let d1 = s.delays().lane1(r.phi_1_star);
    let d2 = s.delays().lane2(total - r.phi_1_star);
    let mut uniqueness = format!("unique for tau >= {}", num(th.tau_high));
    if th.tau_low > 0.0 {
        uniqueness += &format!(" or tau <= {}", num(th.tau_low));
    }
    if th.single_class {
        uniqueness = "unique for every toll (at most one class chooses)".into();
    }
    let kind = match r.kind {
        EquilibriumKind::UniqueAllLane2 => "unique, every decision-making vehicle on lane 2",
        EquilibriumKind::UniqueAllLane1 => "unique, every decision-making vehicle on lane 1",
        EquilibriumKind::UniqueSingleClassSplit => "unique, one class uses both lanes",
        EquilibriumKind::Simplex => "not unique, a simplex of equilibria",
    };
    format!(
        "toll: {} (uniform)\n\
         uniqueness: {uniqueness}\n\
         equilibrium: {kind}\n\
         phi_1* = {}, phi_2* = {}\n\
         lane delays: D1 = {}, D2 = {}\n\
         best flow on lane 1 (HV_LO, HV_HO, AV_LO) = {}, J = {}\n\
         worst flow on lane 1 (HV_LO, HV_HO, AV_LO) = {}, J = {}\n",
        num(r.toll),
        num(r.phi_1_star),
        num(total - r.phi_1_star),
        num(d1),
        num(d2),
        triple(&r.best.lane1),
        num(r.j_best),
        triple(&r.worst.lane1),
        num(r.j_worst),
    )
}

fn hetero_report(s: &Scenario, r: &HeteroEquilibrium) -> String {
    let split = r.split_class.map_or("none".to_string(), |c| c.to_string());
    format!(
        "tolls (HV_LO, HV_HO, AV_LO) = {}\n\
         split class: {split}\n\
         equilibrium: {}\n\
         phi_1 = {}, phi_2 = {}\n\
         lane delays: D1 = {}, D2 = {}\n\
         flow on lane 1 (HV_LO, HV_HO, AV_LO) = {}, J = {}\n",
        triple(&s.toll().per_class()),
        if r.is_unique { "unique" } else { "not unique, tied classes loaded by mobility" },
        num(r.phi_1),
        num(r.phi_2),
        num(r.d1),
        num(r.d2),
        triple(&r.flow.lane1),
        num(r.j),
    )
}

fn solve(common: &Common, path: &Path, verify: Option<&Path>) -> Result<(), CliError> {
    let s = scenario_file::load(path)?;
    let (text, json) = match s.toll() {
        Toll::Uniform(_) => {
            let r = solve_equilibrium(&s)?;
            (uniform_report(&s, &r), to_json(&r)?)
        }
        Toll::Differentiated(_) => {
            let r = solve_hetero_equilibrium(&s)?;
            (hetero_report(&s, &r), to_json(&r)?)
        }
    };
    let body = if common.json { json } else { text };
    match &common.out {
        Some(out) => write_file(out, body.as_bytes())?,
        None => write_stdout(body.as_bytes())?,
    }
    if let Some(flow_path) = verify {
        verify_flows(&s, &scenario_file::load_flows(flow_path)?, common.tol.unwrap_or(DEFAULT_VERIFY_TOL))?;
    }
    Ok(())
}

fn verify_flows(s: &Scenario, flows: &[(String, FlowDistribution)], tol: f64) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (name, flow) in flows {
        let check = verify_equilibrium(flow, s, tol);
        if check.is_equilibrium() {
            eprintln!("{name}: equilibrium (tol {})", num(tol));
        } else {
            for v in &check.violations {
                eprintln!("{name}: {} on {:?} would gain {} by switching", v.class, v.lane, num(v.amount));
            }
            failed.push(name.as_str());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(anyhow!("not an equilibrium: {}", failed.join(", "))))
    }
}

fn design_toll(common: &Common, path: &Path, obj: Objective) -> Result<(), CliError> {
    let s = scenario_file::load(path)?;
    let g = default_tau_grid(&s, common.grid_step.unwrap_or(0.01))?;
    let (tau_star, table) = optimize_uniform_toll(&s, objective(obj), &g)?;
    let r = solve_equilibrium(&s.with_toll(Toll::Uniform(tau_star))?)?;
    let j = match obj {
        Objective::Best => r.j_best,
        Objective::Worst => r.j_worst,
    };
    let summary = format!("tau* = {} ({} = {})", num(tau_star), objective_label(obj), num(j));
    let summary_json = json!({ "tau_star": tau_star, "objective": objective_label(obj), "j": j, "rows": table.rows });
    emit(common, sweep_csv(&table)?, summary, summary_json)
}

fn design_threshold(common: &Common, path: &Path, obj: Objective, n_min: f64, n_max: f64) -> Result<(), CliError> {
    let s = scenario_file::load(path)?;
    let d = s.demand().get();
    let carpool = CarpoolModel::reciprocal(d.hv_lo + d.hv_ho, d.av_lo + d.av_ho, n_min, n_max)?;
    let g = grid(n_min, n_max, common.grid_step.unwrap_or(0.05))?;
    let (n_star, table) = optimize_occupancy_threshold(&carpool, &s, objective(obj), &g)?;
    let row = table.rows.iter().find(|r| r.x == n_star).expect("argmin is a grid row");
    let j = match obj {
        Objective::Best => row.j_best,
        Objective::Worst => row.j_worst,
    };
    let summary = format!("n* = {} ({} = {})", num(n_star), objective_label(obj), num(j));
    let summary_json = json!({ "n_star": n_star, "objective": objective_label(obj), "j": j, "rows": table.rows });
    emit(common, sweep_csv(&table)?, summary, summary_json)
}

fn lane_policy(p: Policy) -> LanePolicy {
    match p {
        Policy::Toll => LanePolicy::TollFramework,
        Policy::Hovl => LanePolicy::Hovl,
        Policy::Dla => LanePolicy::Dla,
    }
}

fn compare_policy(common: &Common, path: &Path, policies: &[Policy], tau_max: Option<f64>) -> Result<(), CliError> {
    let dir = common
        .out
        .as_ref()
        .ok_or_else(|| CliError::Input("compare-policy writes one CSV per policy; pass --out <directory>".into()))?;
    let s = scenario_file::load(path)?;
    let step = common.grid_step.unwrap_or(0.05);
    let policies: Vec<LanePolicy> = policies.iter().map(|&p| lane_policy(p)).collect();
    let upper = match tau_max {
        Some(t) => t,
        None => {
            let high = policies
                .iter()
                .map(|p| uniqueness_thresholds_pinned(&s, p.pinned()).tau_high)
                .fold(0.0_f64, f64::max);
            high + (0.25 * high).max(10.0 * step)
        }
    };
    let g = grid(0.0, upper, step)?;
    let tables = compare_policies(&s, &policies, &g)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
    let mut lines = Vec::new();
    let mut summary_json = serde_json::Map::new();
    for (policy, table) in &tables {
        write_file(&dir.join(format!("{}.csv", policy.label())), &sweep_csv(table)?)?;
        let worst = table.rows.iter().min_by(|a, b| a.j_worst.total_cmp(&b.j_worst)).expect("non-empty grid");
        let best = table.rows.iter().min_by(|a, b| a.j_best.total_cmp(&b.j_best)).expect("non-empty grid");
        lines.push(format!(
            "{policy}: min worst-case J = {} at tau = {}; min best-case J = {} at tau = {}",
            num(worst.j_worst),
            num(worst.x),
            num(best.j_best),
            num(best.x)
        ));
        summary_json.insert(policy.label().into(), json!({ "rows": table.rows }));
    }
    if common.json {
        write_stdout(to_json(&summary_json)?.as_bytes())
    } else {
        println!("{}", lines.join("\n"));
        Ok(())
    }
}

fn differentiate(
    common: &Common,
    path: &Path,
    tau_star: Option<f64>,
    tau_minus: Option<f64>,
    tau_plus: Option<f64>,
) -> Result<(), CliError> {
    let s = scenario_file::load(path)?;
    let tau = match tau_star.or_else(|| s.toll().uniform()) {
        Some(t) => t,
        None => return Err(CliError::Input("per-class toll in scenario; pass --tau-star".into())),
    };
    let uniform = s.with_toll(Toll::Uniform(tau))?;
    let phi = solve_phi1_star(&uniform)?;
    let best = solve_equilibrium(&uniform)?.j_best;
    let diff = differentiate_tolls_with(&uniform, tau, phi, tau_minus.unwrap_or(0.5 * tau), tau_plus.unwrap_or(2.0 * tau))?;
    let eq = solve_hetero_equilibrium(&s.with_toll(Toll::Differentiated(diff.tolls))?)?;
    let csv = csv_table(
        &["class", "toll", "lane1", "lane2"],
        VehicleClass::DECISION.iter().map(|&p| {
            vec![p.to_string(), num(diff.tolls[p]), num(eq.flow.lane1[p]), num(eq.flow.lane2[p])]
        }),
    )?;
    let summary = format!(
        "tolls (HV_LO, HV_HO, AV_LO) = {}; split class {}; J = {} (uniform best case {})",
        triple(&diff.tolls),
        diff.split,
        num(eq.j),
        num(best)
    );
    let summary_json = json!({ "differentiation": diff, "equilibrium": eq, "uniform_j_best": best });
    emit(common, csv, summary, summary_json)
}

fn resilience(common: &Common, path: &Path, class: &str) -> Result<(), CliError> {
    let s = scenario_file::load(path)?;
    let class = VehicleClass::parse(class)
        .filter(|c| c.is_decision())
        .ok_or_else(|| CliError::Input(format!("--class must be HV_LO, HV_HO or AV_LO, got {class}")))?;
    let alphas = grid(0.0, 1.0, common.grid_step.unwrap_or(0.01))?;
    let sweep = sweep_misbehavior(&s, class, &alphas)?;
    let csv = csv_table(
        &RESILIENCE_HEADER,
        sweep.rows.iter().map(|r| {
            vec![num(r.alpha), num(r.d1), num(r.d2), num(r.j), r.region.as_str().to_string()]
        }),
    )?;

    let mut alpha = *s.misbehavior();
    alpha[class] = 1.0;
    let (summary, report) = match resilience_report(&s.with_misbehavior(alpha)?) {
        Ok(report) => {
            let interval = |r: &lanechoice::ResilientRegion| match r.alpha_interval(&s, class) {
                Some((lo, hi)) => format!("[{}, {}]", num(lo), num(hi)),
                None => "empty".into(),
            };
            let secondary: Vec<String> = report
                .secondary
                .iter()
                .map(|r| format!("{} via {}", interval(r), r.split_class))
                .collect();
            let summary = format!(
                "split class {}; phi_1* = {}; primary region for {class}: {}; secondary: {}; delay variation: {:?}",
                report.split_class,
                num(report.phi_1_star),
                interval(&report.primary),
                if secondary.is_empty() { "none".into() } else { secondary.join(", ") },
                report.variation,
            );
            (summary, serde_json::to_value(&report).map_err(|e| CliError::Run(e.into()))?)
        }
        Err(e @ (lanechoice::Error::NoSplitClass | lanechoice::Error::NotApplicable(_))) => {
            (format!("no analytic regions ({e}); sweep values are measured only"), serde_json::Value::Null)
        }
        Err(e) => return Err(e.into()),
    };
    emit(common, csv, summary, json!({ "report": report, "sweep": sweep }))
}

#[cfg(test)]
mod tests {
    use super::grid;

    #[test]
    fn grid_hits_round_values() {
        let g = grid(0.0, 1.0, 0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[50], 0.5);
        assert_eq!(g[100], 1.0);
        let g = grid(2.0, 4.0, 0.05).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(*g.last().unwrap(), 4.0);
        let g = grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }
}
