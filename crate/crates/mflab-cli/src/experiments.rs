//! The experiments behind each subcommand.

use mflab_core::concentration::{
    build_phi_from_dynamics, concentration_test, diff_ops, expectation_conditions, f_table, compensator,
    ConcentrationSettings, DEFAULT_TABLE_CAP,
};
use mflab_core::dynamics::{
    product_density, simulate_marginals, solve, step_count, Drive, EvolutionProblem, MasterEquation, MasterPropagator,
    Simulator, CLAMP_TOL, HALVING_TOL,
};
use mflab_core::entropy::{
    chaos_experiment, data_processing_check, gibbs_check, gibbs_optimizer, pinsker_check, ChaosSettings, InitialLaw,
    BoundStatus,
};
use mflab_core::meanfield::{
    epsilon_n, lipschitz_sweep, sweep_intensities, verify_a3, verify_a4, KernelTable, SweepMode,
};
use mflab_core::par::{rng_for, Exec};
use mflab_core::space::{l1_distance, Density};
use mflab_core::Error;
use rand::Rng;
use serde_json::json;

use crate::artifacts::{to_json, Assertion, Outcome, Table};
use crate::config::{Defaults, ExperimentName, InitialKind, Resolved};
use crate::random;
use crate::CliError;

const EXEC: Exec = Exec::Parallel;

/// Runs the experiment named in `r`.
pub fn run_experiment(r: &Resolved) -> Result<Outcome, CliError> {
    let result = match r.experiment {
        ExperimentName::SolveMf => solve_experiment(r, false),
        ExperimentName::SolveAveraged => solve_experiment(r, true),
        ExperimentName::Master => master(r),
        ExperimentName::Simulate => simulate(r),
        ExperimentName::ChaosExperiment => chaos(r),
        ExperimentName::ConcentrationTest => concentration(r),
        ExperimentName::VerifyConditions => verify_conditions(r),
        ExperimentName::InequalitySuite => inequality_suite(r),
    };
    match result {
        Err(CliError::Core(Error::CapExceeded { count, cap })) if uses_master(r.experiment) => {
            Ok(Outcome::skipped_cap(format!("{count} states exceed cap {cap}")))
        }
        other => other,
    }
}

fn uses_master(e: ExperimentName) -> bool {
    matches!(e, ExperimentName::Master | ExperimentName::ChaosExperiment)
}

fn atom_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|x| format!("{prefix}{x}")).collect()
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

fn solve_experiment(r: &Resolved, averaged: bool) -> Result<Outcome, CliError> {
    let kern = r.kernel().clone();
    let n = r.n();
    let drive = if averaged {
        Drive::Averaged { kern: kern.clone(), n, averaging: r.averaging() }
    } else {
        Drive::MeanField(kern.clone())
    };
    let problem = EvolutionProblem::new(r.generator.clone(), drive, r.rho0.clone(), r.t_end(), r.dt());
    let tr = solve(&problem)?;
    let d = r.space.d();
    let mut header = vec!["t".to_string()];
    header.extend(atom_header("rho_", d));
    header.extend(["mass_defect", "min_value", "log_oscillation"].map(String::from));
    let mut table = Table::with_header("trace", header);
    for ((t, w), dg) in tr.times.iter().zip(&tr.densities).zip(&tr.diagnostics) {
        let mut row = vec![*t];
        row.extend(w);
        row.extend([dg.mass_defect, dg.min_value, dg.log_oscillation]);
        table.push(row);
    }
    let max_defect = max_of(tr.diagnostics.iter().map(|g| g.mass_defect));
    let min_value = tr.diagnostics.iter().map(|g| g.min_value).fold(f64::INFINITY, f64::min);
    let halving = tr.halving_defect.unwrap_or(0.0);
    let mut assertions = vec![
        Assertion::new("mass_conserved", max_defect <= 1e-8, format!("max mass defect {max_defect:e}")),
        Assertion::new("nonnegative", min_value >= -CLAMP_TOL, format!("min value {min_value:e}")),
        Assertion::new("step_halving", halving <= HALVING_TOL, format!("defect {halving:e}")),
    ];
    let mut report = json!({
        "experiment": r.experiment.as_str(),
        "t_end": r.t_end(),
        "dt": r.dt(),
        "steps": tr.times.len() - 1,
        "final_density": tr.last(),
        "halving_defect": halving,
        "max_mass_defect": max_defect,
        "min_value": min_value,
        "max_log_oscillation": max_of(tr.diagnostics.iter().map(|g| g.log_oscillation)),
    });
    if averaged {
        report["n"] = json!(n);
        let declared = kern.constants();
        let sups = match (declared.m_lambda, declared.m_lambda_star) {
            (Some(a), Some(b)) => Some((a, b, "declared")),
            _ => KernelTable::build(kern.as_ref(), (n - 1) as u32, r.enum_cap(), EXEC)
                .ok()
                .map(|t| t.intensity_sups())
                .map(|s| (s.m_lambda_hat, s.m_lambda_star_hat, "exhaustive")),
        };
        if let Some((ml, mls, source)) = sups {
            let m = r.generator.m_k() + ml + mls;
            let d0 = tr.diagnostics[0].log_oscillation;
            let worst = max_of(
                tr.times.iter().zip(&tr.diagnostics).map(|(t, g)| g.log_oscillation - (d0 + 2.0 * m * t)),
            );
            assertions.push(Assertion::new(
                "log_oscillation_growth",
                worst <= 1e-6,
                format!("max excess over Δ0 + 2Mt is {worst:e} with M = {m} ({source})"),
            ));
            report["log_oscillation_m"] = json!(m);
        }
    }
    Ok(Outcome::new(report, vec![table], assertions))
}

fn initial_particle_density(r: &Resolved) -> &Density {
    match (r.params().initial.unwrap_or_default(), &r.sigma0) {
        (InitialKind::Product, Some(s)) => s,
        _ => &r.rho0,
    }
}

fn master(r: &Resolved) -> Result<Outcome, CliError> {
    let n = r.n();
    let me = MasterEquation::build(&r.generator, r.kernel().as_ref(), n, r.cap_states(), EXEC)?;
    let w0 = initial_particle_density(r).w().to_vec();
    let f0 = product_density(&vec![w0; n]);
    let steps = step_count(r.t_end(), r.dt());
    let path = if steps == 0 {
        vec![f0]
    } else {
        MasterPropagator::new(&me, r.t_end() / steps as f64, r.dt())?.run(&me, &f0, steps)?
    };
    let d = r.space.d();
    let nu = r.space.nu();
    let mut header = vec!["t".to_string()];
    header.extend(atom_header("p_", d));
    header.extend(["mass_defect", "min_value"].map(String::from));
    let mut table = Table::with_header("marginal", header);
    let h = if steps == 0 { 0.0 } else { r.t_end() / steps as f64 };
    let (mut worst_mass, mut min_value) = (0.0f64, f64::INFINITY);
    for (i, f) in path.iter().enumerate() {
        let m = me.marginal(f, 0);
        let defect = (me.mass(f) - 1.0).abs();
        let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
        worst_mass = worst_mass.max(defect);
        min_value = min_value.min(lo);
        let mut row = vec![i as f64 * h];
        row.extend(m.iter().zip(nu).map(|(a, b)| a * b));
        row.extend([defect, lo]);
        table.push(row);
    }
    let last = path.last().expect("nonempty path");
    let marginals: Vec<Vec<f64>> = (0..n).map(|k| me.marginal(last, k)).collect();
    let spread = marginals.iter().map(|m| l1_distance(m, &marginals[0], nu)).fold(0.0, f64::max);
    let assertions = vec![
        Assertion::new("mass_conserved", worst_mass <= 1e-8, format!("max mass defect {worst_mass:e}")),
        Assertion::new("nonnegative", min_value >= -CLAMP_TOL, format!("min value {min_value:e}")),
        Assertion::new("exchangeable_marginals", spread <= 1e-9, format!("max L1 spread {spread:e}")),
    ];
    let report = json!({
        "experiment": "master",
        "n": n,
        "states": me.dim(),
        "nonzeros": me.generator().nnz(),
        "t_end": r.t_end(),
        "final_marginal_masses": marginals[0].iter().zip(nu).map(|(a, b)| a * b).collect::<Vec<_>>(),
        "max_mass_defect": worst_mass,
        "marginal_spread": spread,
    });
    Ok(Outcome::new(report, vec![table], assertions))
}

fn simulate(r: &Resolved) -> Result<Outcome, CliError> {
    let n = r.n();
    let sim = Simulator::new(&r.generator, r.kernel().clone(), n, EXEC)?;
    let p0 = initial_particle_density(r).masses();
    let est = simulate_marginals(&sim, &p0, r.t_end(), r.replicas(), r.seed(), EXEC)?;
    let d = r.space.d();
    let nu = r.space.nu();
    let mut report = json!({
        "experiment": "simulate",
        "n": n,
        "t_end": r.t_end(),
        "seed": r.seed(),
        "majorant": sim.majorant(),
        "estimate": to_json(&est)?,
    });
    let mut assertions = Vec::new();
    let mut header = vec!["atom".to_string(), "mean".into(), "std_error".into()];
    header.extend((0..n).map(|k| format!("site_{k}")));
    let exact = match MasterEquation::build(&r.generator, r.kernel().as_ref(), n, r.cap_states(), EXEC) {
        Ok(me) => {
            let w0 = initial_particle_density(r).w().to_vec();
            let f = mflab_core::dynamics::solve_master(&me, &product_density(&vec![w0; n]), r.t_end(), r.dt())?;
            let m = me.marginal(&f, 0);
            Some(m.iter().zip(nu).map(|(a, b)| a * b).collect::<Vec<f64>>())
        }
        Err(Error::CapExceeded { count, cap }) => {
            report["master_comparison"] = json!(format!("skipped: cap ({count} states exceed {cap})"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(ex) = &exact {
        header.push("exact".into());
        let worst = (0..d)
            .map(|x| (est.mean[x] - ex[x]).abs() / est.std_error[x].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let ok = (0..d).all(|x| (est.mean[x] - ex[x]).abs() <= 4.0 * est.std_error[x]);
        assertions.push(Assertion::new("matches_master_equation", ok, format!("max deviation {worst:.2} SE")));
        report["exact_marginal"] = json!(ex);
    }
    let mut table = Table::with_header("marginals", header);
    for x in 0..d {
        let mut row = vec![x as f64, est.mean[x], est.std_error[x]];
        row.extend((0..n).map(|k| est.per_site[k][x]));
        if let Some(ex) = &exact {
            row.push(ex[x]);
        }
        table.push(row);
    }
    Ok(Outcome::new(report, vec![table], assertions))
}

fn chaos(r: &Resolved) -> Result<Outcome, CliError> {
    let settings = ChaosSettings {
        t_end: r.t_end(),
        dt: r.dt(),
        ct_form: r.ct_form(),
        sweep: SweepMode::Exhaustive { cap: r.enum_cap() },
        state_cap: r.cap_states(),
        averaging: r.averaging(),
        exec: EXEC,
    };
    let init = match r.params().initial.unwrap_or_default() {
        InitialKind::Chaotic => InitialLaw::Chaotic,
        InitialKind::Product => InitialLaw::Product(r.sigma0.as_ref().expect("checked at resolution").w().to_vec()),
    };
    let rep = chaos_experiment(&r.generator, r.kernel(), &r.rho0, &init, &r.n_list(), &settings)?;
    let mut per_n = serde_json::Map::new();
    let mut beta = serde_json::Map::new();
    let mut tables = Vec::new();
    let mut assertions = Vec::new();
    for tr in &rep.traces {
        let ok = tr.status != BoundStatus::Fail;
        per_n.insert(
            tr.n.to_string(),
            json!({
                "sup_W": tr.sup_w,
                "sup_NW": tr.sup_nw,
                "bound_ok": ok,
                "status": to_json(&tr.status)?,
                "marginal_gaps": to_json(&tr.marginal_gaps)?,
            }),
        );
        beta.insert(tr.n.to_string(), to_json(&tr.constants)?);
        // the proof-rate estimate overflows once C_T/b is large; it is then left out of the CSV
        let proof_finite = tr.bound_proof_rate.iter().all(|v| v.is_finite());
        if let Some(serde_json::Value::Object(m)) = per_n.get_mut(&tr.n.to_string()) {
            m.insert("bound_proof_rate_overflow".into(), json!(!proof_finite));
        }
        let worst = max_of(tr.w.iter().zip(&tr.bound).map(|(w, b)| w - b));
        assertions.push(Assertion::new(format!("entropy_bound_n{}", tr.n), ok, format!("max W - bound = {worst:e}")));
        let header: &[&str] = if proof_finite { &["t", "W", "bound", "bound_proof_rate"] } else { &["t", "W", "bound"] };
        let mut t = Table::new(format!("entropy_n{}", tr.n), header);
        for i in 0..tr.times.len() {
            let mut row = vec![tr.times[i], tr.w[i], tr.bound[i]];
            if proof_finite {
                row.push(tr.bound_proof_rate[i]);
            }
            t.push(row);
        }
        tables.push(t);
    }
    assertions.push(Assertion::new("nw_bounded", rep.nw_bounded, "sup N·W_N below log 2·(e^{βT} − 1)/β"));
    let report = json!({
        "experiment": "chaos-experiment",
        "per_n": per_n,
        "beta_constants": beta,
        "nw_non_increasing_beyond_4": rep.nw_non_increasing_beyond_4,
        "nw_bounded": rep.nw_bounded,
    });
    Ok(Outcome::new(report, tables, assertions))
}

fn snapshot(r: &Resolved, n: usize) -> Result<Density, CliError> {
    let s = r.params().snapshot_t.unwrap_or(0.0);
    if s == 0.0 {
        return Ok(r.rho0.clone());
    }
    let drive = Drive::Averaged { kern: r.kernel().clone(), n, averaging: r.averaging() };
    let mut p = EvolutionProblem::new(r.generator.clone(), drive, r.rho0.clone(), s, r.dt());
    p.certify = false;
    let tr = solve(&p)?;
    let w = tr.last().to_vec();
    let mass: f64 = w.iter().zip(r.space.nu()).map(|(a, b)| a * b).sum();
    Ok(Density::probability(&r.space, w.iter().map(|v| v / mass).collect())?)
}

fn concentration(r: &Resolved) -> Result<Outcome, CliError> {
    let mut reports = Vec::new();
    let mut assertions = Vec::new();
    let mut table = Table::new(
        "concentration",
        &["n", "c", "moment_estimate", "std_error", "median_of_means", "f_mean", "f_std_error"],
    );
    for n in r.n_list() {
        let rhobar = snapshot(r, n)?;
        let phi = build_phi_from_dynamics(r.kernel().as_ref(), &rhobar, n, r.enum_cap(), EXEC)?;
        let settings = ConcentrationSettings {
            samples: r.samples(),
            seed: r.seed(),
            c_override: r.params().concentration_c,
            exact_cap: r.enum_cap(),
            compensator: mflab_core::meanfield::Averaging {
                cap: r.enum_cap(),
                mc_samples: Some(r.samples()),
                seed: r.seed(),
            },
            sweep: SweepMode::Exhaustive { cap: r.enum_cap() },
        };
        let rep = concentration_test(&phi, &rhobar, &settings, EXEC)?;
        let mut entry = to_json(&rep)?;
        entry["rhobar"] = json!(rhobar.w());
        assertions.push(Assertion::new(
            format!("moment_n{n}"),
            rep.pass,
            format!("estimate {:.6} ± {:.2e}, exact {:?}", rep.moment_estimate, rep.std_error, rep.exact),
        ));
        let d = r.space.d();
        let small = (d as f64).powi(n as i32) <= DEFAULT_TABLE_CAP as f64;
        if small && rep.c > 0.0 {
            let comp = compensator(&phi, &rhobar, settings.compensator, EXEC)?;
            if comp.exact {
                let t = f_table(&phi, &comp, DEFAULT_TABLE_CAP)?;
                let e = expectation_conditions(&t, &rhobar)?;
                let ops = diff_ops(&t, &rhobar, EXEC)?;
                let b1 = 3.0 / 2f64.sqrt() * rep.conditions.c_hat;
                let b2 = 2.5 * 1.5f64.sqrt() * rep.conditions.c_hat;
                let tol = 1e-10 * (1.0 + rep.c * n as f64);
                assertions.push(Assertion::new(
                    format!("centered_n{n}"),
                    e.mean.abs() <= tol && e.max_conditional <= tol,
                    format!("E[F] = {:e}, max |E_-k[F]| = {:e}", e.mean, e.max_conditional),
                ));
                if n >= 3 {
                    assertions.push(Assertion::new(
                        format!("difference_bounds_n{n}"),
                        ops.d1_max <= b1 + 1e-12 && ops.hess_hs_max <= b2 + 1e-12,
                        format!("B1 {} ≤ {b1}, HS {} ≤ {b2}", ops.d1_max, ops.hess_hs_max),
                    ));
                }
                entry["expectations"] = to_json(&e)?;
                entry["diff_ops"] = to_json(&ops)?;
            }
        }
        table.push(vec![
            n as f64,
            rep.c,
            rep.moment_estimate,
            rep.std_error,
            rep.median_of_means,
            rep.f_mean,
            rep.f_std_error,
        ]);
        reports.push(entry);
    }
    let report = json!({ "experiment": "concentration-test", "reports": reports });
    Ok(Outcome::new(report, vec![table], assertions))
}

fn verify_conditions(r: &Resolved) -> Result<Outcome, CliError> {
    let kern = r.kernel();
    let seed = r.seed();
    let eps_samples = r.params().eps_samples.unwrap_or(Defaults::EPS_SAMPLES);
    let declared = kern.constants();
    let lipschitz = lipschitz_sweep(kern.as_ref(), 1000, seed)?;
    let mut assertions = Vec::new();
    let mut entries = Vec::new();
    let mut table = Table::new(
        "conditions",
        &["n", "theta_first", "theta_second", "m_lambda_hat", "m_lambda_star_hat", "epsilon", "epsilon_se"],
    );
    let sweep = |n: usize, f: &dyn Fn(SweepMode) -> mflab_core::Result<mflab_core::meanfield::BoundedDifference>| {
        match f(SweepMode::Exhaustive { cap: r.enum_cap() }) {
            Err(Error::CapExceeded { .. }) => f(SweepMode::Sampled { samples: eps_samples, seed: seed ^ n as u64 }),
            other => other,
        }
    };
    for n in r.n_list() {
        let a3 = sweep(n, &|m| verify_a3(kern.as_ref(), n, m, EXEC))?;
        let a4 = if n >= 3 { Some(sweep(n, &|m| verify_a4(kern.as_ref(), n, m, EXEC))?) } else { None };
        let sups = match KernelTable::build(kern.as_ref(), (n - 1) as u32, r.enum_cap(), EXEC) {
            Ok(t) => t.intensity_sups(),
            Err(Error::CapExceeded { .. }) => sweep_intensities(kern.as_ref(), eps_samples, seed)?,
            Err(e) => return Err(e.into()),
        };
        let eps = epsilon_n(kern.as_ref(), &r.rho0.masses(), n, eps_samples, seed, EXEC)?;
        assertions.push(Assertion::new(
            format!("first_order_n{n}"),
            a3.within_declared,
            format!("theta {} declared {:?}", a3.theta_hat, a3.declared),
        ));
        if let Some(a4) = &a4 {
            assertions.push(Assertion::new(
                format!("second_order_n{n}"),
                a4.within_declared,
                format!("theta {} declared {:?}", a4.theta_hat, a4.declared),
            ));
        }
        for (name, hat, dec) in [
            ("m_lambda", sups.m_lambda_hat, declared.m_lambda),
            ("m_lambda_star", sups.m_lambda_star_hat, declared.m_lambda_star),
        ] {
            if let Some(dv) = dec {
                assertions.push(Assertion::new(
                    format!("{name}_n{n}"),
                    hat <= dv * (1.0 + 1e-9) + 1e-12,
                    format!("sweep {hat} declared {dv}"),
                ));
            }
        }
        table.push(vec![
            n as f64,
            a3.theta_hat,
            a4.as_ref().map_or(0.0, |a| a.theta_hat),
            sups.m_lambda_hat,
            sups.m_lambda_star_hat,
            eps.estimate,
            eps.std_error,
        ]);
        let mut entry = json!({
            "n": n,
            "first_order": to_json(&a3)?,
            "intensities": to_json(&sups)?,
            "epsilon": to_json(&eps)?,
        });
        if let Some(a4) = &a4 {
            entry["second_order"] = to_json(a4)?;
        }
        entries.push(entry);
    }
    if let Some(l) = declared.lipschitz_l1 {
        assertions.push(Assertion::new("lipschitz", lipschitz <= l * (1.0 + 1e-9) + 1e-12, format!("sweep {lipschitz} declared {l}")));
    }
    let report = json!({
        "experiment": "verify-conditions",
        "lipschitz_sweep": lipschitz,
        "declared": to_json(&declared)?,
        "per_n": entries,
    });
    Ok(Outcome::new(report, vec![table], assertions))
}

/// Counts of violations of the four classical inequalities over random instances.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct InequalityCounts {
    pub instances: usize,
    pub pinsker: usize,
    pub gibbs: usize,
    pub gibbs_witness: usize,
    pub data_processing: usize,
    pub jensen: usize,
    /// Largest |lhs − rhs| at the Gibbs optimizer, relative to 1 + |lhs|.
    pub gibbs_witness_gap: f64,
}

/// Random Pinsker, Gibbs, data-processing and Jensen instances on a fixed ν.
pub fn inequality_counts(nu: &[f64], instances: usize, etas: &[f64], seed: u64) -> Result<InequalityCounts, CliError> {
    let mut c = InequalityCounts { instances, ..Default::default() };
    for i in 0..instances {
        let mut rng = rng_for(seed, i as u64);
        let rho = if rng.gen_bool(0.3) { random::sparse_density(&mut rng, nu) } else { random::density(&mut rng, nu) };
        let sigma = random::density(&mut rng, nu);
        if !pinsker_check(&rho, &sigma, nu).holds {
            c.pinsker += 1;
        }
        let phi = random::vector(&mut rng, nu.len(), -3.0, 3.0);
        let eta = etas[i % etas.len()];
        if !gibbs_check(&phi, &rho, &sigma, nu, eta)?.holds {
            c.gibbs += 1;
        }
        let opt = gibbs_optimizer(&phi, &sigma, nu, eta);
        let w = gibbs_check(&phi, &opt, &sigma, nu, eta)?;
        let gap = (w.lhs - w.rhs).abs() / (1.0 + w.lhs.abs());
        c.gibbs_witness_gap = c.gibbs_witness_gap.max(gap);
        if gap > 1e-9 {
            c.gibbs_witness += 1;
        }
        let t = random::markov_operator(&mut rng, nu);
        let dp = data_processing_check(&t, &rho, &sigma, nu)?;
        if dp.after > dp.before + 1e-12 * (1.0 + dp.before) {
            c.data_processing += 1;
        }
        if dp.jensen_defect > 1e-12 {
            c.jensen += 1;
        }
    }
    Ok(c)
}

impl InequalityCounts {
    pub fn violations(&self) -> usize {
        self.pinsker + self.gibbs + self.gibbs_witness + self.data_processing + self.jensen
    }
}

fn inequality_suite(r: &Resolved) -> Result<Outcome, CliError> {
    let instances = r.params().instances.unwrap_or(Defaults::INSTANCES);
    let etas = r.params().eta.clone().unwrap_or_else(|| Defaults::ETA.to_vec());
    if etas.is_empty() || etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(CliError::Schema { path: "params.eta".into(), message: "needs positive values".into() });
    }
    let c = inequality_counts(r.space.nu(), instances, &etas, r.seed())?;
    let assertions = vec![
        Assertion::new("pinsker", c.pinsker == 0, format!("{} violations", c.pinsker)),
        Assertion::new("gibbs", c.gibbs == 0, format!("{} violations", c.gibbs)),
        Assertion::new("gibbs_witness", c.gibbs_witness == 0, format!("max relative gap {:e}", c.gibbs_witness_gap)),
        Assertion::new("data_processing", c.data_processing == 0, format!("{} violations", c.data_processing)),
        Assertion::new("jensen", c.jensen == 0, format!("{} violations", c.jensen)),
    ];
    let report = json!({ "experiment": "inequality-suite", "seed": r.seed(), "counts": to_json(&c)? });
    Ok(Outcome::new(report, Vec::new(), assertions))
}
