use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sqfock::codes::{
    build_code, build_squeezed_cat_code, build_squeezed_fock_code, cat_delta_analytic, cat_delta_numeric, cat_space,
    code_space, solve_alpha_in, Branch, CatParams, CodeFamily, CodePair,
};
use sqfock::fock::{db_to_r, r_to_db, wigner_grid, FockSpace};
use sqfock::kl::{k_er, k_er_normalized, ker_scan, kl_tensor, linspace, ErrorSet, ErrorSetKind, ScanConfig};
use sqfock::optim::{
    grape_optimize, optimize_zl_with, AdamConfig, AnsatzKind, GradientMethod, GrapeConfig, GrapeProblem,
};
use sqfock::recovery::{fidelity_timeseries, qec_code, AncillaSpace, FidelityConvention, QECCycleConfig, Scheme};
use sqfock::validate;

use crate::config::{manifest, resolve, write_manifest};
use crate::output::{num, opt_num, write_csv, write_json};
use crate::UsageError;

fn parse<T>(what: &str, s: &str) -> anyhow::Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| UsageError(format!("--{what}: {e}")).into())
}

/// r from `--r`, else from `--squeezing-db`, else 8 dB.
fn squeezing(r: &mut Option<f64>, db: &mut Option<f64>) -> anyhow::Result<f64> {
    let val = match (*r, *db) {
        (Some(r), _) => r,
        (None, Some(d)) => db_to_r(d),
        (None, None) => db_to_r(8.0),
    };
    if !(val >= 0.0 && val.is_finite()) {
        anyhow::bail!(UsageError(format!("squeezing r = {val} must be finite and ≥ 0")));
    }
    *r = Some(val);
    *db = Some(r_to_db(val));
    Ok(val)
}

/// Manifest next to the first output file, or on stderr when the data
/// went to stdout.
fn finish(command: &str, params: &impl Serialize, outputs: &[PathBuf], extra: serde_json::Value) -> anyhow::Result<()> {
    let m = manifest(command, params, outputs, extra)?;
    if outputs.is_empty() {
        eprintln!("{}", serde_json::to_string(&m)?);
    } else {
        let p = write_manifest(&m, outputs)?;
        eprintln!("wrote {} (manifest {})", outputs[0].display(), p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct KlScanArgs {
    /// Base Fock index; repeat for several.
    #[arg(long = "n")]
    #[serde(default)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Lower end of the grid in dB (used when --r-min is absent).
    #[arg(long)]
    pub db_min: Option<f64>,
    #[arg(long)]
    pub db_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// ours | squeezed-fock | squeezed-cat
    #[arg(long)]
    pub family: Option<String>,
    /// plus | minus (root reported in the k_er column)
    #[arg(long)]
    pub branch: Option<String>,
    /// loss-dephasing | loss | dephasing
    #[arg(long)]
    pub errors: Option<String>,
    #[arg(long)]
    pub cat_beta: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn kl_scan(flags: KlScanArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: KlScanArgs = resolve("kl-scan", &flags, cfg)?;
    if a.n.is_empty() {
        a.n = vec![1];
    }
    let r_min = *a.r_min.get_or_insert(a.db_min.map_or(0.3, db_to_r));
    let r_max = *a.r_max.get_or_insert(a.db_max.map_or(2.2, db_to_r));
    let steps = *a.steps.get_or_insert(20);
    if steps == 0 || !(r_min >= 0.0 && r_max >= r_min) {
        anyhow::bail!(UsageError(format!("need steps ≥ 1 and 0 ≤ r-min ≤ r-max (got {steps}, {r_min}, {r_max})")));
    }
    let family: CodeFamily = parse("family", a.family.get_or_insert("ours".into()))?;
    let branch: Branch = parse("branch", a.branch.get_or_insert("plus".into()))?;
    let errors: ErrorSetKind = parse("errors", a.errors.get_or_insert("loss-dephasing".into()))?;
    let cat_beta = *a.cat_beta.get_or_insert(1.0);
    let scan = ScanConfig {
        ns: a.n.clone(),
        rs: linspace(r_min, r_max, steps),
        family,
        errors,
        branch,
        cat_beta,
    };
    let rows = ker_scan(&scan)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.to_string(),
                r.n.to_string(),
                num(r.r),
                num(r_to_db(r.r)),
                r.branch.map(|b| b.to_string()).unwrap_or_default(),
                r.dim.to_string(),
                num(r.k_er),
                num(r.diag_part),
                num(r.offdiag_part),
                opt_num(r.k_er_other),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let header = [
        "family", "n", "r", "squeezing_db", "branch", "dim", "k_er", "diag_part", "offdiag_part", "k_er_other", "error",
    ];
    write_csv(a.out.as_deref(), &header, &table)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    finish("kl-scan", &a, &a.out.iter().cloned().collect::<Vec<_>>(), json!({ "failed_rows": failed }))?;
    if failed > 0 {
        eprintln!("{failed} of {} scan points failed; see the error column", rows.len());
    }
    Ok(failed == 0)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CodeInfoArgs {
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub branch: Option<String>,
    /// ours | squeezed-fock | squeezed-cat
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub cat_beta: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn kl_summary(pair: &CodePair) -> anyhow::Result<serde_json::Value> {
    let t = kl_tensor(pair, &ErrorSet::new(ErrorSetKind::LossDephasing, pair.dim()))?;
    let raw = k_er(&t);
    Ok(json!({
        "error_set": ["I", "a", "n", "n2"],
        "k_er": raw.k_er,
        "diag_part": raw.diag_part,
        "offdiag_part": raw.offdiag_part,
        "k_er_unit_normalized_errors": k_er_normalized(&t).k_er,
    }))
}

pub fn code_info(flags: CodeInfoArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: CodeInfoArgs = resolve("code-info", &flags, cfg)?;
    let r = squeezing(&mut a.r, &mut a.squeezing_db)?;
    let family: CodeFamily = parse("family", a.family.get_or_insert("ours".into()))?;
    let mut info = json!({ "family": family.to_string(), "r": r, "squeezing_db": r_to_db(r) });
    let pair = match family {
        CodeFamily::SqFockSuperposition => {
            let n = *a.n.get_or_insert(1);
            let branch: Branch = parse("branch", a.branch.get_or_insert("plus".into()))?;
            let space = code_space(n, r);
            let sol = solve_alpha_in(&space, n, r)?;
            info["n"] = json!(n);
            info["branch"] = json!(branch.to_string());
            info["t_plus"] = json!(sol.t(Branch::Plus));
            info["t_minus"] = json!(sol.t(Branch::Minus));
            info["alpha"] = json!(sol.alpha(branch));
            build_code(&space, n, r, branch)?
        }
        CodeFamily::SqueezedFock => {
            let n = *a.n.get_or_insert(1);
            info["n"] = json!(n);
            build_squeezed_fock_code(&code_space(n, r), n, r)?
        }
        CodeFamily::SqueezedCat => {
            let p = CatParams::new(*a.cat_beta.get_or_insert(1.0), r);
            let pair = build_squeezed_cat_code(&cat_space(&p)?, &p)?;
            info["beta"] = json!(p.beta);
            info["deltas_closed_form"] = serde_json::to_value(cat_delta_analytic(&p)?)?;
            info["deltas_direct"] = serde_json::to_value(cat_delta_numeric(&pair))?;
            pair
        }
    };
    let (n0, n1) = pair.mean_photon_numbers();
    info["dim"] = json!(pair.dim());
    info["codeword_overlap"] = json!(pair.overlap);
    info["mean_photon_number"] = json!([n0, n1]);
    info["kl"] = kl_summary(&pair)?;
    write_json(a.out.as_deref(), &info)?;
    finish("code-info", &a, &a.out.iter().cloned().collect::<Vec<_>>(), json!({}))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CatDeltaArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also evaluate the matrix elements on the truncated codewords.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub numeric: Option<bool>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn cat_delta(flags: CatDeltaArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: CatDeltaArgs = resolve("cat-delta", &flags, cfg)?;
    let beta = *a.beta.get_or_insert(1.0);
    let r_min = *a.r_min.get_or_insert(0.0);
    let r_max = *a.r_max.get_or_insert(2.0);
    let steps = *a.steps.get_or_insert(21);
    let numeric = *a.numeric.get_or_insert(false);
    if steps == 0 || !(r_min >= 0.0 && r_max >= r_min) {
        anyhow::bail!(UsageError("need steps ≥ 1 and 0 ≤ r-min ≤ r-max".into()));
    }
    let names = ["a_dag", "a", "a_dag_n", "n_a", "a_dag_n2", "n2_a"];
    let mut header = vec!["beta".to_string(), "r".to_string()];
    header.extend(names.iter().map(|n| format!("delta_{n}")));
    if numeric {
        header.extend(names.iter().map(|n| format!("direct_{n}")));
    }
    let mut rows = Vec::new();
    for r in linspace(r_min, r_max, steps) {
        let p = CatParams::new(beta, r);
        let mut row = vec![num(beta), num(r)];
        row.extend(cat_delta_analytic(&p)?.as_array().map(num));
        if numeric {
            let pair = build_squeezed_cat_code(&cat_space(&p)?, &p)?;
            row.extend(cat_delta_numeric(&pair).as_array().map(num));
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(a.out.as_deref(), &header, &rows)?;
    finish("cat-delta", &a, &a.out.iter().cloned().collect::<Vec<_>>(), json!({}))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct QecSimArgs {
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub branch: Option<String>,
    /// κ/κ_φ
    #[arg(long)]
    pub kappa_ratio: Option<f64>,
    /// Wait time per cycle in units of 1/κ.
    #[arg(long)]
    pub tau_w: Option<f64>,
    #[arg(long)]
    pub cycles: Option<usize>,
    /// auto | parity
    #[arg(long)]
    pub scheme: Option<String>,
    /// six-state | haar
    #[arg(long)]
    pub fidelity: Option<String>,
    /// qutrit | two-qubit
    #[arg(long)]
    pub ancilla: Option<String>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn qec_sim(flags: QecSimArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: QecSimArgs = resolve("qec-sim", &flags, cfg)?;
    let r = squeezing(&mut a.r, &mut a.squeezing_db)?;
    let n = *a.n.get_or_insert(1);
    let branch: Branch = parse("branch", a.branch.get_or_insert("plus".into()))?;
    let mut qc = QECCycleConfig::new(*a.tau_w.get_or_insert(0.01), *a.kappa_ratio.get_or_insert(8.5), *a.cycles.get_or_insert(20))
        .map_err(|e| UsageError(e.to_string()))?;
    qc.scheme = parse::<Scheme>("scheme", a.scheme.get_or_insert("auto".into()))?;
    qc.fidelity_convention = parse::<FidelityConvention>("fidelity", a.fidelity.get_or_insert("six-state".into()))?;
    qc.ancilla = parse::<AncillaSpace>("ancilla", a.ancilla.get_or_insert("qutrit".into()))?;
    let (_, pair) = qec_code(n, r, branch)?;
    let rows = fidelity_timeseries(&qc, &pair)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.cycle.to_string(), num(r.kappa_t), num(r.corrected), num(r.uncorrected), num(r.baseline)])
        .collect();
    write_csv(a.out.as_deref(), &["cycle", "kappa_t", "corrected", "uncorrected", "baseline"], &table)?;
    let below = rows.iter().filter(|r| r.cycle >= 1 && r.corrected <= r.baseline).count();
    if below > 0 {
        eprintln!("corrected fidelity is at or below the Fock-qubit baseline at {below} of {} cycles", qc.cycles);
    }
    finish(
        "qec-sim",
        &a,
        &a.out.iter().cloned().collect::<Vec<_>>(),
        json!({ "dim": pair.dim(), "cycles_below_baseline": below }),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OptimizeZArgs {
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub branch: Option<String>,
    /// non-hermitian5 | hermitian-sym<k>
    #[arg(long)]
    pub ansatz: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub target_loss: Option<f64>,
    /// exact | fd
    #[arg(long)]
    pub gradient: Option<String>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn optimize_z(flags: OptimizeZArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: OptimizeZArgs = resolve("optimize-z", &flags, cfg)?;
    let r = squeezing(&mut a.r, &mut a.squeezing_db)?;
    let n = *a.n.get_or_insert(1);
    let branch: Branch = parse("branch", a.branch.get_or_insert("plus".into()))?;
    let kind: AnsatzKind = parse("ansatz", a.ansatz.get_or_insert("non-hermitian5".into()))?;
    let gradient: GradientMethod = parse("gradient", a.gradient.get_or_insert("exact".into()))?;
    let d = AdamConfig::default();
    let adam = AdamConfig {
        learning_rate: *a.learning_rate.get_or_insert(d.learning_rate),
        max_iters: *a.max_iters.get_or_insert(d.max_iters),
        target_loss: *a.target_loss.get_or_insert(d.target_loss),
        ..d
    };
    adam.validate().map_err(|e| UsageError(e.to_string()))?;
    let seed = *a.seed.get_or_insert(0);
    let (_, pair) = qec_code(n, r, branch)?;
    let res = optimize_zl_with(&pair, kind, adam, seed, gradient)?;
    let space = FockSpace::with_pad(pair.dim(), pair.dim())?;
    let z = sqfock::optim::build_zl(&res.ansatz, &space)?;
    let z00 = pair.zero.dotc(&(&z * &pair.zero));
    let z11 = pair.one.dotc(&(&z * &pair.one));
    let report = json!({
        "ansatz": kind.to_string(),
        "basis": res.ansatz.basis_labels,
        "coefficients": res.ansatz.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        "norm_dim": res.ansatz.norm_dim,
        "normalization": "each monomial divided by its largest singular value on the norm_dim-level space",
        "best_loss": res.best_loss,
        "converged": res.converged,
        "iterations": res.loss_history.len(),
        "seed": seed,
        "gradient": gradient,
        "adam": adam,
        "code": { "n": n, "r": r, "branch": branch.to_string(), "dim": pair.dim() },
        "z_00": [z00.re, z00.im],
        "z_11": [z11.re, z11.im],
        "loss_history": res.loss_history,
    });
    write_json(a.out.as_deref(), &report)?;
    if !res.converged {
        eprintln!("target loss {} not reached; best {:.3e}", adam.target_loss, res.best_loss);
    }
    finish(
        "optimize-z",
        &a,
        &a.out.iter().cloned().collect::<Vec<_>>(),
        json!({ "best_loss": res.best_loss, "converged": res.converged }),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GrapeArgs {
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Oscillator truncation; by default the smallest tail-checked one.
    #[arg(long)]
    pub osc_dim: Option<usize>,
    /// Tail tolerance for the codewords at the reduced truncation.
    #[arg(long)]
    pub tail_tol: Option<f64>,
    #[arg(long)]
    pub min_dim: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Total time in units of 1/χ.
    #[arg(long)]
    pub total_time: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Standard deviation of the initial amplitudes times T.
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clamp on |Ω_q|, |Ω_p| in units of χ.
    #[arg(long)]
    pub amplitude_bound: Option<f64>,
    /// exact | fd
    #[arg(long)]
    pub gradient: Option<String>,
    /// Pulse CSV.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Fidelity-history CSV.
    #[arg(long)]
    pub history_out: Option<PathBuf>,
}

pub fn grape_run(flags: GrapeArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: GrapeArgs = resolve("grape-run", &flags, cfg)?;
    let r = squeezing(&mut a.r, &mut a.squeezing_db)?;
    let tol = *a.tail_tol.get_or_insert(1e-6);
    let pair = match a.osc_dim {
        Some(d) => build_code(&FockSpace::new(d)?.with_tail_tol(tol), 1, r, Branch::Plus)?,
        None => validate::reduced_code(r, tol, *a.min_dim.get_or_insert(40))?,
    };
    a.osc_dim = Some(pair.dim());
    let target = validate::recovery_target(pair.clone())?;
    let mut problem = GrapeProblem::new(pair.dim(), *a.segments.get_or_insert(10), *a.total_time.get_or_insert(1e-4))
        .map_err(|e| UsageError(e.to_string()))?;
    problem.amplitude_bound = a.amplitude_bound;
    let d = GrapeConfig::default();
    let gc = GrapeConfig {
        iters: *a.iters.get_or_insert(d.iters),
        learning_rate: *a.learning_rate.get_or_insert(d.learning_rate),
        init_scale: *a.init_scale.get_or_insert(d.init_scale),
        seed: *a.seed.get_or_insert(d.seed),
        gradient: parse("gradient", a.gradient.get_or_insert("exact".into()))?,
    };
    let res = grape_optimize(&problem, &target, &gc)?;
    let dt = problem.dt();
    let pulses: Vec<Vec<String>> = (0..problem.segments)
        .map(|k| {
            vec![
                k.to_string(),
                num(k as f64 * dt),
                num((k + 1) as f64 * dt),
                num(res.pulses.omega_q[k]),
                num(res.pulses.omega_p[k]),
            ]
        })
        .collect();
    write_csv(a.out.as_deref(), &["segment", "t_start", "t_end", "omega_q", "omega_p"], &pulses)?;
    if let Some(h) = &a.history_out {
        let rows: Vec<Vec<String>> =
            res.fidelity_history.iter().enumerate().map(|(i, f)| vec![i.to_string(), num(*f)]).collect();
        write_csv(Some(h), &["iteration", "fidelity"], &rows)?;
    }
    eprintln!(
        "Φ = {:.6} (start {:.6}, ancilla-conserving bound {:.6}){}",
        res.best_fidelity,
        res.initial_fidelity,
        res.upper_bound,
        if res.stalled { ", stalled" } else { "" }
    );
    let outputs: Vec<PathBuf> = a.out.iter().chain(a.history_out.iter()).cloned().collect();
    finish(
        "grape-run",
        &a,
        &outputs,
        json!({
            "best_fidelity": res.best_fidelity,
            "initial_fidelity": res.initial_fidelity,
            "upper_bound": res.upper_bound,
            "stalled": res.stalled,
            "fidelity_convention": "|Tr(U_target† U(T))| / D over the full qutrit ⊗ oscillator space",
        }),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct WignerArgs {
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub branch: Option<String>,
    /// 0 | 1 | both
    #[arg(long)]
    pub word: Option<String>,
    /// Grid covers [−x-max, x-max]² in both quadratures.
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn wigner(flags: WignerArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: WignerArgs = resolve("wigner", &flags, cfg)?;
    let r = squeezing(&mut a.r, &mut a.squeezing_db)?;
    let n = *a.n.get_or_insert(1);
    let branch: Branch = parse("branch", a.branch.get_or_insert("plus".into()))?;
    let words: Vec<usize> = match a.word.get_or_insert("both".into()).as_str() {
        "0" => vec![0],
        "1" => vec![1],
        "both" => vec![0, 1],
        other => anyhow::bail!(UsageError(format!("--word: expected 0, 1 or both, got '{other}'"))),
    };
    let x_max = *a.x_max.get_or_insert(4.0);
    let points = *a.points.get_or_insert(81);
    if points < 2 || !(x_max > 0.0 && x_max.is_finite()) {
        anyhow::bail!(UsageError("need --points ≥ 2 and --x-max > 0".into()));
    }
    let (_, pair) = qec_code(n, r, branch)?;
    let grid = linspace(-x_max, x_max, points);
    let mut rows = Vec::with_capacity(words.len() * points * points);
    for &u in &words {
        let w = wigner_grid(pair.codeword(u), &grid, &grid)?;
        for (i, x) in grid.iter().enumerate() {
            for (j, p) in grid.iter().enumerate() {
                rows.push(vec![u.to_string(), num(*x), num(*p), num(w[(i, j)])]);
            }
        }
    }
    write_csv(a.out.as_deref(), &["word", "x", "p", "w"], &rows)?;
    finish("wigner", &a, &a.out.iter().cloned().collect::<Vec<_>>(), json!({ "dim": pair.dim() }))?;
    Ok(true)
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ValidateArgs {
    /// Also run the long break-even, Z-synthesis and GRAPE checks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full: Option<bool>,
    /// Write the results as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn validate(flags: ValidateArgs, cfg: Option<&Path>) -> anyhow::Result<bool> {
    let mut a: ValidateArgs = resolve("validate", &flags, cfg)?;
    let full = *a.full.get_or_insert(false);
    let mut checks = Vec::new();
    let mut report = |c: validate::Check| {
        println!("{}", c.line());
        checks.push(c);
    };
    for c in validate::run_validation() {
        report(c);
    }
    if full {
        report(validate::criterion_9());
        report(validate::criterion_10(&validate::ZlCriterion::default()));
        report(validate::criterion_11(&validate::GrapeCriterion::default()));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    if let Some(p) = &a.json {
        write_json(Some(p), &checks)?;
        finish("validate", &a, std::slice::from_ref(p), json!({ "failed": failed }))?;
    }
    Ok(failed == 0)
}
