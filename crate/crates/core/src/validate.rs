//! Numerical acceptance checks and invariant suites, shared by the
//! `validate` subcommand and the acceptance test target.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::channel::{LossDephasingPropagator, NoiseParams};
use crate::codes::{
    build_code, build_squeezed_cat_code, build_squeezed_fock_code, cat_delta_analytic, cat_delta_numeric, cat_space,
    code_space, logical_x, Branch, CatParams, CodeFamily, CodePair,
};
use crate::error::{Error, Result};
use crate::fock::{overlap_analytic, squeeze_operator_real, squeezed_fock_state, wigner_grid, FockSpace};
use crate::kl::{k_er, k_er_normalized, ker_scan, kl_tensor, linspace, log_slope, offdiag_moment, offdiag_series};
use crate::kl::{ErrorSet, ErrorSetKind, ScanConfig};
use crate::numerics::{eig_hermitian, kron, mat_exp, max_abs, outer, unitarity_defect, CMat, CVec, C64, IM, ONE};
use crate::optim::{
    grape_gradient, grape_gradient_fd, grape_optimize, grape_upper_bound, optimize_zl_until, zl_loss, AdamConfig, AnsatzKind,
    GradientMethod, GrapeConfig, GrapeProblem, PulseGrid, FD_STEP,
};
use crate::recovery::{
    fidelity_timeseries, qec_code, AncillaSpace, Noise, QECCycleConfig, QecSetup, RecoveryUnitaries, Scheme,
};

/// r at 8 dB, rounded as quoted for the workloads.
pub const R_8DB: f64 = 0.921;
pub const KAPPA_RATIO: f64 = 8.5;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub measured: String,
    pub required: String,
    pub seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {:<5} {} | measured: {} | required: {} | {:.1} s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.required,
            self.seconds
        )
    }
}

struct Outcome {
    passed: bool,
    measured: String,
    required: String,
}

fn outcome(passed: bool, measured: String, required: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        measured,
        required: required.into(),
    }
}

/// Runs `f`, turning errors into a failed check. A positive `limit` also
/// fails the check when it takes longer.
fn timed(id: &str, title: &str, limit: Option<f64>, f: impl FnOnce() -> Result<Outcome>) -> Check {
    let t0 = Instant::now();
    let res = f();
    let seconds = t0.elapsed().as_secs_f64();
    let (mut passed, mut measured, mut required) = match res {
        Ok(o) => (o.passed, o.measured, o.required),
        Err(e) => (false, format!("error: {e}"), String::new()),
    };
    if let Some(lim) = limit {
        if !required.is_empty() {
            required.push_str(", ");
        }
        required.push_str(&format!("runtime < {lim} s"));
        if seconds >= lim {
            passed = false;
            measured.push_str(&format!(" (took {seconds:.0} s)"));
        }
    }
    Check {
        id: id.into(),
        title: title.into(),
        passed,
        measured,
        required,
        seconds,
    }
}

fn ker_of(pair: &CodePair) -> Result<(f64, f64)> {
    let t = kl_tensor(pair, &ErrorSet::new(ErrorSetKind::LossDephasing, pair.dim()))?;
    Ok((k_er(&t).k_er, k_er_normalized(&t).k_er))
}

fn cycle_config() -> Result<QECCycleConfig> {
    QECCycleConfig::new(0.01, KAPPA_RATIO, 1)
}

fn joint_ket(anc: AncillaSpace, level: usize, osc: &CVec) -> CVec {
    let a = CMat::from_column_slice(anc.dim(), 1, anc.basis(level).as_slice());
    let o = CMat::from_column_slice(osc.len(), 1, osc.as_slice());
    kron(&a, &o).column(0).into_owned()
}

// ---------------------------------------------------------------------------
// Criteria

pub fn criterion_1() -> Check {
    timed("C1", "overlap formula vs matrix-exponential squeezing", Some(5.0), || {
        let mut worst = 0.0f64;
        for r in [0.25, 0.5, R_8DB, 1.5] {
            let space = FockSpace::sized_for(10, r);
            let s = squeeze_operator_real(&space, r)?;
            for n in 0..=10 {
                for m in 0..=10 {
                    worst = worst.max((s[(n, m)] - overlap_analytic(n, m, r)).abs());
                }
            }
        }
        Ok(outcome(worst <= 1e-8, format!("max |Δ| = {worst:.2e}"), "≤ 1e-8"))
    })
}

pub fn criterion_2() -> Check {
    timed("C2", "K_er at 8 dB, n = 1, both branches", Some(10.0), || {
        let space = code_space(1, R_8DB);
        let mut vals = Vec::new();
        for b in Branch::BOTH {
            let (raw, norm) = ker_of(&build_code(&space, 1, R_8DB, b)?)?;
            vals.push((b, raw, norm));
        }
        let passed = vals.iter().all(|&(_, k, _)| (1e-7..=1e-5).contains(&k));
        let measured = vals
            .iter()
            .map(|(b, k, n)| format!("{b} {k:.3e} (unit-normalized errors {n:.2e})"))
            .collect::<Vec<_>>()
            .join(", ");
        Ok(outcome(passed, measured, "K_er ∈ [1e-7, 1e-5]"))
    })
}

pub fn criterion_3() -> Check {
    timed("C3", "K_er scaling exponents over r ∈ [1.2, 2.2]", Some(60.0), || {
        let rs = linspace(1.2, 2.2, 8);
        let slope_for = |family: CodeFamily, n: usize| -> Result<f64> {
            let rows = ker_scan(&ScanConfig::new(vec![n], rs.clone(), family))?;
            if let Some(e) = rows.iter().find_map(|r| r.error.clone()) {
                return Err(Error::Integrity(format!("scan row failed: {e}")));
            }
            let ks: Vec<f64> = rows.iter().map(|r| r.k_er).collect();
            Ok(log_slope(&rs, &ks))
        };
        let s1 = slope_for(CodeFamily::SqFockSuperposition, 1)?;
        let s2 = slope_for(CodeFamily::SqFockSuperposition, 2)?;
        let sf = slope_for(CodeFamily::SqueezedFock, 1)?;
        let passed = (s1 + 14.0).abs() <= 1.5 && (s2 + 10.0).abs() <= 1.5 && (sf + 6.0).abs() <= 1.0;
        Ok(outcome(
            passed,
            format!("n=1 {s1:.2}, n=2 {s2:.2}, squeezed Fock {sf:.2}"),
            "−14 ± 1.5, −10 ± 1.5, −6 ± 1",
        ))
    })
}

pub fn criterion_4() -> Check {
    timed("C4", "off-diagonal moments vs two-term series at r = 2", Some(10.0), || {
        let r = 2.0;
        let space = code_space(1, r);
        let mut worst = 0.0f64;
        for b in Branch::BOTH {
            let pair = build_code(&space, 1, r, b)?;
            for m in 1..=4 {
                let num = offdiag_moment(&pair, m).re;
                let ser = offdiag_series(m, r, b)?;
                worst = worst.max(((num - ser) / num).abs());
            }
        }
        Ok(outcome(worst <= 0.05, format!("max relative deviation {worst:.3}"), "≤ 0.05"))
    })
}

pub fn criterion_5() -> Check {
    timed("C5", "squeezed-Fock codeword overlap at r = 1", None, || {
        let pair = build_squeezed_fock_code(&code_space(1, 1.0), 1, 1.0)?;
        Ok(outcome(
            (pair.overlap - 0.137).abs() <= 1e-3,
            format!("|⟨1_L|0_L⟩| = {:.5}", pair.overlap),
            "0.137 ± 0.001",
        ))
    })
}

pub fn criterion_6() -> Check {
    timed("C6", "squeezed-cat δ closed forms", None, || {
        let mut worst = 0.0f64;
        for r in [0.5, 1.0, 1.5] {
            let p = CatParams::new(0.9, r);
            let pair = build_squeezed_cat_code(&cat_space(&p)?, &p)?;
            let num = cat_delta_numeric(&pair).as_array();
            let ana = cat_delta_analytic(&p)?.as_array();
            for (x, y) in num.iter().zip(&ana) {
                worst = worst.max((x - y).abs());
            }
        }
        let lim = cat_delta_analytic(&CatParams::new(1.0, 3.0))?;
        let dev = (lim.a_dag - 1.0).abs().max((lim.a - 1.0).abs());
        Ok(outcome(
            worst <= 1e-6 && dev <= 1e-3,
            format!("max |Δ| = {worst:.2e}; |δ − β| at r = 3 is {dev:.2e}"),
            "≤ 1e-6; ≤ 1e-3",
        ))
    })
}

fn routing_error(u: &RecoveryUnitaries, s: &QecSetup) -> f64 {
    let anc = u.ancilla;
    let (g, e, _) = anc.roles();
    let words = [&s.pair.zero, &s.pair.one];
    let mut worst = 0.0f64;
    // Û₃|u_F₃, g⟩ → |u_L, g⟩ and Û₁|u_F₁, g⟩ → |u_L, e⟩ (qutrit roles)
    for (m, idx, flag) in [(&u.u3, 2usize, g), (&u.u1, 0, e)] {
        for (uf, ul) in s.bases.states[idx].iter().zip(words) {
            let out = m * joint_ket(anc, g, uf);
            worst = worst.max((out - joint_ket(anc, flag, ul)).norm());
        }
    }
    worst
}

pub fn criterion_7() -> Check {
    timed("C7", "recovery unitaries at 8 dB", None, || {
        let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
        let mut cfg = cycle_config()?;
        let q = QecSetup::new(pair.clone(), &cfg)?;
        cfg.ancilla = AncillaSpace::TwoQubit;
        let t = QecSetup::new(pair, &cfg)?;
        let unit = q.unitaries.unitarity_residual().max(t.unitaries.unitarity_residual());
        let route = routing_error(&q.unitaries, &q);
        Ok(outcome(
            unit <= 1e-10 && route <= 1e-10,
            format!("unitarity {unit:.2e}, routing {route:.2e}"),
            "both ≤ 1e-10",
        ))
    })
}

pub fn criterion_8() -> Check {
    timed("C8", "one cycle against the designed Kraus channel", None, || {
        let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
        let s = QecSetup::new(pair, &cycle_config()?)?;
        let rec = s.recovery(Scheme::Autonomous)?;
        let p = s.corrected_process(&Noise::Kraus(s.kraus.f_ops.clone()), &rec, 1)?;
        let f = p.normalized_six_state_fidelity();
        let (ker, ker_n) = ker_of(&build_code(&code_space(1, R_8DB), 1, R_8DB, Branch::Plus)?)?;
        Ok(outcome(
            f >= 1.0 - 10.0 * ker,
            format!(
                "trace-normalized six-state fidelity {f:.6} (raw {:.4}); 1 − 10·K_er = {:.4} (with unit-normalized K_er: {:.6})",
                p.six_state_fidelity(),
                1.0 - 10.0 * ker,
                1.0 - 10.0 * ker_n
            ),
            "F ≥ 1 − 10·K_er",
        ))
    })
}

pub fn criterion_9() -> Check {
    timed("C9", "break-even and τ_w scaling at 8 dB", Some(300.0), || {
        let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
        let rows = fidelity_timeseries(&QECCycleConfig::new(0.01, KAPPA_RATIO, 20)?, &pair)?;
        let beaten: Vec<usize> = rows.iter().filter(|r| r.cycle >= 2 && r.corrected <= r.baseline).map(|r| r.cycle).collect();
        let half = fidelity_timeseries(&QECCycleConfig::new(0.005, KAPPA_RATIO, 1)?, &pair)?;
        let corr = (1.0 - rows[1].corrected) / (1.0 - half[1].corrected);
        let unc = (1.0 - rows[1].uncorrected) / (1.0 - half[1].uncorrected);
        let last = rows.last().expect("20 cycles");
        let passed = beaten.is_empty() && (3.0..=5.0).contains(&corr) && (1.7..=2.3).contains(&unc);
        Ok(outcome(
            passed,
            format!(
                "corrected ≤ baseline at {} of 19 cycles (κt = {:.2}: {:.4} vs {:.4}); Richardson corrected {corr:.2}, uncorrected {unc:.2}; dim {}",
                beaten.len(),
                last.kappa_t,
                last.corrected,
                last.baseline,
                pair.dim()
            ),
            "corrected > baseline for cycles 2..20, ratios ∈ [3, 5] and [1.7, 2.3]",
        ))
    })
}

#[derive(Clone, Debug)]
pub struct ZlCriterion {
    pub seeds: Vec<u64>,
    pub adam: AdamConfig,
    pub kinds: Vec<AnsatzKind>,
    pub required_successes: usize,
}

impl Default for ZlCriterion {
    fn default() -> Self {
        ZlCriterion {
            seeds: (0..5).collect(),
            adam: AdamConfig {
                learning_rate: 5e-2,
                ..AdamConfig::default()
            },
            kinds: vec![AnsatzKind::NonHermitian5, AnsatzKind::HermitianSym(6)],
            required_successes: 3,
        }
    }
}

const ZL_LIMIT: f64 = 600.0;

pub fn criterion_10(opts: &ZlCriterion) -> Check {
    timed("C10", "logical-Z synthesis, loss < 1e-4", Some(ZL_LIMIT), || {
        let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
        let t0 = Instant::now();
        let mut parts = Vec::new();
        let mut passed = true;
        for &kind in &opts.kinds {
            let (mut ok, mut ran) = (0, 0);
            let mut best = f64::INFINITY;
            for &seed in &opts.seeds {
                // Stop once the verdict for this ansatz cannot change.
                let left = opts.seeds.len() - ran;
                if ok >= opts.required_successes || ok + left < opts.required_successes {
                    break;
                }
                if t0.elapsed().as_secs_f64() > ZL_LIMIT {
                    break;
                }
                // Past the budget the criterion has failed whatever the loss.
                let deadline = t0 + Duration::from_secs_f64(ZL_LIMIT);
                let res = optimize_zl_until(&pair, kind, opts.adam, seed, GradientMethod::Exact, Some(deadline))?;
                ok += res.converged as usize;
                ran += 1;
                best = best.min(res.best_loss);
            }
            passed &= ok >= opts.required_successes;
            parts.push(format!("{kind}: {ok}/{ran} seeds run, best {best:.3e}"));
        }
        Ok(outcome(
            passed,
            parts.join("; "),
            format!("≥ {} of {} seeds per ansatz", opts.required_successes, opts.seeds.len()),
        ))
    })
}

/// Code at a reduced truncation whose codewords pass the tail check at `tol`.
pub fn reduced_code(r: f64, tol: f64, min_dim: usize) -> Result<CodePair> {
    let sized = FockSpace::sized_for_tol(3, r, tol).dim().max(min_dim);
    let space = FockSpace::new(sized)?.with_tail_tol(tol);
    build_code(&space, 1, r, Branch::Plus)
}

/// Û₃Û₂Û₁ for the qutrit ancilla.
pub fn recovery_target(pair: CodePair) -> Result<CMat> {
    let s = QecSetup::new(pair, &cycle_config()?)?;
    let u = &s.unitaries;
    Ok(&u.u3 * &u.u2 * &u.u1)
}

#[derive(Clone, Debug)]
pub struct GrapeCriterion {
    pub tail_tol: f64,
    pub min_dim: usize,
    pub config: GrapeConfig,
}

impl Default for GrapeCriterion {
    fn default() -> Self {
        GrapeCriterion {
            tail_tol: 1e-6,
            min_dim: 40,
            config: GrapeConfig::default(),
        }
    }
}

/// Largest relative disagreement between the exact and finite-difference
/// gradients on a random qutrit ⊗ 4-level, 3-segment problem.
pub fn grape_gradient_crosscheck(seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let problem = GrapeProblem::new(4, 3, 0.7)?;
    let d = problem.joint_dim();
    let mut g = CMat::zeros(d, d);
    for z in g.iter_mut() {
        *z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let target = mat_exp(&((&g + g.adjoint()) * -IM))?;
    let pulses = PulseGrid::from_params(&(0..6).map(|_| 4.0 * (rng.random::<f64>() - 0.5)).collect::<Vec<_>>());
    let (_, exact) = grape_gradient(&problem, &target, &pulses)?;
    let fd = grape_gradient_fd(&problem, &target, &pulses, FD_STEP)?;
    let scale = exact.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(exact.iter().zip(&fd).map(|(e, f)| (e - f).abs() / scale).fold(0.0, f64::max))
}

pub fn criterion_11(opts: &GrapeCriterion) -> Check {
    timed("C11", "GRAPE to Û₃Û₂Û₁, 10 segments, Tχ = 1e-4", Some(900.0), || {
        let pair = reduced_code(R_8DB, opts.tail_tol, opts.min_dim)?;
        let dim = pair.dim();
        let target = recovery_target(pair)?;
        let problem = GrapeProblem::new(dim, 10, 1e-4)?;
        let res = grape_optimize(&problem, &target, &opts.config)?;
        let grad = grape_gradient_crosscheck(7)?;
        Ok(outcome(
            res.best_fidelity > 0.99 && grad <= 1e-5,
            format!(
                "Φ = {:.5} after {} iterations at dim {dim} (start {:.5}, bound {:.5}); gradient mismatch {grad:.1e}",
                res.best_fidelity,
                res.fidelity_history.len() - 1,
                res.initial_fidelity,
                res.upper_bound
            ),
            "Φ > 0.99, gradient mismatch ≤ 1e-5",
        ))
    })
}

// ---------------------------------------------------------------------------
// Invariant suites

fn inv_numerics() -> Result<Outcome> {
    let n = 12;
    let h = CMat::from_fn(n, n, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0));
    let h = (&h + h.adjoint()) * C64::new(0.25, 0.0);
    let u = mat_exp(&(&h * -IM))?;
    let inv = mat_exp(&(&h * IM))?;
    let e1 = max_abs(&(&u * inv - CMat::identity(n, n)));
    let (vals, vecs) = eig_hermitian(&h)?;
    let rebuilt = &vecs * CMat::from_diagonal(&CVec::from_iterator(n, vals.iter().map(|&v| C64::new(v, 0.0)))) * vecs.adjoint();
    let e2 = max_abs(&(rebuilt - &h));
    let e3 = unitarity_defect(&u);
    let worst = e1.max(e2).max(e3);
    Ok(outcome(worst < 1e-12, format!("{worst:.1e}"), "exp(A)exp(−A) = I, eigen-reconstruction, unitarity < 1e-12"))
}

fn inv_fock() -> Result<Outcome> {
    let space = FockSpace::sized_for(7, 0.5);
    let sp = squeeze_operator_real(&space, 0.5)?;
    let sm = squeeze_operator_real(&space, -0.5)?;
    let inv = ((&sp * &sm).view((0, 0), (10, 10)).into_owned() - crate::numerics::RMat::identity(10, 10)).abs().max();
    let v = squeezed_fock_state(&space, 3, 0.5)?;
    let norm = (v.norm() - 1.0).abs();
    let mut vac = CVec::zeros(8);
    vac[0] = ONE;
    let w = wigner_grid(&vac, &[0.0], &[0.0])?[(0, 0)];
    let wd = (w - std::f64::consts::FRAC_1_PI).abs();
    let worst = inv.max(norm).max(wd);
    Ok(outcome(worst < 1e-9, format!("{worst:.1e}"), "S(r)S(−r) = I, unit norm, W_vac(0) = 1/π"))
}

fn inv_codes() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for r in [0.3, R_8DB, 1.3] {
            let space = code_space(n, r);
            for b in Branch::BOTH {
                let pair = build_code(&space, n, r, b)?;
                worst = worst.max(pair.overlap).max((pair.zero.norm() - 1.0).abs());
                let x = logical_x(&space);
                worst = worst.max((pair.one.dotc(&(&x * &pair.zero)).norm() - 1.0).abs());
            }
        }
    }
    Ok(outcome(worst < 1e-10, format!("{worst:.1e}"), "orthonormal codewords, X_L swaps them"))
}

fn inv_kl() -> Result<Outcome> {
    let space = code_space(1, R_8DB);
    let pair = build_code(&space, 1, R_8DB, Branch::Plus)?;
    let (k0, _) = ker_of(&pair)?;
    let phase = C64::from_polar(1.0, 0.7);
    let mut rotated = pair.clone();
    rotated.one *= phase;
    let (k1, _) = ker_of(&rotated)?;
    let rel = ((k1 - k0) / k0).abs();
    Ok(outcome(rel < 1e-8 && k0 >= 0.0, format!("{rel:.1e}"), "K_er ≥ 0 and phase invariant (1e-8)"))
}

fn inv_channel() -> Result<Outcome> {
    let dim = 24;
    let prop = LossDephasingPropagator::new(dim, &NoiseParams::from_ratio(0.05, KAPPA_RATIO)?)?;
    let mut psi = CVec::zeros(dim);
    for k in 0..6 {
        psi[k] = C64::new(1.0 / (k + 1) as f64, 0.1 * k as f64);
    }
    let psi = psi.normalize();
    let out = prop.apply(&outer(&psi, &psi))?;
    let tr = (out.trace() - ONE).norm();
    let herm = max_abs(&(&out - out.adjoint()));
    let worst = tr.max(herm);
    Ok(outcome(worst < 1e-12, format!("{worst:.1e}"), "trace and Hermiticity preserved"))
}

fn inv_recovery() -> Result<Outcome> {
    let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
    let cfg = cycle_config()?;
    let s = QecSetup::new(pair, &cfg)?;
    let noise = Noise::lindblad(s.pair.dim(), &cfg)?;
    let auto = s.recovery(Scheme::Autonomous)?;
    let meas = s.recovery(Scheme::ParityMeasurement)?;
    let complete = auto.completeness_defect().max(meas.completeness_defect());
    let fa = s.corrected_process(&noise, &auto, 1)?.entanglement_fidelity();
    let fm = s.corrected_process(&noise, &meas, 1)?.entanglement_fidelity();
    let agree = (fa - fm).abs();
    Ok(outcome(
        complete < 1e-10 && agree < 1e-4,
        format!("completeness {complete:.1e}, scheme gap {agree:.1e}"),
        "recovery trace preserving, schemes agree < 1e-4",
    ))
}

fn inv_optim() -> Result<Outcome> {
    let (_, pair) = qec_code(1, R_8DB, Branch::Plus)?;
    let d = pair.dim();
    let id = zl_loss(&pair, &CMat::identity(d, d));
    let problem = GrapeProblem::new(6, 3, 0.9)?;
    let pulses = PulseGrid::from_params(&[0.3, -1.1, 2.0, 0.7, 0.0, -0.4]);
    let u = crate::optim::grape_propagator(&problem, &pulses)?;
    let fine = GrapeProblem {
        segments: 6,
        ..problem.clone()
    };
    let u2 = crate::optim::grape_propagator(&fine, &pulses.refined(2))?;
    let refine = max_abs(&(&u - u2));
    let bound = grape_upper_bound(&problem, &u)?;
    let grad = grape_gradient_crosscheck(3)?;
    let passed = (id - 8.0).abs() < 1e-12 && refine < 1e-10 && (bound - 1.0).abs() < 1e-10 && grad < 1e-5;
    Ok(outcome(
        passed,
        format!("loss(I) = {id:.3}, refinement {refine:.1e}, gradient {grad:.1e}"),
        "loss(I) = 8, refinement < 1e-10, gradients agree",
    ))
}

pub fn invariant_checks() -> Vec<Check> {
    let suites: [(&str, &str, fn() -> Result<Outcome>); 7] = [
        ("I-num", "numerics invariants", inv_numerics),
        ("I-fock", "Fock-space invariants", inv_fock),
        ("I-code", "code invariants", inv_codes),
        ("I-kl", "KL invariants", inv_kl),
        ("I-chan", "noise-channel invariants", inv_channel),
        ("I-rec", "recovery invariants", inv_recovery),
        ("I-opt", "optimizer invariants", inv_optim),
    ];
    suites.iter().map(|(id, title, f)| timed(id, title, None, f)).collect()
}

/// Criteria 1–8 followed by every invariant suite.
pub fn run_validation() -> Vec<Check> {
    let mut out = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    out.extend(invariant_checks());
    out
}
