//! Recovery for the transformed error set: error-subspace bases, the
//! ancilla-assisted unitaries, the parity-measurement variant and full
//! correction cycles under loss and dephasing.
//!
//! Joint oscillator⊗ancilla operators are stored ancilla-major: the joint
//! index of (ancilla level x, Fock level k) is `x * dim + k`, so
//! `kron(anc_op, osc_op)` builds a product operator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, transform_kraus, LossDephasingPropagator, NoiseParams, TransformedKraus};
use crate::codes::{build_code, Branch, CodePair};
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::numerics::{
    kron, loewdin_orthonormalize, mat_exp, outer, trace, unitarity_defect, CMat, CVec, C64, IM, ONE, ZERO,
};

const UNITARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AncillaSpace {
    /// Levels |g⟩, |e⟩, |f⟩.
    Qutrit,
    /// Levels |g₁g₂⟩, |e₁g₂⟩, |g₁e₂⟩, |e₁e₂⟩.
    TwoQubit,
}

impl AncillaSpace {
    pub fn dim(self) -> usize {
        match self {
            AncillaSpace::Qutrit => 3,
            AncillaSpace::TwoQubit => 4,
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            AncillaSpace::Qutrit => &["g", "e", "f"],
            AncillaSpace::TwoQubit => &["g1g2", "e1g2", "g1e2", "e1e2"],
        }
    }

    /// Indices playing the roles of |g⟩, |e⟩, |f⟩.
    pub fn roles(self) -> (usize, usize, usize) {
        (0, 1, 2)
    }

    pub fn basis(self, level: usize) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[level] = ONE;
        v
    }
}

impl fmt::Display for AncillaSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AncillaSpace::Qutrit => "qutrit",
            AncillaSpace::TwoQubit => "two-qubit",
        })
    }
}

impl FromStr for AncillaSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qutrit" => Ok(AncillaSpace::Qutrit),
            "two-qubit" | "two_qubit" | "twoqubit" => Ok(AncillaSpace::TwoQubit),
            _ => Err(Error::InvalidArgument(format!("unknown ancilla '{s}' (qutrit, two-qubit)"))),
        }
    }
}

/// Orthonormal pairs (|0_{F_i}⟩, |1_{F_i}⟩) spanning the image of the code
/// under each transformed Kraus operator.
#[derive(Clone, Debug)]
pub struct ErrorBases {
    /// `states[i][u]` = |u_{F_{i+1}}⟩.
    pub states: [[CVec; 2]; 3],
    /// ‖F̂ᵢ|u_L⟩‖ before normalization.
    pub image_norms: [[f64; 2]; 3],
    /// ⟨0_{F_i}|1_{F_i}⟩ of the normalized images, before Löwdin.
    pub raw_overlaps: [C64; 3],
    /// Largest relative code-space component removed from the F̂₁ images.
    pub f1_code_component: f64,
    /// Largest |⟨v_L|u_{F_i}⟩| per subspace after construction.
    pub code_overlaps: [f64; 3],
    /// Largest |⟨u_{F_i}|v_{F_j}⟩| between different subspaces.
    pub cross_overlaps: [[f64; 3]; 3],
}

impl ErrorBases {
    pub fn projector(&self, i: usize) -> CMat {
        let [u0, u1] = &self.states[i];
        outer(u0, u0) + outer(u1, u1)
    }

    /// L̂ᵢ = |0_L⟩⟨0_{F_i}| + |1_L⟩⟨1_{F_i}|.
    pub fn lift(&self, pair: &CodePair, i: usize) -> CMat {
        let [u0, u1] = &self.states[i];
        outer(&pair.zero, u0) + outer(&pair.one, u1)
    }
}

pub fn error_bases(pair: &CodePair, tk: &TransformedKraus) -> Result<ErrorBases> {
    if tk.f_ops.len() != 3 || tk.f_ops[0].nrows() != pair.dim() {
        return Err(Error::Dimension("transformed Kraus set does not match the code".into()));
    }
    let words = [&pair.zero, &pair.one];
    let mut states: Vec<[CVec; 2]> = Vec::with_capacity(3);
    let mut image_norms = [[0.0; 2]; 3];
    let mut raw_overlaps = [ZERO; 3];
    let mut f1_code_component = 0.0f64;
    for (i, f) in tk.f_ops.iter().enumerate() {
        let mut imgs = Vec::with_capacity(2);
        for (u, w) in words.iter().enumerate() {
            let mut v = f * *w;
            let nv = v.norm();
            image_norms[i][u] = nv;
            if !(nv > 1e-12) {
                return Err(Error::Degenerate(format!("F{}|{u}_L⟩ vanishes (norm {nv:.3e})", i + 1)));
            }
            if i == 0 {
                let c0 = pair.zero.dotc(&v);
                let c1 = pair.one.dotc(&v);
                let removed = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
                f1_code_component = f1_code_component.max(removed / nv);
                v -= &pair.zero * c0 + &pair.one * c1;
                if !(v.norm() > 1e-12 * nv) {
                    return Err(Error::Degenerate("F1 image lies inside the code space".into()));
                }
            }
            let v = &v / C64::new(v.norm(), 0.0);
            imgs.push(v);
        }
        raw_overlaps[i] = imgs[0].dotc(&imgs[1]);
        let orth = loewdin_orthonormalize(&imgs)?;
        states.push([orth[0].clone(), orth[1].clone()]);
    }
    let states: [[CVec; 2]; 3] = [states[0].clone(), states[1].clone(), states[2].clone()];
    let mut code_overlaps = [0.0; 3];
    let mut cross_overlaps = [[0.0; 3]; 3];
    for i in 0..3 {
        for s in &states[i] {
            for w in words {
                code_overlaps[i] = f64::max(code_overlaps[i], w.dotc(s).norm());
            }
            for j in 0..3 {
                if j != i {
                    for t in &states[j] {
                        cross_overlaps[i][j] = f64::max(cross_overlaps[i][j], s.dotc(t).norm());
                    }
                }
            }
        }
    }
    Ok(ErrorBases {
        states,
        image_norms,
        raw_overlaps,
        f1_code_component,
        code_overlaps,
        cross_overlaps,
    })
}

/// Parity-measurement pieces: U_a on the oscillator, U_e/U_f on the
/// ancilla and the Fock parity projectors.
#[derive(Clone, Debug)]
pub struct ParityScheme {
    pub ua: CMat,
    pub ue: CMat,
    pub uf: CMat,
    pub pi_even: CMat,
    pub pi_odd: CMat,
}

#[derive(Clone, Debug)]
pub struct RecoveryUnitaries {
    pub ancilla: AncillaSpace,
    pub osc_dim: usize,
    pub u1: CMat,
    pub u2: CMat,
    pub u3: CMat,
    pub parity: ParityScheme,
    /// Code-space projector, kept for fidelity bookkeeping.
    pub code_projector: CMat,
}

impl RecoveryUnitaries {
    pub fn joint_dim(&self) -> usize {
        self.ancilla.dim() * self.osc_dim
    }

    /// Û = Û₃Û₂Û₁.
    pub fn full(&self) -> CMat {
        &self.u3 * (&self.u2 * &self.u1)
    }

    /// Ancilla-only operator lifted to the joint space.
    pub fn lift_ancilla(&self, op: &CMat) -> CMat {
        kron(op, &CMat::identity(self.osc_dim, self.osc_dim))
    }

    pub fn lift_oscillator(&self, op: &CMat) -> CMat {
        let da = self.ancilla.dim();
        kron(&CMat::identity(da, da), op)
    }

    /// Worst unitarity residual over every stored matrix.
    pub fn unitarity_residual(&self) -> f64 {
        [&self.u1, &self.u2, &self.u3, &self.parity.ua, &self.parity.ue, &self.parity.uf]
            .iter()
            .map(|m| unitarity_defect(m))
            .fold(0.0, f64::max)
    }
}

fn ket_bra(dim: usize, row: usize, col: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(row, col)] = ONE;
    m
}

fn add_block(joint: &mut CMat, d: usize, row: usize, col: usize, op: &CMat) {
    let mut view = joint.view_mut((row * d, col * d), (d, d));
    view += op;
}

/// L|x⟩⟨g| + L†|g⟩⟨x| + (I−P_L)|x⟩⟨x| + (I−P_F)|g⟩⟨g| + I on every other
/// ancilla level.
fn sector_swap(anc: AncillaSpace, g: usize, x: usize, lift: &CMat, p_f: &CMat, p_l: &CMat) -> CMat {
    let d = lift.nrows();
    let id = CMat::identity(d, d);
    let mut u = CMat::zeros(anc.dim() * d, anc.dim() * d);
    add_block(&mut u, d, x, g, lift);
    add_block(&mut u, d, g, x, &lift.adjoint());
    add_block(&mut u, d, x, x, &(&id - p_l));
    add_block(&mut u, d, g, g, &(&id - p_f));
    for y in 0..anc.dim() {
        if y != g && y != x {
            add_block(&mut u, d, y, y, &id);
        }
    }
    u
}

/// W₃ = L̂₃ + L̂₃† + Î − P̂_L − P̂_{F₃}.
fn w3(pair: &CodePair, bases: &ErrorBases, p_l: &CMat) -> CMat {
    let d = pair.dim();
    let l3 = bases.lift(pair, 2);
    &l3 + l3.adjoint() + CMat::identity(d, d) - p_l - bases.projector(2)
}

fn check_unitary(name: &str, m: &CMat, bases: &ErrorBases) -> Result<()> {
    let res = unitarity_defect(m);
    if res > UNITARY_TOL {
        return Err(Error::Integrity(format!(
            "{name} is not unitary (residual {res:.3e}); code overlaps {:?}, cross overlaps {:?}",
            bases.code_overlaps, bases.cross_overlaps
        )));
    }
    Ok(())
}

fn code_proj(pair: &CodePair) -> CMat {
    outer(&pair.zero, &pair.zero) + outer(&pair.one, &pair.one)
}

pub fn build_parity_scheme(pair: &CodePair, bases: &ErrorBases, anc: AncillaSpace) -> Result<ParityScheme> {
    let d = pair.dim();
    let p_l = code_proj(pair);
    let ua = w3(pair, bases, &p_l);
    let da = anc.dim();
    let (g, e, f) = anc.roles();
    let swap = |x: usize, other: usize| {
        let mut m = ket_bra(da, x, g) + ket_bra(da, g, x) + ket_bra(da, other, other);
        for y in 3..da {
            m += ket_bra(da, y, y);
        }
        m
    };
    let ue = swap(e, f);
    let uf = swap(f, e);
    let pi_even = CMat::from_diagonal(&CVec::from_fn(d, |k, _| if k % 2 == 0 { ONE } else { ZERO }));
    let pi_odd = CMat::identity(d, d) - &pi_even;
    for (name, m) in [("U_a", &ua), ("U_e", &ue), ("U_f", &uf)] {
        check_unitary(name, m, bases)?;
    }
    Ok(ParityScheme {
        ua,
        ue,
        uf,
        pi_even,
        pi_odd,
    })
}

pub fn build_qutrit_unitaries(pair: &CodePair, bases: &ErrorBases) -> Result<RecoveryUnitaries> {
    let anc = AncillaSpace::Qutrit;
    let d = pair.dim();
    let p_l = code_proj(pair);
    let (g, e, f) = anc.roles();
    let u1 = sector_swap(anc, g, e, &bases.lift(pair, 0), &bases.projector(0), &p_l);
    let u2 = sector_swap(anc, g, f, &bases.lift(pair, 1), &bases.projector(1), &p_l);
    let mut u3 = CMat::zeros(3 * d, 3 * d);
    add_block(&mut u3, d, g, g, &w3(pair, bases, &p_l));
    add_block(&mut u3, d, e, e, &CMat::identity(d, d));
    add_block(&mut u3, d, f, f, &CMat::identity(d, d));
    finish(pair, bases, anc, u1, u2, u3, p_l)
}

/// Two-qubit ancilla. Û₁ and Û₂ act on the |g₂⟩ and |g₁⟩ sectors
/// respectively; Û₃ routes |g₁g₂⟩ → |e₁g₂⟩ through W₃ and sends |e₁g₂⟩ back
/// to |g₁g₂⟩.
pub fn build_two_qubit_unitaries(pair: &CodePair, bases: &ErrorBases) -> Result<RecoveryUnitaries> {
    let anc = AncillaSpace::TwoQubit;
    let d = pair.dim();
    let p_l = code_proj(pair);
    let (gg, eg, ge, ee) = (0, 1, 2, 3);
    let id = CMat::identity(d, d);
    let u1 = sector_swap(anc, gg, eg, &bases.lift(pair, 0), &bases.projector(0), &p_l);
    let u2 = sector_swap(anc, gg, ge, &bases.lift(pair, 1), &bases.projector(1), &p_l);
    let mut u3 = CMat::zeros(4 * d, 4 * d);
    add_block(&mut u3, d, eg, gg, &w3(pair, bases, &p_l));
    add_block(&mut u3, d, ee, ee, &id);
    add_block(&mut u3, d, ge, ge, &id);
    add_block(&mut u3, d, gg, eg, &id);
    finish(pair, bases, anc, u1, u2, u3, p_l)
}

fn finish(
    pair: &CodePair,
    bases: &ErrorBases,
    anc: AncillaSpace,
    u1: CMat,
    u2: CMat,
    u3: CMat,
    p_l: CMat,
) -> Result<RecoveryUnitaries> {
    for (name, m) in [("U1", &u1), ("U2", &u2), ("U3", &u3)] {
        check_unitary(name, m, bases)?;
    }
    Ok(RecoveryUnitaries {
        ancilla: anc,
        osc_dim: pair.dim(),
        u1,
        u2,
        u3,
        parity: build_parity_scheme(pair, bases, anc)?,
        code_projector: p_l,
    })
}

pub fn build_unitaries(pair: &CodePair, bases: &ErrorBases, anc: AncillaSpace) -> Result<RecoveryUnitaries> {
    match anc {
        AncillaSpace::Qutrit => build_qutrit_unitaries(pair, bases),
        AncillaSpace::TwoQubit => build_two_qubit_unitaries(pair, bases),
    }
}

/// exp{−iς[(|g⟩⟨e| + |g⟩⟨f|)b̂† + h.c.]t} on ancilla⊗reservoir, reservoir
/// truncated to `reservoir_dim` levels.
pub fn build_uen(anc: AncillaSpace, coupling: f64, t: f64, reservoir_dim: usize) -> Result<CMat> {
    if reservoir_dim < 2 {
        return Err(Error::InvalidArgument(format!("reservoir_dim {reservoir_dim} < 2")));
    }
    if !(coupling * t).is_finite() {
        return Err(Error::InvalidArgument("non-finite ς·t".into()));
    }
    let da = anc.dim();
    let (g, e, f) = anc.roles();
    let b = CMat::from_fn(reservoir_dim, reservoir_dim, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let lower = ket_bra(da, g, e) + ket_bra(da, g, f);
    let h = kron(&lower, &b.adjoint()) + kron(&lower.adjoint(), &b);
    mat_exp(&(h * (-IM * coupling * t)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Autonomous,
    ParityMeasurement,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Autonomous => "auto",
            Scheme::ParityMeasurement => "parity",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "autonomous" => Ok(Scheme::Autonomous),
            "parity" | "parity-measurement" => Ok(Scheme::ParityMeasurement),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}' (auto, parity)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityConvention {
    SixState,
    HaarAverage,
}

impl fmt::Display for FidelityConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FidelityConvention::SixState => "six-state",
            FidelityConvention::HaarAverage => "haar",
        })
    }
}

impl FromStr for FidelityConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "six-state" | "six_state" => Ok(FidelityConvention::SixState),
            "haar" | "haar-average" => Ok(FidelityConvention::HaarAverage),
            _ => Err(Error::InvalidArgument(format!("unknown fidelity convention '{s}' (six-state, haar)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QECCycleConfig {
    pub kappa: f64,
    pub kappa_phi: f64,
    pub tau_w: f64,
    pub cycles: usize,
    pub scheme: Scheme,
    pub fidelity_convention: FidelityConvention,
    pub ancilla: AncillaSpace,
}

impl QECCycleConfig {
    /// κ = 1 units: κτ_w = `kappa_tau`, κ_φ = κ/`ratio`.
    pub fn new(kappa_tau: f64, ratio: f64, cycles: usize) -> Result<Self> {
        let cfg = QECCycleConfig {
            kappa: 1.0,
            kappa_phi: 1.0 / ratio,
            tau_w: kappa_tau,
            cycles,
            scheme: Scheme::Autonomous,
            fidelity_convention: FidelityConvention::SixState,
            ancilla: AncillaSpace::Qutrit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_w > 0.0 && self.tau_w.is_finite()) {
            return Err(Error::InvalidArgument(format!("τ_w = {} must be > 0", self.tau_w)));
        }
        if self.cycles == 0 {
            return Err(Error::InvalidArgument("cycles must be ≥ 1".into()));
        }
        NoiseParams::new(self.kappa, self.kappa_phi, self.tau_w).map(|_| ())
    }

    pub fn noise(&self) -> NoiseParams {
        NoiseParams {
            kappa: self.kappa,
            kappa_phi: self.kappa_phi,
            tau: self.tau_w,
        }
    }
}

/// What happens to the oscillator between recoveries.
#[derive(Clone, Debug)]
pub enum Noise {
    /// Exact loss-plus-dephasing evolution over τ_w.
    Lindblad(LossDephasingPropagator),
    /// A fixed Kraus map, e.g. the short-time set the recovery was built from.
    Kraus(Vec<CMat>),
}

impl Noise {
    pub fn lindblad(dim: usize, cfg: &QECCycleConfig) -> Result<Self> {
        Ok(Noise::Lindblad(LossDephasingPropagator::new(dim, &cfg.noise())?))
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        match self {
            Noise::Lindblad(p) => p.apply(rho),
            Noise::Kraus(k) => apply_channel(k, rho),
        }
    }
}

fn ground_block(rho_joint: &CMat, d: usize, anc: AncillaSpace) -> Result<CMat> {
    if rho_joint.shape() != (anc.dim() * d, anc.dim() * d) {
        return Err(Error::Dimension(format!(
            "joint state is {}x{}, expected {}",
            rho_joint.nrows(),
            rho_joint.ncols(),
            anc.dim() * d
        )));
    }
    let g = anc.roles().0;
    let block = rho_joint.view((g * d, g * d), (d, d)).clone_owned();
    let total = trace(rho_joint);
    if (total - trace(&block)).norm() > 1e-10 * total.norm().max(1.0) {
        return Err(Error::Contract("ancilla must start the cycle in |g⟩".into()));
    }
    Ok(block)
}

fn with_ground(rho: &CMat, anc: AncillaSpace) -> CMat {
    let g = anc.roles().0;
    kron(&ket_bra(anc.dim(), g, g), rho)
}

/// Trace over the ancilla.
pub fn partial_trace_ancilla(rho_joint: &CMat, anc: AncillaSpace) -> CMat {
    let d = rho_joint.nrows() / anc.dim();
    let mut out = CMat::zeros(d, d);
    for x in 0..anc.dim() {
        out += rho_joint.view((x * d, x * d), (d, d));
    }
    out
}

fn check_trace(before: C64, after: C64) -> Result<()> {
    let drift = (before - after).norm();
    if drift > 1e-6 {
        return Err(Error::Integrity(format!("cycle changed the trace by {drift:.3e}")));
    }
    Ok(())
}

/// One autonomous cycle on a joint state whose ancilla is in |g⟩: noise on
/// the oscillator, Û = Û₃Û₂Û₁, then an ideal reset of the ancilla to |g⟩.
/// Trace drift up to the noise model's own leakage is allowed; the recovery
/// itself preserves the trace.
pub fn autonomous_cycle(rho_joint: &CMat, uni: &RecoveryUnitaries, noise: &Noise) -> Result<CMat> {
    let rho = ground_block(rho_joint, uni.osc_dim, uni.ancilla)?;
    let noisy = noise.apply(&rho)?;
    let joint = with_ground(&noisy, uni.ancilla);
    let u = uni.full();
    let out = partial_trace_ancilla(&(&u * joint * u.adjoint()), uni.ancilla);
    check_trace(trace(&noisy), trace(&out))?;
    Ok(with_ground(&out, uni.ancilla))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchWeights {
    /// Weight in the parity sector the code does not occupy (F̂₃ errors).
    pub flipped: f64,
    /// Weight in the code's parity sector.
    pub preserved: f64,
}

/// Parity-measurement cycle: the flipped-parity branch gets U_a, the
/// code-parity branch gets Û₂Û₁ and an ancilla reset.
pub fn measurement_cycle(
    rho_joint: &CMat,
    uni: &RecoveryUnitaries,
    noise: &Noise,
    code_parity_even: bool,
) -> Result<(CMat, BranchWeights)> {
    let rho = ground_block(rho_joint, uni.osc_dim, uni.ancilla)?;
    let noisy = noise.apply(&rho)?;
    let (keep, flip) = parity_pair(uni, code_parity_even);
    let flipped = flip * &noisy * flip;
    let preserved = keep * &noisy * keep;
    let ua = &uni.parity.ua;
    let mut out = ua * &flipped * ua.adjoint();
    let u21 = &uni.u2 * &uni.u1;
    out += partial_trace_ancilla(&(&u21 * with_ground(&preserved, uni.ancilla) * u21.adjoint()), uni.ancilla);
    check_trace(trace(&noisy), trace(&out))?;
    let w = BranchWeights {
        flipped: trace(&flipped).re,
        preserved: trace(&preserved).re,
    };
    Ok((with_ground(&out, uni.ancilla), w))
}

fn parity_pair(uni: &RecoveryUnitaries, code_parity_even: bool) -> (&CMat, &CMat) {
    if code_parity_even {
        (&uni.parity.pi_even, &uni.parity.pi_odd)
    } else {
        (&uni.parity.pi_odd, &uni.parity.pi_even)
    }
}

/// Whether both codewords live on even Fock levels; errors for mixed parity.
pub fn code_parity_even(pair: &CodePair) -> Result<bool> {
    let odd_weight = |v: &CVec| v.iter().skip(1).step_by(2).map(|z| z.norm_sqr()).sum::<f64>();
    let w = [odd_weight(&pair.zero), odd_weight(&pair.one)];
    if w.iter().all(|&x| x < 1e-20) {
        Ok(true)
    } else if w.iter().all(|&x| (1.0 - x).abs() < 1e-12) {
        Ok(false)
    } else {
        Err(Error::Contract(format!(
            "{} codewords have no common Fock parity (odd weights {:.3e}, {:.3e})",
            pair.family(),
            w[0],
            w[1]
        )))
    }
}

/// Oscillator-only Kraus form of a recovery with ideal reset. The blocks
/// are read off the ground-ancilla column of the joint unitaries, so they
/// are exactly what the joint-space cycles compute.
#[derive(Clone, Debug)]
pub struct RecoveryChannel {
    pub kraus: Vec<CMat>,
}

impl RecoveryChannel {
    pub fn autonomous(uni: &RecoveryUnitaries) -> Self {
        let d = uni.osc_dim;
        let g = uni.ancilla.roles().0;
        let col = &uni.u3 * (&uni.u2 * uni.u1.columns(g * d, d));
        let kraus = (0..uni.ancilla.dim())
            .map(|x| col.rows(x * d, d).clone_owned())
            .filter(|k| k.iter().any(|z| z.norm() > 0.0))
            .collect();
        RecoveryChannel { kraus }
    }

    pub fn measurement(uni: &RecoveryUnitaries, code_parity_even: bool) -> Self {
        let d = uni.osc_dim;
        let g = uni.ancilla.roles().0;
        let (keep, flip) = parity_pair(uni, code_parity_even);
        let col = &uni.u2 * uni.u1.columns(g * d, d);
        let mut kraus = vec![&uni.parity.ua * flip];
        for x in 0..uni.ancilla.dim() {
            let k = col.rows(x * d, d) * keep;
            if k.iter().any(|z| z.norm() > 0.0) {
                kraus.push(k);
            }
        }
        RecoveryChannel { kraus }
    }

    pub fn for_scheme(uni: &RecoveryUnitaries, scheme: Scheme, pair: &CodePair) -> Result<Self> {
        Ok(match scheme {
            Scheme::Autonomous => Self::autonomous(uni),
            Scheme::ParityMeasurement => Self::measurement(uni, code_parity_even(pair)?),
        })
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let d = rho.nrows();
        let mut out = CMat::zeros(d, d);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// ‖Σ K†K − I‖ (max entry).
    pub fn completeness_defect(&self) -> f64 {
        let d = self.kraus[0].ncols();
        let mut s = -CMat::identity(d, d);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        s.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Logical process tensor T[(c,d),(a,b)] = ⟨c|E(|a⟩⟨b|)|d⟩ for a channel E
/// acting on a two-dimensional logical space.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalProcess {
    pub t: [[C64; 4]; 4],
    /// Tr E(|a⟩⟨b|), including weight that left the logical space.
    pub traces: [C64; 4],
}

impl LogicalProcess {
    pub fn identity() -> Self {
        let mut t = [[ZERO; 4]; 4];
        for (i, row) in t.iter_mut().enumerate() {
            row[i] = ONE;
        }
        LogicalProcess {
            t,
            traces: [ONE, ZERO, ZERO, ONE],
        }
    }

    /// From the images of |0⟩⟨0|, |0⟩⟨1|, |1⟩⟨1| and the logical basis.
    pub fn from_images(images: &[CMat; 3], basis: [&CVec; 2]) -> Self {
        let img10 = images[1].adjoint();
        let imgs = [&images[0], &images[1], &img10, &images[2]];
        let mut t = [[ZERO; 4]; 4];
        let mut traces = [ZERO; 4];
        for (ab, img) in imgs.iter().enumerate() {
            traces[ab] = trace(img);
            for c in 0..2 {
                for d in 0..2 {
                    t[c * 2 + d][ab] = basis[c].dotc(&(*img * basis[d]));
                }
            }
        }
        LogicalProcess { t, traces }
    }

    /// ⟨ψ|E(|ψ⟩⟨ψ|)|ψ⟩ for a normalized logical state ψ.
    pub fn state_fidelity(&self, psi: [C64; 2]) -> f64 {
        let mut f = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                let w_in = psi[a] * psi[b].conj();
                for c in 0..2 {
                    for d in 0..2 {
                        f += psi[c].conj() * psi[d] * w_in * self.t[c * 2 + d][a * 2 + b];
                    }
                }
            }
        }
        f.re
    }

    /// Tr E(|ψ⟩⟨ψ|).
    pub fn output_trace(&self, psi: [C64; 2]) -> f64 {
        let mut tr = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                tr += psi[a] * psi[b].conj() * self.traces[a * 2 + b];
            }
        }
        tr.re
    }

    /// State fidelity of the trace-normalized output, for maps that do not
    /// preserve the trace.
    pub fn normalized_state_fidelity(&self, psi: [C64; 2]) -> f64 {
        self.state_fidelity(psi) / self.output_trace(psi)
    }

    pub fn normalized_six_state_fidelity(&self) -> f64 {
        cardinal_states().iter().map(|s| self.normalized_state_fidelity(*s)).sum::<f64>() / 6.0
    }

    pub fn six_state_fidelity(&self) -> f64 {
        cardinal_states().iter().map(|s| self.state_fidelity(*s)).sum::<f64>() / 6.0
    }

    pub fn entanglement_fidelity(&self) -> f64 {
        (0..4).map(|i| self.t[i][i].re).sum::<f64>() / 4.0
    }

    pub fn haar_fidelity(&self) -> f64 {
        (2.0 * self.entanglement_fidelity() + 1.0) / 3.0
    }

    pub fn fidelity(&self, conv: FidelityConvention) -> f64 {
        match conv {
            FidelityConvention::SixState => self.six_state_fidelity(),
            FidelityConvention::HaarAverage => self.haar_fidelity(),
        }
    }
}

/// |0⟩, |1⟩, |±⟩, |±i⟩.
pub fn cardinal_states() -> [[C64; 2]; 6] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [ONE, ZERO],
        [ZERO, ONE],
        [C64::new(h, 0.0), C64::new(h, 0.0)],
        [C64::new(h, 0.0), C64::new(-h, 0.0)],
        [C64::new(h, 0.0), C64::new(0.0, h)],
        [C64::new(h, 0.0), C64::new(0.0, -h)],
    ]
}

/// Propagates the three independent logical operators |a⟩⟨b| through
/// repeated cycles of a linear map.
struct Tracker<'a> {
    basis: [&'a CVec; 2],
    images: [CMat; 3],
}

impl<'a> Tracker<'a> {
    fn new(basis: [&'a CVec; 2]) -> Self {
        let images = [
            outer(basis[0], basis[0]),
            outer(basis[0], basis[1]),
            outer(basis[1], basis[1]),
        ];
        Tracker { basis, images }
    }

    fn step(&mut self, f: impl Fn(&CMat) -> Result<CMat>) -> Result<()> {
        for img in self.images.iter_mut() {
            *img = f(img)?;
        }
        Ok(())
    }

    fn process(&self) -> LogicalProcess {
        LogicalProcess::from_images(&self.images, self.basis)
    }
}

/// Everything needed to run cycles on one code.
#[derive(Clone, Debug)]
pub struct QecSetup {
    pub pair: CodePair,
    pub kraus: TransformedKraus,
    pub bases: ErrorBases,
    pub unitaries: RecoveryUnitaries,
}

impl QecSetup {
    /// Recovery designed from the short-time expansion at the configured τ_w.
    pub fn new(pair: CodePair, cfg: &QECCycleConfig) -> Result<Self> {
        cfg.validate()?;
        let space = FockSpace::with_pad(pair.dim(), pair.dim())?;
        let kraus = transform_kraus(&pair, &space, &cfg.noise())?;
        let bases = error_bases(&pair, &kraus)?;
        let unitaries = build_unitaries(&pair, &bases, cfg.ancilla)?;
        Ok(QecSetup {
            pair,
            kraus,
            bases,
            unitaries,
        })
    }

    pub fn recovery(&self, scheme: Scheme) -> Result<RecoveryChannel> {
        RecoveryChannel::for_scheme(&self.unitaries, scheme, &self.pair)
    }

    /// Logical process of `cycles` rounds of noise followed by recovery.
    pub fn corrected_process(&self, noise: &Noise, recovery: &RecoveryChannel, cycles: usize) -> Result<LogicalProcess> {
        let mut tr = Tracker::new([&self.pair.zero, &self.pair.one]);
        for _ in 0..cycles {
            tr.step(|m| Ok(recovery.apply(&noise.apply(m)?)))?;
        }
        Ok(tr.process())
    }
}

/// Code used for cycle simulations: Fock space sized for populations, which
/// is what the dynamics need (moments are a KL concern).
pub fn qec_code(n: usize, r: f64, branch: Branch) -> Result<(FockSpace, CodePair)> {
    let space = FockSpace::sized_for(n + 2, r);
    let pair = build_code(&space, n, r, branch)?;
    Ok((space, pair))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FidelityRow {
    pub cycle: usize,
    /// Elapsed time in units of 1/κ.
    pub kappa_t: f64,
    pub corrected: f64,
    pub uncorrected: f64,
    pub baseline: f64,
}

/// Fidelity after each cycle for the corrected code, the same code with no
/// recovery and a Fock {|0⟩,|1⟩} qubit under identical noise.
pub fn fidelity_timeseries(cfg: &QECCycleConfig, pair: &CodePair) -> Result<Vec<FidelityRow>> {
    let setup = QecSetup::new(pair.clone(), cfg)?;
    fidelity_timeseries_with(cfg, &setup)
}

pub fn fidelity_timeseries_with(cfg: &QECCycleConfig, setup: &QecSetup) -> Result<Vec<FidelityRow>> {
    cfg.validate()?;
    let pair = &setup.pair;
    let noise = Noise::lindblad(pair.dim(), cfg)?;
    let recovery = setup.recovery(cfg.scheme)?;
    let fock0 = CVec::from_vec(vec![ONE, ZERO]);
    let fock1 = CVec::from_vec(vec![ZERO, ONE]);
    let base_noise = LossDephasingPropagator::new(2, &cfg.noise())?;
    let mut corrected = Tracker::new([&pair.zero, &pair.one]);
    let mut bare = Tracker::new([&pair.zero, &pair.one]);
    let mut base = Tracker::new([&fock0, &fock1]);
    let conv = cfg.fidelity_convention;
    let f0 = LogicalProcess::identity().fidelity(conv);
    let mut rows = vec![FidelityRow {
        cycle: 0,
        kappa_t: 0.0,
        corrected: f0,
        uncorrected: f0,
        baseline: f0,
    }];
    for k in 1..=cfg.cycles {
        corrected.step(|m| Ok(recovery.apply(&noise.apply(m)?)))?;
        bare.step(|m| noise.apply(m))?;
        base.step(|m| base_noise.apply(m))?;
        rows.push(FidelityRow {
            cycle: k,
            kappa_t: cfg.kappa * cfg.tau_w * k as f64,
            corrected: corrected.process().fidelity(conv),
            uncorrected: bare.process().fidelity(conv),
            baseline: base.process().fidelity(conv),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::logical_x;
    use crate::codes::code_space;
    use crate::kl::{k_er, kl_tensor, ErrorSet, ErrorSetKind};
    use crate::numerics::max_abs;

    const R8: f64 = 0.921;

    fn setup(anc: AncillaSpace) -> (QECCycleConfig, QecSetup) {
        let (_, pair) = qec_code(1, R8, Branch::Plus).unwrap();
        let mut cfg = QECCycleConfig::new(0.01, 8.5, 1).unwrap();
        cfg.ancilla = anc;
        let s = QecSetup::new(pair, &cfg).unwrap();
        (cfg, s)
    }

    fn joint_state(psi: &CVec, anc: AncillaSpace) -> CMat {
        with_ground(&outer(psi, psi), anc)
    }

    fn ket(anc: AncillaSpace, level: usize, osc: &CVec) -> CVec {
        kron(&CMat::from_column_slice(anc.dim(), 1, anc.basis(level).as_slice()), &CMat::from_column_slice(osc.len(), 1, osc.as_slice()))
            .column(0)
            .into_owned()
    }

    #[test]
    fn error_bases_are_orthonormal_with_expected_structure() {
        let (_, s) = setup(AncillaSpace::Qutrit);
        let b = &s.bases;
        for pair in &b.states {
            assert!(pair[0].dotc(&pair[1]).norm() < 1e-12);
            assert!((pair[0].norm() - 1.0).abs() < 1e-12 && (pair[1].norm() - 1.0).abs() < 1e-12);
        }
        // F₃ = √(κτ)â flips parity; n = 1 codewords are odd
        for v in &b.states[2] {
            let odd: f64 = v.iter().skip(1).step_by(2).map(|z| z.norm()).fold(0.0, f64::max);
            assert!(odd < 1e-12);
        }
        assert!(b.code_overlaps[2] < 1e-12 && b.code_overlaps[0] < 1e-12);
        let z = s.pair.zero.dotc(&b.states[1][0]).norm();
        assert!(z > 0.99, "⟨0_L|0_F2⟩ = {z}");
        assert!(b.f1_code_component > 0.0 && b.f1_code_component < 0.5);
    }

    #[test]
    fn qutrit_unitaries_are_unitary_and_route_errors() {
        let (_, s) = setup(AncillaSpace::Qutrit);
        let u = &s.unitaries;
        assert!(u.unitarity_residual() < 1e-10, "{}", u.unitarity_residual());
        let anc = AncillaSpace::Qutrit;
        for (i, flag) in [(2usize, 0usize), (0, 1), (1, 2)] {
            let m = [&u.u1, &u.u2, &u.u3][i];
            for (uf, ul) in s.bases.states[i].iter().zip([&s.pair.zero, &s.pair.one]) {
                let out = m * ket(anc, 0, uf);
                let want = ket(anc, flag, ul);
                assert!((out - want).norm() < 1e-10, "U{} on F{} basis", i + 1, i + 1);
            }
        }
        // U₃ only touches the |g⟩ sector
        let d = u.osc_dim;
        for x in 1..3 {
            let block = u.u3.view((x * d, x * d), (d, d)).clone_owned();
            assert!(max_abs(&(block - CMat::identity(d, d))) == 0.0);
        }
    }

    #[test]
    fn full_recovery_flags_each_error() {
        let (_, s) = setup(AncillaSpace::Qutrit);
        let u = s.unitaries.full();
        let anc = AncillaSpace::Qutrit;
        let zero = &s.pair.zero;
        // no error: back to |0_L, g⟩ only approximately, since the code
        // overlaps F₂'s support; the F₁ error always ends up flagged
        let out = &u * ket(anc, 0, &s.bases.states[0][0]);
        assert!((out - ket(anc, 1, zero)).norm() < 1e-10);
        let out = &u * ket(anc, 0, &s.bases.states[2][0]);
        assert!((out - ket(anc, 0, zero)).norm() < 1e-10);
    }

    #[test]
    fn parity_scheme_algebra() {
        let (_, s) = setup(AncillaSpace::Qutrit);
        let p = &s.unitaries.parity;
        let d = s.pair.dim();
        assert!(max_abs(&(&p.ua * &p.ua - CMat::identity(d, d))) < 1e-10);
        assert!(max_abs(&(&p.ua - p.ua.adjoint())) < 1e-14);
        assert_eq!(&p.pi_even + &p.pi_odd, CMat::identity(d, d));
        let anc = AncillaSpace::Qutrit;
        assert_eq!(&p.ue * anc.basis(0), anc.basis(1));
        assert_eq!(&p.ue * anc.basis(2), anc.basis(2));
        assert_eq!(&p.uf * anc.basis(0), anc.basis(2));
        assert_eq!(&p.uf * anc.basis(1), anc.basis(1));
    }

    #[test]
    fn two_qubit_variant() {
        let (_, s) = setup(AncillaSpace::TwoQubit);
        let u = &s.unitaries;
        assert!(u.unitarity_residual() < 1e-10);
        let d = u.osc_dim;
        // identity on the |e₂⟩ sector
        for x in [2usize, 3] {
            for y in 0..4 {
                let block = u.u1.view((x * d, y * d), (d, d)).clone_owned();
                let want = if x == y { CMat::identity(d, d) } else { CMat::zeros(d, d) };
                assert!(max_abs(&(block - want)) < 1e-12);
            }
        }
        let anc = AncillaSpace::TwoQubit;
        let out = &u.u3 * ket(anc, 0, &s.bases.states[2][0]);
        assert!((out - ket(anc, 1, &s.pair.zero)).norm() < 1e-10);
    }

    #[test]
    fn uen_is_a_lambda_system() {
        let anc = AncillaSpace::Qutrit;
        let nb = 4;
        assert!(max_abs(&(build_uen(anc, 1.0, 0.0, nb).unwrap() - CMat::identity(3 * nb, 3 * nb))) < 1e-15);
        let idx = |x: usize, k: usize| x * nb + k;
        let ground = |theta: f64| {
            let u = build_uen(anc, 1.0, theta, nb).unwrap();
            u[(idx(0, 1), idx(1, 0))].norm_sqr()
        };
        // golden-section search for the best transfer over (0, π]
        let (mut lo, mut hi) = (0.0f64, std::f64::consts::PI / 2.0);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if ground(a) > ground(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let theta = 0.5 * (lo + hi);
        let want = std::f64::consts::PI / (2.0 * 2f64.sqrt());
        assert!((theta - want).abs() < 1e-6);
        assert!((ground(theta) - 0.5).abs() < 1e-12);
        let u = build_uen(anc, 1.0, want, nb).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
        let col = u.column(idx(1, 0));
        let h = 0.5;
        assert!((col[idx(1, 0)] - C64::new(h, 0.0)).norm() < 1e-12);
        assert!((col[idx(2, 0)] - C64::new(-h, 0.0)).norm() < 1e-12);
        assert!((col[idx(0, 1)] - C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn kraus_form_matches_joint_cycles() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let anc = AncillaSpace::Qutrit;
        let noise = Noise::lindblad(s.pair.dim(), &cfg).unwrap();
        let psi = (&s.pair.zero * C64::new(0.6, 0.0) + &s.pair.one * C64::new(0.0, 0.8)).normalize();
        let rho = outer(&psi, &psi);
        let joint = autonomous_cycle(&joint_state(&psi, anc), &s.unitaries, &noise).unwrap();
        let via_kraus = RecoveryChannel::autonomous(&s.unitaries).apply(&noise.apply(&rho).unwrap());
        assert!(max_abs(&(partial_trace_ancilla(&joint, anc) - &via_kraus)) < 1e-12);
        assert!(max_abs(&(&joint - joint.adjoint())) < 1e-14);
        let (mjoint, _) = measurement_cycle(&joint_state(&psi, anc), &s.unitaries, &noise, false).unwrap();
        let mk = RecoveryChannel::measurement(&s.unitaries, false).apply(&noise.apply(&rho).unwrap());
        assert!(max_abs(&(partial_trace_ancilla(&mjoint, anc) - mk)) < 1e-12);
        for scheme in [Scheme::Autonomous, Scheme::ParityMeasurement] {
            assert!(s.recovery(scheme).unwrap().completeness_defect() < 1e-10);
        }
    }

    #[test]
    fn cycle_rejects_excited_ancilla() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let d = s.pair.dim();
        let mut joint = CMat::zeros(3 * d, 3 * d);
        joint[(d, d)] = ONE;
        let noise = Noise::lindblad(d, &cfg).unwrap();
        assert!(matches!(autonomous_cycle(&joint, &s.unitaries, &noise), Err(Error::Contract(_))));
    }

    #[test]
    fn vanishing_wait_is_identity() {
        let (_, pair) = qec_code(1, R8, Branch::Plus).unwrap();
        let cfg = QECCycleConfig::new(1e-9, 8.5, 1).unwrap();
        let s = QecSetup::new(pair, &cfg).unwrap();
        let noise = Noise::lindblad(s.pair.dim(), &cfg).unwrap();
        let out = autonomous_cycle(&joint_state(&s.pair.zero, cfg.ancilla), &s.unitaries, &noise).unwrap();
        let f = s.pair.zero.dotc(&(partial_trace_ancilla(&out, cfg.ancilla) * &s.pair.zero)).re;
        assert!(f > 1.0 - 1e-6, "{f}");
    }

    #[test]
    fn single_cycle_infidelity_is_second_order_small() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let noise = Noise::lindblad(s.pair.dim(), &cfg).unwrap();
        let rec = s.recovery(Scheme::Autonomous).unwrap();
        let p = s.corrected_process(&noise, &rec, 1).unwrap();
        let f0 = p.state_fidelity([ONE, ZERO]);
        // bound from the per-cycle corrected infidelity at κτ_w = 0.01;
        // see the Richardson check for the scaling itself
        assert!(f0 > 0.97, "{f0}");
        let bare = s.corrected_process(&noise, &RecoveryChannel { kraus: vec![CMat::identity(s.pair.dim(), s.pair.dim())] }, 1).unwrap();
        assert!(p.state_fidelity([ONE, ZERO]) > bare.state_fidelity([ONE, ZERO]));
    }

    #[test]
    fn pure_loss_error_is_undone_by_parity_branch() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let anc = cfg.ancilla;
        let d = s.pair.dim();
        let psi = (&s.kraus.f_ops[2] * &s.pair.zero).normalize();
        let none = Noise::Kraus(vec![CMat::identity(d, d)]);
        let (out, w) = measurement_cycle(&joint_state(&psi, anc), &s.unitaries, &none, false).unwrap();
        assert!(w.flipped > 0.999);
        let f = s.pair.zero.dotc(&(partial_trace_ancilla(&out, anc) * &s.pair.zero)).re;
        assert!(f > 0.999, "{f}");
        // no noise on a codeword: everything in the code's parity sector,
        // and the state returns unchanged up to the F₂ overlap
        let (out, w) = measurement_cycle(&joint_state(&s.pair.zero, anc), &s.unitaries, &none, false).unwrap();
        assert!((w.preserved - 1.0).abs() < 1e-12);
        let f = s.pair.zero.dotc(&(partial_trace_ancilla(&out, anc) * &s.pair.zero)).re;
        assert!(f > 0.99, "{f}");
    }

    #[test]
    fn schemes_agree_at_eight_db() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let noise = Noise::lindblad(s.pair.dim(), &cfg).unwrap();
        let fa = s.corrected_process(&noise, &s.recovery(Scheme::Autonomous).unwrap(), 1).unwrap();
        let fm = s.corrected_process(&noise, &s.recovery(Scheme::ParityMeasurement).unwrap(), 1).unwrap();
        let diff = (fa.entanglement_fidelity() - fm.entanglement_fidelity()).abs();
        let kl_pair = build_code(&code_space(1, R8), 1, R8, Branch::Plus).unwrap();
        let errors = ErrorSet::new(ErrorSetKind::LossDephasing, kl_pair.dim());
        let ker = k_er(&kl_tensor(&kl_pair, &errors).unwrap()).k_er;
        assert!(diff < 2.0 * ker.sqrt(), "{diff}");
        assert!(diff < 1e-4, "{diff}");
    }

    #[test]
    fn logical_x_transparency() {
        let (cfg, s) = setup(AncillaSpace::Qutrit);
        let d = s.pair.dim();
        let x = logical_x(&FockSpace::with_pad(d, d).unwrap());
        let noise = Noise::lindblad(d, &cfg).unwrap();
        let rec = s.recovery(Scheme::Autonomous).unwrap();
        for psi in [&s.pair.zero, &s.pair.one] {
            let rho = outer(psi, psi);
            let plain = rec.apply(&noise.apply(&rho).unwrap());
            let conj = x.adjoint() * rec.apply(&noise.apply(&(&x * &rho * x.adjoint())).unwrap()) * &x;
            let fp = psi.dotc(&(plain * psi)).re;
            let fc = psi.dotc(&(conj * psi)).re;
            assert!((fp - fc).abs() < 1e-6, "{fp} vs {fc}");
        }
    }

    #[test]
    fn designed_noise_is_nearly_corrected() {
        let (_, s) = setup(AncillaSpace::Qutrit);
        let noise = Noise::Kraus(s.kraus.f_ops.clone());
        let rec = s.recovery(Scheme::Autonomous).unwrap();
        let p = s.corrected_process(&noise, &rec, 1).unwrap();
        // the truncated short-time set gains trace at this ⟨n̂⁴⟩
        assert!(p.output_trace([ONE, ZERO]) > 1.0);
        let f = p.normalized_six_state_fidelity();
        let kl_pair = build_code(&code_space(1, R8), 1, R8, Branch::Plus).unwrap();
        let errors = ErrorSet::new(ErrorSetKind::LossDephasing, kl_pair.dim());
        let ker = k_er(&kl_tensor(&kl_pair, &errors).unwrap()).k_er;
        assert!(f >= 1.0 - 10.0 * ker);
        assert!(f > 0.998, "{f}");
    }

    #[test]
    fn shorter_waits_help_and_scale_quadratically() {
        let (_, pair) = qec_code(1, R8, Branch::Plus).unwrap();
        // fixed total time κt = 0.04
        let mut at_end = Vec::new();
        let mut first = Vec::new();
        for (kt, cycles) in [(0.02, 2), (0.01, 4), (0.005, 8)] {
            let cfg = QECCycleConfig::new(kt, 8.5, cycles).unwrap();
            let rows = fidelity_timeseries(&cfg, &pair).unwrap();
            first.push((1.0 - rows[1].corrected, 1.0 - rows[1].uncorrected));
            at_end.push(rows[cycles].corrected);
            assert!(rows[cycles].corrected > rows[cycles].uncorrected);
        }
        assert!(at_end[0] < at_end[1] && at_end[1] < at_end[2], "{at_end:?}");
        let corr = first[1].0 / first[2].0;
        let unc = first[1].1 / first[2].1;
        assert!((3.0..=5.0).contains(&corr), "{corr}");
        assert!((1.7..=2.3).contains(&unc), "{unc}");
    }

    #[test]
    fn process_conventions() {
        let id = LogicalProcess::identity();
        assert!((id.six_state_fidelity() - 1.0).abs() < 1e-15);
        assert!((id.haar_fidelity() - 1.0).abs() < 1e-15);
        // complete depolarization: six-state and Haar both 1/2
        let basis0 = CVec::from_vec(vec![ONE, ZERO]);
        let basis1 = CVec::from_vec(vec![ZERO, ONE]);
        let half = CMat::identity(2, 2) * C64::new(0.5, 0.0);
        let p = LogicalProcess::from_images(&[half.clone(), CMat::zeros(2, 2), half], [&basis0, &basis1]);
        assert!((p.six_state_fidelity() - 0.5).abs() < 1e-15);
        assert!((p.haar_fidelity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn timeseries_starts_at_one_and_baseline_matches_closed_form() {
        let (_, pair) = qec_code(1, R8, Branch::Plus).unwrap();
        let cfg = QECCycleConfig::new(0.01, 8.5, 3).unwrap();
        let rows = fidelity_timeseries(&cfg, &pair).unwrap();
        assert_eq!(rows.len(), 4);
        for f in [rows[0].corrected, rows[0].uncorrected, rows[0].baseline] {
            assert!((f - 1.0).abs() < 1e-14);
        }
        // Fock qubit: p = e^{−κt}, coherence e^{−(κ+κ_φ)t/2}
        for row in &rows {
            let t = row.kappa_t;
            let p = (-t).exp();
            let c = (-(1.0 + 1.0 / 8.5) * t / 2.0).exp();
            let states = cardinal_states();
            let mut f = 0.0;
            for s in states {
                let (a, b) = (s[0], s[1]);
                let rho00 = a.norm_sqr() + b.norm_sqr() * (1.0 - p);
                let rho11 = b.norm_sqr() * p;
                let rho01 = a * b.conj() * c;
                f += a.norm_sqr() * rho00 + b.norm_sqr() * rho11 + 2.0 * (a.conj() * rho01 * b).re;
            }
            assert!((row.baseline - f / 6.0).abs() < 1e-12, "{} vs {}", row.baseline, f / 6.0);
        }
    }
}
