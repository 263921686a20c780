//! Variational synthesis of the logical Z and GRAPE pulses for the
//! dispersive oscillator–qutrit model.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codes::CodePair;
use crate::error::{Error, Result};
use crate::fock::{sparse_annihilation, FockSpace};
use crate::numerics::{cgemm, eig_hermitian, mat_exp, CMat, SparseOp, C64, IM, ZERO};

// ---------------------------------------------------------------------------
// Ansätze

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    /// α over {Î, â†², â², â†â, â†²â²}, no symmetrization.
    NonHermitian5,
    /// Σ_{k,l<n} α_{kl}â†^kâ^l + h.c.
    HermitianSym(usize),
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnsatzKind::NonHermitian5 => f.write_str("non-hermitian5"),
            AnsatzKind::HermitianSym(n) => write!(f, "hermitian-sym{n}"),
        }
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non-hermitian5" | "nh5" => return Ok(AnsatzKind::NonHermitian5),
            _ => {}
        }
        let tail = s.strip_prefix("hermitian-sym").or_else(|| s.strip_prefix("sym"));
        match tail.map(|t| t.trim_start_matches([':', '-']).parse::<usize>()) {
            Some(Ok(n)) if n >= 1 => Ok(AnsatzKind::HermitianSym(n)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown ansatz '{s}' (non-hermitian5, hermitian-sym<n>)"
            ))),
        }
    }
}

impl AnsatzKind {
    /// (k, l) of each monomial â†^kâ^l.
    pub fn monomials(self) -> Vec<(usize, usize)> {
        match self {
            AnsatzKind::NonHermitian5 => vec![(0, 0), (2, 0), (0, 2), (1, 1), (2, 2)],
            AnsatzKind::HermitianSym(n) => (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect(),
        }
    }

    pub fn labels(self) -> Vec<String> {
        self.monomials().into_iter().map(|(k, l)| monomial_label(k, l)).collect()
    }

    pub fn n_coeffs(self) -> usize {
        self.monomials().len()
    }
}

fn monomial_label(k: usize, l: usize) -> String {
    let part = |sym: &str, p: usize| match p {
        0 => String::new(),
        1 => sym.to_string(),
        _ => format!("{sym}^{p}"),
    };
    match (k, l) {
        (0, 0) => "I".into(),
        _ => format!("{}{}", part("a†", k), part("a", l)),
    }
}

/// â†^kâ^l on the truncated space.
pub fn monomial(dim: usize, k: usize, l: usize) -> SparseOp {
    let a = sparse_annihilation(dim);
    let ad = a.adjoint();
    let mut m = SparseOp::identity(dim);
    for _ in 0..l {
        m = a.mul(&m);
    }
    for _ in 0..k {
        m = ad.mul(&m);
    }
    m
}

/// Largest singular value. A monomial has a single nonzero diagonal, so this
/// is its largest entry in modulus.
fn monomial_norm(m: &SparseOp) -> f64 {
    m.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalAnsatz {
    pub kind: AnsatzKind,
    pub basis_labels: Vec<String>,
    pub coeffs: Vec<C64>,
    /// Fock dimension at which the normalizers were evaluated.
    pub norm_dim: usize,
}

impl VariationalAnsatz {
    pub fn zeros(kind: AnsatzKind, norm_dim: usize) -> Self {
        VariationalAnsatz {
            kind,
            basis_labels: kind.labels(),
            coeffs: vec![ZERO; kind.n_coeffs()],
            norm_dim,
        }
    }

    pub fn with_coeffs(kind: AnsatzKind, norm_dim: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != kind.n_coeffs() {
            return Err(Error::Dimension(format!(
                "{kind} takes {} coefficients, got {}",
                kind.n_coeffs(),
                coeffs.len()
            )));
        }
        Ok(VariationalAnsatz {
            coeffs,
            ..Self::zeros(kind, norm_dim)
        })
    }

    /// Real parameter vector: real parts, then imaginary parts.
    pub fn params(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).chain(self.coeffs.iter().map(|c| c.im)).collect()
    }

    pub fn set_params(&mut self, theta: &[f64]) {
        let k = self.coeffs.len();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c = C64::new(theta[i], theta[k + i]);
        }
    }
}

/// Reference 8 dB coefficients for the five-term ansatz. The dimension they
/// were normalized at is unknown, so they are a diagnostic only.
pub const REFERENCE_NH5_COEFFS: [(f64, f64); 5] = [
    (1.5741, -0.1206),
    (116.2624, -0.1807),
    (-53.0023, 0.1887),
    (-0.3235, 19.8160),
    (5.9651, -433.85),
];

/// Real generators G_p with H = Σ θ_p G_p for the parameter layout of
/// [`VariationalAnsatz::params`].
fn generators(kind: AnsatzKind, dim: usize) -> Vec<SparseOp> {
    let mons: Vec<SparseOp> = kind
        .monomials()
        .into_iter()
        .map(|(k, l)| {
            let m = monomial(dim, k, l);
            let norm = monomial_norm(&m);
            if norm > 0.0 {
                m.scale(C64::new(1.0 / norm, 0.0))
            } else {
                m
            }
        })
        .collect();
    let (re, im): (Vec<_>, Vec<_>) = match kind {
        AnsatzKind::NonHermitian5 => mons.iter().map(|m| (m.clone(), m.scale(IM))).unzip(),
        AnsatzKind::HermitianSym(_) => mons
            .iter()
            .map(|m| {
                let md = m.adjoint();
                (m.add(&md), m.add(&md.scale(C64::new(-1.0, 0.0))).scale(IM))
            })
            .unzip(),
    };
    re.into_iter().chain(im).collect()
}

/// Ĥ_z on `space`. The normalizers depend on the truncation, so the
/// ansatz's `norm_dim` must match.
pub fn build_hz(ansatz: &VariationalAnsatz, space: &FockSpace) -> Result<CMat> {
    if ansatz.norm_dim != space.dim() {
        return Err(Error::Convention(format!(
            "ansatz normalized at dim {}, space has dim {}",
            ansatz.norm_dim,
            space.dim()
        )));
    }
    let gens = generators(ansatz.kind, space.dim());
    let theta = ansatz.params();
    let mut h = CMat::zeros(space.dim(), space.dim());
    for (g, t) in gens.iter().zip(&theta) {
        if *t != 0.0 {
            for (i, j, v) in g.entries() {
                h[(i, j)] += v * *t;
            }
        }
    }
    Ok(h)
}

/// Ẑ_L = exp(−iĤ_z).
pub fn build_zl(ansatz: &VariationalAnsatz, space: &FockSpace) -> Result<CMat> {
    mat_exp(&(build_hz(ansatz, space)? * -IM))
}

/// Σ_u |⟨u|Ẑ|u⟩ − (−1)^u|² + |⟨u|Ẑ†|u⟩ − (−1)^u|² + |⟨u|Ẑ†Ẑ|u⟩ − 1|².
pub fn zl_loss(pair: &CodePair, z: &CMat) -> f64 {
    let mut e = 0.0;
    for (u, s) in [(&pair.zero, 1.0), (&pair.one, -1.0)] {
        let zu = z * u;
        let d = u.dotc(&zu);
        let dd = u.dotc(&(z.adjoint() * u));
        let q = zu.norm_squared();
        e += (d - s).norm_sqr() + (dd - s).norm_sqr() + (q - 1.0).powi(2);
    }
    e
}

// ---------------------------------------------------------------------------
// Banded generator with a taped Taylor exponential action

/// Square matrix stored by a fixed set of diagonals: `diags[k][i]` is
/// M[i, i + offsets[k]].
#[derive(Clone, Debug)]
struct Band {
    d: usize,
    offsets: Vec<isize>,
    diags: Vec<Vec<C64>>,
}

impl Band {
    fn zeros(d: usize, offsets: &[isize]) -> Self {
        Band {
            d,
            offsets: offsets.to_vec(),
            diags: vec![vec![ZERO; d]; offsets.len()],
        }
    }

    fn rows(d: usize, o: isize) -> std::ops::Range<usize> {
        if o >= 0 {
            0..d.saturating_sub(o as usize)
        } else {
            (-o) as usize..d
        }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let o = j as isize - i as isize;
        self.offsets.iter().position(|&x| x == o)
    }

    fn add(&mut self, i: usize, j: usize, v: C64) {
        let k = self.slot(i, j).expect("entry outside the band");
        self.diags[k][i] += v;
    }

    fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(ZERO, |k| self.diags[k][i])
    }

    fn matvec(&self, x: &[C64], scale: f64, y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (&o, diag) in self.offsets.iter().zip(&self.diags) {
            let rows = Self::rows(self.d, o);
            let shift = (rows.start as isize + o) as usize;
            for (yi, (m, xi)) in y[rows.clone()].iter_mut().zip(diag[rows].iter().zip(&x[shift..])) {
                *yi += m * xi;
            }
        }
        y.iter_mut().for_each(|v| *v *= scale);
    }

    fn adjoint_matvec(&self, x: &[C64], scale: f64, y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (&o, diag) in self.offsets.iter().zip(&self.diags) {
            let rows = Self::rows(self.d, o);
            let shift = (rows.start as isize + o) as usize;
            for (yj, (m, xi)) in y[shift..].iter_mut().zip(diag[rows.clone()].iter().zip(&x[rows])) {
                *yj += m.conj() * xi;
            }
        }
        y.iter_mut().for_each(|v| *v *= scale);
    }

    /// self += c · u v† on the stored diagonals.
    fn add_outer(&mut self, u: &[C64], v: &[C64], c: f64) {
        for (&o, diag) in self.offsets.iter().zip(self.diags.iter_mut()) {
            let rows = Self::rows(self.d, o);
            let shift = (rows.start as isize + o) as usize;
            for (m, (ui, vj)) in diag[rows.clone()].iter_mut().zip(u[rows].iter().zip(&v[shift..])) {
                *m += ui * vj.conj() * c;
            }
        }
    }

    fn norm1(&self) -> f64 {
        let mut col = vec![0.0f64; self.d];
        for (&o, diag) in self.offsets.iter().zip(&self.diags) {
            for i in Self::rows(self.d, o) {
                col[(i as isize + o) as usize] += diag[i].norm();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Norm of A/s per Taylor substep. The generators are anti-Hermitian or
/// close to it, so partial sums of this size do not cancel badly.
const TAYLOR_STEP_NORM: f64 = 4.0;

/// Terms t_j = (A/s)^j x / j! of every substep, kept for the reverse pass.
struct Tape {
    scale: f64,
    substeps: Vec<Vec<Vec<C64>>>,
}

/// exp(A)x by s substeps of a truncated Taylor series in A/s.
fn expm_action_taped(a: &Band, x: &[C64]) -> (Vec<C64>, Tape) {
    let s = (a.norm1() / TAYLOR_STEP_NORM).ceil().max(1.0);
    let scale = 1.0 / s;
    let mut cur = x.to_vec();
    let mut substeps = Vec::with_capacity(s as usize);
    let mut buf = vec![ZERO; x.len()];
    for _ in 0..s as usize {
        let mut terms = vec![cur.clone()];
        let mut y = cur.clone();
        for j in 1..80 {
            a.matvec(terms.last().unwrap(), scale / j as f64, &mut buf);
            y.iter_mut().zip(&buf).for_each(|(yi, bi)| *yi += bi);
            let small = max_norm(&buf) <= 1e-17 * max_norm(&y).max(1e-300);
            terms.push(buf.clone());
            if small {
                break;
            }
        }
        substeps.push(terms);
        cur = y;
    }
    (cur, Tape { scale, substeps })
}

/// Reverse pass: given ȳ with dE = Re⟨ȳ, dy⟩, accumulates Ā (dE = Re Σ
/// conj(Ā_ij) dA_ij) and returns x̄.
fn expm_action_backward(a: &Band, tape: &Tape, ybar: &[C64], abar: &mut Band) -> Vec<C64> {
    let mut ybar = ybar.to_vec();
    let mut tbar = vec![ZERO; ybar.len()];
    let mut buf = vec![ZERO; ybar.len()];
    for terms in tape.substeps.iter().rev() {
        tbar.copy_from_slice(&ybar);
        for j in (1..terms.len()).rev() {
            let c = tape.scale / j as f64;
            abar.add_outer(&tbar, &terms[j - 1], c);
            a.adjoint_matvec(&tbar, c, &mut buf);
            tbar.iter_mut().zip(ybar.iter().zip(&buf)).for_each(|(t, (y, b))| *t = y + b);
        }
        ybar.copy_from_slice(&tbar);
    }
    ybar
}

/// Loss of [`zl_loss`] as a function of the real parameter vector, with its
/// exact gradient.
pub struct ZlObjective {
    dim: usize,
    offsets: Vec<isize>,
    gens: Vec<Vec<(usize, usize, C64)>>,
    words: [Vec<C64>; 2],
}

impl ZlObjective {
    pub fn new(pair: &CodePair, kind: AnsatzKind) -> Self {
        let dim = pair.dim();
        let gens: Vec<Vec<_>> = generators(kind, dim).iter().map(|g| g.entries().collect()).collect();
        let mut offsets: Vec<isize> = gens
            .iter()
            .flat_map(|g| g.iter().map(|&(i, j, _)| j as isize - i as isize))
            .collect();
        offsets.sort_unstable();
        offsets.dedup();
        ZlObjective {
            dim,
            offsets,
            gens,
            words: [pair.zero.as_slice().to_vec(), pair.one.as_slice().to_vec()],
        }
    }

    pub fn n_params(&self) -> usize {
        self.gens.len()
    }

    /// A = −iĤ_z.
    fn generator(&self, theta: &[f64]) -> Band {
        let mut a = Band::zeros(self.dim, &self.offsets);
        for (g, &t) in self.gens.iter().zip(theta) {
            if t != 0.0 {
                for &(i, j, v) in g {
                    a.add(i, j, -IM * v * t);
                }
            }
        }
        a
    }

    /// (⟨u|y⟩, ⟨y|y⟩) with y = Ẑ|u⟩.
    fn terms(u: &[C64], y: &[C64]) -> (C64, f64) {
        let d: C64 = u.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
        let q: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        (d, q)
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let a = self.generator(theta);
        let mut e = 0.0;
        for (u, s) in self.words.iter().zip([1.0, -1.0]) {
            let (y, _) = expm_action_taped(&a, u);
            let (d, q) = Self::terms(u, &y);
            e += 2.0 * (d - s).norm_sqr() + (q - 1.0).powi(2);
        }
        e
    }

    pub fn loss_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let a = self.generator(theta);
        let mut abar = Band::zeros(self.dim, &self.offsets);
        let mut e = 0.0;
        for (u, s) in self.words.iter().zip([1.0, -1.0]) {
            let (y, tape) = expm_action_taped(&a, u);
            let (d, q) = Self::terms(u, &y);
            e += 2.0 * (d - s).norm_sqr() + (q - 1.0).powi(2);
            let cd = (d - s) * 4.0;
            let cq = 4.0 * (q - 1.0);
            let ybar: Vec<C64> = u.iter().zip(&y).map(|(ui, yi)| ui * cd + yi * cq).collect();
            expm_action_backward(&a, &tape, &ybar, &mut abar);
        }
        let grad = self
            .gens
            .iter()
            .map(|g| g.iter().map(|&(i, j, v)| (abar.get(i, j).conj() * (-IM * v)).re).sum())
            .collect();
        (e, grad)
    }

    /// Central differences with step `rel`·max(1, |θ_p|).
    pub fn fd_grad(&self, theta: &[f64], rel: f64) -> Vec<f64> {
        let mut th = theta.to_vec();
        (0..theta.len())
            .map(|p| {
                let h = rel * theta[p].abs().max(1.0);
                th[p] = theta[p] + h;
                let up = self.loss(&th);
                th[p] = theta[p] - h;
                let down = self.loss(&th);
                th[p] = theta[p];
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub target_loss: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 20_000,
            target_loss: 1e-4,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.learning_rate > 0.0
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let b1t = 1.0 - c.beta1.powi(self.t);
        let b2t = 1.0 - c.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grad[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= c.learning_rate * mh / (vh.sqrt() + c.epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    Exact,
    FiniteDifference,
}

impl FromStr for GradientMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GradientMethod::Exact),
            "fd" | "finite-difference" => Ok(GradientMethod::FiniteDifference),
            _ => Err(Error::InvalidArgument(format!("unknown gradient '{s}' (exact, fd)"))),
        }
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const INIT_SIGMA: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct ZlResult {
    pub ansatz: VariationalAnsatz,
    pub loss_history: Vec<f64>,
    pub best_loss: f64,
    pub converged: bool,
    pub seed: u64,
    pub gradient: GradientMethod,
}

pub fn optimize_zl(pair: &CodePair, kind: AnsatzKind, adam: AdamConfig, seed: u64) -> Result<ZlResult> {
    optimize_zl_with(pair, kind, adam, seed, GradientMethod::Exact)
}

pub fn optimize_zl_with(
    pair: &CodePair,
    kind: AnsatzKind,
    adam: AdamConfig,
    seed: u64,
    gradient: GradientMethod,
) -> Result<ZlResult> {
    optimize_zl_until(pair, kind, adam, seed, gradient, None)
}

/// As [`optimize_zl_with`], but also stops (unconverged) once `deadline`
/// has passed.
pub fn optimize_zl_until(
    pair: &CodePair,
    kind: AnsatzKind,
    adam: AdamConfig,
    seed: u64,
    gradient: GradientMethod,
    deadline: Option<Instant>,
) -> Result<ZlResult> {
    adam.validate()?;
    let obj = ZlObjective::new(pair, kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_SIGMA).expect("σ > 0");
    let mut theta: Vec<f64> = (0..obj.n_params()).map(|_| normal.sample(&mut rng)).collect();
    let mut opt = Adam::new(adam, theta.len());
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, theta.clone());
    for _ in 0..adam.max_iters {
        let (loss, grad) = match gradient {
            GradientMethod::Exact => obj.loss_and_grad(&theta),
            GradientMethod::FiniteDifference => (obj.loss(&theta), obj.fd_grad(&theta, FD_STEP)),
        };
        if !loss.is_finite() {
            break;
        }
        history.push(loss);
        if loss < best.0 {
            best = (loss, theta.clone());
        }
        if loss < adam.target_loss || deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        opt.step(&mut theta, &grad);
    }
    let mut ansatz = VariationalAnsatz::zeros(kind, pair.dim());
    ansatz.set_params(&best.1);
    Ok(ZlResult {
        ansatz,
        converged: best.0 < adam.target_loss,
        best_loss: best.0,
        loss_history: history,
        seed,
        gradient,
    })
}

// ---------------------------------------------------------------------------
// GRAPE

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseGrid {
    pub omega_q: Vec<f64>,
    pub omega_p: Vec<f64>,
}

impl PulseGrid {
    pub fn zeros(segments: usize) -> Self {
        PulseGrid {
            omega_q: vec![0.0; segments],
            omega_p: vec![0.0; segments],
        }
    }

    pub fn segments(&self) -> usize {
        self.omega_q.len()
    }

    /// [Ω_q..., Ω_p...].
    pub fn params(&self) -> Vec<f64> {
        self.omega_q.iter().chain(&self.omega_p).copied().collect()
    }

    pub fn from_params(theta: &[f64]) -> Self {
        let k = theta.len() / 2;
        PulseGrid {
            omega_q: theta[..k].to_vec(),
            omega_p: theta[k..].to_vec(),
        }
    }

    /// Each segment split into `factor` equal pieces with the same amplitude.
    pub fn refined(&self, factor: usize) -> Self {
        let rep = |v: &[f64]| v.iter().flat_map(|&x| std::iter::repeat_n(x, factor)).collect();
        PulseGrid {
            omega_q: rep(&self.omega_q),
            omega_p: rep(&self.omega_p),
        }
    }
}

/// Ĥ = −χ_e|e⟩⟨e|n̂ − χ_f|f⟩⟨f|n̂ + Ω_q(t)q̂ + Ω_p(t)p̂ in the rotating frame,
/// with q̂ = (â+â†)/√2 and p̂ = i(â†−â)/√2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeProblem {
    pub chi_e: f64,
    pub chi_f: f64,
    pub segments: usize,
    /// In units of 1/χ.
    pub total_time: f64,
    pub osc_dim: usize,
    pub amplitude_bound: Option<f64>,
}

impl GrapeProblem {
    pub fn new(osc_dim: usize, segments: usize, total_time: f64) -> Result<Self> {
        let p = GrapeProblem {
            chi_e: 1.0,
            chi_f: 1.0,
            segments,
            total_time,
            osc_dim,
            amplitude_bound: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 || !(self.total_time > 0.0 && self.total_time.is_finite()) || self.osc_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "GRAPE needs segments ≥ 1, T > 0 and osc_dim ≥ 2 (got {}, {}, {})",
                self.segments, self.total_time, self.osc_dim
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.segments as f64
    }

    pub fn joint_dim(&self) -> usize {
        3 * self.osc_dim
    }

    fn chis(&self) -> [f64; 3] {
        [0.0, self.chi_e, self.chi_f]
    }

    fn check(&self, target: &CMat, pulses: &PulseGrid) -> Result<()> {
        self.validate()?;
        let d = self.joint_dim();
        if target.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "target is {}x{}, joint space has dimension {d}",
                target.nrows(),
                target.ncols()
            )));
        }
        if pulses.segments() != self.segments || pulses.omega_p.len() != self.segments {
            return Err(Error::Dimension(format!(
                "pulse grid has {} segments, problem has {}",
                pulses.segments(),
                self.segments
            )));
        }
        if pulses.params().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pulse amplitude".into()));
        }
        Ok(())
    }
}

struct Quadratures {
    n: Vec<f64>,
    q: CMat,
    p: CMat,
}

impl Quadratures {
    fn new(dim: usize) -> Self {
        let a = sparse_annihilation(dim).to_dense();
        let ad = a.adjoint();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Quadratures {
            n: (0..dim).map(|k| k as f64).collect(),
            q: (&a + &ad) * C64::new(r, 0.0),
            p: (&ad - &a) * C64::new(0.0, r),
        }
    }

    fn hamiltonian(&self, chi: f64, wq: f64, wp: f64) -> CMat {
        let mut h = &self.q * C64::new(wq, 0.0) + &self.p * C64::new(wp, 0.0);
        for (k, nk) in self.n.iter().enumerate() {
            h[(k, k)] -= C64::new(chi * nk, 0.0);
        }
        h
    }
}

/// Eigen-data of one segment of one ancilla block.
struct Segment {
    vals: Vec<f64>,
    vecs: CMat,
    u: CMat,
}

fn segment(h: &CMat, dt: f64) -> Result<Segment> {
    let (vals, vecs) = eig_hermitian(h)?;
    let mut scaled = vecs.clone();
    for (mut col, l) in scaled.column_iter_mut().zip(&vals) {
        col *= (-IM * l * dt).exp();
    }
    let u = cgemm(&scaled, &vecs.adjoint());
    Ok(Segment { vals, vecs, u })
}

fn block_segments(problem: &GrapeProblem, pulses: &PulseGrid, quad: &Quadratures) -> Result<Vec<Vec<Segment>>> {
    let dt = problem.dt();
    problem
        .chis()
        .iter()
        .map(|&chi| {
            (0..problem.segments)
                .map(|k| segment(&quad.hamiltonian(chi, pulses.omega_q[k], pulses.omega_p[k]), dt))
                .collect()
        })
        .collect()
}

/// Û(T) on qutrit⊗oscillator (ancilla-major). The Hamiltonian conserves
/// the ancilla level, so Û(T) is block diagonal.
pub fn grape_propagator(problem: &GrapeProblem, pulses: &PulseGrid) -> Result<CMat> {
    problem.validate()?;
    let n = problem.osc_dim;
    let quad = Quadratures::new(n);
    let blocks = block_segments(problem, pulses, &quad)?;
    let mut u = CMat::zeros(3 * n, 3 * n);
    for (x, segs) in blocks.iter().enumerate() {
        let mut ux = CMat::identity(n, n);
        for s in segs {
            ux = cgemm(&s.u, &ux);
        }
        u.view_mut((x * n, x * n), (n, n)).copy_from(&ux);
    }
    Ok(u)
}

fn diagonal_blocks(target: &CMat, n: usize) -> Vec<CMat> {
    (0..3).map(|x| target.view((x * n, x * n), (n, n)).clone_owned()).collect()
}

/// Φ = |Tr(Û_target†Û(T))| / D.
pub fn grape_fidelity(problem: &GrapeProblem, target: &CMat, pulses: &PulseGrid) -> Result<f64> {
    problem.check(target, pulses)?;
    let u = grape_propagator(problem, pulses)?;
    Ok(trace_overlap(target, &u).norm() / problem.joint_dim() as f64)
}

fn trace_overlap(p: &CMat, u: &CMat) -> C64 {
    p.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Upper bound on Φ for any ancilla-conserving evolution:
/// Σ_x ‖P_xx‖_* / D with P_xx the diagonal ancilla blocks of the target.
pub fn grape_upper_bound(problem: &GrapeProblem, target: &CMat) -> Result<f64> {
    problem.check(target, &PulseGrid::zeros(problem.segments))?;
    let nuclear: f64 = diagonal_blocks(target, problem.osc_dim)
        .into_iter()
        .map(|b| b.singular_values().iter().sum::<f64>())
        .sum();
    Ok(nuclear / problem.joint_dim() as f64)
}

/// Φ and its exact gradient in the [`PulseGrid::params`] layout, from the
/// eigendecomposition of every segment Hamiltonian.
pub fn grape_gradient(problem: &GrapeProblem, target: &CMat, pulses: &PulseGrid) -> Result<(f64, Vec<f64>)> {
    problem.check(target, pulses)?;
    let n = problem.osc_dim;
    let k = problem.segments;
    let dt = problem.dt();
    let quad = Quadratures::new(n);
    let blocks = block_segments(problem, pulses, &quad)?;
    let targets = diagonal_blocks(target, n);
    let mut f = ZERO;
    // df/dθ per block, combined after f is known
    let mut dfs = vec![ZERO; 2 * k];
    for (segs, p) in blocks.iter().zip(&targets) {
        let pd = p.adjoint();
        // prefix[k] = U_{k−1}…U_0, suffix[k] = U_{K−1}…U_{k+1}
        let mut prefix = vec![CMat::identity(n, n)];
        for s in segs {
            let next = cgemm(&s.u, prefix.last().unwrap());
            prefix.push(next);
        }
        let mut suffix = vec![CMat::identity(n, n); k];
        for j in (0..k.saturating_sub(1)).rev() {
            suffix[j] = cgemm(&suffix[j + 1], &segs[j + 1].u);
        }
        f += trace_overlap(p, &prefix[k]);
        for (j, s) in segs.iter().enumerate() {
            let vd = s.vecs.adjoint();
            let m = cgemm(&cgemm(&prefix[j], &pd), &suffix[j]);
            let mt = cgemm(&cgemm(&vd, &m), &s.vecs);
            let gamma = CMat::from_fn(n, n, |a, b| {
                let (la, lb) = (s.vals[a], s.vals[b]);
                let ea = (-IM * la * dt).exp();
                if (la - lb).abs() > 1e-9 * (1.0 + la.abs()) {
                    (ea - (-IM * lb * dt).exp()) / (la - lb)
                } else {
                    -IM * dt * ea
                }
            });
            for (c, op) in [(0usize, &quad.q), (1, &quad.p)] {
                let ct = cgemm(&cgemm(&vd, op), &s.vecs);
                let mut acc = ZERO;
                for a in 0..n {
                    for b in 0..n {
                        acc += mt[(b, a)] * gamma[(a, b)] * ct[(a, b)];
                    }
                }
                dfs[c * k + j] += acc;
            }
        }
    }
    let d = problem.joint_dim() as f64;
    let phi = f.norm() / d;
    let grad = dfs
        .iter()
        .map(|df| if f.norm() > 0.0 { (f.conj() * df).re / (f.norm() * d) } else { 0.0 })
        .collect();
    Ok((phi, grad))
}

/// Central differences of Φ with step `rel`·max(1, |Ω|).
pub fn grape_gradient_fd(problem: &GrapeProblem, target: &CMat, pulses: &PulseGrid, rel: f64) -> Result<Vec<f64>> {
    let theta = pulses.params();
    let mut th = theta.clone();
    let mut out = Vec::with_capacity(theta.len());
    for p in 0..theta.len() {
        let h = rel * theta[p].abs().max(1.0);
        th[p] = theta[p] + h;
        let up = grape_fidelity(problem, target, &PulseGrid::from_params(&th))?;
        th[p] = theta[p] - h;
        let down = grape_fidelity(problem, target, &PulseGrid::from_params(&th))?;
        th[p] = theta[p];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeConfig {
    pub iters: usize,
    /// Adam step on the dimensionless amplitudes Ω·T.
    pub learning_rate: f64,
    /// Standard deviation of the initial Ω·T.
    pub init_scale: f64,
    pub seed: u64,
    pub gradient: GradientMethod,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        GrapeConfig {
            iters: 200,
            learning_rate: 0.05,
            init_scale: 0.01,
            seed: 0,
            gradient: GradientMethod::Exact,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrapeResult {
    pub pulses: PulseGrid,
    pub fidelity_history: Vec<f64>,
    pub initial_fidelity: f64,
    pub best_fidelity: f64,
    pub stalled: bool,
    pub upper_bound: f64,
}

pub const STALL_WINDOW: usize = 50;
pub const STALL_TOL: f64 = 1e-10;

pub fn grape_optimize(problem: &GrapeProblem, target: &CMat, cfg: &GrapeConfig) -> Result<GrapeResult> {
    problem.validate()?;
    let t = problem.total_time;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_scale.max(f64::MIN_POSITIVE)).expect("σ > 0");
    // optimize the dimensionless Ω·T
    let mut theta: Vec<f64> = (0..2 * problem.segments).map(|_| normal.sample(&mut rng)).collect();
    let to_pulses = |th: &[f64]| {
        let mut v: Vec<f64> = th.iter().map(|x| x / t).collect();
        if let Some(b) = problem.amplitude_bound {
            v.iter_mut().for_each(|x| *x = x.clamp(-b, b));
        }
        PulseGrid::from_params(&v)
    };
    let mut opt = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        theta.len(),
    );
    let upper_bound = grape_upper_bound(problem, target)?;
    let mut history = Vec::with_capacity(cfg.iters + 1);
    let mut best = (f64::NEG_INFINITY, to_pulses(&theta));
    let mut stalled = false;
    for it in 0..=cfg.iters {
        let pulses = to_pulses(&theta);
        let (phi, grad) = match cfg.gradient {
            GradientMethod::Exact => grape_gradient(problem, target, &pulses)?,
            GradientMethod::FiniteDifference => (
                grape_fidelity(problem, target, &pulses)?,
                grape_gradient_fd(problem, target, &pulses, FD_STEP)?,
            ),
        };
        history.push(phi);
        if phi > best.0 {
            best = (phi, pulses);
        }
        if it >= STALL_WINDOW {
            let before = history[..=it - STALL_WINDOW].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best.0 - before < STALL_TOL {
                stalled = true;
                break;
            }
        }
        if it == cfg.iters {
            break;
        }
        // ascend: chain rule through Ω = θ/T
        let g: Vec<f64> = grad.iter().map(|x| -x / t).collect();
        opt.step(&mut theta, &g);
    }
    Ok(GrapeResult {
        pulses: best.1,
        initial_fidelity: history[0],
        fidelity_history: history,
        best_fidelity: best.0,
        stalled,
        upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::Branch;
    use crate::numerics::{hermiticity_defect, max_abs, unitarity_defect};
    use crate::recovery::qec_code;
    use rand::Rng;

    fn random_theta(n: usize, seed: u64, sigma: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| sigma * (rng.random::<f64>() - 0.5)).collect()
    }

    fn code() -> CodePair {
        qec_code(1, 0.921, Branch::Plus).unwrap().1
    }

    #[test]
    fn ansatz_bases() {
        assert_eq!(
            AnsatzKind::NonHermitian5.labels(),
            vec!["I", "a†^2", "a^2", "a†a", "a†^2a^2"]
        );
        assert_eq!(AnsatzKind::HermitianSym(6).n_coeffs(), 36);
        assert_eq!("sym6".parse::<AnsatzKind>().unwrap(), AnsatzKind::HermitianSym(6));
        assert_eq!("hermitian-sym6".parse::<AnsatzKind>().unwrap(), AnsatzKind::HermitianSym(6));
        assert!("sym".parse::<AnsatzKind>().is_err());
        // ‖â†²â²‖₂ on d levels is (d−1)(d−2)
        let m = monomial(10, 2, 2);
        assert!((monomial_norm(&m) - 72.0).abs() < 1e-12);
        let dense = m.to_dense();
        assert!((dense.singular_values().max() - 72.0).abs() < 1e-9);
    }

    #[test]
    fn hz_special_cases() {
        let space = FockSpace::with_pad(12, 12).unwrap();
        let zero = VariationalAnsatz::zeros(AnsatzKind::NonHermitian5, 12);
        assert_eq!(build_hz(&zero, &space).unwrap(), CMat::zeros(12, 12));
        assert!(max_abs(&(build_zl(&zero, &space).unwrap() - CMat::identity(12, 12))) < 1e-15);
        let mut pi = zero.clone();
        pi.coeffs[0] = C64::new(std::f64::consts::PI, 0.0);
        assert!(max_abs(&(build_zl(&pi, &space).unwrap() + CMat::identity(12, 12))) < 1e-14);
        let mut sym = VariationalAnsatz::zeros(AnsatzKind::HermitianSym(4), 12);
        sym.set_params(&random_theta(32, 3, 2.0));
        let h = build_hz(&sym, &space).unwrap();
        assert!(hermiticity_defect(&h) < 1e-12);
        assert!(unitarity_defect(&build_zl(&sym, &space).unwrap()) < 1e-10);
        let wrong = FockSpace::with_pad(14, 14).unwrap();
        assert!(matches!(build_hz(&sym, &wrong), Err(Error::Convention(_))));
    }

    #[test]
    fn loss_special_cases() {
        let pair = code();
        let d = pair.dim();
        let id = CMat::identity(d, d);
        assert!((zl_loss(&pair, &id) - 8.0).abs() < 1e-12);
        let ideal = crate::numerics::outer(&pair.zero, &pair.zero) - crate::numerics::outer(&pair.one, &pair.one)
            + (&id - crate::codes::code_projector(&pair).unwrap());
        assert!(zl_loss(&pair, &ideal) < 1e-20);
        let x = crate::codes::logical_x(&FockSpace::with_pad(d, d).unwrap());
        assert!(zl_loss(&pair, &x) > 1.0);
    }

    #[test]
    fn taped_loss_matches_dense_and_gradient_matches_fd() {
        let pair = code();
        let space = FockSpace::with_pad(pair.dim(), pair.dim()).unwrap();
        for kind in [AnsatzKind::NonHermitian5, AnsatzKind::HermitianSym(3)] {
            let obj = ZlObjective::new(&pair, kind);
            let theta = random_theta(obj.n_params(), 11, 3.0);
            let mut ans = VariationalAnsatz::zeros(kind, pair.dim());
            ans.set_params(&theta);
            let dense = zl_loss(&pair, &build_zl(&ans, &space).unwrap());
            let (fast, grad) = obj.loss_and_grad(&theta);
            assert!((dense - fast).abs() < 1e-10 * dense.max(1.0), "{dense} vs {fast}");
            let fd = obj.fd_grad(&theta, FD_STEP);
            let scale = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
            for (g, f) in grad.iter().zip(&fd) {
                assert!((g - f).abs() < 1e-6 * scale, "{g} vs {f}");
            }
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, 2);
        let mut x = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0), 20.0 * (x[1] + 0.5)];
            adam.step(&mut x, &g);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
        assert!(AdamConfig { beta1: 1.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn optimizer_is_deterministic_and_decreasing() {
        let pair = code();
        let cfg = AdamConfig {
            learning_rate: 5e-2,
            max_iters: 300,
            ..AdamConfig::default()
        };
        let a = optimize_zl(&pair, AnsatzKind::NonHermitian5, cfg, 4).unwrap();
        let b = optimize_zl(&pair, AnsatzKind::NonHermitian5, cfg, 4).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert!(a.best_loss < 0.5 * a.loss_history[0]);
        let h = &a.loss_history[20..];
        let ups = h.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(ups as f64 <= 0.05 * h.len() as f64, "{ups} increases");
    }

    #[test]
    fn reference_coefficients_are_a_diagnostic_only() {
        let pair = code();
        let coeffs = REFERENCE_NH5_COEFFS.iter().map(|&(re, im)| C64::new(re, im)).collect();
        let ans = VariationalAnsatz::with_coeffs(AnsatzKind::NonHermitian5, pair.dim(), coeffs).unwrap();
        let loss = ZlObjective::new(&pair, AnsatzKind::NonHermitian5).loss(&ans.params());
        assert!(loss.is_finite() && loss > 1.0);
    }

    fn toy_target(n: usize, seed: u64) -> CMat {
        let d = 3 * n;
        let th = random_theta(2 * d * d, seed, 2.0);
        let g = CMat::from_fn(d, d, |i, j| C64::new(th[i * d + j], th[d * d + i * d + j]));
        mat_exp(&((&g + g.adjoint()) * -IM)).unwrap()
    }

    #[test]
    fn grape_gradients_agree() {
        let problem = GrapeProblem::new(4, 3, 0.7).unwrap();
        let target = toy_target(4, 5);
        let th = random_theta(6, 8, 4.0);
        let pulses = PulseGrid::from_params(&th);
        let (phi, exact) = grape_gradient(&problem, &target, &pulses).unwrap();
        assert!((phi - grape_fidelity(&problem, &target, &pulses).unwrap()).abs() < 1e-13);
        let fd = grape_gradient_fd(&problem, &target, &pulses, FD_STEP).unwrap();
        let scale = exact.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for (e, f) in exact.iter().zip(&fd) {
            assert!((e - f).abs() <= 1e-5 * scale, "{e} vs {f}");
        }
    }

    #[test]
    fn grape_refinement_and_phase_invariance() {
        let problem = GrapeProblem::new(6, 4, 1.3).unwrap();
        let pulses = PulseGrid::from_params(&random_theta(8, 2, 3.0));
        let u = grape_propagator(&problem, &pulses).unwrap();
        assert!(unitarity_defect(&u) < 1e-12);
        let fine = GrapeProblem {
            segments: 8,
            ..problem.clone()
        };
        let u2 = grape_propagator(&fine, &pulses.refined(2)).unwrap();
        assert!(max_abs(&(u - u2)) < 1e-10);
        let target = toy_target(6, 1);
        let phased = &target * C64::from_polar(1.0, 0.83);
        let a = grape_fidelity(&problem, &target, &pulses).unwrap();
        let b = grape_fidelity(&problem, &phased, &pulses).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn grape_respects_the_conservation_bound() {
        let problem = GrapeProblem::new(4, 3, 0.5).unwrap();
        let target = toy_target(4, 9);
        let bound = grape_upper_bound(&problem, &target).unwrap();
        let cfg = GrapeConfig {
            iters: 60,
            learning_rate: 0.1,
            init_scale: 0.5,
            ..GrapeConfig::default()
        };
        let res = grape_optimize(&problem, &target, &cfg).unwrap();
        assert!(res.best_fidelity >= res.initial_fidelity);
        assert!(res.best_fidelity <= bound + 1e-12);
        let again = grape_optimize(&problem, &target, &cfg).unwrap();
        assert_eq!(res.fidelity_history, again.fidelity_history);
    }

    #[test]
    fn grape_zero_pulses_give_trace_of_target() {
        let problem = GrapeProblem {
            chi_e: 0.0,
            chi_f: 0.0,
            ..GrapeProblem::new(5, 2, 1.0).unwrap()
        };
        let target = toy_target(5, 4);
        let phi = grape_fidelity(&problem, &target, &PulseGrid::zeros(2)).unwrap();
        assert!((phi - target.trace().norm() / 15.0).abs() < 1e-14);
        let mut bad = PulseGrid::zeros(2);
        bad.omega_q[0] = f64::NAN;
        assert!(grape_fidelity(&problem, &target, &bad).is_err());
        assert!(grape_fidelity(&problem, &CMat::identity(3, 3), &PulseGrid::zeros(2)).is_err());
    }
}
