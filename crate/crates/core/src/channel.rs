//! Short-time Kraus expansion of loss plus dephasing and its
//! code-adapted eigen-transform.

use serde::Serialize;

use crate::codes::CodePair;
use crate::error::{Error, Result};
use crate::fock::{ladder_ops, FockSpace};
use crate::numerics::{eig_symmetric, expect, CMat, LindbladSpec, RMat, C64};

/// Loss rate κ, dephasing rate κ_φ and the short step τ. Rates follow the
/// master-equation convention (κ/2)D[â] + (κ_φ/2)D[n̂].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseParams {
    pub kappa: f64,
    pub kappa_phi: f64,
    pub tau: f64,
}

pub const SMALL_STEP_WARNING: f64 = 0.1;

impl NoiseParams {
    pub fn new(kappa: f64, kappa_phi: f64, tau: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa_phi >= 0.0 && tau >= 0.0) || !(kappa + kappa_phi + tau).is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise parameters κ={kappa}, κ_φ={kappa_phi}, τ={tau} must be finite and ≥ 0"
            )));
        }
        Ok(NoiseParams { kappa, kappa_phi, tau })
    }

    /// κ/κ_φ = `ratio` with κτ fixed.
    pub fn from_ratio(kappa_tau: f64, ratio: f64) -> Result<Self> {
        Self::new(kappa_tau, kappa_tau / ratio, 1.0)
    }

    /// Messages for steps that leave the short-time regime, given ⟨n̂²⟩ of
    /// the encoded state.
    pub fn warnings(&self, mean_n2: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.kappa * self.tau > SMALL_STEP_WARNING {
            out.push(format!("κτ = {:.3} is not small", self.kappa * self.tau));
        }
        let deph = self.kappa_phi * self.tau * mean_n2;
        if deph > SMALL_STEP_WARNING {
            out.push(format!("κ_φτ⟨n̂²⟩ = {deph:.3} is not small"));
        }
        out
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        NoiseParams { tau, ..*self }
    }
}

/// {Â₁, Â₂, Â₃} = {√(κτ)â, √(κ_φτ)n̂, Î − (κτ/2)n̂ − (κ_φτ/2)n̂²}.
pub fn short_time_kraus(space: &FockSpace, p: &NoiseParams) -> Vec<CMat> {
    let (a, _, n) = ladder_ops(space);
    let d = space.dim();
    let kt = p.kappa * p.tau;
    let pt = p.kappa_phi * p.tau;
    let n2 = &n * &n;
    let a3 = CMat::identity(d, d) - &n * C64::new(0.5 * kt, 0.0) - n2 * C64::new(0.5 * pt, 0.0);
    vec![a * C64::new(kt.sqrt(), 0.0), &n * C64::new(pt.sqrt(), 0.0), a3]
}

/// Master equation matching the short-time set: jumps â at κ and n̂ at κ_φ,
/// no Hamiltonian.
pub fn noise_lindblad(space: &FockSpace, p: &NoiseParams) -> Result<LindbladSpec> {
    let (a, _, n) = ladder_ops(space);
    let d = space.dim();
    LindbladSpec::new(CMat::zeros(d, d), vec![(a, p.kappa), (n, p.kappa_phi)])
}

fn gram_on(u: &crate::CVec, ops: &[CMat]) -> CMat {
    let imgs: Vec<_> = ops.iter().map(|o| o * u).collect();
    CMat::from_fn(ops.len(), ops.len(), |i, j| imgs[i].dotc(&imgs[j]))
}

/// J_ij = ⟨u_L|Â_i†Â_j|u_L⟩, evaluated at u = 0 and required to agree at
/// u = 1.
pub fn j_matrix(pair: &CodePair, a_ops: &[CMat]) -> Result<RMat> {
    if a_ops.iter().any(|o| o.nrows() != pair.dim() || o.ncols() != pair.dim()) {
        return Err(Error::Dimension("Kraus operators do not match the code dimension".into()));
    }
    let j0 = gram_on(&pair.zero, a_ops);
    let j1 = gram_on(&pair.one, a_ops);
    let scale = j0.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
    let dev = (&j0 - &j1).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if dev > 1e-10 * scale.max(1.0) {
        return Err(Error::Contract(format!(
            "J depends on the codeword: max |J(0) − J(1)| = {dev:.3e}"
        )));
    }
    let imag = j0.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if imag > 1e-10 * scale.max(1.0) {
        return Err(Error::Contract(format!("J has imaginary part {imag:.3e}")));
    }
    let j = RMat::from_fn(a_ops.len(), a_ops.len(), |r, c| 0.5 * (j0[(r, c)].re + j0[(c, r)].re));
    Ok(j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Flip,
    Preserve,
}

/// Kraus set rotated to diagonalize J. `f_ops = [F̂₁, F̂₂, F̂₃]`: F̂₃ ∝ â flips
/// parity; F̂₁ and F̂₂ preserve it and are ordered by ascending Λ, so F̂₂ is
/// the identity-like one.
#[derive(Clone, Debug)]
pub struct TransformedKraus {
    pub a_ops: Vec<CMat>,
    pub j: RMat,
    /// Column i holds the coefficients of F̂ᵢ in terms of Â₁..Â₃.
    pub v: RMat,
    pub lambdas: [f64; 3],
    pub f_ops: Vec<CMat>,
    pub labels: [Parity; 3],
    /// max |J₁₂|, |J₁₃|; zero by parity for the superposition code.
    pub parity_mixing: f64,
    /// Frobenius norm of P_L F̂ᵢ†F̂ⱼ P_L − Λᵢδᵢⱼ P_L, maximized over (i, j).
    pub kl_residual: f64,
}

pub fn transform_kraus(pair: &CodePair, space: &FockSpace, p: &NoiseParams) -> Result<TransformedKraus> {
    let a_ops = short_time_kraus(space, p);
    let j = j_matrix(pair, &a_ops)?;
    let scale = j.abs().max().max(1e-300);
    let parity_mixing = j[(0, 1)].abs().max(j[(0, 2)].abs());
    if parity_mixing > 1e-10 * scale {
        return Err(Error::Contract(format!(
            "J mixes the parity-flipping Kraus operator with the others ({parity_mixing:.3e})"
        )));
    }
    let block = RMat::from_fn(2, 2, |r, c| j[(r + 1, c + 1)]);
    let (vals, vecs) = eig_symmetric(&block)?;
    let mut v = RMat::zeros(3, 3);
    for (col, k) in [(0usize, 0usize), (1, 1)] {
        let mut w = [vecs[(0, k)], vecs[(1, k)]];
        // Sign fixed by the larger component.
        let lead = if w[0].abs() >= w[1].abs() { w[0] } else { w[1] };
        if lead < 0.0 {
            w = [-w[0], -w[1]];
        }
        v[(1, col)] = w[0];
        v[(2, col)] = w[1];
    }
    v[(0, 2)] = 1.0;
    let lambdas = [vals[0], vals[1], j[(0, 0)]];
    let f_ops: Vec<CMat> = (0..3)
        .map(|i| {
            let mut f = CMat::zeros(space.dim(), space.dim());
            for (k, a) in a_ops.iter().enumerate() {
                if v[(k, i)] != 0.0 {
                    f += a * C64::new(v[(k, i)], 0.0);
                }
            }
            f
        })
        .collect();
    let kl_residual = kl_residual(pair, &f_ops, &lambdas);
    Ok(TransformedKraus {
        a_ops,
        j,
        v,
        lambdas,
        f_ops,
        labels: [Parity::Preserve, Parity::Preserve, Parity::Flip],
        parity_mixing,
        kl_residual,
    })
}

fn kl_residual(pair: &CodePair, f_ops: &[CMat], lambdas: &[f64; 3]) -> f64 {
    let words = [&pair.zero, &pair.one];
    let imgs: Vec<Vec<_>> = f_ops.iter().map(|f| words.iter().map(|u| f * *u).collect()).collect();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut fro = 0.0;
            for u in 0..2 {
                for w in 0..2 {
                    let mut m = imgs[i][u].dotc(&imgs[j][w]);
                    if i == j && u == w {
                        m -= lambdas[i];
                    }
                    fro += m.norm_sqr();
                }
            }
            worst = worst.max(fro.sqrt());
        }
    }
    worst
}

/// ‖P_L F̂ᵢ†F̂ⱼ P_L‖ restricted to the code space, as a 2×2 Frobenius norm.
pub fn code_block_norm(pair: &CodePair, fi: &CMat, fj: &CMat) -> f64 {
    let words = [&pair.zero, &pair.one];
    let mut fro = 0.0;
    for u in words {
        for w in words {
            fro += (fi * u).dotc(&(fj * w)).norm_sqr();
        }
    }
    fro.sqrt()
}

/// Σ_k K ρ K†.
pub fn apply_channel(kraus: &[CMat], rho: &CMat) -> Result<CMat> {
    let d = rho.nrows();
    if kraus.iter().any(|k| k.ncols() != d) {
        return Err(Error::Dimension("Kraus operator does not match ρ".into()));
    }
    let rows = kraus.first().map_or(d, |k| k.nrows());
    let mut out = CMat::zeros(rows, rows);
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    Ok(out)
}

/// ⟨n̂²⟩ of a codeword, for [`NoiseParams::warnings`].
pub fn mean_n2(pair: &CodePair) -> f64 {
    let space = FockSpace::with_pad(pair.dim(), pair.dim()).expect("code dimension ≥ 4");
    let (_, _, n) = ladder_ops(&space);
    expect(&pair.zero, &(&n * &n), &pair.zero).re
}

/// Exact propagator of the loss-plus-dephasing master equation over a fixed
/// time. With no Hamiltonian the generator never mixes different diagonals
/// of ρ in the Fock basis: the line ρ_{j,j+m} obeys
/// ẋ_j = −[κ(2j+m)/2 + κ_φm²/2]x_j + κ√((j+1)(j+m+1)) x_{j+1},
/// and the line ρ_{j+m,j} the same equation. Each line gets its own small
/// matrix exponential, built once and reused for every `apply`.
#[derive(Clone, Debug)]
pub struct LossDephasingPropagator {
    dim: usize,
    time: f64,
    lines: Vec<RMat>,
}

impl LossDephasingPropagator {
    pub fn new(dim: usize, p: &NoiseParams) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("empty Fock space".into()));
        }
        let t = p.tau;
        let mut lines = Vec::with_capacity(dim);
        for m in 0..dim {
            let len = dim - m;
            let mut gen = RMat::zeros(len, len);
            for j in 0..len {
                let (jf, mf) = (j as f64, m as f64);
                gen[(j, j)] = -(p.kappa * (2.0 * jf + mf) + p.kappa_phi * mf * mf) * 0.5 * t;
                if j + 1 < len {
                    gen[(j, j + 1)] = p.kappa * ((jf + 1.0) * (jf + mf + 1.0)).sqrt() * t;
                }
            }
            lines.push(crate::numerics::mat_exp(&gen)?);
        }
        Ok(LossDephasingPropagator { dim, time: t, lines })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Evolve any operator (not only a density matrix).
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        let d = self.dim;
        if rho.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, propagator acts on {d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let mut out = CMat::zeros(d, d);
        for (m, e) in self.lines.iter().enumerate() {
            let len = d - m;
            for j in 0..len {
                let mut up = C64::new(0.0, 0.0);
                let mut low = C64::new(0.0, 0.0);
                for i in j..len {
                    let w = e[(j, i)];
                    if w == 0.0 {
                        continue;
                    }
                    up += rho[(i, i + m)] * w;
                    if m > 0 {
                        low += rho[(i + m, i)] * w;
                    }
                }
                out[(j, j + m)] = up;
                if m > 0 {
                    out[(j + m, j)] = low;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{build_code, Branch};
    use crate::numerics::{max_abs, outer};

    const R8: f64 = 0.921;

    #[test]
    fn line_propagator_matches_general_lindblad() {
        use crate::numerics::{LindbladPropagator, PropagationMethod};
        let space = FockSpace::with_pad(9, 9).unwrap();
        let p = NoiseParams::new(0.7, 0.3, 0.45).unwrap();
        let fast = LossDephasingPropagator::new(9, &p).unwrap();
        let general =
            LindbladPropagator::new(&noise_lindblad(&space, &p).unwrap(), PropagationMethod::Liouvillian).unwrap();
        // a generic non-Hermitian operator exercises both triangles
        let op = CMat::from_fn(9, 9, |i, j| C64::new((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.07));
        let a = fast.apply(&op).unwrap();
        let b = general.apply(&op, p.tau).unwrap();
        assert!(max_abs(&(a - b)) < 1e-11);
    }

    fn setup(kt: f64) -> (FockSpace, CodePair, NoiseParams) {
        let space = FockSpace::sized_for(3, R8);
        let pair = build_code(&space, 1, R8, Branch::Plus).unwrap();
        (space, pair, NoiseParams::new(kt, kt / 8.5, 1.0).unwrap())
    }

    #[test]
    fn zero_step_gives_identity_set() {
        let space = FockSpace::new(10).unwrap();
        let ks = short_time_kraus(&space, &NoiseParams::new(1.0, 0.3, 0.0).unwrap());
        assert_eq!(max_abs(&ks[0]), 0.0);
        assert_eq!(max_abs(&ks[1]), 0.0);
        assert_eq!(ks[2], CMat::identity(10, 10));
    }

    #[test]
    fn loss_amplitude() {
        let space = FockSpace::new(10).unwrap();
        let ks = short_time_kraus(&space, &NoiseParams::new(1.0, 0.0, 0.01).unwrap());
        assert!((ks[0][(0, 1)].re - 0.1).abs() < 1e-15);
    }

    fn completeness_residual(tau: f64) -> f64 {
        let space = FockSpace::new(20).unwrap();
        let ks = short_time_kraus(&space, &NoiseParams::new(1.0, 0.2, tau).unwrap());
        let mut s = CMat::zeros(20, 20);
        for k in &ks {
            s += k.adjoint() * k;
        }
        let r = s - CMat::identity(20, 20);
        r.view((0, 0), (7, 7)).iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    #[test]
    fn completeness_defect_is_second_order() {
        let ratio = completeness_residual(0.01) / completeness_residual(0.005);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn j_structure() {
        let (space, pair, p) = setup(0.01);
        let ks = short_time_kraus(&space, &p);
        let j = j_matrix(&pair, &ks).unwrap();
        assert!(j[(0, 1)].abs() < 1e-12 && j[(0, 2)].abs() < 1e-12);
        assert!((&j - j.transpose()).abs().max() < 1e-12);
        let mean_n = crate::fock::mean_photon_number(&pair.zero);
        assert!((j[(0, 0)] - 0.01 * mean_n).abs() < 1e-12);
    }

    #[test]
    fn transformed_set() {
        let (space, pair, p) = setup(0.01);
        let tk = transform_kraus(&pair, &space, &p).unwrap();

        // F̂₁ and F̂₂ are polynomials in n̂, so ⟨0_L|F̂₁†F̂₂|1_L⟩ follows from the
        // moments m_k = ⟨1_L|n̂^k|0_L⟩. Diagonal entries vanish by
        // construction of V.
        let m: Vec<f64> = (0..=4).map(|k| crate::kl::offdiag_moment(&pair, k).re).collect();
        let (kt, pt) = (p.kappa * p.tau, p.kappa_phi * p.tau);
        let (sq, a, b) = (pt.sqrt(), 0.5 * kt, 0.5 * pt);
        // Coefficient vectors over n̂^0..n̂^4 of Â_k†Â_l for k, l ∈ {2, 3}.
        let a2a2 = [0.0, 0.0, sq * sq, 0.0, 0.0];
        let a2a3 = [0.0, sq, -sq * a, -sq * b, 0.0];
        let a3a3 = [1.0, -2.0 * a, a * a - 2.0 * b, 2.0 * a * b, b * b];
        let eval = |c: &[f64; 5]| c.iter().zip(&m).map(|(x, y)| x * y).sum::<f64>();
        let (v21, v31, v22, v32) = (tk.v[(1, 0)], tk.v[(2, 0)], tk.v[(1, 1)], tk.v[(2, 1)]);
        let off = v21 * v22 * eval(&a2a2) + (v21 * v32 + v31 * v22) * eval(&a2a3) + v31 * v32 * eval(&a3a3);
        let direct = code_block_norm(&pair, &tk.f_ops[0], &tk.f_ops[1]);
        assert!((direct - 2f64.sqrt() * off.abs()).abs() < 1e-12, "{direct} vs {off}");
        assert!(direct < 1e-3);

        // Λ₂ is the identity-like weight; at 8 dB κτ⟨n̂⟩ is already 0.12.
        let trace_j: f64 = (0..3).map(|k| tk.j[(k, k)]).sum();
        assert!((tk.lambdas.iter().sum::<f64>() - trace_j).abs() < 1e-12);
        assert!(tk.lambdas[1] > tk.lambdas[0] && tk.lambdas[1] > 0.8 && tk.lambdas[1] <= 1.0);
        // F̂₃ is the loss operator itself.
        assert!(max_abs(&(&tk.f_ops[2] - &tk.a_ops[0])) == 0.0);

        let mut sa = CMat::zeros(space.dim(), space.dim());
        let mut sf = sa.clone();
        for (a, f) in tk.a_ops.iter().zip(&tk.f_ops) {
            sa += a.adjoint() * a;
            sf += f.adjoint() * f;
        }
        assert!(max_abs(&(sa - sf)) < 1e-12);
    }

    #[test]
    fn transformed_set_at_zero_step() {
        let (space, pair, _) = setup(0.01);
        let tk = transform_kraus(&pair, &space, &NoiseParams::new(1.0, 0.1, 0.0).unwrap()).unwrap();
        assert_eq!(max_abs(&tk.f_ops[0]), 0.0);
        assert!(max_abs(&(&tk.f_ops[1] - CMat::identity(space.dim(), space.dim()))) < 1e-15);
        assert_eq!(max_abs(&tk.f_ops[2]), 0.0);
    }

    #[test]
    fn channel_is_basis_invariant() {
        let (space, pair, p) = setup(0.02);
        let tk = transform_kraus(&pair, &space, &p).unwrap();
        let psi = (&pair.zero + &pair.one * C64::new(0.3, 0.4)).normalize();
        let rho = outer(&psi, &psi);
        let a = apply_channel(&tk.a_ops, &rho).unwrap();
        let f = apply_channel(&tk.f_ops, &rho).unwrap();
        assert!(max_abs(&(a - f)) < 1e-12);
    }

    #[test]
    fn pure_loss_on_single_photon() {
        let space = FockSpace::new(6).unwrap();
        let ks = short_time_kraus(&space, &NoiseParams::new(1.0, 0.0, 0.01).unwrap());
        let mut rho = CMat::zeros(6, 6);
        rho[(1, 1)] = C64::new(1.0, 0.0);
        let out = apply_channel(&ks[..1], &rho).unwrap();
        assert!((out[(0, 0)].re - 0.01).abs() < 1e-15);
        assert!((crate::numerics::trace(&out).re - 0.01).abs() < 1e-15);
        let same = apply_channel(&[CMat::identity(6, 6)], &rho).unwrap();
        assert_eq!(same, rho);
    }

    #[test]
    fn trace_defect_on_code_state_is_second_order() {
        let (space, pair, _) = setup(0.01);
        let rho = outer(&pair.zero, &pair.zero);
        let defect = |kt: f64| {
            let ks = short_time_kraus(&space, &NoiseParams::new(kt, kt / 8.5, 1.0).unwrap());
            (crate::numerics::trace(&apply_channel(&ks, &rho).unwrap()).re - 1.0).abs()
        };
        let ratio = defect(0.01) / defect(0.005);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn warnings_fire_outside_short_time_regime() {
        let p = NoiseParams::new(1.0, 0.1, 0.2).unwrap();
        assert_eq!(p.warnings(1.0).len(), 1);
        assert_eq!(p.warnings(10.0).len(), 2);
        assert!(NoiseParams::new(-1.0, 0.0, 0.1).is_err());
    }
}
