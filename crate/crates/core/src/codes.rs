//! Codeword pairs: the squeezed-Fock superposition code and the squeezed-Fock
//! and squeezed-cat comparison codes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    mean_photon_number, sparse_annihilation, squeezed_fock_analytic, squeezed_pairs, FockSpace,
    SqueezeMethod,
};
use crate::numerics::{expm_multiply, outer, to_complex_vec, CMat, CVec, RVec, SparseOp, C64, IM};

/// Root selector for the α quadratic. `Plus` is the larger signed root
/// t = α/β, `Minus` the smaller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Branch::Plus),
            "minus" | "-" => Ok(Branch::Minus),
            _ => Err(Error::InvalidArgument(format!("unknown branch '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeFamily {
    SqFockSuperposition,
    SqueezedFock,
    SqueezedCat,
}

impl fmt::Display for CodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeFamily::SqFockSuperposition => "sq-fock-superposition",
            CodeFamily::SqueezedFock => "squeezed-fock",
            CodeFamily::SqueezedCat => "squeezed-cat",
        })
    }
}

impl FromStr for CodeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sq-fock-superposition" | "superposition" | "sfs" | "ours" => Ok(CodeFamily::SqFockSuperposition),
            "squeezed-fock" | "sqfock" => Ok(CodeFamily::SqueezedFock),
            "squeezed-cat" | "cat" => Ok(CodeFamily::SqueezedCat),
            _ => Err(Error::InvalidArgument(format!("unknown code family '{s}'"))),
        }
    }
}

/// Family-specific parameters of a [`CodePair`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CodeKind {
    SqFockSuperposition { n: usize, alpha: f64, branch: Branch },
    SqueezedFock { n: usize },
    SqueezedCat { beta: f64 },
}

/// Logical codewords on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct CodePair {
    pub zero: CVec,
    pub one: CVec,
    pub r: f64,
    pub kind: CodeKind,
    /// |⟨0_L|1_L⟩|.
    pub overlap: f64,
    /// Largest top-10% tail population of the two codewords.
    pub tail: f64,
}

impl CodePair {
    pub fn family(&self) -> CodeFamily {
        match self.kind {
            CodeKind::SqFockSuperposition { .. } => CodeFamily::SqFockSuperposition,
            CodeKind::SqueezedFock { .. } => CodeFamily::SqueezedFock,
            CodeKind::SqueezedCat { .. } => CodeFamily::SqueezedCat,
        }
    }

    pub fn dim(&self) -> usize {
        self.zero.len()
    }

    pub fn n(&self) -> Option<usize> {
        match self.kind {
            CodeKind::SqFockSuperposition { n, .. } | CodeKind::SqueezedFock { n } => Some(n),
            CodeKind::SqueezedCat { .. } => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            CodeKind::SqFockSuperposition { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn branch(&self) -> Option<Branch> {
        match self.kind {
            CodeKind::SqFockSuperposition { branch, .. } => Some(branch),
            _ => None,
        }
    }

    pub fn codeword(&self, u: usize) -> &CVec {
        if u == 0 {
            &self.zero
        } else {
            &self.one
        }
    }

    pub fn mean_photon_numbers(&self) -> (f64, f64) {
        (mean_photon_number(&self.zero), mean_photon_number(&self.one))
    }

    /// Löwdin-orthonormalized copy. Needed before building a projector for
    /// the non-orthogonal squeezed-Fock pair.
    pub fn orthonormalized(&self) -> Result<CodePair> {
        let out = crate::numerics::loewdin_orthonormalize(&[self.zero.clone(), self.one.clone()])?;
        let mut it = out.into_iter();
        let zero = it.next().unwrap();
        let one = it.next().unwrap();
        Ok(CodePair {
            overlap: zero.dotc(&one).norm(),
            zero,
            one,
            ..self.clone()
        })
    }
}

/// Roots of g₁t² + (g₂−g₃)t − g₄ = 0 in t = α/β, with
/// g_{ji} = ⟨j|S(−2r)|i⟩ for j, i ∈ {n+2, n}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaSolution {
    pub g: [f64; 4],
    pub t_plus: f64,
    pub t_minus: f64,
}

impl AlphaSolution {
    pub fn t(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.t_plus,
            Branch::Minus => self.t_minus,
        }
    }

    /// Signed α = t/√(1+t²); β = 1/√(1+t²) stays positive.
    pub fn alpha(&self, branch: Branch) -> f64 {
        let t = self.t(branch);
        t / (1.0 + t * t).sqrt()
    }

    pub fn residual(&self, t: f64) -> f64 {
        let [g1, g2, g3, g4] = self.g;
        g1 * t * t + (g2 - g3) * t - g4
    }
}

fn quadratic_roots(g: [f64; 4]) -> Result<(f64, f64)> {
    let [g1, g2, g3, g4] = g;
    let b = g2 - g3;
    let c = -g4;
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if g1.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return Err(Error::Infeasible("α quadratic is degenerate".into()));
        }
        let t = -c / b;
        return Ok((t, t));
    }
    let disc = b * b - 4.0 * g1 * c;
    if disc < 0.0 {
        return Err(Error::Infeasible(format!("α quadratic discriminant {disc:.3e} < 0")));
    }
    // Cancellation-free pair.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (t1, t2) = if q == 0.0 { (0.0, 0.0) } else { (q / g1, c / q) };
    Ok((t1.max(t2), t1.min(t2)))
}

fn alpha_from_vectors(
    pp: &[(RVec, RVec)],
) -> Result<AlphaSolution> {
    // pp[0] = (|n,r⟩, |n,−r⟩), pp[1] = (|n+2,r⟩, |n+2,−r⟩)
    let (pn, mn) = &pp[0];
    let (pn2, mn2) = &pp[1];
    let g = [pn2.dot(mn2), pn2.dot(mn), pn.dot(mn2), pn.dot(mn)];
    let (t_plus, t_minus) = quadratic_roots(g)?;
    Ok(AlphaSolution { g, t_plus, t_minus })
}

/// Solves the orthogonality quadratic on `space`. The g-coefficients are
/// inner products of the same truncated vectors the codewords are built
/// from, so the resulting pair is orthogonal to rounding.
pub fn solve_alpha_in(space: &FockSpace, n: usize, r: f64) -> Result<AlphaSolution> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("squeezing r = {r} must be ≥ 0")));
    }
    let pp = squeezed_pairs(space, &[n, n + 2], r, SqueezeMethod::Auto)?;
    alpha_from_vectors(&pp)
}

/// Signed α for the requested branch on an automatically sized space.
pub fn solve_alpha(n: usize, r: f64, branch: Branch) -> Result<f64> {
    let space = code_space(n, r);
    Ok(solve_alpha_in(&space, n, r)?.alpha(branch))
}

/// Truncation for the superposition code with base index `n`, sized so that
/// n̂²-weighted tails are converged (enough for KL tensors over {Î, â, n̂, n̂²}).
pub fn code_space(n: usize, r: f64) -> FockSpace {
    FockSpace::sized_for_moments(n + 2, r, crate::fock::DEFAULT_TAIL_TOL, 2)
}

fn normalized(v: RVec) -> (CVec, f64) {
    let norm = v.norm();
    let c = to_complex_vec(&(v / norm));
    (c, norm)
}

/// zero = S(r)(α|n+2⟩ − β|n⟩), one = S(−r)(α|n+2⟩ + β|n⟩).
pub fn build_code(space: &FockSpace, n: usize, r: f64, branch: Branch) -> Result<CodePair> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("squeezing r = {r} must be ≥ 0")));
    }
    let pp = squeezed_pairs(space, &[n, n + 2], r, SqueezeMethod::Auto)?;
    let sol = alpha_from_vectors(&pp)?;
    let t = sol.t(branch);
    let beta = 1.0 / (1.0 + t * t).sqrt();
    let alpha = t * beta;
    let (pn, mn) = &pp[0];
    let (pn2, mn2) = &pp[1];
    let (zero, _) = normalized(pn2 * alpha - pn * beta);
    let (one, _) = normalized(mn2 * alpha + mn * beta);
    finish(zero, one, r, CodeKind::SqFockSuperposition { n, alpha, branch }, space)
}

/// zero = |n, r⟩, one = |n, −r⟩. The pair is not orthogonal; the overlap is
/// kept in the metadata.
pub fn build_squeezed_fock_code(space: &FockSpace, n: usize, r: f64) -> Result<CodePair> {
    let pp = squeezed_pairs(space, &[n], r, SqueezeMethod::Auto)?;
    let (p, m) = &pp[0];
    let (zero, _) = normalized(p.clone());
    let (one, _) = normalized(m.clone());
    finish(zero, one, r, CodeKind::SqueezedFock { n }, space)
}

fn finish(zero: CVec, one: CVec, r: f64, kind: CodeKind, space: &FockSpace) -> Result<CodePair> {
    let tail = space.check_tail(&zero)?.max(space.check_tail(&one)?);
    Ok(CodePair {
        overlap: zero.dotc(&one).norm(),
        zero,
        one,
        r,
        kind,
        tail,
    })
}

/// Squeezed-cat parameters: coherent amplitude β and squeezing r, with
/// |β, r⟩ = D(β)S(r)|0⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatParams {
    pub beta: f64,
    pub r: f64,
}

impl CatParams {
    pub fn new(beta: f64, r: f64) -> Self {
        CatParams { beta, r }
    }

    /// ⟨−β, r|β, r⟩ = exp(−2e^{2r}β²).
    pub fn overlap(&self) -> f64 {
        (-2.0 * (2.0 * self.r).exp() * self.beta * self.beta).exp()
    }

    /// (N₊, N₋).
    pub fn normalizations(&self) -> (f64, f64) {
        let q = self.overlap();
        ((2.0 * (1.0 + q)).sqrt(), (2.0 * (1.0 - q)).sqrt())
    }

    fn check(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.r.is_finite()) {
            return Err(Error::InvalidArgument("non-finite cat parameters".into()));
        }
        let (_, nm) = self.normalizations();
        if nm <= 1e-8 {
            return Err(Error::Degenerate(format!(
                "odd cat normalization N₋ = {nm:.3e} (β = {}, r = {})",
                self.beta, self.r
            )));
        }
        Ok(())
    }
}

/// |β, r⟩ truncated to `space.dim()`: squeezed vacuum from the closed form in
/// the padded dimension, then displaced by a sparse exponential action.
pub fn squeezed_coherent_state(space: &FockSpace, p: &CatParams) -> Result<CVec> {
    let pad = space.pad();
    let vac = to_complex_vec(&squeezed_fock_analytic(pad, 0, p.r));
    let a = sparse_annihilation(pad);
    let gen = a.adjoint().add(&a.scale(C64::new(-1.0, 0.0)));
    let full = expm_multiply(&gen, &vac, C64::new(p.beta, 0.0));
    let v = full.rows(0, space.dim()).into_owned();
    space.check_tail(&v)?;
    Ok(v)
}

/// Smallest multiple of 8 (at least 32) on which both |β, r⟩ and
/// n̂²|β, r⟩ pass the tail check.
pub fn cat_space(p: &CatParams) -> Result<FockSpace> {
    let mut dim = FockSpace::sized_for(0, p.r).dim();
    loop {
        let space = FockSpace::new(dim)?;
        let attempt = squeezed_coherent_state(&space, p).and_then(|v| {
            let w = CVec::from_fn(v.len(), |k, _| v[k] * (k * k) as f64);
            space.check_tail(&w)
        });
        match attempt {
            Ok(_) => return Ok(space),
            Err(Error::Truncation { .. }) if dim < 8192 => dim += 8,
            Err(e) => return Err(e),
        }
    }
}

/// (|β,r⟩ ± |−β,r⟩)/N±. |−β,r⟩ is obtained as Π|β,r⟩, which makes the
/// codewords exactly even and odd; the numerical ⟨−β,r|β,r⟩ is checked against
/// the closed form to validate the displace-after-squeeze ordering.
pub fn build_squeezed_cat_code(space: &FockSpace, p: &CatParams) -> Result<CodePair> {
    p.check()?;
    let plus = squeezed_coherent_state(space, p)?;
    let minus = CVec::from_fn(plus.len(), |k, _| if k % 2 == 0 { plus[k] } else { -plus[k] });
    let numeric = minus.dotc(&plus).re / plus.norm_squared();
    if (numeric - p.overlap()).abs() > 1e-8 {
        return Err(Error::Convention(format!(
            "⟨−β,r|β,r⟩ = {numeric:.12} but exp(−2e^(2r)β²) = {:.12}",
            p.overlap()
        )));
    }
    let zero = &plus + &minus;
    let one = &plus - &minus;
    let zero = &zero / C64::new(zero.norm(), 0.0);
    let one = &one / C64::new(one.norm(), 0.0);
    finish(zero, one, p.r, CodeKind::SqueezedCat { beta: p.beta }, space)
}

/// Closed-form ⟨1_L|Â|0_L⟩ for the squeezed-cat code.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CatDeltas {
    pub a_dag: f64,
    pub a: f64,
    pub a_dag_n: f64,
    pub n_a: f64,
    pub a_dag_n2: f64,
    pub n2_a: f64,
}

impl CatDeltas {
    pub fn as_array(&self) -> [f64; 6] {
        [self.a_dag, self.a, self.a_dag_n, self.n_a, self.a_dag_n2, self.n2_a]
    }
}

/// Upper signs belong to â, n̂â, n̂²â; lower signs to their adjoints. In the
/// cubic pair the coefficient 8(5β²−3)β multiplies e^{−2r}; with e^{−4r} the
/// formula disagrees with the numerical matrix elements.
pub fn cat_delta_analytic(p: &CatParams) -> Result<CatDeltas> {
    p.check()?;
    let b = p.beta;
    let r = p.r;
    let e = |k: f64| (k * r).exp();
    let e2 = e(2.0);
    let q = (-2.0 * e2 * b * b).exp();
    let den = (1.0 - (-4.0 * e2 * b * b).exp()).sqrt();
    let d1 = |s: f64| b * (1.0 - s * q * e2) / den;
    let d2 = |s: f64| {
        (3.0 * b * e(-2.0) + b * e2 + 4.0 * b * (b * b - 1.0)
            + s * b * q * (4.0 * e(6.0) * b * b - 1.0 + 4.0 * e2 - 3.0 * e(4.0)))
            / (4.0 * den)
    };
    let d3 = |s: f64| {
        let b2 = b * b;
        (15.0 * b * e(-4.0)
            + 3.0 * b * e(4.0)
            + 8.0 * (b2 - 1.0) * b * e2
            + 8.0 * (5.0 * b2 - 3.0) * b * e(-2.0)
            + 2.0 * (8.0 * b2 * b2 - 16.0 * b2 + 7.0) * b
            + s * b
                * q
                * (-16.0 * e(10.0) * b2 * b2 + 40.0 * e(8.0) * b2 + 8.0 * e(4.0) * (b2 + 3.0)
                    - e(6.0) * (32.0 * b2 + 15.0)
                    - 3.0 * e(-2.0)
                    + 8.0
                    - 14.0 * e2))
            / (16.0 * den)
    };
    Ok(CatDeltas {
        a_dag: d1(-1.0),
        a: d1(1.0),
        a_dag_n: d2(-1.0),
        n_a: d2(1.0),
        a_dag_n2: d3(-1.0),
        n2_a: d3(1.0),
    })
}

/// The same six matrix elements read directly off the codewords.
pub fn cat_delta_numeric(pair: &CodePair) -> CatDeltas {
    let d = pair.dim();
    let a = crate::fock::sparse_annihilation(d);
    let ad = a.adjoint();
    let n = crate::fock::sparse_number(d);
    let n2 = n.mul(&n);
    let el = |op: SparseOp| pair.one.dotc(&op.matvec(&pair.zero)).re;
    CatDeltas {
        a_dag: el(ad.clone()),
        a: el(a.clone()),
        a_dag_n: el(ad.mul(&n)),
        n_a: el(n.mul(&a)),
        a_dag_n2: el(ad.mul(&n2)),
        n2_a: el(n2.mul(&a)),
    }
}

/// X_L = exp(−iπn̂/2), diagonal with entries (−i)^k.
pub fn logical_x(space: &FockSpace) -> CMat {
    let phases = [C64::new(1.0, 0.0), -IM, C64::new(-1.0, 0.0), IM];
    CMat::from_diagonal(&CVec::from_fn(space.dim(), |k, _| phases[k % 4]))
}

/// |0_L⟩⟨0_L| + |1_L⟩⟨1_L|.
pub fn code_projector(pair: &CodePair) -> Result<CMat> {
    if pair.overlap > 1e-10 {
        return Err(Error::Contract(format!(
            "{} codewords overlap by {:.3e}; orthonormalize before projecting",
            pair.family(),
            pair.overlap
        )));
    }
    Ok(outer(&pair.zero, &pair.zero) + outer(&pair.one, &pair.one))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ladder_ops, overlap_analytic, squeeze_operator_real};
    use crate::numerics::{expect, max_abs};

    const R8: f64 = 0.921;

    #[test]
    fn pair_is_orthonormal_for_both_branches() {
        for branch in Branch::BOTH {
            let space = code_space(1, R8);
            let pair = build_code(&space, 1, R8, branch).unwrap();
            assert!((pair.zero.norm() - 1.0).abs() < 1e-12);
            assert!((pair.one.norm() - 1.0).abs() < 1e-12);
            assert!(pair.overlap < 1e-12, "{branch}: {}", pair.overlap);
        }
    }

    #[test]
    fn both_roots_solve_the_same_quadratic() {
        let space = code_space(1, 1.0);
        let sol = solve_alpha_in(&space, 1, 1.0).unwrap();
        assert!(sol.alpha(Branch::Plus) != sol.alpha(Branch::Minus));
        let scale = sol.g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for b in Branch::BOTH {
            let t = sol.t(b);
            assert!(sol.residual(t).abs() < 1e-12 * scale * (1.0 + t * t));
        }
    }

    #[test]
    fn g_coefficients_match_closed_form_double_squeeze() {
        // ⟨j|S(−2r)|i⟩ from the overlap formula at amplitude −2r.
        let r = 0.8;
        let space = code_space(2, r);
        let sol = solve_alpha_in(&space, 2, r).unwrap();
        let pairs = [(4, 4), (4, 2), (2, 4), (2, 2)];
        for (g, (j, i)) in sol.g.iter().zip(pairs) {
            assert!((g - overlap_analytic(j, i, -2.0 * r)).abs() < 1e-9, "{j},{i}");
        }
    }

    /// Overlap ⟨0_L|1_L⟩ as a function of α from columns and rows of the
    /// dense S(r); independent of the quadratic.
    struct DenseOverlap {
        sn: RVec,
        sn2: RVec,
        tn: RVec,
        tn2: RVec,
    }

    impl DenseOverlap {
        fn new(s: &crate::RMat, n: usize) -> Self {
            let col = |k: usize| s.column(k).into_owned();
            let row = |k: usize| s.row(k).transpose();
            DenseOverlap { sn: col(n), sn2: col(n + 2), tn: row(n), tn2: row(n + 2) }
        }

        fn at(&self, alpha: f64) -> f64 {
            let beta = (1.0 - alpha * alpha).sqrt();
            let zero = &self.sn2 * alpha - &self.sn * beta;
            let one = &self.tn2 * alpha + &self.tn * beta;
            zero.dot(&one)
        }
    }

    #[test]
    fn alpha_matches_dense_root_scan() {
        for r in [0.5, 1.0, 1.5] {
            let space = code_space(1, r);
            let s = squeeze_operator_real(&space, r).unwrap();
            let f = DenseOverlap::new(&s, 1);
            let mut roots = Vec::new();
            let steps = 2_000_000;
            let h = 2.0 / steps as f64;
            let mut prev = f.at(-1.0 + h);
            for k in 2..steps {
                let a = -1.0 + k as f64 * h;
                let cur = f.at(a);
                if prev.signum() != cur.signum() {
                    let (mut lo, mut hi) = (a - h, a);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if f.at(mid).signum() == f.at(lo).signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    roots.push(0.5 * (lo + hi));
                }
                prev = cur;
            }
            let sol = solve_alpha_in(&space, 1, r).unwrap();
            let mut ours = vec![sol.alpha(Branch::Minus), sol.alpha(Branch::Plus)];
            ours.sort_by(f64::total_cmp);
            assert_eq!(roots.len(), 2, "r={r}: {roots:?}");
            for (x, y) in roots.iter().zip(&ours) {
                assert!((x - y).abs() < 1e-6, "r={r}: scan {x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_squeezing_reduces_to_symmetric_superposition() {
        let space = FockSpace::new(16).unwrap();
        let pair = build_code(&space, 1, 0.0, Branch::Plus).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pair.alpha().unwrap() - h).abs() < 1e-14);
        assert!((pair.zero[3].re - h).abs() < 1e-14 && (pair.zero[1].re + h).abs() < 1e-14);
        assert!((pair.one[3].re - h).abs() < 1e-14 && (pair.one[1].re - h).abs() < 1e-14);
    }

    #[test]
    fn number_moments_agree_between_codewords() {
        let space = code_space(1, R8);
        let pair = build_code(&space, 1, R8, Branch::Plus).unwrap();
        let (_, _, n) = ladder_ops(&space);
        let mut nm = CMat::identity(space.dim(), space.dim());
        for m in 1..=4 {
            nm = &nm * &n;
            let a = expect(&pair.zero, &nm, &pair.zero).re;
            let b = expect(&pair.one, &nm, &pair.one).re;
            assert!((a - b).abs() < 1e-10 * a.max(1.0), "m={m}: {a} vs {b}");
        }
    }

    #[test]
    fn odd_operators_vanish_between_codewords() {
        let space = code_space(1, R8);
        let pair = build_code(&space, 1, R8, Branch::Minus).unwrap();
        let (a, _, n) = ladder_ops(&space);
        let mut op = a.clone();
        for _ in 0..4 {
            for u in [&pair.zero, &pair.one] {
                for v in [&pair.zero, &pair.one] {
                    assert!(expect(u, &op, v).norm() < 1e-12);
                }
            }
            op = &op * &n;
        }
    }

    #[test]
    fn orthogonality_over_parameter_grid() {
        for n in 1..=4 {
            for r in [0.3, 0.6, R8, 1.2, 1.5] {
                let space = code_space(n, r);
                for b in Branch::BOTH {
                    let pair = build_code(&space, n, r, b).unwrap();
                    assert!(pair.overlap <= 1e-10, "n={n} r={r} {b}: {}", pair.overlap);
                    assert!((pair.zero.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn squeezed_fock_overlap() {
        let space = code_space(1, 1.0);
        let pair = build_squeezed_fock_code(&space, 1, 1.0).unwrap();
        assert!((pair.overlap - 2f64.cosh().powf(-1.5)).abs() < 1e-3);
        assert!((pair.overlap - 0.137).abs() < 1e-3);

        let flat = build_squeezed_fock_code(&FockSpace::new(8).unwrap(), 1, 0.0).unwrap();
        assert_eq!(flat.overlap, 1.0);

        let overlaps: Vec<f64> = [0.2, 0.6, 1.0, 1.4]
            .iter()
            .map(|&r| build_squeezed_fock_code(&code_space(1, r), 1, r).unwrap().overlap)
            .collect();
        assert!(overlaps.windows(2).all(|w| w[1] < w[0]), "{overlaps:?}");
    }

    #[test]
    fn cat_code_is_orthogonal_and_normalized() {
        let p = CatParams::new(0.8, 0.5);
        let space = FockSpace::new(80).unwrap();
        let pair = build_squeezed_cat_code(&space, &p).unwrap();
        assert!(pair.overlap < 1e-10);
        let plus = squeezed_coherent_state(&space, &p).unwrap();
        let minus = CVec::from_fn(plus.len(), |k, _| if k % 2 == 0 { plus[k] } else { -plus[k] });
        assert!((minus.dotc(&plus).re - p.overlap()).abs() < 1e-8);
    }

    #[test]
    fn cat_displacement_matches_dense_exponential() {
        // Reflected state built by an explicit D(−β) instead of parity.
        let p = CatParams::new(0.7, 0.4);
        let space = FockSpace::new(60).unwrap();
        let plus = squeezed_coherent_state(&space, &p).unwrap();
        let pad = space.pad();
        let a = crate::fock::annihilation_real(pad);
        let gen = (a.transpose() - &a) * (-p.beta);
        let d = crate::numerics::mat_exp(&gen).unwrap();
        let vac = squeezed_fock_analytic(pad, 0, p.r);
        let minus = (d * vac).rows(0, space.dim()).into_owned();
        let ov: f64 = plus.iter().zip(minus.iter()).map(|(x, y)| x.re * y).sum();
        assert!((ov - p.overlap()).abs() < 1e-8);
    }

    #[test]
    fn vanishing_cat_is_degenerate() {
        let space = FockSpace::new(40).unwrap();
        let err = build_squeezed_cat_code(&space, &CatParams::new(1e-10, 0.5)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn cat_deltas_match_matrix_elements() {
        for r in [0.5, 1.0, 1.5] {
            let p = CatParams::new(0.9, r);
            let space = cat_space(&p).unwrap();
            let pair = build_squeezed_cat_code(&space, &p).unwrap();
            let num = cat_delta_numeric(&pair).as_array();
            let ana = cat_delta_analytic(&p).unwrap().as_array();
            for (k, (x, y)) in num.iter().zip(&ana).enumerate() {
                assert!((x - y).abs() < 1e-6 * y.abs().max(1.0), "r={r} k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn cat_deltas_limits() {
        let d = cat_delta_analytic(&CatParams::new(1.0, 3.0)).unwrap();
        assert!((d.a_dag - 1.0).abs() < 1e-3 && (d.a - 1.0).abs() < 1e-3);

        let b: f64 = 0.8;
        let d = cat_delta_analytic(&CatParams::new(b, 0.0)).unwrap();
        let direct = b * (1.0 - (-2.0 * b * b).exp()) / (1.0 - (-4.0 * b * b).exp()).sqrt();
        assert!((d.a - direct).abs() < 1e-14);
    }

    #[test]
    fn logical_x_structure() {
        let space = FockSpace::new(9).unwrap();
        let x = logical_x(&space);
        let expected = [(1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)];
        for (k, (re, im)) in expected.iter().enumerate() {
            assert_eq!(x[(k, k)], C64::new(*re, *im));
        }
        let x4 = &x * &x * &x * &x;
        assert_eq!(x4, CMat::identity(9, 9));

        let (a, _, _) = ladder_ops(&space);
        let conj = &x * &a * x.adjoint();
        assert!(max_abs(&(conj - a * IM)) < 1e-12);
    }

    #[test]
    fn logical_x_swaps_codewords() {
        let space = code_space(1, R8);
        let pair = build_code(&space, 1, R8, Branch::Plus).unwrap();
        let x = logical_x(&space);
        assert!((expect(&pair.one, &x, &pair.zero).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projector_properties() {
        let space = code_space(1, R8);
        let pair = build_code(&space, 1, R8, Branch::Plus).unwrap();
        let p = code_projector(&pair).unwrap();
        assert!((crate::numerics::trace(&p).re - 2.0).abs() < 1e-10);
        assert!((&p * &pair.zero - &pair.zero).norm() < 1e-10);
        assert!(max_abs(&(&p * &p - &p)) < 1e-10);
        assert!(max_abs(&(&p - p.adjoint())) < 1e-10);

        let sf = build_squeezed_fock_code(&space, 1, R8).unwrap();
        assert!(matches!(code_projector(&sf), Err(Error::Contract(_))));
        assert!(code_projector(&sf.orthonormalized().unwrap()).is_ok());
    }
}
