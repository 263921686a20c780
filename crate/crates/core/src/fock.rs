//! Truncated single-mode Fock space, squeezing, squeezed number states and
//! Wigner sampling.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{expm_multiply, mat_exp, to_complex, CMat, CVec, RMat, RVec, SparseOp, C64, IM};

/// Squeezing in dB for amplitude `r` (20·r/ln 10).
pub fn r_to_db(r: f64) -> f64 {
    20.0 * r / std::f64::consts::LN_10
}

/// Squeezing amplitude for a level in dB.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

/// Truncated Fock space `span{|0⟩ … |dim−1⟩}`. Exponentials of the squeezing
/// generator are taken in a larger `pad` dimension and cut back to `dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSpace {
    dim: usize,
    pad: usize,
    tail_tol: f64,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Above this padded dimension squeezed states come from the closed-form
/// overlap instead of a dense exponential.
pub const MAX_DENSE_PAD: usize = 400;

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_pad(dim, 2 * dim)
    }

    pub fn with_pad(dim: usize, pad: usize) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidArgument(format!("Fock dimension {dim} < 4")));
        }
        if pad < dim {
            return Err(Error::InvalidArgument(format!("pad {pad} < dim {dim}")));
        }
        Ok(FockSpace {
            dim,
            pad,
            tail_tol: DEFAULT_TAIL_TOL,
        })
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    /// Smallest multiple of 8 (at least 32) whose top-10% tail population
    /// for |k, r⟩, k ∈ {n_max−2, n_max−1, n_max}, stays a decade below the
    /// default tolerance.
    pub fn sized_for(n_max: usize, r: f64) -> Self {
        Self::sized_for_tol(n_max, r, DEFAULT_TAIL_TOL)
    }

    pub fn sized_for_tol(n_max: usize, r: f64, tol: f64) -> Self {
        Self::sized_for_moments(n_max, r, tol, 0)
    }

    /// As [`FockSpace::sized_for_tol`], but the tail is measured on n̂^p|k, r⟩.
    /// Matrix elements of n̂^{2p} converge only once this weighted tail is
    /// small, which for p = 2 needs noticeably more levels than the plain
    /// population criterion.
    pub fn sized_for_moments(n_max: usize, r: f64, tol: f64, power: u32) -> Self {
        let ks: Vec<usize> = (n_max.saturating_sub(2)..=n_max).collect();
        let mut limit = 256usize.max(4 * (n_max + 8));
        loop {
            let lf = ln_factorials(limit + n_max + 1);
            let pops: Vec<Vec<f64>> = ks
                .iter()
                .map(|&k| {
                    (0..limit)
                        .map(|j| overlap_with(&lf, j, k, r).powi(2) * (j as f64).powi(2 * power as i32))
                        .collect()
                })
                .collect();
            let mut dim = 32usize.max(8 * ((n_max + 8) / 8));
            while dim <= limit {
                let start = tail_start(dim);
                let ok = pops.iter().all(|p| {
                    let total: f64 = p[..dim].iter().sum();
                    let tail: f64 = p[start..dim].iter().sum();
                    tail <= 0.1 * tol * total
                });
                if ok {
                    return FockSpace {
                        dim,
                        pad: 2 * dim,
                        tail_tol: tol,
                    };
                }
                dim += 8;
            }
            limit *= 2;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Fraction of ‖v‖² carried by the top 10% of levels.
    pub fn tail_population(&self, v: &CVec) -> f64 {
        let total = v.norm_squared();
        if total == 0.0 {
            return 0.0;
        }
        let start = tail_start(v.len());
        v.iter().skip(start).map(|z| z.norm_sqr()).sum::<f64>() / total
    }

    pub fn check_tail(&self, v: &CVec) -> Result<f64> {
        let tail = self.tail_population(v);
        if tail > self.tail_tol {
            Err(Error::Truncation {
                tail,
                tol: self.tail_tol,
                dim: self.dim,
            })
        } else {
            Ok(tail)
        }
    }
}

fn tail_start(dim: usize) -> usize {
    dim - (dim / 10).max(1)
}

/// Real annihilation operator on `dim` levels.
pub fn annihilation_real(dim: usize) -> RMat {
    RMat::from_fn(dim, dim, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

/// `(a, a†, n)` on the truncated space.
pub fn ladder_ops(space: &FockSpace) -> (CMat, CMat, CMat) {
    let a = to_complex(&annihilation_real(space.dim));
    let ad = a.adjoint();
    let n = &ad * &a;
    (a, ad, n)
}

pub fn sparse_annihilation(dim: usize) -> SparseOp {
    SparseOp::from_triplets(
        dim,
        dim,
        (1..dim).map(|j| (j - 1, j, C64::new((j as f64).sqrt(), 0.0))),
    )
}

pub fn sparse_number(dim: usize) -> SparseOp {
    SparseOp::diagonal(&(0..dim).map(|k| C64::new(k as f64, 0.0)).collect::<Vec<_>>())
}

/// `(r/2)(a² − a†²)` on `dim` levels.
fn squeeze_generator(dim: usize, r: f64) -> RMat {
    let a = annihilation_real(dim);
    let a2 = &a * &a;
    (&a2 - a2.transpose()) * (0.5 * r)
}

/// S(r) computed in the padded dimension and truncated to `dim`.
pub fn squeeze_operator_real(space: &FockSpace, r: f64) -> Result<RMat> {
    if !r.is_finite() {
        return Err(Error::InvalidArgument(format!("squeezing {r}")));
    }
    // The generator only couples j to j ± 2, so the two parity sectors
    // exponentiate independently.
    let g = squeeze_generator(space.pad, r);
    let mut s = RMat::zeros(space.dim, space.dim);
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..space.pad).step_by(2).collect();
        let block = mat_exp(&g.select_rows(&idx).select_columns(&idx))?;
        for (bi, &i) in idx.iter().enumerate().take_while(|(_, &i)| i < space.dim) {
            for (bj, &j) in idx.iter().enumerate().take_while(|(_, &j)| j < space.dim) {
                s[(i, j)] = block[(bi, bj)];
            }
        }
    }
    for j in 0..space.dim.min(8) {
        let dev = (s.column(j).norm_squared() - 1.0).abs();
        if dev > 1e-8 {
            return Err(Error::Truncation {
                tail: dev,
                tol: 1e-8,
                dim: space.dim,
            });
        }
    }
    Ok(s)
}

pub fn squeeze_operator(space: &FockSpace, r: f64) -> Result<CMat> {
    squeeze_operator_real(space, r).map(|s| to_complex(&s))
}

/// Table of ln k! for k = 0..n.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn overlap_with(lf: &[f64], n: usize, m: usize, r: f64) -> f64 {
    if (n + m) % 2 == 1 {
        return 0.0;
    }
    if r == 0.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    let half_sh = 0.5 * r.sinh();
    let ln_sh = half_sh.abs().ln();
    let pref = 0.5 * (lf[m] + lf[n]) - 0.5 * (n + m + 1) as f64 * r.cosh().ln();
    let mut sum = 0.0;
    let mut k = n % 2;
    while k <= n.min(m) {
        let e = (n + m - 2 * k) / 2;
        let lt = pref + e as f64 * ln_sh - lf[k] - lf[(m - k) / 2] - lf[(n - k) / 2];
        let mut sign = if ((n - k) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if half_sh < 0.0 && e % 2 == 1 {
            sign = -sign;
        }
        sum += sign * lt.exp();
        k += 2;
    }
    sum
}

/// ⟨n|m, r⟩ from the closed-form finite sum (log-space factorials).
pub fn overlap_analytic(n: usize, m: usize, r: f64) -> f64 {
    let lf = ln_factorials(n.max(m) + 1);
    overlap_with(&lf, n, m, r)
}

/// First `dim` amplitudes of |m, r⟩ from the closed form, unnormalized.
pub fn squeezed_fock_analytic(dim: usize, m: usize, r: f64) -> RVec {
    let lf = ln_factorials(dim.max(m) + 1);
    RVec::from_fn(dim, |j, _| overlap_with(&lf, j, m, r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqueezeMethod {
    Auto,
    /// Column of the padded matrix exponential.
    Exponential,
    /// Closed-form overlap formula.
    Analytic,
}

impl SqueezeMethod {
    fn resolve(self, space: &FockSpace) -> SqueezeMethod {
        match self {
            SqueezeMethod::Auto if space.pad <= MAX_DENSE_PAD => SqueezeMethod::Exponential,
            SqueezeMethod::Auto => SqueezeMethod::Analytic,
            m => m,
        }
    }
}

/// Truncated, unnormalized real amplitudes of |m, r⟩ and |m, −r⟩ for each
/// requested `m`. Both signs come from one S(r): S(−r) = S(r)ᵀ in the padded
/// space, so |m,−r⟩ is row `m` of S(r).
pub fn squeezed_pairs(
    space: &FockSpace,
    ms: &[usize],
    r: f64,
    method: SqueezeMethod,
) -> Result<Vec<(RVec, RVec)>> {
    if let Some(&m) = ms.iter().find(|&&m| 2 * m >= space.dim) {
        return Err(Error::InvalidArgument(format!(
            "Fock index {m} is not below dim/2 = {}",
            space.dim / 2
        )));
    }
    let out: Vec<(RVec, RVec)> = match method.resolve(space) {
        SqueezeMethod::Exponential => {
            let full = mat_exp(&squeeze_generator(space.pad, r))?;
            ms.iter()
                .map(|&m| {
                    let plus = RVec::from_fn(space.dim, |j, _| full[(j, m)]);
                    let minus = RVec::from_fn(space.dim, |j, _| full[(m, j)]);
                    (plus, minus)
                })
                .collect()
        }
        _ => ms
            .iter()
            .map(|&m| {
                (
                    squeezed_fock_analytic(space.dim, m, r),
                    squeezed_fock_analytic(space.dim, m, -r),
                )
            })
            .collect(),
    };
    for (p, q) in &out {
        space.check_tail(&crate::numerics::to_complex_vec(p))?;
        space.check_tail(&crate::numerics::to_complex_vec(q))?;
    }
    Ok(out)
}

/// Normalized |n, r⟩ = S(r)|n⟩ on the truncated space.
pub fn squeezed_fock_state(space: &FockSpace, n: usize, r: f64) -> Result<CVec> {
    squeezed_fock_state_with(space, n, r, SqueezeMethod::Auto)
}

pub fn squeezed_fock_state_with(
    space: &FockSpace,
    n: usize,
    r: f64,
    method: SqueezeMethod,
) -> Result<CVec> {
    let (plus, _) = squeezed_pairs(space, &[n], r, method)?.remove(0);
    let v = crate::numerics::to_complex_vec(&plus);
    let norm = v.norm();
    Ok(v / C64::new(norm, 0.0))
}

pub fn mean_photon_number(v: &CVec) -> f64 {
    let total = v.norm_squared();
    v.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum::<f64>() / total
}

/// W(x, p) = (1/π)⟨ψ|D(β)ΠD(−β)|ψ⟩ with β = (x + ip)/√2, sampled on the
/// grid (rows follow `xs`, columns follow `ps`).
///
/// D(β)ΠD(−β) = D(2β)Π and D(2β) = e^{2ixp}·D(√2x)·D(i√2p), so each grid
/// value is an inner product of one x-displaced and one p-displaced vector.
pub fn wigner_grid(state: &CVec, xs: &[f64], ps: &[f64]) -> Result<RMat> {
    if xs.iter().chain(ps).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite Wigner grid".into()));
    }
    let dim = state.len();
    let amp = std::f64::consts::SQRT_2 * xs.iter().chain(ps).fold(0.0f64, |a, v| a.max(v.abs()));
    let reach = amp + (dim as f64).sqrt() + 4.0;
    let pad = (2 * dim).max((reach * reach + 8.0 * reach + 20.0).ceil() as usize);
    let norm = state.norm();
    let mut psi = CVec::zeros(pad);
    psi.rows_mut(0, dim).copy_from(&(state / C64::new(norm, 0.0)));
    let parity_psi = CVec::from_fn(pad, |k, _| if k % 2 == 0 { psi[k] } else { -psi[k] });

    let a = sparse_annihilation(pad);
    let ad = a.adjoint();
    let gen_x = ad.add(&a.scale(C64::new(-1.0, 0.0)));
    let gen_p = ad.add(&a).scale(IM);
    let s2 = std::f64::consts::SQRT_2;
    let us: Vec<CVec> = xs
        .iter()
        .map(|&x| expm_multiply(&gen_x, &psi, C64::new(-s2 * x, 0.0)))
        .collect();
    let vs: Vec<CVec> = ps
        .iter()
        .map(|&p| expm_multiply(&gen_p, &parity_psi, C64::new(s2 * p, 0.0)))
        .collect();
    Ok(RMat::from_fn(xs.len(), ps.len(), |i, j| {
        let phase = C64::from_polar(1.0, 2.0 * xs[i] * ps[j]);
        (phase * us[i].dotc(&vs[j])).re / PI
    }))
}
