//! Knill–Laflamme tensors, the K_er deviation and K_er scans.

use rayon::prelude::*;
use serde::Serialize;

use crate::codes::{
    build_code, build_squeezed_cat_code, build_squeezed_fock_code, cat_space, code_space, Branch,
    CatParams, CodeFamily, CodePair,
};
use crate::error::{Error, Result};
use crate::fock::{sparse_annihilation, sparse_number};
use crate::numerics::{CMat, CVec, SparseOp, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorSetKind {
    /// {Î, â, n̂, n̂²}
    LossDephasing,
    /// {Î, â}
    Loss,
    /// {Î, n̂, n̂²}
    Dephasing,
}

impl std::str::FromStr for ErrorSetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loss-dephasing" | "full" => Ok(ErrorSetKind::LossDephasing),
            "loss" => Ok(ErrorSetKind::Loss),
            "dephasing" => Ok(ErrorSetKind::Dephasing),
            _ => Err(Error::InvalidArgument(format!("unknown error set '{s}'"))),
        }
    }
}

/// Ordered error operators; the first is always the identity.
#[derive(Clone, Debug)]
pub struct ErrorSet {
    pub labels: Vec<String>,
    pub ops: Vec<SparseOp>,
}

impl ErrorSet {
    pub fn new(kind: ErrorSetKind, dim: usize) -> Self {
        let a = sparse_annihilation(dim);
        let n = sparse_number(dim);
        let n2 = n.mul(&n);
        let id = SparseOp::identity(dim);
        let (labels, ops): (Vec<&str>, Vec<SparseOp>) = match kind {
            ErrorSetKind::LossDephasing => (vec!["I", "a", "n", "n2"], vec![id, a, n, n2]),
            ErrorSetKind::Loss => (vec!["I", "a"], vec![id, a]),
            ErrorSetKind::Dephasing => (vec!["I", "n", "n2"], vec![id, n, n2]),
        };
        ErrorSet {
            labels: labels.into_iter().map(String::from).collect(),
            ops,
        }
    }

    pub fn from_ops(labels: Vec<String>, ops: Vec<SparseOp>) -> Result<Self> {
        if labels.len() != ops.len() || ops.is_empty() {
            return Err(Error::InvalidArgument("labels and operators differ in count".into()));
        }
        let dim = ops[0].nrows();
        if ops.iter().any(|o| o.nrows() != dim || o.ncols() != dim) {
            return Err(Error::Dimension("error operators differ in shape".into()));
        }
        if ops[0] != SparseOp::identity(dim) {
            return Err(Error::Contract("first error operator must be the identity".into()));
        }
        Ok(ErrorSet { labels, ops })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }
}

/// M^{μν}_{ij} = ⟨μ_L|Ê_i†Ê_j|ν_L⟩.
#[derive(Clone, Debug)]
pub struct KLTensor {
    pub labels: Vec<String>,
    pub m00: CMat,
    pub m11: CMat,
    pub m01: CMat,
}

pub fn kl_tensor(pair: &CodePair, errors: &ErrorSet) -> Result<KLTensor> {
    if errors.dim() != pair.dim() {
        return Err(Error::Dimension(format!(
            "error set dim {} vs code dim {}",
            errors.dim(),
            pair.dim()
        )));
    }
    let k = errors.len();
    let images = |u: &CVec| -> Vec<CVec> { errors.ops.iter().map(|e| e.matvec(u)).collect() };
    let w0 = images(&pair.zero);
    let w1 = images(&pair.one);
    let block = |x: &[CVec], y: &[CVec]| CMat::from_fn(k, k, |i, j| x[i].dotc(&y[j]));
    Ok(KLTensor {
        labels: errors.labels.clone(),
        m00: block(&w0, &w0),
        m11: block(&w1, &w1),
        m01: block(&w0, &w1),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KLTerm {
    pub i: String,
    pub j: String,
    pub diag: f64,
    pub offdiag: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KLReport {
    pub k_er: f64,
    pub diag_part: f64,
    pub offdiag_part: f64,
    pub per_term: Vec<KLTerm>,
}

/// K_er = Σ_ij |M⁰⁰_ij − M¹¹_ij|² + |M⁰¹_ij|² over all ordered pairs.
pub fn k_er(t: &KLTensor) -> KLReport {
    k_er_weighted(t, &vec![1.0; t.labels.len()])
}

/// K_er with each error rescaled to unit norm on |0_L⟩, i.e.
/// Ê_i → Ê_i/√M⁰⁰_ii. Removes the growth of ⟨n̂⁴⟩ with squeezing from the
/// comparison.
pub fn k_er_normalized(t: &KLTensor) -> KLReport {
    let w: Vec<f64> = (0..t.labels.len())
        .map(|i| {
            let d = t.m00[(i, i)].re;
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    k_er_weighted(t, &w)
}

fn k_er_weighted(t: &KLTensor, w: &[f64]) -> KLReport {
    let k = t.labels.len();
    let mut per_term = Vec::with_capacity(k * k);
    let (mut diag_part, mut offdiag_part) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let s = w[i] * w[j];
            let diag = ((t.m00[(i, j)] - t.m11[(i, j)]) * s).norm_sqr();
            let offdiag = (t.m01[(i, j)] * s).norm_sqr();
            diag_part += diag;
            offdiag_part += offdiag;
            per_term.push(KLTerm {
                i: t.labels[i].clone(),
                j: t.labels[j].clone(),
                diag,
                offdiag,
            });
        }
    }
    KLReport {
        k_er: diag_part + offdiag_part,
        diag_part,
        offdiag_part,
        per_term,
    }
}

/// ⟨1_L|n̂^m|0_L⟩.
pub fn offdiag_moment(pair: &CodePair, m: u32) -> C64 {
    let n = sparse_number(pair.dim());
    let mut v = pair.zero.clone();
    for _ in 0..m {
        v = n.matvec(&v);
    }
    pair.one.dotc(&v)
}

/// Coefficients (c₇, c₉) of the large-r expansion
/// ⟨1_L|n̂^m|0_L⟩ ≈ c₇e^{−7r} + c₉e^{−9r} for n = 1. `Plus` takes s = −1
/// below, `Minus` s = +1.
pub fn offdiag_series_coefficients(m: u32, branch: Branch) -> Result<(f64, f64)> {
    let s = match branch {
        Branch::Plus => -1.0,
        Branch::Minus => 1.0,
    };
    let r2 = 2f64.sqrt();
    let r3 = 3f64.sqrt();
    let r6 = 6f64.sqrt();
    Ok(match m {
        1 => (s * 32.0 * r3 / 5.0, -64.0 * r2 / 25.0),
        2 => (
            -(16.0 * r2 / 5.0) * (5.0 + s * r6),
            (32.0 * r2 / 25.0) * (2.0 + s * 35.0 * r6),
        ),
        3 => (
            24.0 * r2 - s * 184.0 * r3 / 5.0,
            -(16.0 * r2 / 25.0) * (502.0 + s * 105.0 * r6),
        ),
        4 => (
            8.0 * r2 * (31.0 + s * 5.0 * r6),
            640.0 * r2 - s * 6944.0 * r3 / 5.0,
        ),
        _ => return Err(Error::InvalidArgument(format!("series power m = {m} not in 1..=4"))),
    })
}

pub fn offdiag_series(m: u32, r: f64, branch: Branch) -> Result<f64> {
    let (c7, c9) = offdiag_series_coefficients(m, branch)?;
    Ok(c7 * (-7.0 * r).exp() + c9 * (-9.0 * r).exp())
}

#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub ns: Vec<usize>,
    pub rs: Vec<f64>,
    pub family: CodeFamily,
    pub errors: ErrorSetKind,
    /// Branch reported in the main K_er column of superposition rows.
    pub branch: Branch,
    /// Coherent amplitude for squeezed-cat rows (`ns` is ignored there).
    pub cat_beta: f64,
}

impl ScanConfig {
    pub fn new(ns: Vec<usize>, rs: Vec<f64>, family: CodeFamily) -> Self {
        ScanConfig {
            ns,
            rs,
            family,
            errors: ErrorSetKind::LossDephasing,
            branch: Branch::Plus,
            cat_beta: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub r: f64,
    pub family: CodeFamily,
    pub branch: Option<Branch>,
    pub dim: usize,
    pub k_er: f64,
    pub diag_part: f64,
    pub offdiag_part: f64,
    /// K_er of the other α branch (superposition family only).
    pub k_er_other: Option<f64>,
    pub error: Option<String>,
}

fn evaluate(pair: &CodePair, kind: ErrorSetKind) -> Result<KLReport> {
    let set = ErrorSet::new(kind, pair.dim());
    Ok(k_er(&kl_tensor(pair, &set)?))
}

fn scan_point(cfg: &ScanConfig, n: usize, r: f64) -> ScanRow {
    let mut row = ScanRow {
        n,
        r,
        family: cfg.family,
        branch: None,
        dim: 0,
        k_er: f64::NAN,
        diag_part: f64::NAN,
        offdiag_part: f64::NAN,
        k_er_other: None,
        error: None,
    };
    let result: Result<()> = (|| {
        let (main, other) = match cfg.family {
            CodeFamily::SqFockSuperposition => {
                let space = code_space(n, r);
                row.dim = space.dim();
                let other_branch = match cfg.branch {
                    Branch::Plus => Branch::Minus,
                    Branch::Minus => Branch::Plus,
                };
                row.branch = Some(cfg.branch);
                let main = build_code(&space, n, r, cfg.branch)?;
                let other = build_code(&space, n, r, other_branch)?;
                (main, Some(other))
            }
            CodeFamily::SqueezedFock => {
                let space = code_space(n, r);
                row.dim = space.dim();
                (build_squeezed_fock_code(&space, n, r)?, None)
            }
            CodeFamily::SqueezedCat => {
                let p = CatParams::new(cfg.cat_beta, r);
                let space = cat_space(&p)?;
                row.dim = space.dim();
                (build_squeezed_cat_code(&space, &p)?, None)
            }
        };
        let rep = evaluate(&main, cfg.errors)?;
        row.k_er = rep.k_er;
        row.diag_part = rep.diag_part;
        row.offdiag_part = rep.offdiag_part;
        if let Some(o) = other {
            row.k_er_other = Some(evaluate(&o, cfg.errors)?.k_er);
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// One row per (n, r); failures are recorded on the row instead of aborting
/// the scan.
pub fn ker_scan(cfg: &ScanConfig) -> Result<Vec<ScanRow>> {
    if cfg.rs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("squeezing values must be ascending".into()));
    }
    let ns: Vec<usize> = match cfg.family {
        CodeFamily::SqueezedCat => vec![0],
        _ => cfg.ns.clone(),
    };
    let grid: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| cfg.rs.iter().map(move |&r| (n, r)))
        .collect();
    Ok(grid.par_iter().map(|&(n, r)| scan_point(cfg, n, r)).collect())
}

/// Least-squares slope of ln K_er against r.
pub fn log_slope(rs: &[f64], ks: &[f64]) -> f64 {
    let m = rs.len() as f64;
    let ys: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let mx = rs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = rs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = rs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `count` evenly spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::cat_delta_analytic;

    const R8: f64 = 0.921;

    fn fock_pair() -> CodePair {
        let mut zero = CVec::zeros(8);
        let mut one = CVec::zeros(8);
        zero[0] = C64::new(1.0, 0.0);
        one[1] = C64::new(1.0, 0.0);
        CodePair {
            zero,
            one,
            r: 0.0,
            kind: crate::codes::CodeKind::SqueezedFock { n: 0 },
            overlap: 0.0,
            tail: 0.0,
        }
    }

    #[test]
    fn identity_only_set_gives_zero_for_fock_qubit() {
        let pair = fock_pair();
        let set = ErrorSet::from_ops(vec!["I".into()], vec![SparseOp::identity(8)]).unwrap();
        let rep = k_er(&kl_tensor(&pair, &set).unwrap());
        assert_eq!(rep.k_er, 0.0);
    }

    #[test]
    fn first_operator_must_be_identity() {
        let err = ErrorSet::from_ops(vec!["a".into()], vec![sparse_annihilation(8)]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn tensor_structure_for_superposition_code() {
        let space = code_space(1, R8);
        for b in Branch::BOTH {
            let pair = build_code(&space, 1, R8, b).unwrap();
            let set = ErrorSet::new(ErrorSetKind::LossDephasing, space.dim());
            let t = kl_tensor(&pair, &set).unwrap();
            assert!(t.m01[(0, 0)].norm() < 1e-10);
            for i in 0..4 {
                for j in 0..4 {
                    let scale = t.m00[(i, i)].norm().max(t.m00[(j, j)].norm()).max(1.0);
                    assert!((t.m00[(i, j)] - t.m11[(i, j)]).norm() < 1e-10 * scale);
                }
                // Entries pairing â with a parity-preserving error vanish.
                if i != 1 {
                    for blk in [&t.m00, &t.m11, &t.m01] {
                        assert!(blk[(i, 1)].norm() < 1e-12 && blk[(1, i)].norm() < 1e-12);
                    }
                }
            }
            let rep = k_er(&t);
            assert!((rep.k_er - rep.diag_part - rep.offdiag_part).abs() <= 1e-14 * rep.k_er);
            assert!(rep.diag_part < 1e-18 * t.m00[(3, 3)].norm_sqr().max(1.0));
        }
    }

    #[test]
    fn a_times_number_powers_vanish_between_codewords() {
        let space = code_space(1, R8);
        let pair = build_code(&space, 1, R8, Branch::Plus).unwrap();
        let a = sparse_annihilation(space.dim());
        let n = sparse_number(space.dim());
        let mut op = a.clone();
        for _ in 0..4 {
            for u in [&pair.zero, &pair.one] {
                for v in [&pair.zero, &pair.one] {
                    assert!(u.dotc(&op.matvec(v)).norm() < 1e-12);
                }
            }
            op = op.mul(&n);
        }
    }

    #[test]
    fn k_er_is_phase_invariant() {
        let space = code_space(1, 1.1);
        let pair = build_code(&space, 1, 1.1, Branch::Minus).unwrap();
        let set = ErrorSet::new(ErrorSetKind::LossDephasing, space.dim());
        let base = k_er(&kl_tensor(&pair, &set).unwrap()).k_er;
        let mut rot = pair.clone();
        rot.zero *= C64::from_polar(1.0, 0.7);
        rot.one *= C64::from_polar(1.0, -2.1);
        let k = k_er(&kl_tensor(&rot, &set).unwrap()).k_er;
        // ⟨0|n̂⁴|1⟩ cancels from terms of order 10⁴, so agreement is limited
        // by rounding.
        assert!((k - base).abs() < 1e-8 * base, "{k} vs {base}");
    }

    #[test]
    fn squeezed_fock_is_far_worse_at_r1() {
        let space = code_space(1, 1.0);
        let ours = build_code(&space, 1, 1.0, Branch::Plus).unwrap();
        let sf = build_squeezed_fock_code(&space, 1, 1.0).unwrap();
        let set = ErrorSet::new(ErrorSetKind::LossDephasing, space.dim());
        // The literal sums are dominated by ⟨n̂⁴⟩-sized entries and differ by
        // less than a decade; per-error normalization exposes the gap.
        let k_ours = k_er_normalized(&kl_tensor(&ours, &set).unwrap()).k_er;
        let k_sf = k_er_normalized(&kl_tensor(&sf, &set).unwrap()).k_er;
        assert!(k_sf >= 1e3 * k_ours, "{k_sf} vs {k_ours}");
    }

    #[test]
    fn series_leading_coefficients() {
        for b in Branch::BOTH {
            let (c7, _) = offdiag_series_coefficients(1, b).unwrap();
            assert!((c7.abs() - 11.085_125).abs() < 1e-5);
        }
        let (upper, _) = offdiag_series_coefficients(2, Branch::Minus).unwrap();
        let (lower, _) = offdiag_series_coefficients(2, Branch::Plus).unwrap();
        let r2 = 2f64.sqrt();
        assert!((upper + 16.0 * r2 / 5.0 * (5.0 + 6f64.sqrt())).abs() < 1e-12);
        assert!((lower + 16.0 * r2 / 5.0 * (5.0 - 6f64.sqrt())).abs() < 1e-12);
        assert!(offdiag_series(5, 1.0, Branch::Plus).is_err());
    }

    #[test]
    fn series_matches_numerics_at_large_squeezing() {
        let r = 2.0;
        let space = code_space(1, r);
        for b in Branch::BOTH {
            let pair = build_code(&space, 1, r, b).unwrap();
            for m in 1..=4 {
                let num = offdiag_moment(&pair, m).re;
                let ser = offdiag_series(m, r, b).unwrap();
                assert!(((num - ser) / num).abs() < 0.05, "{b} m={m}: {num:e} vs {ser:e}");
            }
        }
    }

    #[test]
    fn cat_k_er_from_deltas() {
        // For the cat code M⁰¹_ij = ⟨E_i 0|E_j 1⟩; with E = {I,a,n,n²} the
        // parity-odd entries are the δ values (or their conjugate partners),
        // the parity-even ones vanish exactly.
        for beta in [0.6, 0.9, 1.2] {
            for r in [0.5, 1.0, 1.5] {
                let p = CatParams::new(beta, r);
                let space = cat_space(&p).unwrap();
                let pair = build_squeezed_cat_code(&space, &p).unwrap();
                let set = ErrorSet::new(ErrorSetKind::LossDephasing, space.dim());
                let t = kl_tensor(&pair, &set).unwrap();
                let d = cat_delta_analytic(&p).unwrap();
                // ⟨0|Ê_i†Ê_j|1⟩ with Ê_i = Î: ⟨0|â|1⟩ = ⟨1|â†|0⟩*.
                let checks = [
                    (0, 1, d.a_dag),
                    (1, 0, d.a),
                    (2, 1, d.a_dag_n),
                    (1, 2, d.n_a),
                    (3, 1, d.a_dag_n2),
                    (1, 3, d.n2_a),
                ];
                for (i, j, expect) in checks {
                    let got = t.m01[(i, j)].re;
                    assert!((got - expect).abs() < 1e-6 * expect.abs().max(1.0),
                        "β={beta} r={r} ({i},{j}): {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn scan_shape_and_ordering() {
        let cfg = ScanConfig::new(vec![1, 2], vec![1.0, 2.0], CodeFamily::SqFockSuperposition);
        let rows = ker_scan(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.error.is_none() && r.k_er_other.is_some()));
        let mut bad = cfg.clone();
        bad.rs = vec![2.0, 1.0];
        assert!(ker_scan(&bad).is_err());
    }

    #[test]
    fn slope_of_exact_exponential() {
        let rs = linspace(1.0, 2.0, 5);
        let ks: Vec<f64> = rs.iter().map(|r| 3.0 * (-7.0 * r).exp()).collect();
        assert!((log_slope(&rs, &ks) + 7.0).abs() < 1e-12);
    }
}
