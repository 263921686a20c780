//! Dense and sparse complex linear algebra used by every physics module:
//! matrix exponential, Hermitian eigensolver, Löwdin orthonormalization and
//! Lindblad propagation.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const IM: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_vec(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

pub fn ensure_finite(m: &CMat) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract("matrix has non-finite entries".into()))
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Complex product through four real products. nalgebra routes real `f64`
/// products to a blocked kernel, which is far faster than its generic
/// complex path at the sizes used here.
pub fn cgemm(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "cgemm shape mismatch");
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// ⟨u|v⟩ with the first argument conjugated.
pub fn inner(u: &CVec, v: &CVec) -> C64 {
    u.dotc(v)
}

/// ⟨u|M|v⟩.
pub fn expect(u: &CVec, m: &CMat, v: &CVec) -> C64 {
    u.dotc(&(m * v))
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// ‖M†M − I‖_max.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let g = m.adjoint() * m;
    let n = g.nrows();
    max_abs(&(g - CMat::identity(n, n)))
}

fn norm1_generic<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant. Works for real and complex matrices.
pub fn mat_exp<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "mat_exp needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    if a.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::Contract("mat_exp input has non-finite entries".into()));
    }
    let norm = norm1_generic(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let f = 2f64.powi(-s);
    let a = a.map(|x| x * T::from_real(f));
    let b = |k: usize| T::from_real(PADE13[k]);
    let lin = |terms: &[(&DMatrix<T>, T)]| {
        let mut out = DMatrix::<T>::zeros(n, n);
        for (m, coef) in terms {
            out.zip_apply(*m, |o, x| *o += x * *coef);
        }
        out
    };
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * lin(&[(&a6, b(13)), (&a4, b(11)), (&a2, b(9))]);
    let u = &a * (inner_u + lin(&[(&a6, b(7)), (&a4, b(5)), (&a2, b(3)), (&id, b(1))]));
    let inner_v = &a6 * lin(&[(&a6, b(12)), (&a4, b(10)), (&a2, b(8))]);
    let v = inner_v + lin(&[(&a6, b(6)), (&a4, b(4)), (&a2, b(2)), (&id, b(0))]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Integrity("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Eigendecomposition of a Hermitian (or real symmetric) matrix. Eigenvalues
/// ascend; eigenvectors are the matching columns.
pub fn eig_hermitian_generic<T: ComplexField<RealField = f64> + Copy>(
    h: &DMatrix<T>,
) -> Result<(Vec<f64>, DMatrix<T>)> {
    if !h.is_square() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    let n = h.nrows();
    let scale = h.iter().fold(1.0f64, |a, x| a.max(x.modulus()));
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            defect = defect.max((h[(i, j)] - h[(j, i)].conjugate()).modulus());
        }
    }
    if defect > 1e-10 * scale {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let sym = (h + h.adjoint()).map(|x| x * T::from_real(0.5));
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    Ok((vals, vecs))
}

pub fn eig_hermitian(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    eig_hermitian_generic(h)
}

pub fn eig_symmetric(h: &RMat) -> Result<(Vec<f64>, RMat)> {
    eig_hermitian_generic(h)
}

/// Symmetric orthogonalization: returns `V·G^{-1/2}` where G is the Gram
/// matrix of the inputs.
pub fn loewdin_orthonormalize(vectors: &[CVec]) -> Result<Vec<CVec>> {
    let k = vectors.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension("Löwdin inputs differ in length".into()));
    }
    let gram = CMat::from_fn(k, k, |i, j| vectors[i].dotc(&vectors[j]));
    let (vals, w) = eig_hermitian(&gram)?;
    if vals[0] <= 1e-10 {
        return Err(Error::Degenerate(format!(
            "Gram matrix smallest eigenvalue {:.3e}",
            vals[0]
        )));
    }
    let d = CMat::from_diagonal(&CVec::from_iterator(
        k,
        vals.iter().map(|&l| C64::new(l.powf(-0.5), 0.0)),
    ));
    let inv_sqrt = &w * d * w.adjoint();
    Ok((0..k)
        .map(|j| {
            let mut out = CVec::zeros(dim);
            for (i, v) in vectors.iter().enumerate() {
                out.axpy(inv_sqrt[(i, j)], v, ONE);
            }
            out
        })
        .collect())
}

/// Compressed-sparse-row complex matrix. Ladder operators and their products
/// are banded, so the large-dimension paths run on this type.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOp {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                while let Some(&(j2, v2)) = iter.peek() {
                    if j2 != j {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != ZERO {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseOp {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &CMat) -> Self {
        let (r, c) = m.shape();
        let trip = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = m[(i, j)];
            (v != ZERO).then_some((i, j, v))
        });
        Self::from_triplets(r, c, trip)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, ONE)))
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        Self::from_triplets(n, n, d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.entries() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &SparseOp) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.entries().chain(other.entries()))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.entries().map(|(i, j, v)| (j, i, v.conj())),
        )
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &SparseOp) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let (mid, a) = (self.indices[k], self.values[k]);
                for l in other.indptr[mid]..other.indptr[mid + 1] {
                    trip.push((i, other.indices[l], a * other.values[l]));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        debug_assert_eq!(v.len(), self.ncols);
        for (i, o) in out.iter_mut().enumerate().take(self.nrows) {
            let mut acc = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * v[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.nrows);
        self.matvec_into(v.as_slice(), out.as_mut_slice());
        out
    }

    /// `self · m` for dense `m`.
    pub fn mul_dense(&self, m: &CMat) -> CMat {
        assert_eq!(self.ncols, m.nrows());
        let mut out = CMat::zeros(self.nrows, m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j);
            let src = col.as_slice();
            let mut dst = out.column_mut(j);
            self.matvec_into(src, dst.as_mut_slice());
        }
        out
    }

    /// `m · self†` for dense `m`.
    pub fn dense_mul_adjoint(&self, m: &CMat) -> CMat {
        assert_eq!(m.ncols(), self.ncols);
        let rows = m.nrows();
        let mut out = CMat::zeros(rows, self.nrows);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for j in 0..self.nrows {
            let col_out = &mut dst[j * rows..(j + 1) * rows];
            for k in self.indptr[j]..self.indptr[j + 1] {
                let coef = self.values[k].conj();
                let col_in = &src[self.indices[k] * rows..(self.indices[k] + 1) * rows];
                for (o, x) in col_out.iter_mut().zip(col_in) {
                    *o += coef * x;
                }
            }
        }
        out
    }

    pub fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (_, j, v) in self.entries() {
            cols[j] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| (self.indptr[i]..self.indptr[i + 1]).map(|k| self.values[k].norm()).sum())
            .fold(0.0, f64::max)
    }

    /// Cheap upper bound on the spectral norm, √(‖·‖₁‖·‖_∞).
    pub fn norm2_bound(&self) -> f64 {
        (self.norm1() * self.norm_inf()).sqrt()
    }
}

/// exp(t·A)·v for sparse A by scaled truncated Taylor series.
pub fn expm_multiply(op: &SparseOp, v: &CVec, t: C64) -> CVec {
    let bound = op.norm2_bound() * t.norm();
    let steps = bound.ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut y = v.clone();
    let mut term = CVec::zeros(v.len());
    let mut next = CVec::zeros(v.len());
    for _ in 0..steps {
        term.copy_from(&y);
        for j in 1..64 {
            op.matvec_into(term.as_slice(), next.as_mut_slice());
            next *= h / j as f64;
            std::mem::swap(&mut term, &mut next);
            y += &term;
            if term.norm() <= 1e-17 * y.norm() {
                break;
            }
        }
    }
    y
}

/// Master-equation specification. Each jump `(x, γ)` contributes
/// `(γ/2)(2xρx† − x†xρ − ρx†x)`.
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    pub hamiltonian: CMat,
    pub jump_ops: Vec<(CMat, f64)>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMat, jump_ops: Vec<(CMat, f64)>) -> Result<Self> {
        let spec = LindbladSpec {
            hamiltonian,
            jump_ops,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !self.hamiltonian.is_square() {
            return Err(Error::Dimension("Hamiltonian is not square".into()));
        }
        ensure_finite(&self.hamiltonian)?;
        let scale = max_abs(&self.hamiltonian).max(1.0);
        if hermiticity_defect(&self.hamiltonian) > 1e-12 * scale {
            return Err(Error::Contract("Hamiltonian is not Hermitian".into()));
        }
        for (x, rate) in &self.jump_ops {
            if x.shape() != (d, d) {
                return Err(Error::Dimension(format!(
                    "jump operator is {}x{}, Hamiltonian is {d}x{d}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            if !(*rate >= 0.0 && rate.is_finite()) {
                return Err(Error::Contract(format!("jump rate {rate} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationMethod {
    /// Liouvillian exponential up to dimension 16, Taylor above.
    Auto,
    /// Exponentiate the d²×d² vectorized generator.
    Liouvillian,
    /// Classical RK4 with step-doubling error control.
    Rk4,
    /// Scaled truncated Taylor series of the generator action.
    Taylor,
}

pub const LIOUVILLIAN_MAX_DIM: usize = 16;

/// Reusable Lindblad generator. `apply` is linear and accepts any operator,
/// not only density matrices, which lets callers propagate operator bases.
#[derive(Clone, Debug)]
pub struct LindbladPropagator {
    dim: usize,
    k: SparseOp,
    jumps: Vec<(SparseOp, f64)>,
    method: PropagationMethod,
    norm_est: f64,
    tol: f64,
}

impl LindbladPropagator {
    pub fn new(spec: &LindbladSpec, method: PropagationMethod) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let mut k = SparseOp::from_dense(&spec.hamiltonian).scale(-IM);
        let mut jumps = Vec::new();
        for (x, rate) in &spec.jump_ops {
            if *rate == 0.0 {
                continue;
            }
            let xs = SparseOp::from_dense(x);
            let xdx = xs.adjoint().mul(&xs);
            k = k.add(&xdx.scale(C64::new(-0.5 * rate, 0.0)));
            jumps.push((xs, *rate));
        }
        let method = match method {
            PropagationMethod::Auto if dim <= LIOUVILLIAN_MAX_DIM => PropagationMethod::Liouvillian,
            PropagationMethod::Auto => PropagationMethod::Taylor,
            m => m,
        };
        let mut prop = LindbladPropagator {
            dim,
            k,
            jumps,
            method,
            norm_est: 0.0,
            tol: 1e-10,
        };
        prop.norm_est = prop.estimate_norm();
        Ok(prop)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn method(&self) -> PropagationMethod {
        self.method
    }

    /// 𝓛(ρ) = Kρ + ρK† + Σ γ xρx†.
    pub fn rhs(&self, rho: &CMat) -> CMat {
        let mut out = self.k.mul_dense(rho);
        out += self.k.dense_mul_adjoint(rho);
        for (x, rate) in &self.jumps {
            let t = x.mul_dense(rho);
            out += x.dense_mul_adjoint(&t) * C64::new(*rate, 0.0);
        }
        out
    }

    fn estimate_norm(&self) -> f64 {
        let d = self.dim;
        if d == 0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = CMat::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let mut est = 0.0f64;
        for _ in 0..25 {
            let nx = x.norm();
            if nx == 0.0 {
                break;
            }
            x /= C64::new(nx, 0.0);
            let y = self.rhs(&x);
            est = est.max(y.norm());
            x = y;
        }
        est
    }

    /// The vectorized generator acting on column-stacked vec(ρ).
    pub fn liouvillian_matrix(&self) -> CMat {
        let d = self.dim;
        let id = CMat::identity(d, d);
        let k = self.k.to_dense();
        let mut l = kron(&id, &k) + kron(&k.map(|z| z.conj()), &id);
        for (x, rate) in &self.jumps {
            let xd = x.to_dense();
            l += kron(&xd.map(|z| z.conj()), &xd) * C64::new(*rate, 0.0);
        }
        l
    }

    /// Evolve an arbitrary operator for time `t` under the generator.
    pub fn apply(&self, rho: &CMat, t: f64) -> Result<CMat> {
        if rho.shape() != (self.dim, self.dim) {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, generator acts on {}",
                rho.nrows(),
                rho.ncols(),
                self.dim
            )));
        }
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("propagation time {t}")));
        }
        if t == 0.0 {
            return Ok(rho.clone());
        }
        match self.method {
            PropagationMethod::Liouvillian => self.apply_liouvillian(rho, t),
            PropagationMethod::Rk4 => Ok(self.apply_rk4(rho, t)),
            _ => Ok(self.apply_taylor(rho, t)),
        }
    }

    fn apply_liouvillian(&self, rho: &CMat, t: f64) -> Result<CMat> {
        let d = self.dim;
        let prop = mat_exp(&(self.liouvillian_matrix() * C64::new(t, 0.0)))?;
        let v = CVec::from_column_slice(rho.as_slice());
        let out = prop * v;
        Ok(CMat::from_column_slice(d, d, out.as_slice()))
    }

    fn rk4_step(&self, y: &CMat, h: f64) -> CMat {
        let hc = C64::new(h, 0.0);
        let k1 = self.rhs(y);
        let k2 = self.rhs(&(y + &k1 * (hc * 0.5)));
        let k3 = self.rhs(&(y + &k2 * (hc * 0.5)));
        let k4 = self.rhs(&(y + &k3 * hc));
        y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (hc / 6.0)
    }

    fn apply_rk4(&self, rho: &CMat, t: f64) -> CMat {
        let mut y = rho.clone();
        let mut time = 0.0;
        let mut h = (1.0 / self.norm_est.max(1e-12)).min(t);
        while time < t {
            h = h.min(t - time);
            let full = self.rk4_step(&y, h);
            let half = self.rk4_step(&self.rk4_step(&y, 0.5 * h), 0.5 * h);
            let diff = &half - &full;
            let err = diff.norm() / 15.0;
            let scale = self.tol * half.norm().max(1.0);
            if err <= scale || h < 1e-14 * t {
                y = half + diff / C64::new(15.0, 0.0);
                time += h;
                let grow = if err == 0.0 { 2.0 } else { 0.9 * (scale / err).powf(0.2) };
                h *= grow.clamp(0.2, 2.0);
            } else {
                h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.9);
            }
        }
        y
    }

    fn taylor_substep(&self, y: &CMat, h: f64) -> Option<CMat> {
        let mut sum = y.clone();
        let mut term = y.clone();
        for j in 1..80 {
            term = self.rhs(&term) * C64::new(h / j as f64, 0.0);
            sum += &term;
            let tn = term.norm();
            if tn <= 1e-17 * sum.norm().max(1e-300) || tn == 0.0 {
                return Some(sum);
            }
            if !tn.is_finite() {
                return None;
            }
        }
        None
    }

    fn apply_taylor(&self, rho: &CMat, t: f64) -> CMat {
        let steps = (t * self.norm_est * 1.2).ceil().max(1.0) as usize;
        let mut h = t / steps as f64;
        let mut y = rho.clone();
        let mut time = 0.0;
        while time < t * (1.0 - 1e-15) {
            h = h.min(t - time);
            match self.taylor_substep(&y, h) {
                Some(next) => {
                    y = next;
                    time += h;
                }
                None => h *= 0.5,
            }
        }
        y
    }
}

/// ρ(t) under the master equation, with trace, Hermiticity and positivity
/// checks on the input and a trace check on the output.
pub fn lindblad_propagate(spec: &LindbladSpec, rho0: &CMat, t: f64) -> Result<CMat> {
    lindblad_propagate_with(spec, rho0, t, PropagationMethod::Auto)
}

pub fn lindblad_propagate_with(
    spec: &LindbladSpec,
    rho0: &CMat,
    t: f64,
    method: PropagationMethod,
) -> Result<CMat> {
    if rho0.shape() != (spec.dim(), spec.dim()) {
        return Err(Error::Dimension(format!(
            "ρ is {}x{}, generator acts on {}",
            rho0.nrows(),
            rho0.ncols(),
            spec.dim()
        )));
    }
    if hermiticity_defect(rho0) > 1e-10 {
        return Err(Error::Contract("ρ₀ is not Hermitian".into()));
    }
    let tr = trace(rho0);
    if (tr - ONE).norm() > 1e-10 {
        return Err(Error::Contract(format!("ρ₀ has trace {tr}")));
    }
    let (vals, _) = eig_hermitian(rho0)?;
    if vals[0] < -1e-10 {
        return Err(Error::Contract(format!("ρ₀ has eigenvalue {:.3e}", vals[0])));
    }
    let prop = LindbladPropagator::new(spec, method)?;
    let out = prop.apply(rho0, t)?;
    let drift = (trace(&out) - ONE).norm();
    if drift > 1e-8 {
        return Err(Error::Integrity(format!("trace drifted by {drift:.3e}")));
    }
    Ok(out)
}
