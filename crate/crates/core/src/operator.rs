//! Dense Hermitian operator algebra and the spectral/entropic primitives
//! shared by every other module.
//!
//! All logarithms are base 2. Operators are stored as dense
//! `DMatrix<Complex64>`; validated wrappers ([`HermitianOperator`],
//! [`DensityOperator`], [`Projector`]) are immutable once built.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{check_dims, Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;
pub type Vector = DVector<C64>;

/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Absolute trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-9;
/// Relative negativity tolerance for density operators.
pub const PSD_TOL: f64 = 1e-9;
/// Idempotency tolerance for projectors (spectral norm).
pub const IDEMPOTENT_TOL: f64 = 1e-8;
/// Rank-from-trace tolerance for projectors.
pub const RANK_TOL: f64 = 1e-7;
/// Relative width of the zero eigenspace in `{A >= B}`.
pub const ZERO_EIG_TOL: f64 = 1e-9;
/// Relative support threshold used by entropies and logarithms.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Eigenvalues below this are dropped from `-sum l log l`.
pub const ENTROPY_FLOOR: f64 = 1e-15;
/// Default cap on tensor-power dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;

const EIG_MAX_ITER: usize = 100_000;

/// A Hermitian matrix. Construction symmetrizes the input after checking
/// that it is Hermitian within tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: Matrix,
}

impl HermitianOperator {
    pub fn new(mat: Matrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, expected square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidOperator("empty matrix".into()));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        let (dev, at) = hermiticity_defect(&mat);
        // Frobenius norm bounds the spectral norm from above.
        let scale = mat.norm().max(1.0);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::InvalidOperator(format!(
                "not Hermitian: |H[{}][{}] - conj(H[{}][{}])| = {dev:.3e}",
                at.0, at.1, at.1, at.0
            )));
        }
        Ok(Self::from_matrix_unchecked(mat))
    }

    /// Wraps `mat` after forcing exact Hermitian symmetry. Callers must
    /// guarantee the input is Hermitian up to rounding.
    pub(crate) fn from_matrix_unchecked(mat: Matrix) -> Self {
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj) * C64::new(0.5, 0.0),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: Matrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Matrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            mat: Matrix::from_diagonal(&v),
        }
    }

    /// `|v><v|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(v: &Vector) -> Self {
        Self { mat: v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            mat: &self.mat * C64::new(factor, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    /// `A ⊗ B`.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// `U H U†`.
    pub fn conjugate_by(&self, u: &Matrix) -> Result<Self> {
        check_dims(self.dim(), u.ncols())?;
        Ok(Self::from_matrix_unchecked(u * &self.mat * u.adjoint()))
    }

    /// `Tr[self · other]`, real for Hermitian arguments.
    pub fn trace_with(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(trace_product(&self.mat, &other.mat).re)
    }

    /// `<v|H|v>`.
    pub fn expectation(&self, v: &Vector) -> f64 {
        v.dotc(&(&self.mat * v)).re
    }

    pub fn eig(&self) -> Result<SpectralDecomposition> {
        hermitian_eig(self)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> Result<f64> {
        let eig = self.eig()?;
        Ok(eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = self.eig()?;
        Ok(*eig.values.last().expect("non-empty spectrum"))
    }
}

fn hermiticity_defect(mat: &Matrix) -> (f64, (usize, usize)) {
    let n = mat.nrows();
    let mut worst = (0.0, (0, 0));
    for i in 0..n {
        for j in i..n {
            let d = (mat[(i, j)] - mat[(j, i)].conj()).norm();
            if d > worst.0 {
                worst = (d, (i, j));
            }
        }
    }
    worst
}

/// `Tr[A B]` in O(d²).
pub fn trace_product(a: &Matrix, b: &Matrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Eigen-decomposition `H = Σ λ_i |u_i><u_i|` with descending eigenvalues.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, ordered like `values`.
    pub vectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> Vector {
        self.vectors.column(i).into_owned()
    }

    /// `Σ λ_i |u_i><u_i|`.
    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|x| x)
    }

    /// `Σ f(λ_i) |u_i><u_i|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = C64::new(f(l), 0.0);
            for i in 0..d {
                scaled[(i, j)] *= fl;
            }
        }
        HermitianOperator::from_matrix_unchecked(scaled * self.vectors.adjoint())
    }

    /// Projector onto the span of eigenvectors whose eigenvalue satisfies `keep`.
    pub fn projector_where(&self, keep: impl Fn(f64) -> bool) -> Projector {
        let cols: Vec<usize> = (0..self.dim()).filter(|&i| keep(self.values[i])).collect();
        let basis = self.vectors.select_columns(cols.iter());
        Projector::from_orthonormal_columns(&basis, self.dim())
    }

    /// Eigenvectors whose eigenvalue satisfies `keep`, as columns.
    pub fn columns_where(&self, keep: impl Fn(f64) -> bool) -> Matrix {
        let cols: Vec<usize> = (0..self.dim()).filter(|&i| keep(self.values[i])).collect();
        self.vectors.select_columns(cols.iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Full eigendecomposition of a Hermitian operator, eigenvalues descending.
pub fn hermitian_eig(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let se = SymmetricEigen::try_new(h.mat.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::InvalidOperator("eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = se.eigenvectors.select_columns(order.iter());
    Ok(SpectralDecomposition { values, vectors })
}

/// A Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidOperator(format!(
                "trace is {:.12} (+{:.3e}i), expected 1",
                tr.re, tr.im
            )));
        }
        let eig = op.eig()?;
        let min = *eig.values.last().expect("non-empty spectrum");
        if min < -PSD_TOL * eig.max_abs().max(1.0) {
            return Err(Error::InvalidOperator(format!(
                "not positive semidefinite: minimum eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        Self::new(HermitianOperator::new(mat)?)
    }

    /// Trusted constructor for operators that are states by construction.
    pub(crate) fn from_op_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_real_diagonal(probs))
    }

    /// `|ψ><ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &Vector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidOperator("zero state vector".into()));
        }
        Ok(Self {
            op: HermitianOperator::outer(&(psi / C64::new(n, 0.0))),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        &self.op.mat
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `Tr[A ρ]`.
    pub fn expect(&self, a: &HermitianOperator) -> Result<f64> {
        self.op.trace_with(a)
    }

    /// `Tr[Π ρ]`.
    pub fn prob(&self, p: &Projector) -> Result<f64> {
        self.op.trace_with(&p.op)
    }

    /// `Σ w_i ρ_i` for weights summing to one.
    pub fn mixture(weights: &[f64], states: &[&DensityOperator]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidParameter("mixture needs matching non-empty lists".into()));
        }
        let d = states[0].dim();
        let mut acc = Matrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            check_dims(d, s.dim())?;
            acc += s.matrix() * C64::new(*w, 0.0);
        }
        Self::from_matrix(acc)
    }

    pub fn conjugate_by(&self, u: &Matrix) -> Result<Self> {
        Ok(Self {
            op: self.op.conjugate_by(u)?,
        })
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            op: self.op.kron(&other.op),
        }
    }
}

/// A Hermitian idempotent operator with its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    op: HermitianOperator,
    rank: usize,
}

impl Projector {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let sq = &op.mat * &op.mat;
        let defect = HermitianOperator::from_matrix_unchecked(sq - &op.mat).spectral_norm()?;
        if defect > IDEMPOTENT_TOL {
            return Err(Error::InvalidOperator(format!(
                "not idempotent: ||P^2 - P|| = {defect:.3e}"
            )));
        }
        let tr = op.trace();
        let rank = tr.round();
        if (tr - rank).abs() > RANK_TOL || rank < 0.0 {
            return Err(Error::InvalidOperator(format!("trace {tr:.10} is not an integer rank")));
        }
        Ok(Self {
            op,
            rank: rank as usize,
        })
    }

    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        Self::new(HermitianOperator::new(mat)?)
    }

    /// `Σ_j |b_j><b_j|` for orthonormal columns `b_j` in dimension `dim`.
    pub fn from_orthonormal_columns(basis: &Matrix, dim: usize) -> Self {
        if basis.ncols() == 0 {
            return Self::zero(dim);
        }
        Self {
            op: HermitianOperator::from_matrix_unchecked(basis * basis.adjoint()),
            rank: basis.ncols(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            op: HermitianOperator::zeros(dim),
            rank: 0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim),
            rank: dim,
        }
    }

    /// Diagonal 0/1 projector.
    pub fn from_indicator(mask: &[bool]) -> Self {
        let diag: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Self {
            op: HermitianOperator::from_real_diagonal(&diag),
            rank: mask.iter().filter(|&&b| b).count(),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        &self.op.mat
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `I - Π`.
    pub fn complement(&self) -> Self {
        let d = self.dim();
        Self {
            op: HermitianOperator::from_matrix_unchecked(Matrix::identity(d, d) - &self.op.mat),
            rank: d - self.rank,
        }
    }

    /// Orthonormal basis of the range, as columns.
    pub fn range_basis(&self) -> Result<Matrix> {
        Ok(self.op.eig()?.columns_where(|l| l > 0.5))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            op: self.op.kron(&other.op),
            rank: self.rank * other.rank,
        }
    }
}

/// Projector onto the eigenvectors of `A - B` with eigenvalue `>= -η`,
/// `η = 1e-9 · max(1, ||A - B||)`. The zero eigenspace is included.
pub fn positive_eigenspace_projector(a: &HermitianOperator, b: &HermitianOperator) -> Result<Projector> {
    let diff = a.sub(b)?;
    let eig = diff.eig()?;
    let eta = ZERO_EIG_TOL * eig.max_abs().max(1.0);
    Ok(eig.projector_where(|l| l >= -eta))
}

/// Projector onto the eigenvectors of `A - B` with eigenvalue `> η`.
pub fn strictly_positive_eigenspace_projector(a: &HermitianOperator, b: &HermitianOperator) -> Result<Projector> {
    let diff = a.sub(b)?;
    let eig = diff.eig()?;
    let eta = ZERO_EIG_TOL * eig.max_abs().max(1.0);
    Ok(eig.projector_where(|l| l > eta))
}

/// `ρ^{⊗n}`, refusing results larger than `cap`.
pub fn tensor_power(rho: &DensityOperator, n: usize, cap: usize) -> Result<DensityOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("tensor power needs n >= 1".into()));
    }
    let dim = checked_power(rho.dim(), n, cap)?;
    let mut acc = rho.clone();
    for _ in 1..n {
        acc = acc.kron(rho);
    }
    debug_assert_eq!(acc.dim(), dim);
    Ok(acc)
}

/// `ρ_1 ⊗ ρ_2 ⊗ … ⊗ ρ_n`.
pub fn tensor_product(states: &[&DensityOperator], cap: usize) -> Result<DensityOperator> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty tensor product".into()))?;
    let dim: usize = states.iter().map(|s| s.dim()).product();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let mut acc = (*first).clone();
    for s in &states[1..] {
        acc = acc.kron(s);
    }
    Ok(acc)
}

pub(crate) fn checked_power(base: usize, n: usize, cap: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(base).filter(|&d| d <= cap).ok_or(Error::DimensionCap {
            dim: base.saturating_pow(n as u32),
            cap,
        })?;
    }
    Ok(dim)
}

/// `S(ρ) = -Σ λ log₂ λ` over `λ > 1e-15`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let eig = rho.op.eig()?;
    Ok(entropy_of_spectrum(&eig.values))
}

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&l| l > ENTROPY_FLOOR)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `D(ρ‖σ) = Tr[ρ(log₂ρ − log₂σ)]`, computed on supports.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let rho_eig = rho.op.eig()?;
    let sigma_eig = sigma.op.eig()?;
    let neg = rho_eig
        .values
        .iter()
        .filter(|&&l| l > ENTROPY_FLOOR)
        .map(|&l| l * l.log2())
        .sum::<f64>();
    let support = SUPPORT_TOL * sigma_eig.values[0].max(0.0);
    let mut cross = 0.0;
    for (j, &mu) in sigma_eig.values.iter().enumerate() {
        let u = sigma_eig.vector(j);
        let weight = rho.op.expectation(&u);
        if mu > support {
            cross += weight * mu.log2();
        } else if weight > 1e-11 {
            return Err(Error::SupportError(format!(
                "state has weight {weight:.3e} on an eigenvector of the reference with eigenvalue {mu:.3e}"
            )));
        }
    }
    Ok((neg - cross).max(0.0))
}

/// Checks `supp(ρ) ⊆ supp(σ)`: no weight of `ρ` on eigenvectors of `σ`
/// whose eigenvalue is below the relative support threshold.
pub fn check_support(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    check_dims(rho.dim(), sigma.dim())?;
    let eig = sigma.op.eig()?;
    let support = SUPPORT_TOL * eig.values[0].max(0.0);
    for (j, &mu) in eig.values.iter().enumerate() {
        if mu <= support {
            let weight = rho.op.expectation(&eig.vector(j));
            if weight > 1e-11 {
                return Err(Error::SupportError(format!(
                    "state has weight {weight:.3e} outside the reference support"
                )));
            }
        }
    }
    Ok(())
}

/// `||ρ₁ − ρ₂||₁`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    let diff = a.op.sub(&b.op)?;
    trace_norm(&diff)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(h: &HermitianOperator) -> Result<f64> {
    Ok(h.eig()?.values.iter().map(|l| l.abs()).sum())
}

/// Classical-quantum ensemble `{p_x, ρ_x}`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        if probs.len() != states.len() || probs.is_empty() {
            return Err(Error::InvalidParameter(
                "ensemble needs equally many probabilities and states".into(),
            ));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("probability outside [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let d = states[0].dim();
        for s in &states {
            check_dims(d, s.dim())?;
        }
        Ok(Self { probs, states })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `ρ̄ = Σ p_x ρ_x`.
    pub fn average(&self) -> DensityOperator {
        let d = self.dim();
        let mut acc = Matrix::zeros(d, d);
        for (p, s) in self.probs.iter().zip(&self.states) {
            acc += s.matrix() * C64::new(*p, 0.0);
        }
        DensityOperator::from_op_unchecked(HermitianOperator::from_matrix_unchecked(acc))
    }
}

/// `I[X;B] = S(ρ̄) − Σ p_x S(ρ_x)`.
pub fn holevo_information(e: &Ensemble) -> Result<f64> {
    let mut h = von_neumann_entropy(&e.average())?;
    for (p, s) in e.probs.iter().zip(&e.states) {
        if *p > 0.0 {
            h -= p * von_neumann_entropy(s)?;
        }
    }
    Ok(h.max(0.0))
}
