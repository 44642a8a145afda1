//! Dense complex linear algebra on small tensor-product spaces.
//!
//! Index convention: composite basis states are ordered leftmost-factor-major,
//! so for a layout `[d0, d1, ..., dk]` the flat index of `(i0, i1, ..., ik)` is
//! `((i0 * d1 + i1) * d2 + i2) ...`. `kron`, `partial_trace` and every model
//! builder agree on this.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Default cap on the composite Hilbert-space dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;
/// Relative tolerance for Hermiticity: `max|M - M†| <= HERMITIAN_TOL * max|M|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Density matrices must have unit trace within this.
pub const TRACE_TOL: f64 = 1e-10;
/// Density-matrix eigenvalues may dip below zero by at most this.
pub const NEG_EIG_TOL: f64 = 1e-10;

static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Current process-wide composite-dimension cap.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Override the composite-dimension cap for every layout built afterwards.
pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("composite dimension {dim} exceeds the cap of {cap} (set DECOQ_DIM_CAP to raise it)")]
    Capacity { dim: u128, cap: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("layout mismatch: {left:?} vs {right:?}")]
    LayoutMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("{0}")]
    Usage(String),
    #[error("operator is not Hermitian: max|M - M^H| = {deviation:.3e} against scale {scale:.3e}")]
    NotHermitian { deviation: f64, scale: f64 },
    #[error("not a density matrix: {0}")]
    NotDensity(String),
}

/// Ordered subsystem dimensions of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    dims: Vec<usize>,
}

impl SpaceLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(dims, dim_cap())
    }

    pub fn with_cap(dims: Vec<usize>, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(LinalgError::InvalidLayout("no subsystems".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(LinalgError::InvalidLayout(format!("subsystem {pos} has dimension 0")));
        }
        let total = dims.iter().fold(1u128, |acc, &d| acc.saturating_mul(d as u128));
        if total > cap as u128 {
            return Err(LinalgError::Capacity { dim: total, cap });
        }
        Ok(SpaceLayout { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SpaceLayout) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(dims)
    }

    /// Flat-index stride of each factor.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for f in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[f] = strides[f + 1] * self.dims[f + 1];
        }
        strides
    }

    /// Level of factor `factor` in flat basis index `index`.
    pub fn digit(&self, index: usize, factor: usize) -> usize {
        (index / self.strides()[factor]) % self.dims[factor]
    }

    /// Split into (kept, traced) index tables for a partial trace.
    ///
    /// Returns the kept layout dims and a table where entry `k * d_traced + t`
    /// is the flat composite index for kept multi-index `k` and traced `t`.
    fn split_table(&self, keep: &[usize]) -> Result<(Vec<usize>, usize, Vec<usize>)> {
        if keep.is_empty() {
            return Err(LinalgError::Usage("partial trace: keep set is empty".into()));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(LinalgError::Usage(format!("partial trace: duplicate factor in keep set {keep:?}")));
        }
        if let Some(&bad) = sorted.iter().find(|&&f| f >= self.dims.len()) {
            return Err(LinalgError::Usage(format!(
                "partial trace: factor {bad} out of range for {} subsystems",
                self.dims.len()
            )));
        }
        let kept_dims: Vec<usize> = sorted.iter().map(|&f| self.dims[f]).collect();
        let d_kept: usize = kept_dims.iter().product();
        let d_traced = self.total() / d_kept;
        let strides = self.strides();
        let mut table = vec![0usize; self.total()];
        for idx in 0..self.total() {
            let (mut k, mut t) = (0usize, 0usize);
            for f in 0..self.dims.len() {
                let digit = (idx / strides[f]) % self.dims[f];
                if sorted.binary_search(&f).is_ok() {
                    k = k * self.dims[f] + digit;
                } else {
                    t = t * self.dims[f] + digit;
                }
            }
            table[k * d_traced + t] = idx;
        }
        Ok((kept_dims, d_traced, table))
    }
}

/// Dense complex square matrix tagged with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    layout: SpaceLayout,
    m: DMatrix<C64>,
}

impl QOperator {
    pub fn new(layout: SpaceLayout, m: DMatrix<C64>) -> Result<Self> {
        let d = layout.total();
        if m.nrows() != d || m.ncols() != d {
            return Err(LinalgError::Usage(format!(
                "matrix is {}x{} but layout {:?} needs {d}x{d}",
                m.nrows(),
                m.ncols(),
                layout.dims()
            )));
        }
        Ok(QOperator { layout, m })
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let d = layout.total();
        QOperator { layout: layout.clone(), m: DMatrix::identity(d, d) }
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        let d = layout.total();
        QOperator { layout: layout.clone(), m: DMatrix::zeros(d, d) }
    }

    /// `|ψ⟩⟨ψ|` for a state vector on `layout`.
    pub fn projector(layout: &SpaceLayout, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != layout.total() {
            return Err(LinalgError::Usage(format!(
                "state has length {} but layout {:?} has dimension {}",
                psi.len(),
                layout.dims(),
                layout.total()
            )));
        }
        Ok(QOperator { layout: layout.clone(), m: psi * psi.adjoint() })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn adjoint(&self) -> Self {
        QOperator { layout: self.layout.clone(), m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev = 0.0f64;
        for j in 0..d {
            for i in j..d {
                dev = dev.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() <= HERMITIAN_TOL * self.max_abs()
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        let scale = self.max_abs();
        if deviation > HERMITIAN_TOL * scale {
            return Err(LinalgError::NotHermitian { deviation, scale });
        }
        Ok(())
    }

    /// Hermitian, unit trace, and no eigenvalue below `-NEG_EIG_TOL`.
    pub fn check_density(&self) -> Result<()> {
        self.check_hermitian().map_err(|e| LinalgError::NotDensity(e.to_string()))?;
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(LinalgError::NotDensity(format!("trace is {tr}")));
        }
        let d = self.dim();
        let zero = C64::new(0.0, 0.0);
        let diagonal = (0..d).all(|j| (0..d).all(|i| i == j || self.m[(i, j)] == zero));
        let min = if diagonal {
            (0..d).map(|k| self.m[(k, k)].re).fold(f64::INFINITY, f64::min)
        } else {
            self.hermitian_part().symmetric_eigenvalues().min()
        };
        if min < -NEG_EIG_TOL {
            return Err(LinalgError::NotDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// `(M + M†)/2`, the exactly Hermitian part.
    pub fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Largest absolute eigenvalue of a Hermitian operator (its operator norm).
    pub fn hermitian_norm(&self) -> Result<f64> {
        self.check_hermitian()?;
        Ok(self.hermitian_part().symmetric_eigenvalues().camax())
    }

    pub fn scaled(&self, c: C64) -> Self {
        QOperator { layout: self.layout.clone(), m: &self.m * c }
    }

    fn assert_same_layout(&self, other: &QOperator, op: &str) {
        assert_eq!(self.layout, other.layout, "QOperator {op}: layout mismatch");
    }

    fn check_same_layout(&self, other: &QOperator) -> Result<()> {
        if self.layout != other.layout {
            return Err(LinalgError::LayoutMismatch {
                left: self.layout.dims.clone(),
                right: other.layout.dims.clone(),
            });
        }
        Ok(())
    }
}

impl Add for &QOperator {
    type Output = QOperator;

    /// Panics on layout mismatch.
    fn add(self, rhs: &QOperator) -> QOperator {
        self.assert_same_layout(rhs, "add");
        QOperator { layout: self.layout.clone(), m: &self.m + &rhs.m }
    }
}

impl Sub for &QOperator {
    type Output = QOperator;

    /// Panics on layout mismatch.
    fn sub(self, rhs: &QOperator) -> QOperator {
        self.assert_same_layout(rhs, "sub");
        QOperator { layout: self.layout.clone(), m: &self.m - &rhs.m }
    }
}

impl Mul for &QOperator {
    type Output = QOperator;

    /// Panics on layout mismatch.
    fn mul(self, rhs: &QOperator) -> QOperator {
        self.assert_same_layout(rhs, "mul");
        QOperator { layout: self.layout.clone(), m: &self.m * &rhs.m }
    }
}

impl Mul<f64> for &QOperator {
    type Output = QOperator;

    fn mul(self, rhs: f64) -> QOperator {
        self.scaled(C64::new(rhs, 0.0))
    }
}

impl Neg for &QOperator {
    type Output = QOperator;

    fn neg(self) -> QOperator {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

/// Kronecker product; the layout is the concatenation of both layouts.
pub fn kron(a: &QOperator, b: &QOperator) -> Result<QOperator> {
    let layout = a.layout.concat(&b.layout)?;
    Ok(QOperator { layout, m: a.m.kronecker(&b.m) })
}

/// Operator acting as `ops[f]` on the listed factors and identity elsewhere.
pub fn embed(layout: &SpaceLayout, ops: &[(usize, &DMatrix<C64>)]) -> Result<QOperator> {
    let mut out = QOperator::zeros(layout);
    out.add_embedded(C64::new(1.0, 0.0), ops)?;
    Ok(out)
}

impl QOperator {
    /// In-place `self += coeff · embed(layout, ops)` without forming the dense term.
    pub fn add_embedded(&mut self, coeff: C64, ops: &[(usize, &DMatrix<C64>)]) -> Result<()> {
        let layout = &self.layout;
        for &(f, op) in ops {
            if f >= layout.factors() {
                return Err(LinalgError::Usage(format!("embed: factor {f} out of range")));
            }
            let d = layout.dims()[f];
            if op.nrows() != d || op.ncols() != d {
                return Err(LinalgError::Usage(format!(
                    "embed: factor {f} has dimension {d} but operator is {}x{}",
                    op.nrows(),
                    op.ncols()
                )));
            }
        }
        // Scatter the nonzero entries of the product; identity factors stay diagonal.
        let strides = layout.strides();
        let mut entries = vec![(0usize, 0usize, coeff)];
        for (f, &d) in layout.dims().iter().enumerate() {
            let mut factor: Option<&DMatrix<C64>> = None;
            for &(g, op) in ops {
                if g == f {
                    if factor.is_some() {
                        return Err(LinalgError::Usage(format!("embed: factor {f} listed twice")));
                    }
                    factor = Some(op);
                }
            }
            let nz: Vec<(usize, usize, C64)> = match factor {
                Some(op) => (0..d)
                    .flat_map(|i| (0..d).map(move |j| (i, j, op[(i, j)])))
                    .filter(|e| e.2 != C64::new(0.0, 0.0))
                    .collect(),
                None => (0..d).map(|i| (i, i, C64::new(1.0, 0.0))).collect(),
            };
            let s = strides[f];
            entries = entries
                .iter()
                .flat_map(|&(r, c, v)| nz.iter().map(move |&(i, j, w)| (r + i * s, c + j * s, v * w)))
                .collect();
        }
        for (r, c, v) in entries {
            self.m[(r, c)] += v;
        }
        Ok(())
    }
}

/// Reduced operator on the factors in `keep`, tracing out the rest.
pub fn partial_trace(rho: &QOperator, keep: &[usize]) -> Result<QOperator> {
    let (kept_dims, d_traced, table) = rho.layout.split_table(keep)?;
    let d_kept: usize = kept_dims.iter().product();
    let layout = SpaceLayout::new(kept_dims)?;
    let m = DMatrix::from_fn(d_kept, d_kept, |ki, kj| {
        let (ri, rj) = (&table[ki * d_traced..(ki + 1) * d_traced], &table[kj * d_traced..(kj + 1) * d_traced]);
        ri.iter().zip(rj).map(|(&a, &b)| rho.m[(a, b)]).sum()
    });
    Ok(QOperator { layout, m })
}

/// Partial trace of `A B†` where `A`, `B` are `d x r` factors, without forming
/// the `d x d` product. `tr_keep(A A†)` is the reduced state of the ensemble
/// whose columns are (weighted) pure states.
pub fn partial_trace_factored(
    layout: &SpaceLayout,
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    keep: &[usize],
) -> Result<QOperator> {
    let d = layout.total();
    if a.nrows() != d || b.nrows() != d || a.ncols() != b.ncols() {
        return Err(LinalgError::Usage(format!(
            "factored partial trace: factors are {}x{} and {}x{} on dimension {d}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let (kept_dims, d_traced, table) = layout.split_table(keep)?;
    let d_kept: usize = kept_dims.iter().product();
    let out_layout = SpaceLayout::new(kept_dims)?;
    let mut m = DMatrix::<C64>::zeros(d_kept, d_kept);
    for s in 0..a.ncols() {
        let (ca, cb) = (a.column(s), b.column(s));
        for ki in 0..d_kept {
            for kj in 0..d_kept {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..d_traced {
                    acc += ca[table[ki * d_traced + t]] * cb[table[kj * d_traced + t]].conj();
                }
                m[(ki, kj)] += acc;
            }
        }
    }
    Ok(QOperator { layout: out_layout, m })
}

pub fn commutator(a: &QOperator, b: &QOperator) -> Result<QOperator> {
    a.check_same_layout(b)?;
    Ok(QOperator { layout: a.layout.clone(), m: &a.m * &b.m - &b.m * &a.m })
}

/// `tr(A B)` in O(d²) without forming the product.
pub fn trace_of_product(a: &QOperator, b: &QOperator) -> Result<C64> {
    a.check_same_layout(b)?;
    let d = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..d {
            acc += a.m[(i, j)] * b.m[(j, i)];
        }
    }
    Ok(acc)
}

/// Hermitian eigendecomposition `H = Q Λ Q†`, kept around so the propagator
/// `e^{-iHt}` can be evaluated at many times for the price of one
/// decomposition.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    layout: SpaceLayout,
    values: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &QOperator) -> Result<Self> {
        h.check_hermitian()?;
        let eig = h.hermitian_part().symmetric_eigen();
        Ok(HermitianEigen { layout: h.layout.clone(), values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    /// `Q diag(e^{-iλt}) Q†`.
    pub fn unitary(&self, t: f64) -> QOperator {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::from_polar(1.0, -self.values[j] * t);
        }
        QOperator { layout: self.layout.clone(), m: scaled * self.vectors.adjoint() }
    }

    pub fn evolve(&self, rho0: &QOperator, t: f64) -> Result<QOperator> {
        if rho0.layout != self.layout {
            return Err(LinalgError::LayoutMismatch {
                left: rho0.layout.dims.clone(),
                right: self.layout.dims.clone(),
            });
        }
        let u = self.unitary(t);
        Ok(QOperator { layout: self.layout.clone(), m: &u.m * &rho0.m * u.m.adjoint() })
    }
}

/// `ρ(t) = e^{-iHt} ρ0 e^{iHt}` (ħ = 1).
pub fn evolve_unitary(rho0: &QOperator, h: &QOperator, t: f64) -> Result<QOperator> {
    HermitianEigen::new(h)?.evolve(rho0, t)
}

/// Eigenvalues of a Hermitian operator in ascending order.
pub fn sorted_eigenvalues(op: &QOperator) -> Result<Vec<f64>> {
    op.check_hermitian()?;
    let mut v: Vec<f64> = op.hermitian_part().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
