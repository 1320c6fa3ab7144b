//! Geodesic flow between two subspaces and the kernel obtained by
//! integrating the flow's projector over `y ∈ [0, 1]`.
//!
//! The flow is `θ(y) = x·U·cos(yΘ) − x̃·R·sin(yΘ)`, running from `span(x)` at
//! `y = 0` to `span(z)` at `y = 1`. The kernel is
//! `W = ∫₀¹ θ(y)·θ(y)ᵀ dy`, available in closed form and by quadrature.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::subspace::{
    aligned_pairs, check_dim, FeatureVector, PrincipalDecomposition, SubspaceBasis, COINCIDENT_SIN,
};

/// Below this angle `Λ₁` and `Λ₃` switch to their Taylor series; the
/// closed forms lose digits to cancellation in `1/2 − sin(2θ)/(4θ)`.
const SERIES_THRESHOLD: f64 = 1e-2;

/// One point on the geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint {
    pub y: f64,
    /// `a×b`, orthonormal columns.
    pub matrix: DMatrix<f64>,
}

/// The integrated flow kernel with the diagonal weights it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicKernel {
    /// Symmetric positive semidefinite `a×a`.
    pub matrix: DMatrix<f64>,
    pub source_decomposition: PrincipalDecomposition,
    pub lambda1: DVector<f64>,
    pub lambda2: DVector<f64>,
    pub lambda3: DVector<f64>,
}

impl GeodesicKernel {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Wraps an arbitrary symmetric matrix, e.g. the identity, with an empty
    /// decomposition. Used to probe the distance with synthetic kernels.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("kernel matrix must be square".into()));
        }
        let empty = DMatrix::zeros(0, 0);
        Ok(Self {
            matrix,
            source_decomposition: PrincipalDecomposition {
                angles: DVector::zeros(0),
                left_rotation: empty.clone(),
                right_rotation: empty.clone(),
                complement_rotation: empty,
            },
            lambda1: DVector::zeros(0),
            lambda2: DVector::zeros(0),
            lambda3: DVector::zeros(0),
        })
    }
}

/// The two fixed `a×b` frames the geodesic moves between: `x·U` and `x̃·R`.
struct FlowFrame {
    source: DMatrix<f64>,
    normal: DMatrix<f64>,
    angles: DVector<f64>,
}

impl FlowFrame {
    fn new(dec: &PrincipalDecomposition, x: &SubspaceBasis) -> Result<Self> {
        check_dim(x.dim_subspace(), dec.dim_subspace())?;
        check_dim(x.complement().ncols(), dec.complement_rotation.nrows())?;
        Ok(Self {
            source: x.basis() * &dec.left_rotation,
            normal: x.complement() * &dec.complement_rotation,
            angles: dec.angles.clone(),
        })
    }

    fn at(&self, y: f64) -> DMatrix<f64> {
        let mut m = self.source.clone();
        for (k, &theta) in self.angles.iter().enumerate() {
            let (s, c) = (y * theta).sin_cos();
            let mut col = m.column_mut(k);
            col *= c;
            col.axpy(-s, &self.normal.column(k), 1.0);
        }
        m
    }
}

/// Point `y` of the geodesic from `span(x)` towards the second subspace of
/// `dec`.
pub fn geodesic_flow(dec: &PrincipalDecomposition, x: &SubspaceBasis, y: f64) -> Result<FlowPoint> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfRange(y));
    }
    let frame = FlowFrame::new(dec, x)?;
    Ok(FlowPoint {
        y,
        matrix: frame.at(y),
    })
}

/// `sin(2θ)/(4θ) − 1/2` through the `θ⁸` term.
fn half_sinc_series(theta: f64) -> f64 {
    let t2 = theta * theta;
    t2 * (-1.0 / 3.0 + t2 * (1.0 / 15.0 + t2 * (-2.0 / 315.0 + t2 / 2835.0)))
}

/// `∫₀¹ cos²(yθ) dy`.
pub fn lambda1(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        1.0 + half_sinc_series(theta)
    } else {
        0.5 + (2.0 * theta).sin() / (4.0 * theta)
    }
}

/// `−∫₀¹ cos(yθ)·sin(yθ) dy = (cos 2θ − 1)/(4θ)`, written as `−sin²θ/(2θ)`
/// so it stays accurate as `θ → 0`.
pub fn lambda2(theta: f64) -> f64 {
    if theta == 0.0 {
        0.0
    } else {
        let s = theta.sin();
        -s * s / (2.0 * theta)
    }
}

/// `∫₀¹ sin²(yθ) dy`.
pub fn lambda3(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        -half_sinc_series(theta)
    } else {
        0.5 - (2.0 * theta).sin() / (4.0 * theta)
    }
}

/// Closed-form kernel `[xU, x̃R]·[[Λ₁, Λ₂], [Λ₂, Λ₃]]·[xU, x̃R]ᵀ`.
pub fn gfk_kernel(dec: &PrincipalDecomposition, x: &SubspaceBasis) -> Result<GeodesicKernel> {
    let frame = FlowFrame::new(dec, x)?;
    let l1 = dec.angles.map(lambda1);
    let l2 = dec.angles.map(lambda2);
    let l3 = dec.angles.map(lambda3);

    let a = x.dim_ambient();
    let b = dec.dim_subspace();
    let mut left = DMatrix::zeros(a, 2 * b);
    let mut right = DMatrix::zeros(a, 2 * b);
    for k in 0..b {
        let p = frame.source.column(k);
        let q = frame.normal.column(k);
        left.set_column(k, &(p * l1[k] + q * l2[k]));
        left.set_column(b + k, &(p * l2[k] + q * l3[k]));
        right.set_column(k, &p);
        right.set_column(b + k, &q);
    }
    let w = &left * right.transpose();
    let matrix = (&w + w.transpose()) * 0.5;

    Ok(GeodesicKernel {
        matrix,
        source_decomposition: dec.clone(),
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
    })
}

/// Composite trapezoidal estimate of `∫₀¹ θ(y)·θ(y)ᵀ dy` over `steps`
/// intervals, evaluating the flow pointwise. Error shrinks as `steps⁻²`.
pub fn kernel_integral_oracle(
    dec: &PrincipalDecomposition,
    x: &SubspaceBasis,
    steps: usize,
) -> Result<DMatrix<f64>> {
    if steps < 10 {
        return Err(Error::InvalidInput(format!(
            "quadrature needs at least 10 steps, got {steps}"
        )));
    }
    let frame = FlowFrame::new(dec, x)?;
    let a = x.dim_ambient();
    let h = 1.0 / steps as f64;
    let mut acc = DMatrix::zeros(a, a);
    for i in 0..=steps {
        let y = i as f64 * h;
        let weight = if i == 0 || i == steps { 0.5 * h } else { h };
        let theta = frame.at(y);
        let theta_t = theta.transpose();
        acc.gemm(weight, &theta, &theta_t, 1.0);
    }
    Ok(acc)
}

/// `(t − r)ᵀ·W·(t − r)`, clamped at zero against rounding.
pub fn kernel_distance(t: &FeatureVector, r: &FeatureVector, w: &GeodesicKernel) -> Result<f64> {
    check_dim(w.dim(), t.dim())?;
    check_dim(w.dim(), r.dim())?;
    let diff = t.as_dvector() - r.as_dvector();
    let d = diff.dot(&(&w.matrix * &diff));
    Ok(d.max(0.0))
}

/// Same value as `kernel_distance(t, r, gfk_kernel(principal_angles(x, z), x))`
/// in `O(a·b²)`: W is never formed and the complement of `x` is never
/// touched, since `x̃·R = −(I − xxᵀ)·z·V·diag(1/sin θ)`.
pub fn factored_distance(
    x: &SubspaceBasis,
    z: &SubspaceBasis,
    t: &FeatureVector,
    r: &FeatureVector,
) -> Result<f64> {
    check_dim(x.dim_ambient(), t.dim())?;
    check_dim(x.dim_ambient(), r.dim())?;
    let pairs = aligned_pairs(x, z)?;
    let diff = t.as_dvector() - r.as_dvector();
    let along = (x.basis() * &pairs.u).tr_mul(&diff);
    let across = pairs.residual.tr_mul(&diff);
    let mut d = 0.0;
    for (k, &theta) in pairs.angles.iter().enumerate() {
        let p = along[k];
        d += lambda1(theta) * p * p;
        // Coincident directions carry λ₂, λ₃ = O(θ²) ≈ 0 and no normal.
        if pairs.sines[k] > COINCIDENT_SIN {
            let q = -across[k] / pairs.sines[k];
            d += 2.0 * lambda2(theta) * p * q + lambda3(theta) * q * q;
        }
    }
    Ok(d.max(0.0))
}

/// `e^(−d)`.
pub fn similarity(distance: f64) -> f64 {
    debug_assert!(distance >= 0.0, "negative distance {distance}");
    (-distance.max(0.0)).exp()
}
