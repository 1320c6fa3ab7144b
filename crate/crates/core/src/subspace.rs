//! PCA subspaces, orthogonal complements and principal angles.
//!
//! Bases are stored column-wise (`a×b`, one basis vector per column). All
//! factorizations apply the same sign convention: the entry of largest
//! magnitude in each column is made positive, so outputs are bit-stable
//! across runs.

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the stored orthonormality invariants.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Looser tolerance accepted on input to [`orthogonal_complement`].
pub const INPUT_ORTHONORMAL_TOL: f64 = 1e-8;
/// Below this sine a principal pair is treated as coincident and its
/// complement direction is free.
pub(crate) const COINCIDENT_SIN: f64 = 1e-10;

/// A finite real descriptor of a frame or of an aggregated window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "feature vectors need at least 2 components, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature component {pos} is not finite"
            )));
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn from_dvector(values: DVector<f64>) -> Result<Self> {
        Self::new(values.data.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Component-wise mean of equally sized vectors.
    pub fn mean(vectors: &[FeatureVector]) -> Result<FeatureVector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidInput("mean of an empty set".into()))?;
        let dim = first.dim();
        let mut acc = DVector::zeros(dim);
        for v in vectors {
            check_dim(dim, v.dim())?;
            acc += &v.0;
        }
        acc /= vectors.len() as f64;
        Ok(FeatureVector(acc))
    }

    pub fn scaled(&self, factor: f64) -> Result<FeatureVector> {
        FeatureVector::from_dvector(&self.0 * factor)
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        FeatureVector::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0.data.into()
    }
}

/// Orthonormal basis of a `b`-dimensional subspace of ℝᵃ together with an
/// orthonormal basis of its `a−b`-dimensional complement.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
    complement: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Validates both factors against the stored invariants.
    pub fn new(basis: DMatrix<f64>, complement: DMatrix<f64>) -> Result<Self> {
        let (a, b) = basis.shape();
        if b == 0 || b >= a {
            return Err(Error::InvalidInput(format!(
                "subspace dimension {b} must be in [1, {a})"
            )));
        }
        check_dim(a, complement.nrows())?;
        check_dim(a - b, complement.ncols())?;
        let deviation = orthonormality_deviation(&basis)
            .max(orthonormality_deviation(&complement))
            .max(basis.tr_mul(&complement).amax());
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { basis, complement })
    }

    /// Builds the complement of an orthonormal basis.
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let complement = orthogonal_complement(&basis)?;
        Ok(Self { basis, complement })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn complement(&self) -> &DMatrix<f64> {
        &self.complement
    }

    pub fn dim_ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim_subspace(&self) -> usize {
        self.basis.ncols()
    }

    /// Keeps the leading `b` basis columns; the dropped columns move to the
    /// front of the complement.
    pub fn truncated(&self, b: usize) -> Result<SubspaceBasis> {
        let current = self.dim_subspace();
        if b == 0 || b > current {
            return Err(Error::InvalidInput(format!(
                "cannot truncate a {current}-dimensional subspace to {b}"
            )));
        }
        if b == current {
            return Ok(self.clone());
        }
        let a = self.dim_ambient();
        let mut complement = DMatrix::zeros(a, a - b);
        complement
            .columns_mut(0, current - b)
            .copy_from(&self.basis.columns(b, current - b));
        complement
            .columns_mut(current - b, a - current)
            .copy_from(&self.complement);
        Ok(SubspaceBasis {
            basis: self.basis.columns(0, b).into_owned(),
            complement,
        })
    }
}

/// Principal angles between two equal-dimension subspaces and the rotations
/// that align them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDecomposition {
    /// Non-decreasing, each in `[0, π/2]`.
    pub angles: DVector<f64>,
    /// `b×b`, left singular vectors of `xᵀz`.
    pub left_rotation: DMatrix<f64>,
    /// `b×b`, right singular vectors of `xᵀz`.
    pub right_rotation: DMatrix<f64>,
    /// `(a−b)×b`; `x̃·R·diag(sin θ) = −(I − x·xᵀ)·z·V`.
    pub complement_rotation: DMatrix<f64>,
}

impl PrincipalDecomposition {
    pub fn dim_subspace(&self) -> usize {
        self.angles.len()
    }
}

/// Top-`b` principal directions of the mean-centered samples.
pub fn pca_basis(samples: &[FeatureVector], b: usize) -> Result<SubspaceBasis> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let a = samples[0].dim();
    if b == 0 || b >= a {
        return Err(Error::InvalidInput(format!(
            "subspace dimension {b} must be in [1, {a})"
        )));
    }
    let mean = FeatureVector::mean(samples)?;
    let n = samples.len();
    let mut centered = DMatrix::zeros(n, a);
    for (i, s) in samples.iter().enumerate() {
        let row = s.as_dvector() - mean.as_dvector();
        centered.set_row(i, &row.transpose());
    }

    let svd = SVD::new(centered, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let order = descending_order(svd.singular_values.as_slice());
    let sigma_max = order
        .first()
        .map(|&i| svd.singular_values[i])
        .unwrap_or(0.0);
    let tol = sigma_max * (n.max(a) as f64) * f64::EPSILON;
    let rank = if sigma_max > 0.0 {
        order
            .iter()
            .filter(|&&i| svd.singular_values[i] > tol)
            .count()
    } else {
        0
    };
    if rank < b {
        return Err(Error::RankDeficient {
            requested: b,
            achievable: rank,
        });
    }

    let mut basis = DMatrix::zeros(a, b);
    for (col, &i) in order.iter().take(b).enumerate() {
        basis.set_column(col, &v_t.row(i).transpose());
    }
    canonicalize_signs(&mut basis);
    let complement = complement_unchecked(&basis);
    Ok(SubspaceBasis { basis, complement })
}

/// Orthonormal basis of the orthogonal complement of `basis`'s column span.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (a, b) = basis.shape();
    if b == 0 || b >= a {
        return Err(Error::InvalidInput(format!(
            "subspace dimension {b} must be in [1, {a})"
        )));
    }
    let deviation = orthonormality_deviation(basis);
    if deviation > INPUT_ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(complement_unchecked(basis))
}

/// Householder completion: the trailing `a−b` columns of the full
/// orthogonal factor of `basis`.
fn complement_unchecked(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, b) = basis.shape();
    let mut work = basis.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(b);
    for j in 0..b {
        let mut v = DVector::zeros(a);
        v.rows_mut(j, a - j)
            .copy_from(&work.view((j, j), (a - j, 1)));
        let alpha = v[j];
        let norm = v.norm();
        if norm == 0.0 {
            reflectors.push(DVector::zeros(a));
            continue;
        }
        if alpha >= 0.0 {
            v[j] = alpha + norm;
        } else {
            v[j] = alpha - norm;
        }
        let vnorm = v.norm();
        v /= vnorm;
        let w = work.tr_mul(&v);
        work.ger(-2.0, &v, &w, 1.0);
        reflectors.push(v);
    }

    let mut q = DMatrix::zeros(a, a - b);
    for k in 0..(a - b) {
        q[(b + k, k)] = 1.0;
    }
    for v in reflectors.iter().rev() {
        if v.iter().all(|&e| e == 0.0) {
            continue;
        }
        let w = q.tr_mul(v);
        q.ger(-2.0, v, &w, 1.0);
    }
    canonicalize_signs(&mut q);
    q
}

/// Paired singular directions of `xᵀz`, sorted by increasing angle.
pub(crate) struct AlignedPairs {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub angles: DVector<f64>,
    /// `(I − xxᵀ)·z·V`, the part of each aligned `z` direction outside `x`.
    pub residual: DMatrix<f64>,
    pub sines: Vec<f64>,
}

pub(crate) fn aligned_pairs(x: &SubspaceBasis, z: &SubspaceBasis) -> Result<AlignedPairs> {
    check_dim(x.dim_ambient(), z.dim_ambient())?;
    check_dim(x.dim_subspace(), z.dim_subspace())?;
    let b = x.dim_subspace();

    let cross = x.basis().tr_mul(z.basis());
    let svd = SVD::new(cross.clone(), true, true);
    let u_raw = svd.u.expect("left singular vectors requested");
    let v_raw = svd
        .v_t
        .expect("right singular vectors requested")
        .transpose();
    let order = descending_order(svd.singular_values.as_slice());

    let mut u = DMatrix::zeros(b, b);
    let mut v = DMatrix::zeros(b, b);
    let mut cosines = DVector::zeros(b);
    for (col, &i) in order.iter().enumerate() {
        u.set_column(col, &u_raw.column(i));
        v.set_column(col, &v_raw.column(i));
        cosines[col] = svd.singular_values[i].clamp(0.0, 1.0);
    }
    // Flip (u_k, v_k) pairs together so the product stays xᵀz.
    for k in 0..b {
        if leading_entry_negative(u.column(k).as_slice()) {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }

    let zv = z.basis() * &v;
    let residual = zv - x.basis() * (cross * &v);
    let sines: Vec<f64> = (0..b).map(|k| residual.column(k).norm()).collect();
    let raw_angles: Vec<f64> = (0..b).map(|k| sines[k].atan2(cosines[k])).collect();

    // Keep the SVD order unless rounding made the atan2 angles disagree.
    let mut perm: Vec<usize> = (0..b).collect();
    perm.sort_by(|&i, &j| raw_angles[i].total_cmp(&raw_angles[j]));
    let permute = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for (dst, &src) in perm.iter().enumerate() {
            out.set_column(dst, &m.column(src));
        }
        out
    };
    Ok(AlignedPairs {
        u: permute(&u),
        v: permute(&v),
        residual: permute(&residual),
        sines: perm.iter().map(|&i| sines[i]).collect(),
        angles: DVector::from_iterator(b, perm.iter().map(|&i| raw_angles[i])),
    })
}

/// Principal angles via the SVD of `xᵀz`, with the complement rotation
/// coupled to the same right factor.
pub fn principal_angles(x: &SubspaceBasis, z: &SubspaceBasis) -> Result<PrincipalDecomposition> {
    let pairs = aligned_pairs(x, z)?;
    let a = x.dim_ambient();
    let b = x.dim_subspace();
    // Residual expressed in complement coordinates.
    let residual = x.complement().tr_mul(&pairs.residual);
    let complement_rotation = complement_rotation(&residual, &pairs.sines, a - b);
    Ok(PrincipalDecomposition {
        angles: pairs.angles,
        left_rotation: pairs.u,
        right_rotation: pairs.v,
        complement_rotation,
    })
}

/// `R_k = −residual_k / sin θ_k`, re-orthonormalized; coincident pairs get a
/// deterministic orthonormal completion (or zero when the complement has no
/// room left; those columns are always weighted by `sin 0 = 0`).
fn complement_rotation(residual: &DMatrix<f64>, sines: &[f64], rows: usize) -> DMatrix<f64> {
    let b = sines.len();
    let mut r = DMatrix::zeros(rows, b);
    let mut placed: Vec<DVector<f64>> = Vec::with_capacity(b);

    let mut active: Vec<usize> = (0..b).filter(|&k| sines[k] > COINCIDENT_SIN).collect();
    active.sort_by(|&i, &j| sines[j].total_cmp(&sines[i]).then(i.cmp(&j)));
    for &k in &active {
        let mut col = -residual.column(k) / sines[k];
        for _ in 0..2 {
            for p in &placed {
                let proj = p.dot(&col);
                col.axpy(-proj, p, 1.0);
            }
        }
        let norm = col.norm();
        col /= norm;
        r.set_column(k, &col);
        placed.push(col);
    }

    let mut candidate = 0usize;
    for k in (0..b).filter(|&k| sines[k] <= COINCIDENT_SIN) {
        while placed.len() < rows && candidate < rows {
            let mut col = DVector::zeros(rows);
            col[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for p in &placed {
                    let proj = p.dot(&col);
                    col.axpy(-proj, p, 1.0);
                }
            }
            let norm = col.norm();
            if norm > 0.5 {
                col /= norm;
                r.set_column(k, &col);
                placed.push(col);
                break;
            }
        }
    }
    r
}

/// Largest absolute entry of `MᵀM − I`.
pub fn orthonormality_deviation(m: &DMatrix<f64>) -> f64 {
    let gram = m.tr_mul(m);
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).amax()
}

/// Makes the largest-magnitude entry of each column positive (first index
/// wins on ties).
pub fn canonicalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        if leading_entry_negative(col.as_slice()) {
            col.neg_mut();
        }
    }
}

fn leading_entry_negative(col: &[f64]) -> bool {
    let mut best = 0.0f64;
    let mut sign_negative = false;
    for &e in col {
        if e.abs() > best {
            best = e.abs();
            sign_negative = e < 0.0;
        }
    }
    sign_negative
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
