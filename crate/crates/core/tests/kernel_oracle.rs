mod common;

use adasel::gfk::{geodesic_flow, gfk_kernel, kernel_integral_oracle};
use adasel::subspace::{principal_angles, SubspaceBasis};
use common::*;
use nalgebra::DMatrix;

fn planar(alpha: f64) -> (SubspaceBasis, SubspaceBasis) {
    let x = SubspaceBasis::from_basis(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
    let z = SubspaceBasis::from_basis(DMatrix::from_column_slice(
        2,
        1,
        &[alpha.cos(), alpha.sin()],
    ))
    .unwrap();
    (x, z)
}

/// `∫₀¹ (cos yα, sin yα)(cos yα, sin yα)ᵀ dy`.
fn planar_integral(alpha: f64) -> DMatrix<f64> {
    let s = (2.0 * alpha).sin() / (4.0 * alpha);
    let off = (1.0 - (2.0 * alpha).cos()) / (4.0 * alpha);
    DMatrix::from_row_slice(2, 2, &[0.5 + s, off, off, 0.5 - s])
}

#[test]
fn closed_form_matches_quadrature_on_random_pairs() {
    let mut rng = rng(7);
    for &(a, b) in &[(20, 5), (10, 2), (50, 10), (12, 7)] {
        let x = random_subspace(&mut rng, a, b);
        let z = random_subspace(&mut rng, a, b);
        let dec = principal_angles(&x, &z).unwrap();
        let w = gfk_kernel(&dec, &x).unwrap();
        let oracle = kernel_integral_oracle(&dec, &x, 100_000).unwrap();
        let err = rel_frobenius(&w.matrix, &oracle);
        assert!(err <= 1e-8, "a={a} b={b}: relative error {err:e}");
    }
}

#[test]
fn quadrature_matches_planar_integral() {
    let (x, z) = planar(0.7);
    let dec = principal_angles(&x, &z).unwrap();
    let oracle = kernel_integral_oracle(&dec, &x, 100_000).unwrap();
    assert!((oracle - planar_integral(0.7)).amax() < 1e-9);
}

#[test]
fn quadrature_of_constant_flow_is_projector() {
    let mut rng = rng(3);
    let x = random_subspace(&mut rng, 8, 3);
    let dec = principal_angles(&x, &x).unwrap();
    let oracle = kernel_integral_oracle(&dec, &x, 10).unwrap();
    let proj = x.basis() * x.basis().transpose();
    assert!((oracle - proj).amax() < 1e-12);
}

#[test]
fn quadrature_converges_at_second_order() {
    let mut rng = rng(11);
    let x = random_subspace(&mut rng, 20, 5);
    let z = random_subspace(&mut rng, 20, 5);
    let dec = principal_angles(&x, &z).unwrap();
    let w = gfk_kernel(&dec, &x).unwrap();
    let fine = (kernel_integral_oracle(&dec, &x, 10_000).unwrap() - &w.matrix).norm();
    let coarse = (kernel_integral_oracle(&dec, &x, 5_000).unwrap() - &w.matrix).norm();
    let ratio = coarse / fine;
    assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
}

#[test]
fn small_angles_use_series_consistently() {
    // One principal angle near 1e-3 against the quadrature oracle.
    let theta: f64 = 1e-3;
    let x = SubspaceBasis::from_basis(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
    let z = SubspaceBasis::from_basis(DMatrix::from_column_slice(
        3,
        1,
        &[theta.cos(), 0.0, theta.sin()],
    ))
    .unwrap();
    let dec = principal_angles(&x, &z).unwrap();
    assert!((dec.angles[0] - theta).abs() < 1e-15);
    let w = gfk_kernel(&dec, &x).unwrap();
    let oracle = kernel_integral_oracle(&dec, &x, 100_000).unwrap();
    assert!((&w.matrix - oracle).amax() < 1e-13);
}

#[test]
fn flow_endpoints_span_both_subspaces() {
    let mut rng = rng(5);
    for &(a, b) in &[(10, 3), (6, 4), (30, 8)] {
        let x = random_subspace(&mut rng, a, b);
        let z = random_subspace(&mut rng, a, b);
        let dec = principal_angles(&x, &z).unwrap();
        for y in [0.0, 0.25, 0.5, 1.0] {
            let p = geodesic_flow(&dec, &x, y).unwrap();
            let gram = p.matrix.tr_mul(&p.matrix) - DMatrix::<f64>::identity(b, b);
            assert!(gram.amax() < 1e-8);
        }
        let start = geodesic_flow(&dec, &x, 0.0).unwrap();
        assert!((&start.matrix - x.basis() * &dec.left_rotation).amax() < 1e-15);
        let end = SubspaceBasis::from_basis(geodesic_flow(&dec, &x, 1.0).unwrap().matrix).unwrap();
        let to_x = principal_angles(&SubspaceBasis::from_basis(start.matrix).unwrap(), &x).unwrap();
        let to_z = principal_angles(&end, &z).unwrap();
        assert!(to_x.angles.amax() < 1e-8);
        assert!(to_z.angles.amax() < 1e-8, "a={a} b={b}: {:?}", to_z.angles);
    }
}

#[test]
fn factored_distance_matches_dense_kernel() {
    use adasel::gfk::{factored_distance, kernel_distance};
    let mut rng = rng(21);
    for &(a, b) in &[(6, 1), (10, 5), (20, 5), (50, 10), (12, 7), (40, 3)] {
        for overlap in [false, true] {
            let x = random_subspace(&mut rng, a, b);
            let z = if overlap {
                // Share one direction with x to exercise a zero angle.
                let mut m = random_orthonormal(&mut rng, a, b);
                m.set_column(0, &x.basis().column(0));
                SubspaceBasis::from_basis(gram_schmidt(m)).unwrap()
            } else {
                random_subspace(&mut rng, a, b)
            };
            let w = gfk_kernel(&principal_angles(&x, &z).unwrap(), &x).unwrap();
            let t = random_feature(&mut rng, a);
            let r = random_feature(&mut rng, a);
            let dense = kernel_distance(&t, &r, &w).unwrap();
            let fast = factored_distance(&x, &z, &t, &r).unwrap();
            assert!(
                (dense - fast).abs() <= 1e-10 * dense.max(1.0),
                "a={a} b={b}: dense {dense} factored {fast}"
            );
        }
    }
}

fn gram_schmidt(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..m.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).into_owned();
                m.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let n = m.column(j).norm();
        m.column_mut(j).unscale_mut(n);
    }
    m
}
