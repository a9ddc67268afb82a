mod common;

use common::{basis, random_field, torus, TrigStream};
use proptest::prelude::*;
use thirdgrade_core::basis::DomainKind;
use thirdgrade_core::field::{project_v, PhysicalField, SpectralField};

fn gram_defect(kind: DomainKind, n: usize) -> f64 {
    let b = basis(kind, n, 0.8);
    let fields: Vec<PhysicalField> = (0..b.len()).map(|i| SpectralField::unit(b.clone(), i).synthesize()).collect();
    let cell = b.cell();
    let mut worst: f64 = 0.0;
    for i in 0..b.len() {
        for j in 0..b.len() {
            let mut g = 0.0;
            for c in 0..2 {
                g += fields[i].components[c].iter().zip(&fields[j].components[c]).map(|(x, y)| x * y).sum::<f64>();
            }
            g *= cell;
            let expect = if i == j { 1.0 / b.mode(i).v_factor } else { 0.0 };
            worst = worst.max((g - expect).abs());
        }
    }
    worst
}

#[test]
fn torus_modes_are_l2_orthogonal() {
    assert!(gram_defect(DomainKind::Torus, 4) < 1e-12);
}

#[test]
fn channel_modes_are_l2_orthogonal() {
    assert!(gram_defect(DomainKind::Channel, 3) < 1e-12);
}

#[test]
fn modes_are_divergence_free_and_diagonalize_v() {
    for kind in [DomainKind::Torus, DomainKind::Channel] {
        let b = basis(kind, 3, 0.6);
        for i in 0..b.len() {
            let e = SpectralField::unit(b.clone(), i);
            let g = e.grad();
            let div: f64 = g.components[0].iter().zip(&g.components[3]).map(|(a, c)| (a + c).abs()).fold(0.0, f64::max);
            assert!(div < 1e-12, "{kind:?} mode {i} divergence {div}");
            let u = e.synthesize();
            let l = e.laplacian();
            let vf = b.mode(i).v_factor;
            for c in 0..2 {
                for (p, (a, d)) in u.components[c].iter().zip(&l.components[c]).enumerate() {
                    let v = a - 0.6 * d;
                    assert!((v - vf * a).abs() < 1e-12 * vf.max(1.0), "mode {i} point {p}");
                }
            }
        }
    }
}

#[test]
fn channel_modes_satisfy_free_slip_walls() {
    let b = basis(DomainKind::Channel, 4, 1.0);
    let g = b.grid();
    let n = g.points();
    assert_eq!(n % 2, 0);
    for i in 0..b.len() {
        let e = SpectralField::unit(b.clone(), i);
        let u = e.synthesize();
        let dy = e.derivative(0, 1);
        for l in 0..n {
            for j in [0, n / 2] {
                let p = l * n + j;
                assert!(u.components[1][p].abs() < 1e-13);
                assert!(dy.components[0][p].abs() < 1e-12);
            }
        }
    }
    // shear mode (cos y, 0) up to normalization
    let m = b.mode(b.find([0, 1]).unwrap());
    let v = m.eval(0.3, 0.0);
    let w = m.eval(0.3, 1.0);
    assert!((w[0] / v[0] - 1f64.cos()).abs() < 1e-14 && w[1] == 0.0);
}

#[test]
fn w_tilde_pairing_is_lambda_times_v_pairing() {
    for kind in [DomainKind::Torus, DomainKind::Channel] {
        let b = basis(kind, 3, 0.9);
        let z = random_field(&b, 5, 1.0, 0.5);
        let cz = z.curl_v();
        for i in 0..b.len() {
            let e = SpectralField::unit(b.clone(), i);
            let ce = e.curl_v();
            let curl_pair: f64 = cz.components[0].iter().zip(&ce.components[0]).map(|(a, c)| a * c).sum::<f64>() * b.cell();
            let wt = z.inner_v_quadrature(&e) + curl_pair;
            let lhs = b.mode(i).lambda * z.inner_v(&e);
            assert!((wt - lhs).abs() < 1e-10 * b.mode(i).lambda.max(1.0), "{kind:?} {i}: {wt} vs {lhs}");
        }
    }
}

#[test]
fn lambda_grows_without_bound() {
    let b = torus(6, 0.3);
    let l = b.modes().last().unwrap().lambda;
    assert!(b.modes().iter().all(|m| m.lambda > 0.0));
    assert!(l > 100.0 * b.mode(0).lambda);
}

#[test]
fn projection_of_basis_element_is_unit_vector() {
    let b = torus(3, 1.0);
    let f = SpectralField::unit(b.clone(), 3).synthesize();
    let p = project_v(&b, &f).unwrap();
    for (i, c) in p.coeffs().iter().enumerate() {
        let e = if i == 3 { 1.0 } else { 0.0 };
        assert!((c - e).abs() < 1e-12);
    }
}

#[test]
fn projection_of_pure_x1_field_has_two_modes() {
    let b = torus(3, 1.0);
    let f = PhysicalField::sample(&b, 2, |x, _, o| {
        o[0] = 0.0;
        o[1] = x.cos() + (2.0 * x).cos();
    });
    let p = project_v(&b, &f).unwrap();
    let nonzero: Vec<usize> = (0..b.len()).filter(|&i| p.coeffs()[i].abs() > 1e-12).collect();
    assert_eq!(nonzero.len(), 2);
    let labels: Vec<[i32; 2]> = nonzero.iter().map(|&i| b.mode(i).label).collect();
    assert!(labels.contains(&[1, 0]) && labels.contains(&[2, 0]));
}

#[test]
fn synthesize_then_project_round_trips() {
    let b = torus(4, 0.4);
    let y = random_field(&b, 9, 1.0, 0.7);
    let back = project_v(&b, &y.synthesize()).unwrap();
    let err = y.coeffs().iter().zip(back.coeffs()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_contracts_v_norm(seed in 0u64..10_000, n in 1usize..4) {
        // A torus field resolved to band n + 2 projected onto the first n modes.
        let fine = torus(n + 2, 0.7);
        let coarse = torus(n, 0.7);
        let y = random_field(&fine, seed, 1.0, 0.3);
        let sampled = PhysicalField::sample(&coarse, 2, |x, z, o| {
            let mut u = [0.0; 2];
            for (m, c) in fine.modes().iter().zip(y.coeffs()) {
                let v = m.eval(x, z);
                u[0] += c * v[0];
                u[1] += c * v[1];
            }
            o[0] = u[0];
            o[1] = u[1];
        });
        let p = project_v(&coarse, &sampled).unwrap();
        prop_assert!(p.v_norm() <= y.v_norm() * (1.0 + 1e-12));
        let pp = project_v(&coarse, &p.synthesize()).unwrap();
        for (a, c) in p.coeffs().iter().zip(pp.coeffs()) {
            prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn independent_stream_fields_land_in_the_span(seed in 0u64..10_000) {
        let b = torus(3, 0.5);
        let s = TrigStream::random(3, seed);
        let y = s.spectral(&b);
        let back = y.synthesize();
        let direct = s.sample(&b);
        for c in 0..2 {
            for (a, d) in back.components[c].iter().zip(&direct.components[c]) {
                prop_assert!((a - d).abs() < 1e-12);
            }
        }
    }
}
