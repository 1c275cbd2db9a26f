//! Reduced multi-bubble functional, scale equations and center searches.

use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use bubblelab::moments::EscobarConstants;
use bubblelab::reduced::{
    balance_law_residual, center_potential, critical_point_search, interaction_block, quantized_level,
    reduced_functional, scale_jacobian, Configuration, Domain, Field, InteractionKernel, ReducedModel, SearchOptions,
    TrigTerm,
};
use bubblelab::Error;
use proptest::prelude::*;

fn constants(n: usize) -> EscobarConstants {
    let nf = n as f64;
    let theta = 2.0 / (nf - 3.0);
    EscobarConstants {
        n,
        q: 2.0 * (nf - 1.0) / (nf - 2.0),
        a_n: 4.0 * (nf - 1.0) / (nf - 2.0),
        s_star: 3.4,
        theta,
        rho_conf: (nf - 2.0).powi(2) * theta / (2.0 * (nf - 1.0)),
        rho_conf_bracket: (nf - 2.0).powi(2) * theta / (2.0 * (nf - 1.0)),
        rho_plain: theta / 2.0,
        second_moment: None,
        kappa3: None,
        scal_weight: None,
        kappa3_effective: None,
        kappa1: None,
        kappa2: None,
        c_conf: 0.7,
        third_order: None,
    }
}

fn model(n: usize, mass: Field, h: Field) -> ReducedModel {
    ReducedModel::new(&constants(n), InteractionKernel::new(n, 1.0).unwrap(), mass, h)
}

#[test]
fn two_bubble_functional_formula() {
    let n = 5;
    let mass = Field::cos(1.0);
    let h = Field::Constant { value: 0.4 };
    let m = model(n, mass, h);
    let (x1, x2, e1, e2) = (0.3, 2.1, 1e-2, 3e-2);
    let config = Configuration::new(Domain::Circle, vec![vec![x1], vec![x2]], vec![e1, e2]).unwrap();
    let v = reduced_functional(&m, &config).unwrap();
    let nf = n as f64;
    let rho = m.rho;
    let d: f64 = x2 - x1;
    let a = (nf - 2.0) / 2.0;
    let want = 2.0
        + (nf - 1.0) * (rho * 0.4 * (e1 + e2) + e1 * e1 * x1.cos() + e2 * e2 * x2.cos())
        + (nf - 1.0) * 2.0 * 0.7 * (e1 * e2).powf(a) * d.powi(2 - n as i32);
    assert_relative_eq!(v.value, want, max_relative = 1e-14);
    assert_eq!(v.k, 2);
    assert_relative_eq!(v.first_order + v.second_order + v.interaction + 2.0, v.value, max_relative = 1e-14);
}

#[test]
fn single_bubble_jacobian() {
    let n = 6;
    let c = constants(n);
    let m = model(n, Field::Constant { value: -0.3 }, Field::Constant { value: 0.0 });
    let config = Configuration::new(Domain::Circle, vec![vec![1.0]], vec![1e-2]).unwrap();
    let j = scale_jacobian(&m, &config).unwrap();
    assert_relative_eq!(j.matrix[0][0], 2.0 * c.s_star * -0.3, max_relative = 1e-14);
    assert!(j.diagonally_dominant && j.warnings.is_empty());
}

#[test]
fn vanishing_mass_is_not_dominant() {
    let m = model(4, Field::Constant { value: 0.0 }, Field::Constant { value: 0.0 });
    let config = Configuration::new(Domain::Circle, vec![vec![0.0], vec![1.0]], vec![1e-3, 1e-3]).unwrap();
    let j = scale_jacobian(&m, &config).unwrap();
    assert!(!j.diagonally_dominant);
    let h = model(4, Field::Constant { value: 1.0 }, Field::Constant { value: 1.0 });
    assert!(!scale_jacobian(&h, &config).unwrap().warnings.is_empty());
}

#[test]
fn interaction_decays_with_scale() {
    for n in [4usize, 6] {
        let m = model(n, Field::Constant { value: 1.0 }, Field::Constant { value: 0.0 });
        let at = |e: f64| {
            let c = Configuration::new(Domain::Circle, vec![vec![0.0], vec![1.0]], vec![e, e]).unwrap();
            interaction_block(&m, &c).unwrap()
        };
        assert_relative_eq!(at(2e-3) / at(1e-3), 2f64.powi(n as i32 - 2), max_relative = 1e-12);
    }
}

#[test]
fn balance_law_is_antisymmetric_for_symmetric_pairs() {
    let m = model(5, Field::Constant { value: 1.0 }, Field::Constant { value: 0.2 });
    let config = Configuration::new(Domain::Torus, vec![vec![1.0, 1.0], vec![2.0, 1.5]], vec![1e-2, 1e-2]).unwrap();
    let r = balance_law_residual(&m, &config).unwrap();
    for (a, b) in r[0].iter().zip(&r[1]) {
        assert_relative_eq!(*a, -*b, max_relative = 1e-12);
    }
    assert!(r[0][0] != 0.0);
}

#[test]
fn close_pairs_warn_and_collisions_fail() {
    let m = model(5, Field::Constant { value: 1.0 }, Field::Constant { value: 0.0 });
    let near = Configuration::new(Domain::Circle, vec![vec![0.0], vec![1e-3]], vec![1e-2, 1e-2]).unwrap();
    assert!(!reduced_functional(&m, &near).unwrap().warnings.is_empty());
    let same = Configuration::new(Domain::Circle, vec![vec![0.5], vec![0.5]], vec![1e-2, 1e-2]).unwrap();
    assert!(matches!(reduced_functional(&m, &same), Err(Error::Collision { i: 0, j: 1 })));
    assert!(Configuration::new(Domain::Circle, vec![vec![0.5]], vec![1e-2, 1e-2]).is_err());
}

#[test]
fn single_center_search_on_cosines() {
    for freq in [1.0, 2.0] {
        let report = critical_point_search(&Field::cos(freq), Domain::Circle, 1, &SearchOptions::default()).unwrap();
        let count = 2 * freq as usize;
        assert_eq!(report.critical_points.len(), count);
        for c in &report.critical_points {
            let x = c.centers[0][0];
            assert!((freq * x / PI - (freq * x / PI).round()).abs() < 1e-6);
            let is_max = (freq * x).cos() > 0.0;
            assert_eq!(c.index, usize::from(is_max));
        }
    }
}

#[test]
fn constant_field_is_degenerate() {
    let report =
        critical_point_search(&Field::Constant { value: 2.0 }, Domain::Torus, 1, &SearchOptions::default()).unwrap();
    assert!(report.degenerate_manifold);
}

#[test]
fn quantized_levels() {
    assert_relative_eq!(quantized_level(8, 4, 2.7).unwrap(), 5.4, max_relative = 1e-14);
    assert_eq!(quantized_level(1, 6, 3.9).unwrap(), 3.9);
    assert!(quantized_level(0, 5, 1.0).is_err());
    assert!(quantized_level(2, 2, 1.0).is_err());
}

#[test]
fn unknown_domain_is_rejected() {
    assert!(Domain::parse("klein").is_err());
    assert_eq!(Domain::parse("sphere").unwrap().dim(), 2);
}

fn trig_field() -> Field {
    Field::Trig {
        terms: vec![
            TrigTerm { amplitude: 0.7, frequency: vec![1.0, 0.0], phase: 0.3 },
            TrigTerm { amplitude: -0.4, frequency: vec![1.0, 2.0], phase: 0.0 },
        ],
    }
}

proptest! {
    #[test]
    fn potential_is_relabeling_invariant(xs in prop::collection::vec((0.0f64..TAU, 0.0f64..TAU), 2..6), shift in 1usize..5) {
        let centers: Vec<Vec<f64>> = xs.iter().map(|(a, b)| vec![*a, *b]).collect();
        let mut rotated = centers.clone();
        rotated.rotate_left(shift % centers.len());
        let f = trig_field();
        prop_assert!((center_potential(&f, &centers) - center_potential(&f, &rotated)).abs() < 1e-12);
    }

    #[test]
    fn functional_is_relabeling_invariant(t in prop::collection::vec(0.0f64..TAU, 3), e in prop::collection::vec(1e-3f64..1e-2, 3)) {
        let m = model(5, Field::cos(1.0), Field::Constant { value: 0.1 });
        let centers: Vec<Vec<f64>> = t.iter().map(|x| vec![*x]).collect();
        let Ok(a) = Configuration::new(Domain::Circle, centers.clone(), e.clone()) else { return Ok(()) };
        let perm = [2, 0, 1];
        let b = Configuration::new(Domain::Circle, perm.iter().map(|&i| centers[i].clone()).collect(), perm.iter().map(|&i| e[i]).collect()).unwrap();
        let (va, vb) = (reduced_functional(&m, &a).unwrap().value, reduced_functional(&m, &b).unwrap().value);
        prop_assert!((va - vb).abs() <= 1e-12 * va.abs());
    }

    #[test]
    fn distances_are_symmetric_metrics(x in (0.0f64..PI, 0.0f64..TAU), y in (0.0f64..PI, 0.0f64..TAU), z in (0.0f64..PI, 0.0f64..TAU)) {
        for d in [Domain::Circle, Domain::Torus, Domain::Sphere] {
            let (x, y, z) = ([x.0, x.1], [y.0, y.1], [z.0, z.1]);
            let dxy = d.distance(&x, &y);
            prop_assert!((dxy - d.distance(&y, &x)).abs() < 1e-12);
            prop_assert!(dxy >= 0.0 && dxy <= PI * 2f64.sqrt() + 1e-12);
            prop_assert!(dxy <= d.distance(&x, &z) + d.distance(&z, &y) + 1e-12);
        }
    }

    #[test]
    fn kernel_is_positive_and_decreasing(n in 3usize..9, a in 0.01f64..3.0, b in 0.01f64..3.0) {
        let k = InteractionKernel::new(n, 1.0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(k.value(lo) > 0.0);
        prop_assert!(k.value(lo) >= k.value(hi));
        prop_assert!(k.derivative(lo) < 0.0);
    }

    #[test]
    fn quantized_levels_increase(n in 3usize..12, s in 0.5f64..10.0, k in 1usize..50) {
        prop_assert!(quantized_level(k + 1, n, s).unwrap() > quantized_level(k, n, s).unwrap());
    }
}
