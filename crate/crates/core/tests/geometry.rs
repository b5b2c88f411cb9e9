use std::f64::consts::{PI, TAU};

use liftlab::{Covering, DeckElement, ManifoldPoint, Side};
use proptest::prelude::*;

fn covers() -> Vec<Covering> {
    vec![
        Covering::UniversalCircle,
        Covering::DFold(2),
        Covering::DFold(5),
        Covering::Antipodal(1),
        Covering::Antipodal(3),
    ]
}

fn sphere_point(dim: usize, seed: &[f64]) -> ManifoldPoint {
    let v: Vec<f64> = (0..dim)
        .map(|i| seed[i % seed.len()] + 0.1 * i as f64)
        .collect();
    ManifoldPoint::sphere(&v).unwrap()
}

fn total_point(cover: &Covering, t: f64, seed: &[f64]) -> ManifoldPoint {
    match *cover {
        Covering::UniversalCircle => ManifoldPoint::real(t),
        Covering::DFold(d) => ManifoldPoint::circle(t.rem_euclid(TAU * d as f64), d as f64),
        Covering::Antipodal(m) => sphere_point(m + 1, seed),
    }
}

#[test]
fn circle_distances_match_closed_form() {
    let a = ManifoldPoint::circle(0.1, 1.0);
    let b = ManifoldPoint::circle(TAU - 0.1, 1.0);
    assert!((a.distance(&b).unwrap() - 0.2).abs() < 1e-14);
    let c = ManifoldPoint::circle(0.0, 2.0);
    let d = ManifoldPoint::circle(2.0 * PI, 2.0);
    assert!((c.distance(&d).unwrap() - 2.0 * PI).abs() < 1e-14);
}

#[test]
fn projective_distance_ignores_sign() {
    let a = ManifoldPoint::proj(&[1.0, 0.0]).unwrap();
    let b = ManifoldPoint::proj(&[-1.0, 1e-3]).unwrap();
    assert!(a.distance(&b).unwrap() < 2e-3);
    let c = ManifoldPoint::proj(&[0.0, 1.0]).unwrap();
    assert!((a.distance(&c).unwrap() - PI / 2.0).abs() < 1e-14);
}

#[test]
fn fibers_have_expected_sizes() {
    let base = ManifoldPoint::circle(1.0, 1.0);
    assert_eq!(Covering::DFold(3).fiber(&base, None).unwrap().len(), 3);
    assert_eq!(
        Covering::UniversalCircle
            .fiber(&base, Some(2))
            .unwrap()
            .len(),
        5
    );
    let proj = ManifoldPoint::proj(&[0.6, 0.8]).unwrap();
    assert_eq!(Covering::Antipodal(1).fiber(&proj, None).unwrap().len(), 2);
}

#[test]
fn dfold_rejects_single_sheet() {
    assert!(Covering::DFold(1).validate().is_err());
    assert!(Covering::DFold(2).validate().is_ok());
}

#[test]
fn deck_group_laws() {
    for cover in covers() {
        let els = cover.deck_elements(2);
        let id = cover.deck_identity();
        for &a in &els {
            let inv = cover.deck_inverse(a).unwrap();
            assert_eq!(cover.deck_compose(a, inv).unwrap(), id, "{cover:?} {a}");
        }
    }
    assert_eq!(
        Covering::DFold(3)
            .deck_compose(DeckElement::ModShift(2), DeckElement::ModShift(2))
            .unwrap(),
        DeckElement::ModShift(1)
    );
}

#[test]
fn serde_shapes() {
    assert_eq!(
        serde_json::to_string(&Covering::UniversalCircle).unwrap(),
        "\"universal_circle\""
    );
    assert_eq!(
        serde_json::to_string(&Covering::DFold(2)).unwrap(),
        "{\"d_fold\":2}"
    );
    assert_eq!(
        serde_json::to_string(&Covering::Antipodal(1)).unwrap(),
        "{\"antipodal\":1}"
    );
}

proptest! {
    #[test]
    fn fiber_points_project_to_base(ci in 0usize..5, t in -20.0f64..20.0, x in -1.0f64..1.0, y in 0.1f64..1.0) {
        let cover = covers()[ci];
        let total = total_point(&cover, t, &[x, y]);
        let base = cover.project(&total).unwrap();
        for q in cover.fiber(&base, Some(1)).unwrap() {
            let back = cover.project(&q).unwrap();
            prop_assert!(back.distance(&base).unwrap() < 1e-12);
        }
    }

    #[test]
    fn projection_is_one_lipschitz(ci in 0usize..5, t in -20.0f64..20.0, dt in -1.0f64..1.0, x in -1.0f64..1.0, y in 0.1f64..1.0) {
        let cover = covers()[ci];
        let a = total_point(&cover, t, &[x, y]);
        let b = total_point(&cover, t + dt, &[y, x]);
        let up = cover.dist(Side::Total, &a, &b).unwrap();
        let down = cover.dist(Side::Base, &cover.project(&a).unwrap(), &cover.project(&b).unwrap()).unwrap();
        prop_assert!(down <= up + 1e-12);
    }

    #[test]
    fn deck_maps_are_isometries_over_the_same_base(ci in 0usize..5, t in -20.0f64..20.0, dt in -3.0f64..3.0, x in -1.0f64..1.0, y in 0.1f64..1.0) {
        let cover = covers()[ci];
        let a = total_point(&cover, t, &[x, y]);
        let b = total_point(&cover, t + dt, &[y, x]);
        for tau in cover.deck_elements(2) {
            let (ta, tb) = (cover.deck_apply(tau, &a).unwrap(), cover.deck_apply(tau, &b).unwrap());
            let d0 = cover.dist(Side::Total, &a, &b).unwrap();
            let d1 = cover.dist(Side::Total, &ta, &tb).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-9);
            let pa = cover.project(&ta).unwrap();
            prop_assert!(pa.distance(&cover.project(&a).unwrap()).unwrap() < 1e-12);
            prop_assert_eq!(cover.deck_between(&a, &ta).unwrap(), tau);
        }
    }

    #[test]
    fn local_lift_is_nearest_fiber_point(ci in 0usize..5, t in -20.0f64..20.0, dt in -0.5f64..0.5, x in -1.0f64..1.0, y in 0.1f64..1.0) {
        let cover = covers()[ci];
        let anchor = total_point(&cover, t, &[x, y]);
        let target = cover.project(&total_point(&cover, t + dt, &[x + 0.05, y])).unwrap();
        let base = cover.project(&anchor).unwrap();
        if base.distance(&target).unwrap() < 0.9 * cover.inj() {
            let lifted = cover.local_lift(&anchor, &target).unwrap();
            let best = cover
                .fiber(&target, Some(4))
                .unwrap()
                .iter()
                .map(|q| cover.dist(Side::Total, &anchor, q).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!((cover.dist(Side::Total, &anchor, &lifted).unwrap() - best).abs() < 1e-12);
        }
    }
}
