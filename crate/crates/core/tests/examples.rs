mod common;

use common::{assert_close, example};
use pidregion_core::curve::SingularCurve;
use pidregion_core::kp_analysis::{
    admissible_intervals, interval_union, kp_partition, required_z, stability_peaks, ZCensus,
};
use pidregion_core::slicing::{compute_slice, singular_frequencies, transition_signs, verify_point};
use pidregion_core::{root_census, GammaRegion, PlantModel, RealPoly};

#[test]
fn census_of_simple_polynomials() {
    let hurwitz = GammaRegion::hurwitz();
    // (s + 1)(s - 2)(s^2 + 1)
    let p = &RealPoly::from_roots(&[-1.0, 2.0]) * &RealPoly::new(vec![1.0, 0.0, 1.0]);
    let c = root_census(&p, &hurwitz, 1e-9).unwrap();
    assert_eq!((c.inside, c.on_boundary, c.outside), (1, 2, 1));
    let schur = GammaRegion::schur();
    let q = RealPoly::from_roots(&[0.5, -0.9, 1.5]);
    let c = root_census(&q, &schur, 1e-9).unwrap();
    assert_eq!((c.inside, c.on_boundary, c.outside), (2, 0, 1));
}

#[test]
fn example2_frequencies_at_minus_two() {
    let (p, r) = example(2);
    let got: Vec<f64> = singular_frequencies(&p, &r, -2.0).unwrap().iter().map(|f| f.param).collect();
    let want = [0.0, 0.352973, 0.663758, 0.774175, 3.34727];
    assert_eq!(got.len(), want.len(), "{got:?}");
    for (g, w) in got.iter().zip(want) {
        assert_close(*g, w, 1e-5);
    }
}

#[test]
fn example2_slice_has_two_separate_stable_polygons() {
    let (p, r) = example(2);
    let s = compute_slice(&p, &r, -2.0).unwrap();
    assert_eq!(s.stable_count(), 2);
    assert_eq!(s.stable_components(), 2);
    for f in s.stable_faces() {
        assert!(!f.truncated);
        let c = verify_point(&p, &r, f.rep[0], f.rep[1], -2.0).unwrap();
        assert!(c.all_inside(p.nominal_degree()));
    }
}

#[test]
fn example1_slice() {
    let (p, r) = example(1);
    let s = compute_slice(&p, &r, -0.26118).unwrap();
    assert_eq!(s.stable_count(), 1);
    let f = s.stable_faces().next().unwrap();
    let c = verify_point(&p, &r, f.rep[0], f.rep[1], -0.26118).unwrap();
    assert_eq!(c.inside, 8);
    // The known non-real singular points are among the computed ones.
    let params: Vec<_> = s.frequencies.iter().map(|f| f.location).collect();
    for (re, im) in [(0.9172, 0.3983), (0.5628, 0.8266)] {
        assert!(
            params.iter().any(|z| (z.re - re).abs() < 1e-3 && (z.im - im).abs() < 1e-3),
            "{params:?}"
        );
    }
}

#[test]
fn trivial_plant_frequencies() {
    // A = 1, B = s^3: kP = ω^2 on the curve.
    let p = PlantModel::continuous(vec![1.0], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
    let f = singular_frequencies(&p, &GammaRegion::hurwitz(), 4.0).unwrap();
    let w: Vec<f64> = f.iter().map(|f| f.param).collect();
    assert_eq!(w.len(), 2, "{w:?}");
    assert_close(w[0], 0.0, 1e-12);
    assert_close(w[1], 2.0, 1e-9);
}

#[test]
fn example5_has_no_polygons() {
    let (p, r) = example(5);
    for r3 in [-0.001, 0.0, 0.002, 0.004] {
        assert_eq!(compute_slice(&p, &r, r3).unwrap().stable_count(), 0, "r3 = {r3}");
    }
}

#[test]
fn example2_intervals() {
    let (p, r) = example(2);
    let cells = admissible_intervals(&p, &r, None).unwrap();
    let z: Vec<usize> = cells.iter().map(|c| c.z).collect();
    assert_eq!(z, [2, 4, 2]);
    assert_close(cells[0].lo, -24.0, 1e-6);
    assert_close(cells[0].hi, -2.76135, 1e-4);
    assert_close(cells[1].hi, 3.76642, 1e-4);
    assert_close(cells[2].hi, 6.15651, 1e-4);
    assert!(cells.iter().all(|c| c.required_z == 2));
    assert_eq!(interval_union(&cells).len(), 1);
}

#[test]
fn example3_intervals() {
    let (p, r) = example(3);
    let cells = admissible_intervals(&p, &r, None).unwrap();
    assert_eq!(cells.len(), 2);
    assert_close(cells[0].lo, -1.8708, 2e-3);
    assert_close(cells[0].hi, -1.5556, 2e-3);
    assert_close(cells[1].lo, 0.3157, 2e-3);
    assert_close(cells[1].hi, 0.5333, 2e-3);
    assert_eq!((cells[0].z, cells[1].z), (2, 3));
}

#[test]
fn example4_is_not_stabilizable() {
    let (p, r) = example(4);
    assert!(admissible_intervals(&p, &r, None).unwrap().is_empty());
}

#[test]
fn example1_required_count() {
    let (p, r) = example(1);
    let (req, census) = required_z(&p, &r).unwrap();
    assert_eq!(req, 3);
    match census {
        ZCensus::Circle { n, r, j_all, j_minus, .. } => assert_eq!((n, r, j_all, j_minus), (8, 4, 1, 1)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn example6_peak() {
    let (p, r) = example(6);
    let cells = admissible_intervals(&p, &r, None).unwrap();
    let cell = cells.iter().find(|c| c.contains(-9.0)).unwrap();
    let peaks = stability_peaks(&p, &r, cell).unwrap();
    let pk = peaks.iter().find(|pk| (pk.kp + 9.0024).abs() < 1e-3).expect("peak");
    assert_close(pk.ki, 3.01953, 1e-4);
    assert_close(pk.kd, 21.4958, 1e-3);
    assert!(pk.remainder_stable);
    assert!(compute_slice(&p, &r, -9.0).unwrap().stable_count() >= 1);
    assert_eq!(compute_slice(&p, &r, -10.0).unwrap().stable_count(), 0);
}

#[test]
fn small_plants_have_no_peaks() {
    let (p, r) = example(3);
    let cells = admissible_intervals(&p, &r, None).unwrap();
    assert!(stability_peaks(&p, &r, &cells[0]).is_err());
}

#[test]
fn count_is_constant_inside_cells() {
    for k in [2, 3, 6] {
        let (p, r) = example(k);
        let curve = SingularCurve::new(&p, &r).unwrap();
        for c in kp_partition(&p, &r, None).unwrap() {
            for t in [0.05, 0.3, 0.5, 0.7, 0.95] {
                let r3 = c.lo + t * (c.hi - c.lo);
                assert_eq!(curve.count(r3).unwrap(), c.z, "example {k} at {r3}");
            }
        }
    }
}

#[test]
fn admissible_midpoints_host_polygons() {
    for k in [2, 3] {
        let (p, r) = example(k);
        for c in admissible_intervals(&p, &r, None).unwrap() {
            assert!(compute_slice(&p, &r, c.mid()).unwrap().stable_count() >= 1, "example {k} at {}", c.mid());
        }
    }
}

#[test]
fn transition_signs_alternate() {
    for (k, r3) in [(2, -2.0), (2, 0.0), (3, 0.4)] {
        let (p, r) = example(k);
        let freqs = singular_frequencies(&p, &r, r3).unwrap();
        let signs: Vec<i8> = freqs
            .iter()
            .filter(|f| f.param > 0.0)
            .map(|f| transition_signs(&p, &r, r3, *f).unwrap())
            .map(|(ei, ed)| {
                assert_eq!(ei, -ed);
                ei
            })
            .collect();
        assert!(signs.windows(2).all(|w| w[0] == -w[1]), "example {k}: {signs:?}");
    }
}
