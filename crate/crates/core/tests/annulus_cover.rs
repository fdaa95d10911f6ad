use regproj::cones::Projection;
use regproj::covers::{build_cover_2d, verify_regular_cover};
use regproj::sets::{Aabb, DefinableSet};

fn annulus() -> DefinableSet {
    let b = Aabb::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    DefinableSet::from_atoms(2, &["x^2 + y^2 > 0.25", "x^2 + y^2 < 1"], Some(b)).unwrap()
}

#[test]
fn three_projections_cover_the_annulus() {
    let t = std::time::Instant::now();
    let lambdas = [Projection::vertical(), Projection::horizontal(), Projection::planar(1.0)];
    let cover = build_cover_2d(&annulus(), &lambdas, &Default::default()).unwrap();
    let per: Vec<usize> = (0..3).map(|j| cover.pieces.iter().filter(|p| p.provenance.unwrap().projection == j).count()).collect();
    assert_eq!(per, vec![4, 4, 4]);
    let r = verify_regular_cover(&cover, 100, f64::INFINITY, 400).unwrap();
    eprintln!("annulus: {:?} c_hat {} in {:?}", r.coverage, r.c_hat, t.elapsed());
    assert_eq!(r.coverage, 1.0, "{:?}", r.uncovered);
}

#[test]
fn vertical_alone_misses_fibers() {
    let cover = build_cover_2d(&annulus(), &[Projection::vertical()], &Default::default()).unwrap();
    assert_eq!(cover.pieces.len(), 4);
    // fibers x = ±1/2 lie on the lattice when the spacing divides 1/2
    let r = verify_regular_cover(&cover, 99, f64::INFINITY, 200).unwrap();
    assert!(r.coverage < 1.0);
    assert!(!r.pass);
    assert!(r.uncovered.iter().all(|p| (p[0].abs() - 0.5).abs() < 1e-9));
}

#[test]
fn constructor_reports_half_fibers() {
    let cover = build_cover_2d(&annulus(), &[Projection::vertical()], &Default::default()).unwrap();
    let vals: Vec<f64> = cover.uncovered.iter().map(|f| f.value).collect();
    assert_eq!(vals.len(), 2, "{vals:?}");
    assert!((vals[0] + 0.5).abs() < 1e-8 && (vals[1] - 0.5).abs() < 1e-8);
    let all = build_cover_2d(&annulus(), &[Projection::vertical(), Projection::horizontal(), Projection::planar(1.0)], &Default::default())
        .unwrap();
    assert!(all.uncovered.is_empty(), "{:?}", all.uncovered);
}
