use rrect::beta::{condition_check, dyadic_sum_all, region_boundary, BetaProfile, SumVerdict};
use rrect::exponents::conjectured_exponents;
use rrect::extremizers::besicovitch_translations;
use rrect::{ExponentPair, Rat, Sidelengths};

fn r(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

#[test]
fn one_dimensional_knapp_exponent() {
    // Knapp in d = 1 at (2, 8): the norm grows like l^{1/8}.
    let pq = ExponentPair::from_ints(2, 8).unwrap();
    let ell = Sidelengths::new(vec![4.0]).unwrap();
    let e = conjectured_exponents(1, &pq, &ell).unwrap();
    assert_eq!(e.folded(), vec![r(1, 8)]);
}

#[test]
fn diagonal_vertex_of_n0_is_on_boundary() {
    for beta in [[4, 4], [4, 3]] {
        let b = BetaProfile::from_ints(&beta).unwrap();
        let region = region_boundary(&b, 64).unwrap();
        let v = b.diagonal_vertex(b.n0());
        assert!(region.has_vertex(v, v), "{beta:?}");
    }
}

#[test]
fn strong_point_sums_converge() {
    let b = BetaProfile::from_ints(&[4, 3]).unwrap();
    let pq = ExponentPair::from_ints(8, 8).unwrap();
    assert!(condition_check(&b, &pq).strong());
    let all = dyadic_sum_all(&b, &pq, 0.0, 4096).unwrap();
    assert_eq!(all.verdict, SumVerdict::Converged);
    assert!(all.per_sigma.iter().all(|(_, s)| s.conditional));
}

#[test]
fn perron_overlap_shrinks_with_n() {
    let ratios: Vec<f64> = [2, 4, 8, 16].iter().map(|&n| besicovitch_translations(n).unwrap().overlap_ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(besicovitch_translations(6).is_err());
}
