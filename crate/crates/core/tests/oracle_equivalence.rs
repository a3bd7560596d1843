#[path = "support/oracle.rs"]
mod oracle;

use oracle::{Kind, KINDS};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use soclens_core::measures::{cond_expectation, expectation};
use soclens_core::{pair_metrics, window_weights, BinTrace, ImpliedKind};

fn kind(k: Kind) -> ImpliedKind {
    match k {
        Kind::Level => ImpliedKind::Level,
        Kind::Reflect => ImpliedKind::Reflect,
        Kind::Rise => ImpliedKind::Rise,
        Kind::Fall => ImpliedKind::Fall,
    }
}

fn random_bits(rng: &mut Xoshiro256StarStar, len: usize) -> Vec<u8> {
    let p: f64 = rng.random_range(0.05..0.95);
    (0..len).map(|_| rng.random_bool(p) as u8).collect()
}

#[test]
fn packed_measures_match_direct_summation() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(11);
    for _ in 0..60 {
        let len = rng.random_range(3..=200);
        let xb = random_bits(&mut rng, len);
        let yb = random_bits(&mut rng, len);
        let u = rng.random_range(0..=len - 3);
        let v = rng.random_range(u + 3..=len);
        let alpha = [0.0, 1.0, 2.0, 4.0][rng.random_range(0..4)];
        let window = window_weights(u, v, alpha).unwrap();
        let (x, y) = (BinTrace::from_bits(&xb).unwrap(), BinTrace::from_bits(&yb).unwrap());
        for kx in KINDS {
            for ky in KINDS {
                let (ix, iy) = (x.implied(kind(kx)), y.implied(kind(ky)));
                for delta in -8i64..=8 {
                    let o = oracle::pair(&xb, kx, &yb, ky, u, v, alpha, delta);
                    let m = pair_metrics(&ix, &iy, &window, delta);
                    assert!((m.ex_x - o.ex_x).abs() < 1e-9);
                    assert!((m.ex_y - o.ex_y).abs() < 1e-9);
                    assert!((expectation(&iy, &window, delta) - o.ex_y).abs() < 1e-9);
                    assert!((m.ex_xy - o.ex_xy).abs() < 1e-9);
                    assert!((m.dep - o.dep).abs() < 1e-9, "dep {} vs {}", m.dep, o.dep);
                    assert!((m.cov - o.cov).abs() < 1e-9);
                    match (cond_expectation(m.ex_xy, m.ex_y), o.cond_ex) {
                        (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
                        (None, None) => {}
                        other => panic!("conditional expectation disagrees: {other:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn oracle_sanity() {
    // hand-checked: rectangular window, x = [1,1,0,0], y = [1,0,1,0]
    let o = oracle::pair(&[1, 1, 0, 0], Kind::Level, &[1, 0, 1, 0], Kind::Level, 0, 4, 0.0, 0);
    assert_eq!((o.ex_x, o.ex_y, o.ex_xy), (0.5, 0.5, 0.25));
    assert_eq!((o.dep, o.cov), (0.0, 0.0));
    // y one cycle later is x itself
    let o = oracle::pair(
        &[0, 1, 1, 0, 1],
        Kind::Level,
        &[0, 0, 1, 1, 0],
        Kind::Level,
        0,
        4,
        0.0,
        1,
    );
    assert_eq!(o.cond_ex, Some(1.0));
    assert_eq!(o.dep, 0.5);
}
