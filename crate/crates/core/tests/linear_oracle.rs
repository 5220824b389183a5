//! Exact rational Cramer's-rule solve of the equilibrium system, used as an
//! independent check of the floating-point LU solve.

mod common;

use num_rational::Rational64;
use rand::Rng;
use stackcache::follower::solve_ne_linear;

type Q = Rational64;

fn det(mut a: Vec<Vec<Q>>) -> Q {
    let n = a.len();
    let mut det = Q::from_integer(1);
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| a[r][col] != Q::from_integer(0)) else {
            return Q::from_integer(0);
        };
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= factor * v;
            }
        }
    }
    det
}

/// `q_m = det(D_m) / det(D)` with `D_m` the matrix whose column `m` is the right-hand side.
fn cramer(alphas: &[i64], rhs: Q) -> Vec<Q> {
    let n = alphas.len();
    let d: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::from_integer(1) } else { Q::new(1, alphas[i]) }).collect())
        .collect();
    let base = det(d.clone());
    (0..n)
        .map(|m| {
            let mut dm = d.clone();
            for row in dm.iter_mut() {
                row[m] = rhs;
            }
            det(dm) / base
        })
        .collect()
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[test]
fn three_cp_exact_values() {
    // price 1/5, right-hand side 4
    let exact = cramer(&[4, 5, 6], Q::from_integer(4));
    assert_eq!(exact, vec![Q::new(268, 107), Q::new(308, 107), Q::new(332, 107)]);
    let two = cramer(&[5, 7], Q::new(7, 3));
    assert_eq!(two, vec![Q::new(98, 51), Q::new(35, 17)]);
}

#[test]
fn lu_solve_matches_exact_cramer() {
    let mut rng = common::rng(0x5eed_0001);
    for _ in 0..200 {
        let m = rng.random_range(1..=5usize);
        let alphas: Vec<i64> = (0..m).map(|_| rng.random_range((m as i64).max(2)..=30)).collect();
        let inv_price = rng.random_range(2..=40i64);
        let exact = cramer(&alphas, Q::from_integer(inv_price - 1));
        let alphas_f: Vec<f64> = alphas.iter().map(|&a| a as f64).collect();
        let market = common::market_from(&alphas_f, 100.0, 1.0, 0.0);
        let solved = solve_ne_linear(&market, 1.0 / inv_price as f64).unwrap().profile;
        for (x, e) in solved.q.iter().zip(&exact) {
            let e = to_f64(*e);
            assert!((x - e).abs() <= 1e-12 * e.abs().max(1.0), "alphas {alphas:?}: {x} vs {e}");
        }
    }
}
