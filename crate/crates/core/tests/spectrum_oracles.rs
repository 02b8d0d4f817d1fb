use hlcone_core::lattice::*;
use proptest::prelude::*;

/// Plain odometer over the box `|nu_i| <= bound`, no pruning.
fn brute_force(m: usize, lambda: u64, bound: i64) -> Vec<Vec<i64>> {
    let d = m - 1;
    let mut nu = vec![-bound; d];
    let mut out = Vec::new();
    loop {
        let sq: i64 = nu.iter().map(|v| v * v).sum();
        let s: i64 = nu.iter().sum();
        if m as i64 * sq - s * s == lambda as i64 {
            out.push(nu.clone());
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if nu[i] < bound {
                nu[i] += 1;
                break;
            }
            nu[i] = -bound;
        }
    }
}

fn isqrt(n: u64) -> i64 {
    (0..).take_while(|r: &i64| (r * r) as u64 <= n).last().unwrap()
}

#[test]
fn search_matches_brute_force() {
    for m in 3..=7 {
        for lambda in 0..=2 * m as u64 {
            let got: Vec<Vec<i64>> = enumerate_modes(m, lambda).unwrap().into_iter().map(|f| f.nu).collect();
            let mut want = brute_force(m, lambda, isqrt(lambda));
            want.sort();
            assert_eq!(got, want, "m={m} lambda={lambda}");
        }
    }
}

#[test]
fn search_box_is_complete() {
    for m in 3..=9 {
        for lambda in 0..=2 * m as u64 {
            let b = isqrt(lambda);
            let tight = enumerate_modes_in_box(m, lambda, b).unwrap();
            let loose = enumerate_modes_in_box(m, lambda, 2 * b).unwrap();
            assert_eq!(tight, loose, "m={m} lambda={lambda}");
        }
    }
}

#[test]
fn quoted_multiplicities() {
    for m in 3..=13 {
        assert_eq!(multiplicity(m, m as u64 - 1).unwrap(), 2 * m, "linear, m={m}");
    }
    for m in (3..=7).chain(10..=13) {
        assert_eq!(multiplicity(m, 2 * m as u64).unwrap(), m * m - m, "quadratic, m={m}");
    }
    assert_eq!(multiplicity(8, 16).unwrap(), 126);
    assert_eq!(multiplicity(9, 18).unwrap(), 240);
    assert_eq!(multiplicity(5, 4).unwrap(), 10);
    assert_eq!(multiplicity(3, 1).unwrap(), 0);
    assert_eq!(multiplicity(3, 0).unwrap(), 1);
}

#[test]
fn m3_mode_lists() {
    let nus = |l| enumerate_modes(3, l).unwrap().into_iter().map(|f| f.nu).collect::<Vec<_>>();
    assert_eq!(nus(2), [[-1, -1], [-1, 0], [0, -1], [0, 1], [1, 0], [1, 1]]);
    assert_eq!(nus(6), [[-2, -1], [-1, -2], [-1, 1], [1, -1], [1, 2], [2, 1]]);
}

#[test]
fn rigidity_reports() {
    let r = rigidity_report(5).unwrap();
    assert_eq!((r.rigid, r.linear_mult, r.quadratic_mult), (true, 10, 20));
    let r = rigidity_report(8).unwrap();
    assert_eq!((r.rigid, r.excess), (false, 70));
    let r = rigidity_report(9).unwrap();
    assert_eq!((r.rigid, r.excess), (false, 168));
    for m in (3..=7).chain(10..=13) {
        assert!(rigidity_report(m).unwrap().rigid, "m={m}");
    }
}

fn nu_strategy() -> impl Strategy<Value = (usize, Vec<i64>)> {
    (3usize..=12).prop_flat_map(|m| (Just(m), prop::collection::vec(-20i64..=20, m - 1)))
}

proptest! {
    #[test]
    fn form_dominates_squared_norm((m, nu) in nu_strategy()) {
        let q = eigenvalue_of(m, &nu).unwrap() as i64;
        let sq: i64 = nu.iter().map(|v| v * v).sum();
        prop_assert!(q >= sq);
        prop_assert_eq!(q == 0, nu.iter().all(|&v| v == 0));
    }

    #[test]
    fn form_is_symmetric((m, nu) in nu_strategy(), rot in 0usize..11) {
        let q = eigenvalue_of(m, &nu).unwrap();
        let neg: Vec<i64> = nu.iter().map(|v| -v).collect();
        prop_assert_eq!(eigenvalue_of(m, &neg).unwrap(), q);
        let mut perm = nu.clone();
        perm.rotate_left(rot % nu.len());
        prop_assert_eq!(eigenvalue_of(m, &perm).unwrap(), q);
    }
}

#[test]
fn mode_lists_are_closed_under_symmetries() {
    for (m, lambda) in [(4, 8), (5, 10), (6, 12), (8, 16)] {
        let modes: Vec<Vec<i64>> = enumerate_modes(m, lambda).unwrap().into_iter().map(|f| f.nu).collect();
        let set: std::collections::BTreeSet<_> = modes.iter().cloned().collect();
        for nu in &modes {
            assert!(set.contains(&nu.iter().map(|v| -v).collect::<Vec<_>>()));
            let mut swapped = nu.clone();
            swapped.swap(0, m - 2);
            assert!(set.contains(&swapped));
        }
    }
}
