use pricing_lab::buyer::all_strategies;
use pricing_lab::pricing::{
    check_consistent, check_regular_weakly_consistent, check_right_consistent, check_weakly_consistent,
    path_prices_nondecreasing, pre_transform, price_equivalent, price_path,
};
use pricing_lab::{AlgorithmSpec, Decision, DecisionPath, ExploitRate, Machine, Price, PricingMachine};

const DEPTH: usize = 12;

fn builtins() -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::prrfes(1, ExploitRate::Default).unwrap(),
        AlgorithmSpec::prrfes(3, ExploitRate::Default).unwrap(),
        AlgorithmSpec::prrfes(4, ExploitRate::Floor(6.0)).unwrap(),
        AlgorithmSpec::preprrfes(2, ExploitRate::Default).unwrap(),
        AlgorithmSpec::preprrfes(6, ExploitRate::Floor(8.15)).unwrap(),
        AlgorithmSpec::binary_search(),
        AlgorithmSpec::constant(Price::dyadic(3, 2)),
    ]
}

#[test]
fn class_inclusions_hold_on_builtins() {
    for spec in builtins() {
        let m = spec.build();
        let c = check_consistent(&m, DEPTH);
        let rwc = check_regular_weakly_consistent(&m, DEPTH, 6);
        let wc = check_weakly_consistent(&m, DEPTH);
        let cr = check_right_consistent(&m, DEPTH);
        let name = spec.name();
        assert!(!c.holds || rwc.holds, "{name}: C without RWC at {:?}", rwc.witness);
        assert!(!rwc.holds || wc.holds, "{name}: RWC without WC at {:?}", wc.witness);
        assert!(!c.holds || cr.holds, "{name}: C without C_R at {:?}", cr.witness);
        for v in [c, rwc, wc, cr] {
            assert_eq!(v.holds, v.witness.is_none(), "{name}");
        }
    }
}

/// Right-consistent built-ins with price infimum zero.
fn right_consistent() -> Vec<Machine> {
    builtins()
        .into_iter()
        .filter(|s| !s.is_phased() || s.name().starts_with("prrfes"))
        .map(|s| s.build())
        .filter(|m| check_right_consistent(m, DEPTH).holds)
        .collect()
}

#[test]
fn pre_of_right_consistent_is_weakly_consistent_and_monotone() {
    let machines = right_consistent();
    assert!(machines.len() >= 4);
    for m in machines {
        let pre = pre_transform(Price::zero(), m);
        assert!(check_weakly_consistent(&pre, DEPTH).holds);
        assert!(check_right_consistent(&pre, DEPTH).holds);
        assert!(path_prices_nondecreasing(&pre, DEPTH).holds);
    }
}

/// `pre(q, pre(q, m))` is not `pre(q, m)`: applied twice, the carried price
/// lags two purchases behind. Every node offers what `pre(q, m)` offered at
/// the most recent accepted node, and the two differ as soon as a positive
/// price has been bought.
#[test]
fn pre_twice_lags_one_more_purchase() {
    for m in right_consistent() {
        let once = pre_transform(Price::zero(), m.clone());
        let twice = pre_transform(Price::zero(), pre_transform(Price::zero(), m));
        for path in all_strategies(10) {
            let a = price_path(&once, &path);
            let b = price_path(&twice, &path);
            let mut carried = Price::zero();
            for (i, d) in path.iter().enumerate() {
                assert_eq!(b[i], carried);
                if d.is_accept() {
                    carried = a[i].clone();
                }
            }
        }
        let positive = (0..10).any(|n| {
            let path: DecisionPath = std::iter::repeat_n(Decision::Accept, n).collect();
            price_path(&once, &path).iter().any(|p| !p.is_zero())
        });
        assert_eq!(price_equivalent(&once, &twice, 10).holds, !positive);
    }
}

#[test]
fn prrfes_is_not_weakly_consistent() {
    let m = AlgorithmSpec::prrfes(4, ExploitRate::Default).unwrap().build();
    let v = check_weakly_consistent(&m, DEPTH);
    assert!(!v.holds);
    let w = v.witness.unwrap();
    // the witness is a real history of the machine
    assert!(w.len() < DEPTH);
    let _ = w.iter().fold(m.initial_state(), |s, d| m.step(&s, d));
}
