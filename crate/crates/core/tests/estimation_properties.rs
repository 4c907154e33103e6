use proptest::prelude::*;

use swarm_perception::estimation::{
    fisher_branch_value, fuse_social, informed_estimate, local_confidence_capped, local_estimate, Branch,
    EstimatePair, ObservationTally, SensorAccuracy, DEFAULT_CONFIDENCE_CAP,
};

fn informative() -> impl Strategy<Value = SensorAccuracy> {
    (0.0f64..=1.0, 0.0f64..=1.0)
        .prop_filter("b + w must exceed 1", |(b, w)| b + w > 1.02)
        .prop_map(|(b, w)| SensorAccuracy::new(b, w).unwrap())
}

fn tally() -> impl Strategy<Value = ObservationTally> {
    (1u64..=500).prop_flat_map(|t| (0..=t).prop_map(move |n| ObservationTally::new(n, t).unwrap()))
}

fn pairs() -> impl Strategy<Value = Vec<EstimatePair>> {
    prop::collection::vec((0.0f64..=1.0, 0.0f64..1e4), 1..12)
        .prop_map(|v| v.into_iter().map(|(x, c)| EstimatePair::new(x, c)).collect())
}

/// Likelihood of the tally at `f`; the estimate must not be beaten on a grid.
fn log_likelihood(f: f64, tally: ObservationTally, acc: SensorAccuracy) -> f64 {
    let p = acc.black * f + (1.0 - acc.white) * (1.0 - f);
    let (n, t) = (tally.black as f64, tally.total as f64);
    let term = |c: f64, prob: f64| if c == 0.0 { 0.0 } else { c * prob.ln() };
    term(n, p) + term(t - n, 1.0 - p)
}

proptest! {
    #[test]
    fn estimate_maximises_likelihood(acc in informative(), tally in tally()) {
        let x = local_estimate(tally, acc).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        let at_x = log_likelihood(x, tally, acc);
        for i in 0..=200 {
            let f = i as f64 / 200.0;
            prop_assert!(log_likelihood(f, tally, acc) <= at_x + 1e-9 * at_x.abs().max(1.0));
        }
    }

    #[test]
    fn estimate_is_monotone_in_black_count(acc in informative(), t in 1u64..300) {
        let mut prev = -1.0;
        for n in 0..=t {
            let x = local_estimate(ObservationTally::new(n, t).unwrap(), acc).unwrap();
            prop_assert!(x >= prev);
            prev = x;
        }
    }

    #[test]
    fn fisher_branches_meet_at_boundaries(acc in informative(), t in 1.0f64..1e4) {
        for (edge, boundary) in [(Branch::Low, (1.0 - acc.white) * t), (Branch::High, acc.black * t)] {
            if boundary <= 0.0 || boundary >= t {
                continue;
            }
            let outer = fisher_branch_value(edge, boundary, t, acc);
            let inner = fisher_branch_value(Branch::Interior, boundary, t, acc);
            prop_assert!((outer - inner).abs() <= 1e-9 * inner.abs());
        }
    }

    #[test]
    fn capped_confidence_is_bounded(acc in informative(), tally in tally()) {
        let a = local_confidence_capped(tally, acc, DEFAULT_CONFIDENCE_CAP).unwrap();
        prop_assert!((0.0..=DEFAULT_CONFIDENCE_CAP).contains(&a));
    }

    #[test]
    fn social_fusion_ignores_order(mut p in pairs()) {
        let a = fuse_social(&p);
        p.reverse();
        let b = fuse_social(&p);
        prop_assert!((a.value - b.value).abs() <= 1e-12);
        prop_assert!((a.confidence - b.confidence).abs() <= 1e-9 * a.confidence.max(1.0));
    }

    #[test]
    fn social_confidence_is_additive(p in pairs()) {
        let sum: f64 = p.iter().map(|e| e.confidence).sum();
        let fused = fuse_social(&p);
        prop_assert!((fused.confidence - sum).abs() <= 1e-9 * sum.max(1.0));
        if sum > 0.0 {
            let lo = p.iter().map(|e| e.value).fold(f64::MAX, f64::min);
            let hi = p.iter().map(|e| e.value).fold(f64::MIN, f64::max);
            prop_assert!(fused.value >= lo - 1e-12 && fused.value <= hi + 1e-12);
        }
    }

    #[test]
    fn informed_equals_direct_weighted_mean(local in (0.0f64..=1.0, 1e-3f64..1e4), p in pairs()) {
        let local = EstimatePair::new(local.0, local.1);
        let social = fuse_social(&p);
        let informed = informed_estimate(local, social).unwrap();
        let weight: f64 = local.confidence + p.iter().map(|e| e.confidence).sum::<f64>();
        let direct = (local.value * local.confidence + p.iter().map(|e| e.value * e.confidence).sum::<f64>()) / weight;
        prop_assert!((informed.value - direct).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&informed.value));
    }
}
