// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use lrsm_core::pqml::{fit_pqml, select_order};
use lrsm_core::scan::scan_multi;
use lrsm_core::simulate::simulate_gcinar;
use lrsm_core::{
    builtin_model, lrsm_detect, simulate_mcp, GcinarParams, InformationCriterion, ScanConfig,
    SegmentSpec, Window, DEFAULT_BURN_IN, DEFAULT_DELTA,
};

#[test]
fn third_order_segment_selects_three_most_often() {
    let spec = builtin_model("B1", 2000).unwrap();
    let seg = &spec.segments[1];
    assert_eq!(seg.order(), 3);
    let mut votes = BTreeMap::new();
    for seed in 0..20 {
        let x = simulate_gcinar(seg, 2000, DEFAULT_BURN_IN, seed).unwrap();
        let p = select_order(
            &x,
            Window::from_bounds(1, 2000),
            5,
            InformationCriterion::Aic,
        )
        .unwrap();
        *votes.entry(p).or_insert(0) += 1;
    }
    let modal = votes.iter().max_by_key(|(_, &c)| c).map(|(&p, _)| p);
    assert_eq!(modal, Some(3), "{votes:?}");
}

#[test]
fn segment_means_follow_the_model() {
    let spec = builtin_model("A1", 6000).unwrap();
    let x = simulate_mcp(&spec, DEFAULT_BURN_IN, 17);
    let mut cuts = vec![0];
    cuts.extend_from_slice(spec.taus.taus());
    cuts.push(6000);
    for (j, seg) in spec.segments.iter().enumerate() {
        let vals = &x.values()[cuts[j]..cuts[j + 1]];
        let mean = vals.iter().sum::<u64>() as f64 / vals.len() as f64;
        let target = seg.params.stationary_mean();
        assert!(
            (mean - target).abs() <= 0.1 * target,
            "segment {j}: {mean} vs {target}"
        );
    }
}

#[test]
fn iid_counts_carry_no_autoregressive_weight() {
    let params = GcinarParams::new(2.0, vec![0.0], DEFAULT_DELTA).unwrap();
    let seg = SegmentSpec::poisson_inar(&params).unwrap();
    let x = simulate_gcinar(&seg, 5000, DEFAULT_BURN_IN, 4).unwrap();
    let fit = fit_pqml(&x, Window::from_bounds(1, 5000), 1, DEFAULT_DELTA).unwrap();
    assert!(fit.params.betas()[0] <= 0.05, "{:?}", fit.params);
    assert!((fit.params.beta0() - 2.0).abs() <= 0.1, "{:?}", fit.params);
}

#[test]
fn scan_then_select_recovers_both_changes() {
    let spec = builtin_model("A1", 2000).unwrap();
    let cfg = ScanConfig::new(133);
    let (mut covered, mut hits) = (0, 0);
    for seed in 0..10 {
        let x = simulate_mcp(&spec, DEFAULT_BURN_IN, seed);
        let cands = scan_multi(&x, &cfg).unwrap();
        if spec
            .taus
            .taus()
            .iter()
            .all(|&tau| cands.iter().any(|c| c.tau.abs_diff(tau) <= 133))
        {
            covered += 1;
        }
        if lrsm_detect(&x, &cfg).unwrap().m_hat == 2 {
            hits += 1;
        }
    }
    assert!(covered >= 8, "{covered}/10");
    assert!(hits >= 8, "{hits}/10");
}
