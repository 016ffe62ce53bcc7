use configbounds_core::bounds::{srm_bound, worst_case_bound, BoundInputs, BoundMode};
use configbounds_core::configspace::{
    approx_profile, extract_dual, generate_instance, WdpGenConfig,
};
use configbounds_core::dpfit::fit;
use configbounds_core::piecewise::linf_distance;
use configbounds_core::rademacher::{empirical_rad_exact, DualSample};
use configbounds_core::solver::{
    branch_and_bound, BnbConfig, IntegerProgram, RulePair, ScoringRule,
};
use configbounds_core::PiecewiseConstant;

const LS: RulePair = RulePair(ScoringRule::L, ScoringRule::S);
const KAPPA: u64 = 25;

fn instances(count: u64) -> Vec<IntegerProgram> {
    (0..count)
        .map(|seed| {
            generate_instance(&WdpGenConfig {
                goods: 8,
                bids: 14,
                seed,
                ..WdpGenConfig::default()
            })
            .unwrap()
        })
        .collect()
}

fn normalized_tree_size(ip: &IntegerProgram, r: f64) -> f64 {
    let res = branch_and_bound(ip, &BnbConfig::new(LS, r, KAPPA)).unwrap();
    res.tree_size.min(KAPPA) as f64 / KAPPA as f64
}

fn duals(ips: &[IntegerProgram]) -> Vec<PiecewiseConstant> {
    ips.iter()
        .enumerate()
        .map(|(id, ip)| extract_dual(id, ip, LS, KAPPA, 1e-4).unwrap().dual)
        .collect()
}

#[test]
fn extracted_duals_match_direct_solves_away_from_cuts() {
    let ips = instances(6);
    for (ip, dual) in ips.iter().zip(duals(&ips)) {
        for i in 0..50 {
            let r = (i as f64 + 0.5) / 50.0;
            if dual.breaks().iter().any(|b| (b - r).abs() < 1e-3) {
                continue;
            }
            assert_eq!(
                dual.eval(r).unwrap(),
                normalized_tree_size(ip, r),
                "r = {r}"
            );
        }
    }
}

#[test]
fn dual_json_round_trips() {
    let ips = instances(1);
    let d = extract_dual(0, &ips[0], LS, KAPPA, 1e-4).unwrap();
    let text = serde_json::to_string(&d).unwrap();
    assert_eq!(
        serde_json::from_str::<configbounds_core::configspace::DualExtraction>(&text).unwrap(),
        d
    );
    let ip_text = serde_json::to_string(&ips[0]).unwrap();
    assert_eq!(
        serde_json::from_str::<IntegerProgram>(&ip_text).unwrap(),
        ips[0]
    );
}

#[test]
fn profile_feeds_a_valid_srm_bound() {
    let ips = instances(8);
    let duals = duals(&ips);
    let profile = approx_profile(&duals, 1..=16).unwrap();
    profile.validate().unwrap();
    assert_eq!(profile.samples, 8);
    if profile.j_star <= 16 {
        assert_eq!(profile.e_hat[&profile.j_star], 0.0);
    }
    let mut prev = f64::INFINITY;
    for n in [1_000u64, 10_000, 100_000, 1_000_000] {
        let inputs = BoundInputs {
            n,
            delta: 0.05,
            n_vars: ips[0].n() as u64,
            kappa: KAPPA,
            profile: profile.clone(),
        };
        let srm = srm_bound(&inputs, 1..=16, BoundMode::Generic).unwrap();
        assert!(srm.value < prev);
        assert!(srm.value > 2.0 * profile.e_hat[&srm.best_j]);
        prev = srm.value;
        assert!(worst_case_bound(n, inputs.n_vars, KAPPA, 0.05).unwrap() > 0.0);
    }
}

#[test]
fn approximants_transfer_complexity_on_real_duals() {
    let ips = instances(8);
    let f = duals(&ips);
    for k in 1..=4 {
        let g: Vec<PiecewiseConstant> = f.iter().map(|d| fit(d, k).unwrap().approximant).collect();
        let dist = f
            .iter()
            .zip(&g)
            .map(|(a, b)| linf_distance(a, b).unwrap())
            .sum::<f64>()
            / f.len() as f64;
        let rf = empirical_rad_exact(&DualSample::new(f.clone()).unwrap()).unwrap();
        let rg = empirical_rad_exact(&DualSample::new(g).unwrap()).unwrap();
        assert!(rf <= rg + dist + 1e-12, "k = {k}: {rf} > {rg} + {dist}");
    }
}
