//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them). Tolerances and budgets are pinned
//! in the assertions.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Rational64;
use num_traits::Zero;

use roughmls::config::{Command, ExperimentConfig};
use roughmls::experiment::run_experiment;
use roughmls::group::{self, FreeProductPresentation, GroupElement};
use roughmls::metrics::{
    check_roughly_geodesic, LeftInvariantMetric, RoughGeodesicOutcome, SearchDomain,
};
use roughmls::periodicity::{
    derive_goodness_constants, make_good_element, verify_periodic_morse, verify_power_property,
};
use roughmls::projections::{
    cosets_meeting_ball, estimate_system_constants, check_projection_lemmas, project,
    project_exact_freeproduct, verify_projection_axioms, CosetFamilySpec, PeripheralCoset,
    VisibilitySampleSpec,
};
use roughmls::rational::format_rational;
use roughmls::report::{strip_timing, to_json_lines};
use roughmls::rng::SplitMix64;
use roughmls::spectrum::{
    compare_mls, delta_sequence, periodic_additivity_check, rigidity_bound, rough_equality_gap,
    rough_equality_gap_enumerated, translation_length, translation_length_exact, GrowthClass,
    GrowthThresholds, MlsVerdict, TranslationLengthMode,
};
use roughmls::Metric64;

fn f2() -> Arc<FreeProductPresentation> {
    FreeProductPresentation::free_group(2).unwrap()
}

fn z2z() -> Arc<FreeProductPresentation> {
    FreeProductPresentation::from_ranks(&[2, 1]).unwrap()
}

fn el(pres: &Arc<FreeProductPresentation>, s: &str) -> GroupElement {
    GroupElement::parse(pres, s).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_projection_axioms() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for (name, pres) in [("F2", f2()), ("Z2*Z", z2z())] {
        let m: Metric64 = LeftInvariantMetric::standard(&pres);
        let out =
            verify_projection_axioms(&m, 5, &CosetFamilySpec::AllMeetingBall, None).unwrap();
        pass &= out.violations.is_empty();
        pass &= out.checked.iter().all(|&c| c > 0);
        detail.push_str(&format!(
            "{name}: C_est={} instances={:?}; ",
            format_rational(out.c_est),
            out.checked
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    detail.push_str(&format!("{:.1}s (budget 60s)", elapsed.as_secs_f64()));
    report("1 (projection axioms, radius 5)", pass, &detail);
}

#[test]
fn criterion_2_projection_lemmas() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for (name, pres) in [("F2", f2()), ("Z2*Z", z2z())] {
        let m: Metric64 = LeftInvariantMetric::standard(&pres);
        let axioms =
            verify_projection_axioms(&m, 5, &CosetFamilySpec::AllMeetingBall, None).unwrap();
        let lemmas = check_projection_lemmas(&m, 5, 10_000, 20_260_808, axioms.c_est).unwrap();
        pass &= lemmas.violations.is_empty();
        pass &= lemmas.gate_persistence_checked > 0 && lemmas.lipschitz_checked > 0;
        detail.push_str(&format!(
            "{name}: persistence={} lipschitz={} capped={}; ",
            lemmas.gate_persistence_checked, lemmas.lipschitz_checked, lemmas.capped_pairs
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    detail.push_str(&format!("{:.1}s (budget 300s)", elapsed.as_secs_f64()));
    report("2 (geodesic lemmas, radius 5, cap 10^4)", pass, &detail);
}

#[test]
fn criterion_3_exact_vs_oracle() {
    // closed-form projection vs the generic metric projection: exhaustive on
    // the F2 ball of radius 5, seeded random on Z^2 * Z
    let mut mismatches = 0u32;
    {
        let pres = f2();
        let m: Metric64 = LeftInvariantMetric::standard(&pres);
        let ball = group::enumerate_ball(&pres, 5, 1 << 22).unwrap();
        let cosets = cosets_meeting_ball(&pres, &ball);
        for x in &ball {
            for p in &cosets {
                let exact = project_exact_freeproduct(x, p);
                let generic = project(&m, x, p, 1_000_000).unwrap();
                if generic != vec![exact] {
                    mismatches += 1;
                }
            }
        }
    }
    {
        let pres = z2z();
        let m: Metric64 = LeftInvariantMetric::standard(&pres);
        let mut rng = SplitMix64::new(33);
        for _ in 0..200 {
            let x = group::random_reduced(&pres, 1 + rng.next_below(8) as u32, &mut rng);
            let base = group::random_reduced(&pres, rng.next_below(5) as u32, &mut rng);
            let coset = PeripheralCoset::of_element(&base, rng.next_below(2));
            let exact = project_exact_freeproduct(&x, &coset);
            let generic = project(&m, &x, &coset, 1_000_000).unwrap();
            if generic != vec![exact] {
                mismatches += 1;
            }
        }
    }

    // exact translation length vs the subadditive estimate at n_max = 64
    let mut tl_mismatches = 0u32;
    for pres in [f2(), z2z()] {
        let m: Metric64 = LeftInvariantMetric::standard(&pres);
        let mut rng = SplitMix64::new(64);
        for _ in 0..100 {
            let g = group::random_reduced(&pres, 1 + rng.next_below(7) as u32, &mut rng);
            let exact = translation_length_exact(&g) as f64;
            let fekete = translation_length(&m, &g, TranslationLengthMode::Fekete, 64).unwrap();
            if (fekete.value - exact).abs() > fekete.error_bound + 1e-12 {
                tl_mismatches += 1;
            }
            if fekete.value < exact - 1e-12 {
                tl_mismatches += 1;
            }
        }
    }
    let pass = mismatches == 0 && tl_mismatches == 0;
    report(
        "3 (exact vs oracle, 200 seeded elements)",
        pass,
        &format!("projection mismatches={mismatches}, length mismatches={tl_mismatches}"),
    );
}

#[test]
fn criterion_4_good_elements() {
    let pres = f2();
    let m: Metric64 = LeftInvariantMetric::standard(&pres);
    let vis = VisibilitySampleSpec {
        radius: 4,
        pairs: 60,
        classes: vec![(Rational64::from_integer(1), Rational64::zero())],
        paths_per_pair: 4,
        seed: 4,
        min_samples: 40,
    };
    let (sys, _, _) = estimate_system_constants(&m, 4, &vis).unwrap();
    let gc = derive_goodness_constants(&sys).unwrap();
    assert!(gc.strict_r0_bound_holds() && gc.chain_holds());
    let kappa10 = gc
        .kappa(Rational64::from_integer(1), Rational64::zero())
        .map(roughmls::rational::to_f64)
        .expect("R(1,0) estimated");

    let r0 = gc.r0.ceil().to_integer() as u32;
    let mut rng = SplitMix64::new(404);
    let mut attempts = 0u32;
    let mut successes = 0u32;
    let mut power_failures = 0u32;
    let mut kappa_worst: f64 = 0.0;
    for sphere in (r0 + 3)..=(r0 + 8) {
        for idx in 0..20 {
            attempts += 1;
            let g0 = group::random_reduced(&pres, sphere, &mut rng);
            if let Ok(ge) = make_good_element(&g0, &gc, 0) {
                successes += 1;
                let power = verify_power_property(&m, &ge.g, ge.h_factor, &gc, 20).unwrap();
                if !power.ok() {
                    power_failures += 1;
                }
                let morse = verify_periodic_morse(
                    &m,
                    &ge.g,
                    ge.h_factor,
                    &gc,
                    4,
                    Rational64::from_integer(1),
                    Rational64::zero(),
                    4,
                    1000 + idx as u64,
                )
                .unwrap();
                kappa_worst = kappa_worst.max(morse.kappa_observed);
            }
        }
    }
    let rate = successes as f64 / attempts as f64;
    let pass = rate >= 0.95 && power_failures == 0 && kappa_worst <= kappa10;
    report(
        "4 (good elements, spheres R0+3..R0+8)",
        pass,
        &format!(
            "success {successes}/{attempts} ({:.0}%), power failures={power_failures}, \
             kappa_observed={kappa_worst} <= kappa(1,0)={kappa10}",
            rate * 100.0
        ),
    );
}

#[test]
fn criterion_5_counterexample_reproduction() {
    let start = Instant::now();
    let pres = f2();
    let std: Metric64 = LeftInvariantMetric::standard(&pres);
    let sqrt = LeftInvariantMetric::sqrt(LeftInvariantMetric::<f64>::standard(&pres));

    // (a) equal spectra within error bars on 100 sampled elements
    let mut rng = SplitMix64::new(5);
    let sample: Vec<GroupElement> = (0..100)
        .map(|_| group::random_reduced(&pres, 1 + rng.next_below(8) as u32, &mut rng))
        .collect();
    let mls = compare_mls(&std, &sqrt, &sample, 64).unwrap();
    let equal = mls
        .per_element
        .iter()
        .filter(|c| c.verdict == MlsVerdict::Equal)
        .count();

    // (b) the gap is exactly sqrt(r) for r <= 36
    let mut gap_ok = true;
    for r in 1..=36u32 {
        let gap = rough_equality_gap(&std, &sqrt, r, 5_000_000).unwrap();
        gap_ok &= gap == (r as f64).sqrt();
        if r <= 8 {
            let enumerated = rough_equality_gap_enumerated(&std, &sqrt, r, 5_000_000).unwrap();
            gap_ok &= (enumerated - gap).abs() < 1e-9;
        }
    }

    // (c) failure certificates for delta <= 2 on the pair (1, a^25)
    let one = GroupElement::identity(&pres);
    let target = el(&pres, "a^25");
    let mut cert_ok = true;
    for delta in [0.0, 1.0, 2.0] {
        let out = check_roughly_geodesic(
            &sqrt,
            &one,
            &target,
            delta,
            30,
            50_000_000,
            SearchDomain::Axis,
        )
        .unwrap();
        cert_ok &= matches!(out, RoughGeodesicOutcome::NoPath(_));
    }

    let elapsed = start.elapsed();
    let pass = equal == 100 && gap_ok && cert_ok && elapsed < Duration::from_secs(120);
    report(
        "5 (counterexample: sqrt-perturbed pair)",
        pass,
        &format!(
            "equal={equal}/100, gap=sqrt(r) for r<=36: {gap_ok}, certificates delta<=2: {cert_ok}, \
             {:.1}s (budget 120s)",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_6_positive_control() {
    let pres = f2();
    let std: Metric64 = LeftInvariantMetric::standard(&pres);
    let mut pass = true;
    let mut detail = String::new();
    for o_word in ["a", "a b"] {
        let o = el(&pres, o_word);
        let bound = 2.0 * o.word_length() as f64;
        let shift =
            LeftInvariantMetric::shifted(LeftInvariantMetric::<f64>::standard(&pres), o).unwrap();
        let mut rng = SplitMix64::new(6);
        let sample: Vec<GroupElement> = (0..50)
            .map(|_| group::random_reduced(&pres, 1 + rng.next_below(7) as u32, &mut rng))
            .collect();
        let mls = compare_mls(&std, &shift, &sample, 64).unwrap();
        pass &= mls.all_equal();

        let mut sublinear = true;
        let mut bounded = true;
        for g in sample.iter().take(10) {
            let prof = delta_sequence(&std, &shift, g, 64, GrowthThresholds::default()).unwrap();
            sublinear &= prof.classification == GrowthClass::Sublinear;
            bounded &= prof.values.iter().all(|&v| v <= bound);
        }
        pass &= sublinear && bounded;

        let mut gap_ok = true;
        for r in 1..=5u32 {
            let gap = rough_equality_gap(&std, &shift, r, 5_000_000).unwrap();
            gap_ok &= gap <= bound;
        }
        pass &= gap_ok;
        detail.push_str(&format!(
            "o={o_word}: equal={}, sublinear={sublinear}, values<=2|o|={bounded}, gap<=2|o|={gap_ok}; ",
            mls.all_equal()
        ));
    }
    report("6 (positive control: basepoint shift)", pass, &detail);
}

#[test]
fn criterion_7_negative_control() {
    let pres = f2();
    let std: Metric64 = LeftInvariantMetric::standard(&pres);
    let bfs: Metric64 = LeftInvariantMetric::bfs(
        vec![el(&pres, "a"), el(&pres, "b"), el(&pres, "a b")],
        128,
    )
    .unwrap();
    let prof = delta_sequence(&std, &bfs, &el(&pres, "a b"), 64, GrowthThresholds::default())
        .unwrap();
    let pass = (prof.slope - 1.0).abs() <= 0.05 && prof.classification == GrowthClass::Linear;
    report(
        "7 (negative control: alternative word metric)",
        pass,
        &format!(
            "slope={:.4} (within 0.05 of 1), classification={}",
            prof.slope,
            prof.classification.as_str()
        ),
    );
}

#[test]
fn criterion_8_rigidity_pipeline() {
    // forced formula check: tau=1, eta=0, C3=54, kappa_bar=6 gives exactly 441
    let mut gc54 = roughmls::GoodnessConstants::from_parts(
        Rational64::zero(),
        Rational64::zero(),
        Rational64::zero(),
    );
    gc54.c3 = Rational64::from_integer(54);
    let formula_ok = rigidity_bound(1.0, 0.0, &gc54, 6.0) == 441.0;

    // the full pipeline on the positive-control pair
    let mut cfg = ExperimentConfig::new(Command::RigidityCheck);
    cfg.seed = Some(8);
    cfg.radius = 4;
    cfg.sample_count = 6;
    cfg.visibility_pairs = 40;
    cfg.n_max = 20;
    cfg.metric2 = Some("shift:standard:a".into());
    let run = run_experiment(&cfg).unwrap();
    let pipeline_ok = run.ok;
    let gap_records = run
        .records
        .iter()
        .filter(|r| r.instance.starts_with("gap-vs-bound"))
        .count();

    // the per-n normalized additivity defect stays within the estimate
    let pres = f2();
    let m1: Metric64 = LeftInvariantMetric::standard(&pres);
    let m2 =
        LeftInvariantMetric::shifted(LeftInvariantMetric::<f64>::standard(&pres), el(&pres, "a"))
            .unwrap();
    let vis = VisibilitySampleSpec {
        radius: 4,
        pairs: 60,
        classes: vec![(Rational64::from_integer(1), Rational64::zero())],
        paths_per_pair: 4,
        seed: 8,
        min_samples: 40,
    };
    let (sys, _, _) = estimate_system_constants(&m1, 4, &vis).unwrap();
    let gc = derive_goodness_constants(&sys).unwrap();
    let good = make_good_element(&el(&pres, "b a^5 b^-2 a"), &gc, 0).unwrap();
    let additivity = periodic_additivity_check(&m1, &m2, &good.g, good.h_factor, &gc, 20).unwrap();

    let pass = formula_ok && pipeline_ok && gap_records > 0 && additivity.ok();
    report(
        "8 (rigidity bound and pipeline)",
        pass,
        &format!(
            "formula 2(1+0+4*54+0)+6+1=441: {formula_ok}, pipeline: {}, \
             additivity defects <= kappa_bar={} for n<=20: {}",
            run.summary,
            additivity.kappa_bar,
            additivity.ok()
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let mut checked = 0;
    for command in [
        Command::CounterexampleDemo,
        Command::FindGoodElement,
        Command::MlsExperiment,
        Command::RigidityCheck,
    ] {
        let mut cfg = ExperimentConfig::new(command);
        cfg.seed = Some(99);
        cfg.radius = 3;
        cfg.sample_count = 8;
        cfg.visibility_pairs = 30;
        cfg.n_max = 16;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let a_lines = to_json_lines(&strip_timing(&a.records));
        let b_lines = to_json_lines(&strip_timing(&b.records));
        assert_eq!(a_lines, b_lines, "stream differs for {:?}", command);
        checked += 1;
    }
    report(
        "9 (determinism)",
        checked == 4,
        &format!("{checked} configs re-run byte-identically modulo timing"),
    );
}
