//! Translation lengths, marked-length-spectrum comparison, growth profiles
//! of the metric difference, additivity defects, and the rigidity bound.
//!
//! The translation length of `g` under a left-invariant metric `m` is
//! `lim_n m(1, g^n) / n`. For the standard word metric on a free product of
//! free abelian groups it is exactly the word length of the cyclically
//! reduced core: a cyclically reduced element concatenates with itself
//! without cancellation (multi-syllable case) and the L1 norm is homogeneous
//! on an abelian factor (single-syllable case). For other metrics the
//! subadditive sequence `m(1, g^n) / n` is sampled along a doubling schedule;
//! its minimum upper-bounds the limit.

use crate::error::SpectrumError;
use crate::group::{self, GroupElement};
use crate::metrics::LeftInvariantMetric;
use crate::periodicity::{verify_power_property, GoodnessConstants};
use crate::rational::to_real;
use crate::Real;

// --- translation length --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationLengthMode {
    /// Closed form via cyclic reduction (standard word metric only).
    Exact,
    /// Subadditive upper bound along a doubling schedule up to `n_max`.
    Fekete,
}

#[derive(Debug, Clone)]
pub struct TranslationLengthResult<R: Real> {
    pub value: R,
    pub mode: TranslationLengthMode,
    pub n_used: u32,
    /// `m(1, g^{n_max}) / n_max` minus the best observed lower bound;
    /// zero in exact mode.
    pub error_bound: R,
    /// Certified lower bound on the limit (quasi-isometry route).
    pub lower_bound: R,
    /// The recorded `(n, m(1, g^n) / n)` pairs of the schedule.
    pub estimates: Vec<(u32, R)>,
}

/// Exact translation length in the standard word metric.
pub fn translation_length_exact(g: &GroupElement) -> u64 {
    let (core, _) = g.cyclic_reduce();
    core.word_length()
}

pub fn translation_length<R: Real>(
    m: &LeftInvariantMetric<R>,
    g: &GroupElement,
    mode: TranslationLengthMode,
    n_max: u32,
) -> Result<TranslationLengthResult<R>, SpectrumError> {
    match mode {
        TranslationLengthMode::Exact => {
            if !m.is_standard() {
                return Err(SpectrumError::ExactNeedsStandard);
            }
            let v = R::from_u64(translation_length_exact(g)).expect("length fits scalar");
            Ok(TranslationLengthResult {
                value: v,
                mode,
                n_used: 0,
                error_bound: R::zero(),
                lower_bound: v,
                estimates: Vec::new(),
            })
        }
        TranslationLengthMode::Fekete => {
            let n_max = n_max.max(1);
            let mut estimates = Vec::new();
            let mut value = R::infinity();
            let mut n = 1u32;
            let mut last = R::zero();
            while n <= n_max {
                let a_n = m.norm(&g.pow(n as i64)).map_err(SpectrumError::Metric)?;
                let ratio = a_n / R::from_u32(n).expect("n fits scalar");
                estimates.push((n, ratio));
                value = value.min(ratio);
                last = ratio;
                if n > n_max / 2 {
                    break;
                }
                n *= 2;
            }
            // the limit is at least (exact standard value) / tau, since the
            // metric dominates the word metric up to (tau, eta)
            let (tau, _) = m.qi_constants();
            let exact_std = R::from_u64(translation_length_exact(g)).expect("fits scalar");
            let lower = (exact_std / tau).max(R::zero());
            Ok(TranslationLengthResult {
                value,
                mode,
                n_used: n,
                error_bound: last - lower,
                lower_bound: lower,
                estimates,
            })
        }
    }
}

// --- marked length spectrum comparison --------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlsVerdict {
    Equal,
    Distinct,
    Inconclusive,
}

impl MlsVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            MlsVerdict::Equal => "equal",
            MlsVerdict::Distinct => "distinct",
            MlsVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug)]
pub struct MlsElementComparison<R: Real> {
    pub g: GroupElement,
    pub first: TranslationLengthResult<R>,
    pub second: TranslationLengthResult<R>,
    pub verdict: MlsVerdict,
}

#[derive(Debug)]
pub struct MlsReport<R: Real> {
    pub per_element: Vec<MlsElementComparison<R>>,
    pub conjugacy_failures: u32,
}

impl<R: Real> MlsReport<R> {
    pub fn all_equal(&self) -> bool {
        self.per_element
            .iter()
            .all(|c| c.verdict == MlsVerdict::Equal)
    }
}

fn best_mode<R: Real>(m: &LeftInvariantMetric<R>) -> TranslationLengthMode {
    if m.is_standard() {
        TranslationLengthMode::Exact
    } else {
        TranslationLengthMode::Fekete
    }
}

fn interval<R: Real>(r: &TranslationLengthResult<R>) -> (R, R) {
    (r.lower_bound.min(r.value), r.value)
}

/// Compare translation lengths per element (exact where available, the
/// subadditive estimate with its certified interval otherwise). The verdict
/// is `Distinct` when the certified intervals are disjoint, `Equal` when the
/// point estimates agree within the combined error, `Inconclusive` in
/// between. Conjugacy invariance of the exact length is spot-checked on
/// the way.
pub fn compare_mls<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    sample: &[GroupElement],
    n_max: u32,
) -> Result<MlsReport<R>, SpectrumError> {
    let mut per_element = Vec::with_capacity(sample.len());
    let mut conjugacy_failures = 0u32;
    let gens = sample
        .first()
        .map(|g| GroupElement::generators(g.presentation()))
        .unwrap_or_default();
    for g in sample {
        let first = translation_length(m1, g, best_mode(m1), n_max)?;
        let second = translation_length(m2, g, best_mode(m2), n_max)?;
        let (lo1, hi1) = interval(&first);
        let (lo2, hi2) = interval(&second);
        let eps = R::from_f64(1e-9).expect("epsilon fits scalar");
        let disjoint = hi1 + eps < lo2 || hi2 + eps < lo1;
        let err1 = first.error_bound.max(R::zero());
        let err2 = second.error_bound.max(R::zero());
        let verdict = if disjoint {
            MlsVerdict::Distinct
        } else if (first.value - second.value).abs() <= err1 + err2 + eps {
            MlsVerdict::Equal
        } else {
            MlsVerdict::Inconclusive
        };
        // conjugation leaves the exact length alone
        if m1.is_standard() {
            for conj in gens.iter().take(2) {
                let moved = g.conjugate_by(conj).map_err(SpectrumError::Group)?;
                if translation_length_exact(&moved) != translation_length_exact(g) {
                    conjugacy_failures += 1;
                }
            }
        }
        per_element.push(MlsElementComparison {
            g: g.clone(),
            first,
            second,
            verdict,
        });
    }
    Ok(MlsReport {
        per_element,
        conjugacy_failures,
    })
}

// --- difference growth profiles -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Sublinear,
    Linear,
    Inconclusive,
}

impl GrowthClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            GrowthClass::Sublinear => "sublinear",
            GrowthClass::Linear => "linear",
            GrowthClass::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowthThresholds {
    /// Tail-half least-squares slope below this is sublinear.
    pub sublinear_slope_max: f64,
    /// Slope above this with a good linear fit is linear.
    pub linear_slope_min: f64,
    pub linear_r2_min: f64,
}

impl Default for GrowthThresholds {
    fn default() -> Self {
        // the square-root profile sqrt(l n) has tail-half slope about
        // 0.5 sqrt(l / n_max); at n_max = 64 and l <= 4 that stays below 0.2,
        // while a genuinely linear profile fits slope near 1 with r^2 near 1
        GrowthThresholds {
            sublinear_slope_max: 0.2,
            linear_slope_min: 0.5,
            linear_r2_min: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeltaProfile {
    pub g: GroupElement,
    /// `|m1(1, g^n) - m2(1, g^n)|` for `n = 1..=n_max`.
    pub values: Vec<f64>,
    /// Least-squares slope over the tail half.
    pub slope: f64,
    pub r2: f64,
    pub classification: GrowthClass,
    pub thresholds: GrowthThresholds,
}

impl DeltaProfile {
    /// CSV with columns `n, delta` and the fit in a trailing comment record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,delta\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out.push_str(&format!(
            "# slope={},r2={},classification={}\n",
            self.slope,
            self.r2,
            self.classification.as_str()
        ));
        out
    }
}

pub fn delta_sequence<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    g: &GroupElement,
    n_max: u32,
    thresholds: GrowthThresholds,
) -> Result<DeltaProfile, SpectrumError> {
    let n_max = n_max.max(2);
    let mut values = Vec::with_capacity(n_max as usize);
    let mut power = GroupElement::identity(g.presentation());
    for _ in 1..=n_max {
        power = power.multiply(g).map_err(SpectrumError::Group)?;
        let d1 = m1.norm(&power).map_err(SpectrumError::Metric)?;
        let d2 = m2.norm(&power).map_err(SpectrumError::Metric)?;
        values.push(
            (d1 - d2)
                .abs()
                .to_f64()
                .expect("distance difference fits f64"),
        );
    }
    let half = (n_max / 2).max(1) as usize;
    let tail: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(half)
        .map(|(i, &v)| ((i + 1) as f64, v))
        .collect();
    let (slope, r2) = least_squares(&tail);
    let classification = if slope.abs() < thresholds.sublinear_slope_max {
        GrowthClass::Sublinear
    } else if slope > thresholds.linear_slope_min && r2 > thresholds.linear_r2_min {
        GrowthClass::Linear
    } else {
        GrowthClass::Inconclusive
    };
    Ok(DeltaProfile {
        g: g.clone(),
        values,
        slope,
        r2,
        classification,
        thresholds,
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (0.0, 1.0);
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 1.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

// --- additivity defects ----------------------------------------------------------------

/// `|D(x,z) + D(z,y) - D(x,y)|` for `D = |m1 - m2|`.
pub fn additivity_defect<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    x: &GroupElement,
    z: &GroupElement,
    y: &GroupElement,
) -> Result<R, SpectrumError> {
    let d = |a: &GroupElement, b: &GroupElement| -> Result<R, SpectrumError> {
        let v1 = m1.distance(a, b).map_err(SpectrumError::Metric)?;
        let v2 = m2.distance(a, b).map_err(SpectrumError::Metric)?;
        Ok((v1 - v2).abs())
    };
    Ok((d(x, z)? + d(z, y)? - d(x, y)?).abs())
}

#[derive(Debug, Clone)]
pub struct KappaBarEstimate {
    pub value: f64,
    /// Largest distance from a mid point `z` to the second metric's
    /// candidate path, i.e. the hypothesis witness under which the defects
    /// were observed.
    pub witness_kappa: f64,
    pub instances: usize,
}

/// Estimate the additivity-defect constant over an instance family of
/// `(x, z, y)` triples; `z` is expected to lie near rough geodesics of both
/// metrics (for the chain triples `(1, g^i, g^{i+1})` of a good element this
/// is the periodicity guarantee).
pub fn estimate_kappa_bar<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    instances: &[(GroupElement, GroupElement, GroupElement)],
) -> Result<KappaBarEstimate, SpectrumError> {
    let mut value: f64 = 0.0;
    let mut witness: f64 = 0.0;
    for (x, z, y) in instances {
        let defect = additivity_defect(m1, m2, x, z, y)?
            .to_f64()
            .expect("defect fits f64");
        value = value.max(defect);
        let path = crate::metrics::canonical_geodesic(x, y);
        let approach = path
            .distance_from(m2, z)
            .map_err(SpectrumError::Metric)?
            .to_f64()
            .expect("approach fits f64");
        witness = witness.max(approach);
    }
    Ok(KappaBarEstimate {
        value,
        witness_kappa: witness,
        instances: instances.len(),
    })
}

/// The chain triples `(1, g^i, g^{i+1})` for `i = 1 .. n_max`.
pub fn power_chain_triples(
    g: &GroupElement,
    n_max: u32,
) -> Vec<(GroupElement, GroupElement, GroupElement)> {
    let one = GroupElement::identity(g.presentation());
    let mut out = Vec::new();
    let mut power = g.clone();
    for _ in 1..n_max {
        let next = power.multiply(g).expect("same presentation");
        out.push((one.clone(), power.clone(), next.clone()));
        power = next;
    }
    out
}

#[derive(Debug)]
pub struct AdditivityCheck {
    /// `(n, |n D(1,g) - D(1,g^n)| / n)`.
    pub per_n: Vec<(u32, f64)>,
    pub kappa_bar: f64,
    pub failures: Vec<u32>,
}

impl AdditivityCheck {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The chained form of the additivity defect along powers of a good element:
/// `|n D(1, g) - D(1, g^n)| / n` must stay within the estimated defect
/// constant. Goodness (power property) is verified first.
pub fn periodic_additivity_check<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    g: &GroupElement,
    h_factor: usize,
    gc: &GoodnessConstants,
    n_max: u32,
) -> Result<AdditivityCheck, SpectrumError> {
    let std = LeftInvariantMetric::<R>::standard(g.presentation());
    let power_report = verify_power_property(&std, g, h_factor, gc, n_max)
        .map_err(SpectrumError::Periodicity)?;
    if !power_report.ok() {
        return Err(SpectrumError::GoodnessNotVerified(format!(
            "power property fails at n = {:?}",
            power_report.failures
        )));
    }

    let kappa_bar = estimate_kappa_bar(m1, m2, &power_chain_triples(g, n_max))?.value;
    let one = GroupElement::identity(g.presentation());
    let delta = |a: &GroupElement, b: &GroupElement| -> Result<f64, SpectrumError> {
        let v1 = m1.distance(a, b).map_err(SpectrumError::Metric)?;
        let v2 = m2.distance(a, b).map_err(SpectrumError::Metric)?;
        Ok((v1 - v2).abs().to_f64().expect("fits f64"))
    };
    let d1 = delta(&one, g)?;
    let mut per_n = Vec::new();
    let mut failures = Vec::new();
    let mut power = g.clone();
    for n in 1..=n_max {
        let dn = delta(&one, &power)?;
        let normalized = (n as f64 * d1 - dn).abs() / n as f64;
        if normalized > kappa_bar + 1e-9 {
            failures.push(n);
        }
        per_n.push((n, normalized));
        power = power.multiply(g).map_err(SpectrumError::Group)?;
    }
    Ok(AdditivityCheck {
        per_n,
        kappa_bar,
        failures,
    })
}

// --- rigidity bound ---------------------------------------------------------------------

/// `B = 2 (tau + eta + 4 tau c3 + eta) + kappa_bar + 1`: when the spectra
/// agree, the difference of the metrics is expected to stay below `B`.
pub fn rigidity_bound(tau: f64, eta: f64, gc: &GoodnessConstants, kappa_bar: f64) -> f64 {
    let c3: f64 = to_real(gc.c3);
    2.0 * (tau + eta + 4.0 * tau * c3 + eta) + kappa_bar + 1.0
}

/// `sup |m1(1,x) - m2(1,x)|` over the ball of radius `r` (left invariance
/// reduces pairs to one-sided norms). For the pair `(m, m + sqrt(m))` the
/// supremum is `sqrt(r)` in closed form; other pairs are enumerated, with
/// the budget guarding the ball size.
pub fn rough_equality_gap<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    r: u32,
    ball_budget: usize,
) -> Result<R, SpectrumError> {
    if m2.is_sqrt_of(m1) || m1.is_sqrt_of(m2) {
        // sup of sqrt(base) over the ball, attained on the sphere
        return Ok(R::from_u32(r).expect("radius fits scalar").sqrt());
    }
    let pres = m1.presentation();
    if group::ball_size_estimate(pres, r) > ball_budget as u128 {
        return Err(SpectrumError::GapBudget(r));
    }
    let ball = group::enumerate_ball(pres, r, ball_budget).map_err(SpectrumError::Group)?;
    let mut sup = R::zero();
    for x in &ball {
        let v1 = m1.norm(x).map_err(SpectrumError::Metric)?;
        let v2 = m2.norm(x).map_err(SpectrumError::Metric)?;
        sup = sup.max((v1 - v2).abs());
    }
    Ok(sup)
}

/// Enumerated route for the gap, independent of the closed form (testing).
pub fn rough_equality_gap_enumerated<R: Real>(
    m1: &LeftInvariantMetric<R>,
    m2: &LeftInvariantMetric<R>,
    r: u32,
    ball_budget: usize,
) -> Result<R, SpectrumError> {
    let pres = m1.presentation();
    let ball = group::enumerate_ball(pres, r, ball_budget).map_err(SpectrumError::Group)?;
    let mut sup = R::zero();
    for x in &ball {
        let v1 = m1.norm(x).map_err(SpectrumError::Metric)?;
        let v2 = m2.norm(x).map_err(SpectrumError::Metric)?;
        sup = sup.max((v1 - v2).abs());
    }
    Ok(sup)
}
