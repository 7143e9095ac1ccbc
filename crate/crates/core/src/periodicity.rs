//! Head/tail measurements, prefix/suffix perturbations, the derived goodness
//! constants, the power property, and good-periodicity verification.
//!
//! An element has a `T`-short head in a peripheral subgroup `H` when its
//! projection to `H` sits within distance `T` of the identity, and a
//! `T`-long tail in `H` when the projection of the identity to `g H` stays
//! further than `T` from `g`. Elements with a short head and long tail in
//! the same `H` keep both properties under powers, with constants uniform in
//! the exponent, and all powers then stay near every quasi-geodesic from the
//! identity to `g^n` (good periodicity).

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::Zero;

use crate::error::PeriodicityError;
use crate::group::GroupElement;
use crate::metrics::{sample_quasigeodesics, LeftInvariantMetric};
use crate::projections::{project, PeripheralCoset, SystemConstants};
use crate::rational::{format_rational, to_real};
use crate::Real;

/// Candidate budget for the generic projections behind head/tail.
const PROJECTION_BUDGET: usize = 200_000;

/// The derived constants of the good-element construction, kept in exact
/// rational arithmetic so the strict inequality chain stays auditable:
///
/// - `r0  = R + L + 10 C`
/// - `delta = r0 + C = R + L + 11 C`
/// - `c1  = delta + R + 9 C`
/// - `c2  = c1 + L + 3 C`
/// - `c3  = c2 + R + 10 C + delta + 2`
/// - `kappa(tau, eta) = R(tau, eta) + c1 + C + eta`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodnessConstants {
    pub c: Rational64,
    pub l: Rational64,
    pub r: Rational64,
    pub r0: Rational64,
    pub delta: Rational64,
    pub c1: Rational64,
    pub c2: Rational64,
    pub c3: Rational64,
    /// `R(tau, eta)` per quasi-geodesic class, for `kappa`.
    pub r_map: BTreeMap<(Rational64, Rational64), Rational64>,
}

impl GoodnessConstants {
    /// Assemble from explicit inputs (`r` is the geodesic-class value
    /// `R(1, 0)`).
    pub fn from_parts(c: Rational64, l: Rational64, r: Rational64) -> Self {
        let ten = Rational64::from_integer(10);
        let nine = Rational64::from_integer(9);
        let three = Rational64::from_integer(3);
        let two = Rational64::from_integer(2);
        let r0 = r + l + ten * c;
        let delta = r0 + c;
        let c1 = delta + r + nine * c;
        let c2 = c1 + l + three * c;
        let c3 = c2 + r + ten * c + delta + two;
        let mut r_map = BTreeMap::new();
        r_map.insert((Rational64::from_integer(1), Rational64::zero()), r);
        GoodnessConstants {
            c,
            l,
            r,
            r0,
            delta,
            c1,
            c2,
            c3,
            r_map,
        }
    }

    /// `kappa(tau, eta)`, available when `R(tau, eta)` is known.
    pub fn kappa(&self, tau: Rational64, eta: Rational64) -> Option<Rational64> {
        self.r_map
            .get(&(tau, eta))
            .map(|r| *r + self.c1 + self.c + eta)
    }

    /// The strict lower bound `r0 > max(R + 10C, L + 3C)` required by the
    /// fixed choice of `r0`. Can fail for degenerate constants (all zero).
    pub fn strict_r0_bound_holds(&self) -> bool {
        let ten = Rational64::from_integer(10);
        let three = Rational64::from_integer(3);
        self.r0 > (self.r + ten * self.c).max(self.l + three * self.c)
    }

    /// The chain used by the power-property and periodicity arguments.
    pub fn chain_holds(&self) -> bool {
        let three = Rational64::from_integer(3);
        self.c1 < self.c2
            && self.c2 < self.c3
            && self.c2 - self.c1 - three * self.c >= self.l
            && self.c2 - self.delta - self.c > self.l
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("C".to_string(), format_rational(self.c)),
            ("L".to_string(), format_rational(self.l)),
            ("R".to_string(), format_rational(self.r)),
            ("R0".to_string(), format_rational(self.r0)),
            ("delta".to_string(), format_rational(self.delta)),
            ("C1".to_string(), format_rational(self.c1)),
            ("C2".to_string(), format_rational(self.c2)),
            ("C3".to_string(), format_rational(self.c3)),
        ];
        for (t, e) in self.r_map.keys() {
            if let Some(k) = self.kappa(*t, *e) {
                rows.push((
                    format!("kappa({},{})", format_rational(*t), format_rational(*e)),
                    format_rational(k),
                ));
            }
        }
        rows
    }
}

/// Derive the goodness constants from estimated or supplied system
/// constants. Requires `R(1, 0)`.
pub fn derive_goodness_constants(
    sys: &SystemConstants,
) -> Result<GoodnessConstants, PeriodicityError> {
    let one = Rational64::from_integer(1);
    let c = sys
        .c
        .ok_or_else(|| PeriodicityError::Precondition("projection constant C missing".into()))?
        .value;
    let l = sys
        .l
        .ok_or_else(|| PeriodicityError::Precondition("visibility threshold L missing".into()))?
        .value;
    let r = sys
        .r_at(one, Rational64::zero())
        .ok_or_else(|| PeriodicityError::MissingR("1".into(), "0".into()))?
        .value;
    let mut gc = GoodnessConstants::from_parts(c, l, r);
    for (&(tau, eta), v) in &sys.r {
        gc.r_map.insert((tau, eta), v.value);
    }
    Ok(gc)
}

// --- head and tail ------------------------------------------------------------------

/// `(head, tail)` of `g` in the peripheral subgroup `H`: the distance from
/// the identity to the projection of `g` on `H`, and the distance from `g`
/// to the projection of the identity on `g H`.
pub fn head_tail<R: Real>(
    m: &LeftInvariantMetric<R>,
    g: &GroupElement,
    h_factor: usize,
) -> Result<(R, R), PeriodicityError> {
    let pres = Arc::clone(g.presentation());
    let subgroup = PeripheralCoset::subgroup(&pres, h_factor);
    let one = GroupElement::identity(&pres);

    let head_set = project_set(m, g, &subgroup)?;
    let mut head = R::infinity();
    for p in &head_set {
        head = head.min(m.norm(p).map_err(PeriodicityError::Metric)?);
    }

    let g_coset = PeripheralCoset::of_element(g, h_factor);
    let tail_set = project_set(m, &one, &g_coset)?;
    let mut tail = R::infinity();
    for p in &tail_set {
        tail = tail.min(m.distance(p, g).map_err(PeriodicityError::Metric)?);
    }
    Ok((head, tail))
}

fn project_set<R: Real>(
    m: &LeftInvariantMetric<R>,
    x: &GroupElement,
    coset: &PeripheralCoset,
) -> Result<Vec<GroupElement>, PeriodicityError> {
    if m.is_standard() {
        Ok(vec![crate::projections::project_exact_freeproduct(
            x, coset,
        )])
    } else {
        project(m, x, coset, PROJECTION_BUDGET).map_err(PeriodicityError::Projection)
    }
}

// --- perturbations --------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixCase {
    /// The head was already short; `k` is the identity.
    AlreadyShort,
    /// A generator outside `H` was prepended.
    Prepended,
}

#[derive(Debug, Clone)]
pub struct PrefixPerturbation {
    pub k: GroupElement,
    pub case: PrefixCase,
}

/// Find `k` with `|k| <= 1` such that `k g` has an `r0`-short head in `H`
/// (standard word metric). When the given head is already below `r0` the
/// prefix is trivial; otherwise the first standard generator outside `H` is
/// prepended and the conclusion re-verified.
pub fn perturb_prefix(
    g: &GroupElement,
    h_factor: usize,
    r0: Rational64,
) -> Result<PrefixPerturbation, PeriodicityError> {
    let pres = Arc::clone(g.presentation());
    let m: LeftInvariantMetric<f64> = LeftInvariantMetric::standard(&pres);
    let r0_f: f64 = to_real(r0);
    let (head, _) = head_tail(&m, g, h_factor)?;
    if head < r0_f {
        return Ok(PrefixPerturbation {
            k: GroupElement::identity(&pres),
            case: PrefixCase::AlreadyShort,
        });
    }
    // first standard generator outside H, in factor-then-coordinate order
    let k = (0..pres.num_factors())
        .find(|&f| f != h_factor)
        .map(|f| GroupElement::generator(&pres, f, 0))
        .ok_or_else(|| {
            PeriodicityError::Precondition(
                "no generator outside the peripheral subgroup (degenerate presentation)".into(),
            )
        })?;
    let kg = k.multiply(g).map_err(PeriodicityError::Group)?;
    let (new_head, _) = head_tail(&m, &kg, h_factor)?;
    if new_head < r0_f {
        Ok(PrefixPerturbation {
            k,
            case: PrefixCase::Prepended,
        })
    } else {
        Err(PeriodicityError::ConstantsTooSmall {
            check: "prefix-short-head",
            instance: format!("g={g};H={h_factor}"),
            measured: format!("{new_head}"),
            bound: format_rational(r0),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SuffixPerturbation {
    pub h: GroupElement,
}

/// Find `h` with `|h| <= 4 c3` such that `g h` has a `c3`-long tail in `H`
/// while keeping an `(r0 + C)`-short head. Preconditions: `|g| > r0 + 1`,
/// `g` has an `r0`-short head in `H`, and `c3 >= max(1, C)`.
pub fn perturb_suffix(
    g: &GroupElement,
    h_factor: usize,
    gc: &GoodnessConstants,
) -> Result<SuffixPerturbation, PeriodicityError> {
    let pres = Arc::clone(g.presentation());
    let m: LeftInvariantMetric<f64> = LeftInvariantMetric::standard(&pres);
    let one = Rational64::from_integer(1);
    if gc.c3 < one.max(gc.c) {
        return Err(PeriodicityError::Precondition(format!(
            "c3 = {} must be at least max(1, C)",
            format_rational(gc.c3)
        )));
    }
    let r0_f: f64 = to_real(gc.r0);
    if (g.word_length() as f64) <= r0_f + 1.0 {
        return Err(PeriodicityError::Precondition(format!(
            "|g| = {} must exceed r0 + 1 = {}",
            g.word_length(),
            r0_f + 1.0
        )));
    }
    let (head, tail) = head_tail(&m, g, h_factor)?;
    if head >= r0_f {
        return Err(PeriodicityError::Precondition(format!(
            "g must have an r0-short head (head = {head}, r0 = {r0_f})"
        )));
    }

    let c3_f: f64 = to_real(gc.c3);
    let h = if tail > c3_f {
        GroupElement::identity(&pres)
    } else {
        // the least power of the first standard generator of H with
        // 3 c3 < p <= 4 c3; it exists because H is infinite and c3 >= 1
        let three_c3 = Rational64::from_integer(3) * gc.c3;
        let p = three_c3.floor().to_integer() + 1;
        debug_assert!(Rational64::from_integer(p) <= Rational64::from_integer(4) * gc.c3);
        GroupElement::generator(&pres, h_factor, 0).pow(p)
    };

    let g2 = g.multiply(&h).map_err(PeriodicityError::Group)?;
    let (new_head, new_tail) = head_tail(&m, &g2, h_factor)?;
    if new_tail <= c3_f {
        return Err(PeriodicityError::ConstantsTooSmall {
            check: "suffix-long-tail",
            instance: format!("g={g};H={h_factor}"),
            measured: format!("{new_tail}"),
            bound: format_rational(gc.c3),
        });
    }
    let head_bound: f64 = to_real(gc.r0 + gc.c);
    if new_head >= head_bound {
        return Err(PeriodicityError::ConstantsTooSmall {
            check: "suffix-short-head",
            instance: format!("g={g};H={h_factor}"),
            measured: format!("{new_head}"),
            bound: format_rational(gc.r0 + gc.c),
        });
    }
    Ok(SuffixPerturbation { h })
}

// --- good elements ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GoodElement {
    pub g: GroupElement,
    pub h_factor: usize,
    pub k: GroupElement,
    pub h: GroupElement,
}

/// Perturb `g0` into `g = k g0 h` with an eventual short head and long tail
/// in a peripheral subgroup (default: the first factor). Requires
/// `|g0| > r0 + 2`. The power property for the result is *verified* by
/// [`verify_power_property`], not assumed.
pub fn make_good_element(
    g0: &GroupElement,
    gc: &GoodnessConstants,
    h_factor: usize,
) -> Result<GoodElement, PeriodicityError> {
    let r0_f: f64 = to_real(gc.r0);
    if (g0.word_length() as f64) <= r0_f + 2.0 {
        return Err(PeriodicityError::Precondition(format!(
            "|g0| = {} must exceed r0 + 2 = {}",
            g0.word_length(),
            r0_f + 2.0
        )));
    }
    let prefix = perturb_prefix(g0, h_factor, gc.r0)?;
    let kg = prefix.k.multiply(g0).map_err(PeriodicityError::Group)?;
    let suffix = perturb_suffix(&kg, h_factor, gc)?;
    let g = kg.multiply(&suffix.h).map_err(PeriodicityError::Group)?;
    debug_assert!(prefix.k.word_length() <= 1);
    debug_assert!(
        Rational64::from_integer(suffix.h.word_length() as i64)
            <= Rational64::from_integer(4) * gc.c3
    );
    Ok(GoodElement {
        g,
        h_factor,
        k: prefix.k,
        h: suffix.h,
    })
}

// --- power property ----------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct PowerMargins {
    pub n: u32,
    pub head: f64,
    pub tail: f64,
    pub head_bound: f64,
    pub tail_bound: f64,
}

#[derive(Debug)]
pub struct PowerPropertyReport {
    pub per_n: Vec<PowerMargins>,
    pub failures: Vec<u32>,
}

impl PowerPropertyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check that `g^n` has a `c1`-short head and `c2`-long tail in `H` for
/// `n = 1..=n_max`. The hypothesis (`delta`-short head, `c3`-long tail, and
/// `g` outside `H`) is enforced first.
pub fn verify_power_property<R: Real>(
    m: &LeftInvariantMetric<R>,
    g: &GroupElement,
    h_factor: usize,
    gc: &GoodnessConstants,
    n_max: u32,
) -> Result<PowerPropertyReport, PeriodicityError> {
    let (head, tail) = head_tail(m, g, h_factor)?;
    let delta: R = to_real(gc.delta);
    let c3: R = to_real(gc.c3);
    if head >= delta {
        return Err(PeriodicityError::Precondition(format!(
            "g needs a delta-short head (head = {head:?}, delta = {})",
            format_rational(gc.delta)
        )));
    }
    if tail <= c3 {
        return Err(PeriodicityError::Precondition(format!(
            "g needs a c3-long tail (tail = {tail:?}, c3 = {})",
            format_rational(gc.c3)
        )));
    }
    let subgroup = PeripheralCoset::subgroup(g.presentation(), h_factor);
    if subgroup.contains(g) {
        return Err(PeriodicityError::Precondition(
            "a short-head long-tail element cannot lie in the peripheral subgroup".into(),
        ));
    }

    let c1: R = to_real(gc.c1);
    let c2: R = to_real(gc.c2);
    let mut per_n = Vec::with_capacity(n_max as usize);
    let mut failures = Vec::new();
    let mut power = GroupElement::identity(g.presentation());
    for n in 1..=n_max {
        power = power.multiply(g).map_err(PeriodicityError::Group)?;
        let (h_n, t_n) = head_tail(m, &power, h_factor)?;
        let ok = h_n < c1 && t_n > c2;
        if !ok {
            failures.push(n);
        }
        per_n.push(PowerMargins {
            n,
            head: h_n.to_f64().unwrap_or(f64::NAN),
            tail: t_n.to_f64().unwrap_or(f64::NAN),
            head_bound: to_real(gc.c1),
            tail_bound: to_real(gc.c2),
        });
    }
    Ok(PowerPropertyReport { per_n, failures })
}

// --- good periodicity ----------------------------------------------------------------------

#[derive(Debug)]
pub struct MorseReport {
    pub kappa_observed: f64,
    pub kappa_bound: Option<f64>,
    pub asserted: bool,
    pub within_bound: bool,
    pub paths_tested: usize,
    pub rejection_rate: f64,
}

/// Over sampled `(tau, eta)`-quasi-geodesics from the identity to `g^n`,
/// measure the farthest any power `g^i` (`0 <= i <= n`) strays from a path.
/// When `R(tau, eta)` is available the observation is asserted against
/// `kappa(tau, eta)`; otherwise it is recorded only.
#[allow(clippy::too_many_arguments)]
pub fn verify_periodic_morse<R: Real>(
    m: &LeftInvariantMetric<R>,
    g: &GroupElement,
    h_factor: usize,
    gc: &GoodnessConstants,
    n: u32,
    tau: Rational64,
    eta: Rational64,
    samples: usize,
    seed: u64,
) -> Result<MorseReport, PeriodicityError> {
    // periodicity is only meaningful past the power property
    let power_report = verify_power_property(m, g, h_factor, gc, n)?;
    if !power_report.ok() {
        return Err(PeriodicityError::Precondition(format!(
            "power property fails at n = {:?}",
            power_report.failures
        )));
    }

    let one = GroupElement::identity(g.presentation());
    let g_n = g.pow(n as i64);
    let tau_r: R = to_real(tau);
    let eta_r: R = to_real(eta);
    let sampled = sample_quasigeodesics(m, &one, &g_n, tau_r, eta_r, samples, seed)
        .map_err(PeriodicityError::Metric)?;

    let mut kappa_observed: f64 = 0.0;
    for path in &sampled.paths {
        let mut power = one.clone();
        for _ in 0..=n {
            let d = path.distance_from(m, &power).map_err(PeriodicityError::Metric)?;
            kappa_observed = kappa_observed.max(d.to_f64().unwrap_or(f64::NAN));
            power = power.multiply(g).map_err(PeriodicityError::Group)?;
        }
    }

    let kappa_bound = gc.kappa(tau, eta).map(crate::rational::to_f64);
    let (asserted, within_bound) = match kappa_bound {
        Some(bound) => (true, kappa_observed <= bound),
        None => (false, true),
    };
    Ok(MorseReport {
        kappa_observed,
        kappa_bound,
        asserted,
        within_bound,
        paths_tested: sampled.paths.len(),
        rejection_rate: sampled.rejection_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{random_reduced, sphere, FreeProductPresentation};
    use crate::rng::SplitMix64;

    fn f2() -> Arc<FreeProductPresentation> {
        FreeProductPresentation::free_group(2).unwrap()
    }

    fn el(pres: &Arc<FreeProductPresentation>, s: &str) -> GroupElement {
        GroupElement::parse(pres, s).unwrap()
    }

    fn std_metric(pres: &Arc<FreeProductPresentation>) -> LeftInvariantMetric<f64> {
        LeftInvariantMetric::standard(pres)
    }

    /// Estimated constants for these groups: C = 0, L = 1, R(1,0) = 1.
    fn tight_constants() -> GoodnessConstants {
        GoodnessConstants::from_parts(
            Rational64::zero(),
            Rational64::from_integer(1),
            Rational64::from_integer(1),
        )
    }

    #[test]
    fn head_tail_examples() {
        let p = f2();
        let m = std_metric(&p);
        let (head, tail) = head_tail(&m, &el(&p, "b a^5"), 0).unwrap();
        assert_eq!(head, 0.0);
        assert_eq!(tail, 5.0);
        let (head, _) = head_tail(&m, &el(&p, "a^3"), 0).unwrap();
        assert_eq!(head, 3.0);
    }

    #[test]
    fn inverse_head_equals_tail() {
        // d(pi_{gH}(1), g) equals the head of g^{-1} by equivariance
        let p = f2();
        let m = std_metric(&p);
        let mut rng = SplitMix64::new(23);
        for _ in 0..100 {
            let g = random_reduced(&p, 1 + rng.next_below(7) as u32, &mut rng);
            let (_, tail) = head_tail(&m, &g, 0).unwrap();
            let (head_inv, _) = head_tail(&m, &g.inverse(), 0).unwrap();
            assert_eq!(tail, head_inv, "g = {g}");
        }
    }

    #[test]
    fn derived_constants_from_unit_inputs() {
        let gc = GoodnessConstants::from_parts(
            Rational64::from_integer(1),
            Rational64::from_integer(2),
            Rational64::from_integer(3),
        );
        assert_eq!(gc.r0, Rational64::from_integer(15));
        assert_eq!(gc.delta, Rational64::from_integer(16));
        assert_eq!(gc.c1, Rational64::from_integer(28));
        assert_eq!(gc.c2, Rational64::from_integer(33));
        // c2 + r + 10 c + delta + 2 = 33 + 3 + 10 + 16 + 2
        assert_eq!(gc.c3, Rational64::from_integer(64));
        assert!(gc.strict_r0_bound_holds());
        assert!(gc.chain_holds());
        assert_eq!(
            gc.kappa(Rational64::from_integer(1), Rational64::zero()),
            Some(Rational64::from_integer(32))
        );
    }

    #[test]
    fn derived_constants_degenerate() {
        let gc = GoodnessConstants::from_parts(
            Rational64::zero(),
            Rational64::zero(),
            Rational64::zero(),
        );
        assert_eq!(gc.r0, Rational64::zero());
        assert_eq!(gc.delta, Rational64::zero());
        assert_eq!(gc.c1, Rational64::zero());
        assert_eq!(gc.c2, Rational64::zero());
        assert_eq!(gc.c3, Rational64::from_integer(2));
        // the strict bound degenerates with all-zero inputs
        assert!(!gc.strict_r0_bound_holds());
    }

    #[test]
    fn derived_constants_monotone_in_c() {
        let base = GoodnessConstants::from_parts(
            Rational64::from_integer(1),
            Rational64::from_integer(2),
            Rational64::from_integer(3),
        );
        let bumped = GoodnessConstants::from_parts(
            Rational64::from_integer(2),
            Rational64::from_integer(2),
            Rational64::from_integer(3),
        );
        assert!(bumped.r0 > base.r0);
        assert!(bumped.delta > base.delta);
        assert!(bumped.c1 > base.c1);
        assert!(bumped.c2 > base.c2);
        assert!(bumped.c3 > base.c3);
    }

    #[test]
    fn derive_requires_r10() {
        let mut sys = SystemConstants::new();
        sys.set_estimated_c(Rational64::zero());
        sys.set_estimated_l(Rational64::from_integer(1));
        assert!(matches!(
            derive_goodness_constants(&sys),
            Err(PeriodicityError::MissingR(_, _))
        ));
        sys.set_estimated_r(
            Rational64::from_integer(1),
            Rational64::zero(),
            Rational64::from_integer(1),
        );
        let gc = derive_goodness_constants(&sys).unwrap();
        assert_eq!(gc.r0, Rational64::from_integer(2));
        assert_eq!(gc.delta, Rational64::from_integer(2));
        assert_eq!(gc.c1, Rational64::from_integer(3));
        assert_eq!(gc.c2, Rational64::from_integer(4));
        assert_eq!(gc.c3, Rational64::from_integer(9));
        assert!(gc.strict_r0_bound_holds());
        assert!(gc.chain_holds());
    }

    #[test]
    fn prefix_perturbation_cases() {
        let p = f2();
        let gc = tight_constants();
        // already short (head = 0 < r0)
        let out = perturb_prefix(&el(&p, "b a^5"), 0, gc.r0).unwrap();
        assert_eq!(out.case, PrefixCase::AlreadyShort);
        assert!(out.k.is_identity());
        // long head: b is prepended and kills it
        let g = el(&p, "a^20");
        let out = perturb_prefix(&g, 0, Rational64::from_integer(10)).unwrap();
        assert_eq!(out.case, PrefixCase::Prepended);
        assert_eq!(out.k, el(&p, "b"));
        let m = std_metric(&p);
        let (head, _) = head_tail(&m, &out.k.multiply(&g).unwrap(), 0).unwrap();
        assert_eq!(head, 0.0);
        assert!(out.k.word_length() <= 1);
    }

    #[test]
    fn prefix_case2_exhaustive_small_spheres() {
        // every sphere element that triggers the prepend case ends up with a
        // short head, on both groups
        for pres in [f2(), FreeProductPresentation::from_ranks(&[2, 1]).unwrap()] {
            let m = std_metric(&pres);
            let gc = tight_constants();
            let r0: f64 = to_real(gc.r0);
            for radius in 4..=6 {
                for g in sphere(&pres, radius, 1 << 22).unwrap() {
                    let (head, _) = head_tail(&m, &g, 0).unwrap();
                    if head < r0 {
                        continue;
                    }
                    let out = perturb_prefix(&g, 0, gc.r0).unwrap();
                    assert_eq!(out.case, PrefixCase::Prepended);
                    let (new_head, _) =
                        head_tail(&m, &out.k.multiply(&g).unwrap(), 0).unwrap();
                    assert!(new_head < r0);
                }
            }
        }
    }

    #[test]
    fn suffix_perturbation_cases() {
        let p = f2();
        // a long tail already: nothing appended
        let gc = GoodnessConstants::from_parts(
            Rational64::zero(),
            Rational64::from_integer(1),
            Rational64::from_integer(1),
        );
        let mut gc12 = gc.clone();
        gc12.c3 = Rational64::from_integer(12);
        let out = perturb_suffix(&el(&p, "b a^40"), 0, &gc12).unwrap();
        assert!(out.h.is_identity());
        // short tail: the least admissible power of a is appended
        let g = el(&p, "b^10 a^2");
        let out = perturb_suffix(&g, 0, &gc12).unwrap();
        assert_eq!(out.h, el(&p, "a^37"));
        let m = std_metric(&p);
        let (_, tail) = head_tail(&m, &g.multiply(&out.h).unwrap(), 0).unwrap();
        assert_eq!(tail, 39.0);
        assert!(out.h.word_length() as i64 <= (Rational64::from_integer(4) * gc12.c3).to_integer());
    }

    #[test]
    fn suffix_preconditions() {
        let p = f2();
        let gc = tight_constants();
        // too short
        assert!(matches!(
            perturb_suffix(&el(&p, "b"), 0, &gc),
            Err(PeriodicityError::Precondition(_))
        ));
        // head not short
        assert!(matches!(
            perturb_suffix(&el(&p, "a^9 b"), 0, &gc),
            Err(PeriodicityError::Precondition(_))
        ));
    }

    #[test]
    fn good_element_trace() {
        let p = f2();
        let gc = tight_constants(); // r0 = 2, c3 = 9
        // g0 = a^{r0+3} forces the prepend case
        let g0 = el(&p, "a^5");
        let good = make_good_element(&g0, &gc, 0).unwrap();
        assert_eq!(good.k, el(&p, "b"));
        assert!(good.k.word_length() <= 1);
        assert!(
            Rational64::from_integer(good.h.word_length() as i64)
                <= Rational64::from_integer(4) * gc.c3
        );
        let m = std_metric(&p);
        let (head, tail) = head_tail(&m, &good.g, 0).unwrap();
        assert!(head < to_real::<f64>(gc.delta));
        assert!(tail > to_real::<f64>(gc.c3));
    }

    #[test]
    fn power_property_on_simple_good_element() {
        let p = f2();
        let gc = tight_constants();
        // b a^{c3+1} has head 0 and tail c3 + 1
        let g = el(&p, "b a^10");
        let m = std_metric(&p);
        let report = verify_power_property(&m, &g, 0, &gc, 20).unwrap();
        assert!(report.ok());
        for margins in &report.per_n {
            assert_eq!(margins.head, 0.0);
            assert_eq!(margins.tail, 10.0);
        }
    }

    #[test]
    fn power_property_rejects_bad_hypothesis() {
        let p = f2();
        let gc = tight_constants();
        let m = std_metric(&p);
        // head too long
        assert!(matches!(
            verify_power_property(&m, &el(&p, "a^9 b a^10"), 0, &gc, 5),
            Err(PeriodicityError::Precondition(_))
        ));
        // inside the subgroup
        assert!(matches!(
            verify_power_property(&m, &el(&p, "a^3"), 0, &gc, 5),
            Err(PeriodicityError::Precondition(_))
        ));
    }

    #[test]
    fn morse_on_prefix_structured_power() {
        let p = f2();
        let gc = tight_constants();
        let m = std_metric(&p);
        let g = el(&p, "b a^10");
        let report = verify_periodic_morse(
            &m,
            &g,
            0,
            &gc,
            6,
            Rational64::from_integer(1),
            Rational64::zero(),
            4,
            11,
        )
        .unwrap();
        // every geodesic from 1 to g^6 passes through each power
        assert_eq!(report.kappa_observed, 0.0);
        assert!(report.asserted);
        assert!(report.within_bound);
    }

    #[test]
    fn morse_observation_monotone_in_eta() {
        let p = f2();
        let mut gc = tight_constants();
        gc.r_map.insert(
            (Rational64::from_integer(1), Rational64::from_integer(2)),
            Rational64::from_integer(2),
        );
        let m = std_metric(&p);
        let g = el(&p, "b a^10");
        let strict = verify_periodic_morse(
            &m,
            &g,
            0,
            &gc,
            4,
            Rational64::from_integer(1),
            Rational64::zero(),
            6,
            13,
        )
        .unwrap();
        let loose = verify_periodic_morse(
            &m,
            &g,
            0,
            &gc,
            4,
            Rational64::from_integer(1),
            Rational64::from_integer(2),
            6,
            13,
        )
        .unwrap();
        assert!(loose.kappa_observed >= strict.kappa_observed);
        assert!(loose.within_bound);
    }

    #[test]
    fn morse_without_r_is_observation_only() {
        let p = f2();
        let gc = tight_constants(); // r_map has only (1, 0)
        let m = std_metric(&p);
        let g = el(&p, "b a^10");
        let report = verify_periodic_morse(
            &m,
            &g,
            0,
            &gc,
            3,
            Rational64::from_integer(1),
            Rational64::from_integer(1),
            3,
            17,
        )
        .unwrap();
        assert!(!report.asserted);
        assert!(report.kappa_bound.is_none());
    }
}
