//! Left-invariant metrics on a free product, rough-geodesicity checking and
//! quasi-geodesic sampling.
//!
//! Every kind computes `distance(x, y)` as a norm of `x^{-1} y`, which makes
//! left invariance structural. Discrete paths are vertex sequences with
//! distinct consecutive points; a `(tau, eta)`-quasi-geodesic is a path with
//! `|i - j| / tau - eta <= m(p_i, p_j) <= tau |i - j| + eta` for all `i, j`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::MetricError;
use crate::group::{self, FreeProductPresentation, GroupElement};
use crate::rng::SplitMix64;
use crate::Real;

/// Node budget for the exact search behind large alternative-generating-set
/// distance queries.
const ASTAR_BUDGET: u64 = 4_000_000;

/// How deep the breadth-first layer cache of a `bfs` metric may grow before
/// queries switch to the exact best-first search.
const BFS_CACHE_SOFT_LIMIT: u32 = 7;

#[derive(Debug)]
enum MetricKind<R: Real> {
    Standard {
        pres: Arc<FreeProductPresentation>,
    },
    Bfs {
        genset: Vec<GroupElement>,
        closed: Vec<GroupElement>,
        state: Mutex<BfsMetricState>,
        max_gen_len: u64,
    },
    Sqrt {
        base: Box<LeftInvariantMetric<R>>,
    },
    Shift {
        base: Box<LeftInvariantMetric<R>>,
        o: GroupElement,
    },
}

#[derive(Debug, Default)]
struct BfsMetricState {
    layers: HashMap<GroupElement, u32>,
    frontier: Vec<GroupElement>,
    depth: u32,
    astar_memo: HashMap<GroupElement, u64>,
}

/// A left-invariant metric on the group, quasi-isometric to the standard
/// word metric with the stored `(tau, eta)` constants.
#[derive(Debug)]
pub struct LeftInvariantMetric<R: Real> {
    kind: MetricKind<R>,
    qi: (R, R),
    cache_radius: u32,
}

impl<R: Real> LeftInvariantMetric<R> {
    pub fn standard(pres: &Arc<FreeProductPresentation>) -> Self {
        LeftInvariantMetric {
            kind: MetricKind::Standard {
                pres: Arc::clone(pres),
            },
            qi: (R::one(), R::zero()),
            cache_radius: u32::MAX,
        }
    }

    /// Word metric for an alternative finite generating set (closed under
    /// inverses internally). Fails when the set does not generate.
    pub fn bfs(genset: Vec<GroupElement>, cache_radius: u32) -> Result<Self, MetricError> {
        assert!(!genset.is_empty(), "generating set must be nonempty");
        let closed = symmetric_closure(&genset);
        let pres = Arc::clone(genset[0].presentation());
        let max_gen_len = closed
            .iter()
            .map(|g| g.word_length())
            .max()
            .unwrap_or(1)
            .max(1);

        // qi constants: every S-letter has standard length <= max_gen_len,
        // and every standard generator has some S-length.
        let mut probe = BfsMetricState::default();
        let mut std_gen_cost: u64 = 0;
        for g in GroupElement::generators(&pres) {
            match bfs_lookup(&mut probe, &closed, &g, 16) {
                Some(c) => std_gen_cost = std_gen_cost.max(c),
                None => return Err(MetricError::NotGenerating(g.to_string())),
            }
        }
        let tau_u = max_gen_len.max(std_gen_cost).max(1);
        probe.astar_memo = HashMap::new();
        Ok(LeftInvariantMetric {
            kind: MetricKind::Bfs {
                genset,
                closed,
                state: Mutex::new(probe),
                max_gen_len,
            },
            qi: (R::from_u64(tau_u).expect("small"), R::zero()),
            cache_radius,
        })
    }

    /// `base + sqrt(base)`.
    pub fn sqrt(base: LeftInvariantMetric<R>) -> Self {
        let (t, e) = base.qi;
        let two = R::one() + R::one();
        let qi = (two * t, two * e + R::one());
        let cache_radius = base.cache_radius;
        LeftInvariantMetric {
            kind: MetricKind::Sqrt {
                base: Box::new(base),
            },
            qi,
            cache_radius,
        }
    }

    /// `distance(x, y) = base(x o, y o)`.
    pub fn shifted(base: LeftInvariantMetric<R>, o: GroupElement) -> Result<Self, MetricError> {
        let (t, e) = base.qi;
        let o_norm = base.norm(&o)?;
        let qi = (t, e + o_norm + o_norm);
        let cache_radius = base.cache_radius;
        Ok(LeftInvariantMetric {
            kind: MetricKind::Shift {
                base: Box::new(base),
                o,
            },
            qi,
            cache_radius,
        })
    }

    pub fn presentation(&self) -> &Arc<FreeProductPresentation> {
        match &self.kind {
            MetricKind::Standard { pres } => pres,
            MetricKind::Bfs { genset, .. } => genset[0].presentation(),
            MetricKind::Sqrt { base } => base.presentation(),
            MetricKind::Shift { base, .. } => base.presentation(),
        }
    }

    pub fn qi_constants(&self) -> (R, R) {
        self.qi
    }

    pub fn cache_radius(&self) -> u32 {
        self.cache_radius
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.kind, MetricKind::Standard { .. })
    }

    /// Word kinds take integer values.
    pub fn is_integer_valued(&self) -> bool {
        match &self.kind {
            MetricKind::Standard { .. } | MetricKind::Bfs { .. } => true,
            MetricKind::Sqrt { .. } => false,
            MetricKind::Shift { base, .. } => base.is_integer_valued(),
        }
    }

    /// True when `self` is exactly `other + sqrt(other)`.
    pub fn is_sqrt_of(&self, other: &LeftInvariantMetric<R>) -> bool {
        match &self.kind {
            MetricKind::Sqrt { base } => base.describe() == other.describe(),
            _ => false,
        }
    }

    /// For a shifted metric, the basepoint translate.
    pub fn shift_basepoint(&self) -> Option<&GroupElement> {
        match &self.kind {
            MetricKind::Shift { o, .. } => Some(o),
            _ => None,
        }
    }

    /// The metric-spec string (`standard | bfs:<genset> | sqrt:<base> |
    /// shift:<base>:<o>`).
    pub fn describe(&self) -> String {
        match &self.kind {
            MetricKind::Standard { .. } => "standard".into(),
            MetricKind::Bfs { genset, .. } => {
                let words: Vec<String> = genset.iter().map(|g| g.to_string()).collect();
                format!("bfs:{}", words.join(","))
            }
            MetricKind::Sqrt { base } => format!("sqrt:{}", base.describe()),
            MetricKind::Shift { base, o } => format!("shift:{}:{}", base.describe(), o),
        }
    }

    /// Parse a metric-spec string (inverse of [`describe`](Self::describe)).
    pub fn parse_spec(
        pres: &Arc<FreeProductPresentation>,
        spec: &str,
    ) -> Result<Self, MetricError> {
        let spec = spec.trim();
        if spec == "standard" {
            return Ok(Self::standard(pres));
        }
        if let Some(rest) = spec.strip_prefix("bfs:") {
            let mut genset = Vec::new();
            for word in rest.split(',') {
                // commas separate generators; spaces separate letters inside
                // one generator word, so `bfs:a,b,a b` is {a, b, ab}
                genset.push(GroupElement::parse(pres, word)?);
            }
            return Self::bfs(genset, 64);
        }
        if let Some(rest) = spec.strip_prefix("sqrt:") {
            return Ok(Self::sqrt(Self::parse_spec(pres, rest)?));
        }
        if let Some(rest) = spec.strip_prefix("shift:") {
            let (base, o) = rest.rsplit_once(':').ok_or_else(|| {
                MetricError::Group(crate::error::GroupError::Parse(format!(
                    "shift spec needs `shift:<base>:<o>`, got `{spec}`"
                )))
            })?;
            let base = Self::parse_spec(pres, base)?;
            let o = GroupElement::parse(pres, o)?;
            return Self::shifted(base, o);
        }
        Err(MetricError::Group(crate::error::GroupError::Parse(format!(
            "unknown metric spec `{spec}`"
        ))))
    }

    /// The norm `distance(1, w)`.
    pub fn norm(&self, w: &GroupElement) -> Result<R, MetricError> {
        match &self.kind {
            MetricKind::Standard { .. } => {
                Ok(R::from_u64(w.word_length()).expect("length fits scalar"))
            }
            MetricKind::Bfs {
                closed,
                state,
                max_gen_len,
                ..
            } => {
                let mut st = state.lock().expect("bfs cache poisoned");
                if let Some(&d) = st.layers.get(w) {
                    return Ok(R::from_u32(d).expect("depth fits scalar"));
                }
                if let Some(&d) = st.astar_memo.get(w) {
                    return Ok(R::from_u64(d).expect("depth fits scalar"));
                }
                let soft = BFS_CACHE_SOFT_LIMIT.min(self.cache_radius);
                if let Some(d) = bfs_lookup(&mut st, closed, w, soft) {
                    return Ok(R::from_u64(d).expect("depth fits scalar"));
                }
                let d = astar_norm(closed, w, *max_gen_len, ASTAR_BUDGET)?;
                st.astar_memo.insert(w.clone(), d);
                Ok(R::from_u64(d).expect("depth fits scalar"))
            }
            MetricKind::Sqrt { base } => {
                let b = base.norm(w)?;
                Ok(b + b.sqrt())
            }
            MetricKind::Shift { base, o } => {
                let conj = o
                    .inverse()
                    .multiply(w)
                    .and_then(|t| t.multiply(o))
                    .map_err(MetricError::Group)?;
                base.norm(&conj)
            }
        }
    }

    pub fn distance(&self, x: &GroupElement, y: &GroupElement) -> Result<R, MetricError> {
        let w = x.inverse().multiply(y).map_err(MetricError::Group)?;
        self.norm(&w)
    }
}

impl<R: Real> fmt::Display for LeftInvariantMetric<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

fn symmetric_closure(genset: &[GroupElement]) -> Vec<GroupElement> {
    let mut closed: Vec<GroupElement> = Vec::new();
    for g in genset {
        if g.is_identity() {
            continue;
        }
        if !closed.contains(g) {
            closed.push(g.clone());
        }
        let inv = g.inverse();
        if !closed.contains(&inv) {
            closed.push(inv);
        }
    }
    closed
}

/// Grow the layer cache until `target` appears or `cap` layers exist.
fn bfs_lookup(
    st: &mut BfsMetricState,
    closed: &[GroupElement],
    target: &GroupElement,
    cap: u32,
) -> Option<u64> {
    if st.layers.is_empty() {
        let id = GroupElement::identity(target.presentation());
        st.layers.insert(id.clone(), 0);
        st.frontier.push(id);
        st.depth = 0;
    }
    if let Some(&d) = st.layers.get(target) {
        return Some(d as u64);
    }
    while st.depth < cap && !st.frontier.is_empty() {
        let mut next = Vec::new();
        let depth = st.depth + 1;
        for v in std::mem::take(&mut st.frontier) {
            for s in closed {
                let u = v.multiply(s).expect("same presentation");
                if !st.layers.contains_key(&u) {
                    st.layers.insert(u.clone(), depth);
                    next.push(u);
                }
            }
        }
        st.frontier = next;
        st.depth = depth;
        if let Some(&d) = st.layers.get(target) {
            return Some(d as u64);
        }
    }
    None
}

/// Shortest-word length of `x` over `genset` and its inverses, by memoized
/// breadth-first layers around the identity. `NotReached(cap)` when `x` does
/// not appear within `cap` layers.
pub fn bfs_word_length(
    genset: &[GroupElement],
    x: &GroupElement,
    cap: u32,
) -> Result<u64, MetricError> {
    let closed = symmetric_closure(genset);
    if closed.is_empty() {
        return Err(MetricError::NotGenerating("<empty>".into()));
    }
    let mut st = BfsMetricState::default();
    bfs_lookup(&mut st, &closed, x, cap).ok_or(MetricError::NotReached(cap))
}

/// Exact S-norm by best-first search with the admissible bound
/// `|u^{-1} w| / max_gen_len` on the remaining cost.
fn astar_norm(
    closed: &[GroupElement],
    w: &GroupElement,
    max_gen_len: u64,
    budget: u64,
) -> Result<u64, MetricError> {
    if w.is_identity() {
        return Ok(0);
    }
    let h0 = w.word_length().div_ceil(max_gen_len);
    let mut best: HashMap<GroupElement, u64> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(u64, u64, u64)>> = BinaryHeap::new();
    let mut arena: Vec<GroupElement> = Vec::new();
    let id = GroupElement::identity(w.presentation());
    best.insert(id.clone(), 0);
    arena.push(id);
    heap.push(Reverse((h0, 0, 0)));
    let mut expanded: u64 = 0;
    while let Some(Reverse((_, g_cost, idx))) = heap.pop() {
        let u = arena[idx as usize].clone();
        if best.get(&u).copied() != Some(g_cost) {
            continue; // stale entry
        }
        if &u == w {
            return Ok(g_cost);
        }
        expanded += 1;
        if expanded > budget {
            return Err(MetricError::SearchBudget(budget));
        }
        for s in closed {
            let v = u.multiply(s).expect("same presentation");
            let g2 = g_cost + 1;
            if best.get(&v).is_none_or(|&old| g2 < old) {
                let rem = v.inverse().multiply(w).expect("same presentation");
                let h = rem.word_length().div_ceil(max_gen_len);
                best.insert(v.clone(), g2);
                let idx = arena.len() as u64;
                arena.push(v);
                heap.push(Reverse((g2 + h, g2, idx)));
            }
        }
    }
    Err(MetricError::SearchBudget(budget))
}

// --- discrete paths ----------------------------------------------------------

/// A discrete path: a nonempty vertex sequence with integer parameters
/// `0..=n`. Consecutive points must be distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretePath {
    points: Vec<GroupElement>,
}

impl DiscretePath {
    pub fn new(points: Vec<GroupElement>) -> Self {
        assert!(!points.is_empty(), "a path needs at least one point");
        debug_assert!(points.windows(2).all(|w| w[0] != w[1]));
        DiscretePath { points }
    }

    pub fn points(&self) -> &[GroupElement] {
        &self.points
    }

    /// Number of steps (`n` for parameters `0..=n`).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> &GroupElement {
        &self.points[0]
    }

    pub fn end(&self) -> &GroupElement {
        self.points.last().expect("nonempty")
    }

    /// First violation of the two-sided `(tau, eta)` inequality, if any.
    pub fn quasigeodesic_violation<R: Real>(
        &self,
        m: &LeftInvariantMetric<R>,
        tau: R,
        eta: R,
    ) -> Result<Option<(usize, usize)>, MetricError> {
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = m.distance(&self.points[i], &self.points[j])?;
                let sep = R::from_usize(j - i).expect("separation fits scalar");
                if d > tau * sep + eta || d < sep / tau - eta {
                    return Ok(Some((i, j)));
                }
            }
        }
        Ok(None)
    }

    pub fn is_quasigeodesic<R: Real>(
        &self,
        m: &LeftInvariantMetric<R>,
        tau: R,
        eta: R,
    ) -> Result<bool, MetricError> {
        Ok(self.quasigeodesic_violation(m, tau, eta)?.is_none())
    }

    /// `min_j m(x, p_j)`, with a triangle-inequality skip-ahead.
    pub fn distance_from<R: Real>(
        &self,
        m: &LeftInvariantMetric<R>,
        x: &GroupElement,
    ) -> Result<R, MetricError> {
        // the distance function along the path changes by at most `step_max`
        // between consecutive points
        let mut step_max = R::zero();
        for w in self.points.windows(2) {
            step_max = step_max.max(m.distance(&w[0], &w[1])?);
        }
        let mut best = m.distance(x, &self.points[0])?;
        let mut j = 1usize;
        while j < self.points.len() {
            let d = m.distance(x, &self.points[j])?;
            best = best.min(d);
            if step_max > R::zero() {
                let skip = ((d - best) / step_max).floor();
                let skip = skip.to_usize().unwrap_or(0);
                j += 1 + skip;
            } else {
                j += 1;
            }
        }
        Ok(best)
    }
}

/// The canonical normal-form geodesic from `x` to `y` in the standard word
/// metric: letters of `x^{-1} y` in canonical order.
pub fn canonical_geodesic(x: &GroupElement, y: &GroupElement) -> DiscretePath {
    let w = x.inverse().multiply(y).expect("same presentation");
    let mut points = Vec::with_capacity(w.word_length() as usize + 1);
    points.push(x.clone());
    let mut current = x.clone();
    for letter in w.letters() {
        current = current.multiply(&letter).expect("same presentation");
        points.push(current.clone());
    }
    DiscretePath::new(points)
}

// --- geodesic enumeration ------------------------------------------------------

/// All standard-metric geodesics between two points, or a deterministic
/// seeded sample of `cap` paths once the count exceeds `cap`.
pub struct GeodesicFamily {
    pub paths: Vec<DiscretePath>,
    pub total: u128,
    pub sampled: bool,
}

pub fn geodesics_between(
    x: &GroupElement,
    y: &GroupElement,
    cap: usize,
    seed: u64,
) -> GeodesicFamily {
    let w = x.inverse().multiply(y).expect("same presentation");
    // letters per syllable: (factor, coord, sign) repeated |e| times
    let syllable_letters: Vec<Vec<(usize, usize, i64)>> = w
        .syllables()
        .iter()
        .map(|s| {
            let mut letters = Vec::new();
            for (coord, &e) in s.exponents.iter().enumerate() {
                let sign = if e >= 0 { 1 } else { -1 };
                for _ in 0..e.unsigned_abs() {
                    letters.push((s.factor, coord, sign));
                }
            }
            letters
        })
        .collect();

    let mut total: u128 = 1;
    for letters in &syllable_letters {
        total = total.saturating_mul(multiset_orderings(letters));
    }

    let pres = x.presentation();
    let build = |orderings: &[Vec<(usize, usize, i64)>]| -> DiscretePath {
        let mut points = vec![x.clone()];
        let mut current = x.clone();
        for letters in orderings {
            for &(factor, coord, sign) in letters {
                let gen = GroupElement::generator(pres, factor, coord).pow(sign);
                current = current.multiply(&gen).expect("same presentation");
                points.push(current.clone());
            }
        }
        DiscretePath::new(points)
    };

    if total <= cap as u128 {
        // full cartesian product of per-syllable orderings
        let per_syllable: Vec<Vec<Vec<(usize, usize, i64)>>> = syllable_letters
            .iter()
            .map(|letters| all_multiset_orderings(letters))
            .collect();
        let mut paths = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; per_syllable.len()];
        loop {
            let chosen: Vec<Vec<(usize, usize, i64)>> = per_syllable
                .iter()
                .zip(&idx)
                .map(|(opts, &i)| opts[i].clone())
                .collect();
            paths.push(build(&chosen));
            // odometer over the per-syllable ordering indices
            let mut k = per_syllable.len();
            loop {
                if k == 0 {
                    return GeodesicFamily {
                        paths,
                        total,
                        sampled: false,
                    };
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_syllable[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    } else {
        let mut rng = SplitMix64::new(seed);
        let mut paths = Vec::with_capacity(cap);
        for _ in 0..cap {
            let chosen: Vec<Vec<(usize, usize, i64)>> = syllable_letters
                .iter()
                .map(|letters| {
                    let mut l = letters.clone();
                    rng.shuffle(&mut l);
                    l
                })
                .collect();
            paths.push(build(&chosen));
        }
        GeodesicFamily {
            paths,
            total,
            sampled: true,
        }
    }
}

fn multiset_orderings(letters: &[(usize, usize, i64)]) -> u128 {
    // letters of one syllable differ only by coordinate
    let mut counts: HashMap<usize, u128> = HashMap::new();
    for &(_, coord, _) in letters {
        *counts.entry(coord).or_insert(0) += 1;
    }
    let mut total: u128 = 1;
    let mut used: u128 = 0;
    for (_, c) in counts {
        for i in 1..=c {
            used += 1;
            total = total.saturating_mul(used) / i;
        }
    }
    total
}

fn all_multiset_orderings(letters: &[(usize, usize, i64)]) -> Vec<Vec<(usize, usize, i64)>> {
    if letters.is_empty() {
        return vec![Vec::new()];
    }
    let mut sorted = letters.to_vec();
    sorted.sort_unstable_by_key(|&(_, coord, _)| coord);
    let mut out = Vec::new();
    loop {
        out.push(sorted.clone());
        if !next_permutation_by_coord(&mut sorted) {
            return out;
        }
    }
}

fn next_permutation_by_coord(letters: &mut [(usize, usize, i64)]) -> bool {
    let n = letters.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && letters[i - 1].1 >= letters[i].1 {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while letters[j].1 <= letters[i - 1].1 {
        j -= 1;
    }
    letters.swap(i - 1, j);
    letters[i..].reverse();
    true
}

// --- rough geodesicity ----------------------------------------------------------

/// Where the path search may place intermediate points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchDomain {
    /// The word-metric ball of the search radius around the start point.
    Ball,
    /// Powers of a single generator through the start point; only valid when
    /// the endpoints differ by a power of one standard generator. The
    /// certificate is then relative to this axis domain.
    Axis,
}

#[derive(Debug, Clone)]
pub struct FailureCertificate<R: Real> {
    pub delta: R,
    /// Path lengths that were exhausted.
    pub n_range: (u64, u64),
    pub domain: String,
    pub candidates: usize,
    pub nodes_explored: u64,
}

#[derive(Debug)]
pub enum RoughGeodesicOutcome<R: Real> {
    Witness(DiscretePath),
    NoPath(FailureCertificate<R>),
}

impl<R: Real> RoughGeodesicOutcome<R> {
    pub fn is_witness(&self) -> bool {
        matches!(self, RoughGeodesicOutcome::Witness(_))
    }
}

/// Search for a discrete `(1, delta)`-quasi-geodesic from `x` to `y`, or
/// certify that none exists through the chosen candidate domain. The search
/// is exhaustive over paths through the domain, so `NoPath` is a certificate
/// relative to that domain.
pub fn check_roughly_geodesic<R: Real>(
    m: &LeftInvariantMetric<R>,
    x: &GroupElement,
    y: &GroupElement,
    delta: R,
    search_radius: u32,
    node_budget: u64,
    domain: SearchDomain,
) -> Result<RoughGeodesicOutcome<R>, MetricError> {
    if x == y {
        return Ok(RoughGeodesicOutcome::Witness(DiscretePath::new(vec![
            x.clone()
        ])));
    }
    let one = R::one();

    // cheap witnesses first: the canonical word-metric geodesic, and for a
    // shifted metric its translate (which the shift sees as a geodesic)
    let mut quick = vec![canonical_geodesic(x, y)];
    if let MetricKind::Shift { o, .. } = &m.kind {
        let xo = x.multiply(o).map_err(MetricError::Group)?;
        let yo = y.multiply(o).map_err(MetricError::Group)?;
        let translated = canonical_geodesic(&xo, &yo);
        let points: Result<Vec<GroupElement>, MetricError> = translated
            .points()
            .iter()
            .map(|p| p.multiply(&o.inverse()).map_err(MetricError::Group))
            .collect();
        quick.push(DiscretePath::new(points?));
    }
    for cand in quick {
        if cand.is_quasigeodesic(m, one, delta)? {
            return Ok(RoughGeodesicOutcome::Witness(cand));
        }
    }

    let d = m.distance(x, y)?;
    let n_lo = (d - delta).ceil().max(one);
    let n_hi = (d + delta).floor();
    let n_lo_u = n_lo.to_u64().unwrap_or(1);
    let n_hi_u = n_hi.to_u64().unwrap_or(0);

    // candidate points with their distances to both endpoints
    let candidates: Vec<GroupElement> = match domain {
        SearchDomain::Ball => {
            let ball = group::enumerate_ball(x.presentation(), search_radius, 2_000_000)
                .map_err(MetricError::Group)?;
            ball.into_iter()
                .map(|u| x.multiply(&u).expect("same presentation"))
                .collect()
        }
        SearchDomain::Axis => {
            let w = x.inverse().multiply(y).map_err(MetricError::Group)?;
            let axis = axis_generator(&w).ok_or(MetricError::NotAnAxisPair)?;
            let r = search_radius as i64;
            (-r..=r)
                .map(|k| x.multiply(&axis.pow(k)).expect("same presentation"))
                .collect()
        }
    };
    let mut from_x = Vec::with_capacity(candidates.len());
    let mut to_y = Vec::with_capacity(candidates.len());
    for c in &candidates {
        from_x.push(m.distance(x, c)?);
        to_y.push(m.distance(c, y)?);
    }

    let mut explored: u64 = 0;
    for n in n_lo_u..=n_hi_u {
        // layer i admits candidates within delta of both endpoint constraints
        let n_r = R::from_u64(n).expect("n fits scalar");
        let mut layers: Vec<Vec<usize>> = Vec::with_capacity(n as usize + 1);
        for i in 0..=n {
            let i_r = R::from_u64(i).expect("i fits scalar");
            let mut layer = Vec::new();
            for (ci, c) in candidates.iter().enumerate() {
                if i == 0 {
                    if c == x {
                        layer.push(ci);
                    }
                    continue;
                }
                if i == n {
                    if c == y {
                        layer.push(ci);
                    }
                    continue;
                }
                if (from_x[ci] - i_r).abs() <= delta && (to_y[ci] - (n_r - i_r)).abs() <= delta {
                    layer.push(ci);
                }
            }
            layers.push(layer);
        }
        if layers.iter().any(|l| l.is_empty()) {
            continue;
        }

        // depth-first over layers with full pairwise checking
        let mut chosen: Vec<usize> = Vec::with_capacity(n as usize + 1);
        if dfs_layers(
            m,
            &candidates,
            &layers,
            delta,
            &mut chosen,
            &mut explored,
            node_budget,
        )? {
            let points: Vec<GroupElement> =
                chosen.iter().map(|&ci| candidates[ci].clone()).collect();
            return Ok(RoughGeodesicOutcome::Witness(DiscretePath::new(points)));
        }
    }

    Ok(RoughGeodesicOutcome::NoPath(FailureCertificate {
        delta,
        n_range: (n_lo_u, n_hi_u),
        domain: match domain {
            SearchDomain::Ball => format!("ball({search_radius})"),
            SearchDomain::Axis => format!("axis({search_radius})"),
        },
        candidates: candidates.len(),
        nodes_explored: explored,
    }))
}

fn dfs_layers<R: Real>(
    m: &LeftInvariantMetric<R>,
    candidates: &[GroupElement],
    layers: &[Vec<usize>],
    delta: R,
    chosen: &mut Vec<usize>,
    explored: &mut u64,
    budget: u64,
) -> Result<bool, MetricError> {
    let i = chosen.len();
    if i == layers.len() {
        return Ok(true);
    }
    'next: for &ci in &layers[i] {
        *explored += 1;
        if *explored > budget {
            return Err(MetricError::SearchBudget(budget));
        }
        if let Some(&prev) = chosen.last() {
            if prev == ci {
                continue; // consecutive points must differ
            }
        }
        for (j, &cj) in chosen.iter().enumerate() {
            let sep = R::from_usize(i - j).expect("separation fits scalar");
            let d = m.distance(&candidates[cj], &candidates[ci])?;
            if (d - sep).abs() > delta {
                continue 'next;
            }
        }
        chosen.push(ci);
        if dfs_layers(m, candidates, layers, delta, chosen, explored, budget)? {
            return Ok(true);
        }
        chosen.pop();
    }
    Ok(false)
}

/// The generator whose powers contain `w`, when `w` is a nonzero power of a
/// single standard generator.
fn axis_generator(w: &GroupElement) -> Option<GroupElement> {
    let syls = w.syllables();
    if syls.len() != 1 {
        return None;
    }
    let s = &syls[0];
    let nonzero: Vec<usize> = (0..s.exponents.len())
        .filter(|&c| s.exponents[c] != 0)
        .collect();
    if nonzero.len() != 1 {
        return None;
    }
    Some(GroupElement::generator(
        w.presentation(),
        s.factor,
        nonzero[0],
    ))
}

// --- quasi-geodesic sampling ------------------------------------------------------

#[derive(Debug)]
pub struct SampledQuasigeodesics {
    pub paths: Vec<DiscretePath>,
    pub generated: u32,
    pub rejected: u32,
}

impl SampledQuasigeodesics {
    pub fn rejection_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.rejected as f64 / self.generated as f64
        }
    }
}

/// Deterministically sample up to `count` verified `(tau, eta)`-quasi-
/// geodesics from `x` to `y` in metric `m`. The canonical normal-form
/// geodesic comes first; further candidates are alternative letter orderings
/// and paths with short bounces inserted. Candidates are generated
/// independently of `(tau, eta)` and filtered, so a larger `eta` keeps every
/// path admitted at a smaller one.
pub fn sample_quasigeodesics<R: Real>(
    m: &LeftInvariantMetric<R>,
    x: &GroupElement,
    y: &GroupElement,
    tau: R,
    eta: R,
    count: usize,
    seed: u64,
) -> Result<SampledQuasigeodesics, MetricError> {
    let mut rng = SplitMix64::new(seed);
    let mut paths: Vec<DiscretePath> = Vec::new();
    let mut seen: Vec<DiscretePath> = Vec::new();
    let mut generated = 0u32;
    let mut rejected = 0u32;

    let consider = |cand: DiscretePath,
                    paths: &mut Vec<DiscretePath>,
                    seen: &mut Vec<DiscretePath>,
                    rejected: &mut u32,
                    generated: &mut u32|
     -> Result<(), MetricError> {
        *generated += 1;
        if seen.contains(&cand) {
            return Ok(());
        }
        seen.push(cand.clone());
        if cand.is_quasigeodesic(m, tau, eta)? {
            if paths.len() < count {
                paths.push(cand);
            }
        } else {
            *rejected += 1;
        }
        Ok(())
    };

    consider(
        canonical_geodesic(x, y),
        &mut paths,
        &mut seen,
        &mut rejected,
        &mut generated,
    )?;

    let attempts = (count * 4 + 8) as u32;
    let pres = Arc::clone(x.presentation());
    let gens = GroupElement::generators(&pres);
    for attempt in 0..attempts {
        if paths.len() >= count {
            break;
        }
        let mut sub = rng.fork(attempt as u64);
        // base: randomly shuffled letter orders within each syllable
        let family = geodesics_between(x, y, 1, sub.next_u64());
        let mut base = family.paths.into_iter().next().expect("one sample");
        // insert a few bounces: z -> z s -> z
        let bounces = sub.next_below(3);
        for _ in 0..bounces {
            let pts = base.points();
            let at = sub.next_below(pts.len());
            let s = &gens[sub.next_below(gens.len())];
            let s = if sub.next_bool() { s.clone() } else { s.inverse() };
            let z = pts[at].clone();
            let side = z.multiply(&s).map_err(MetricError::Group)?;
            if side == z {
                continue;
            }
            // keep consecutive points distinct on both sides of the insert
            if at + 1 < pts.len() && pts[at + 1] == side {
                continue;
            }
            let mut new_pts = pts.to_vec();
            new_pts.splice(at + 1..at + 1, [side, z]);
            base = DiscretePath::new(new_pts);
        }
        consider(base, &mut paths, &mut seen, &mut rejected, &mut generated)?;
    }

    Ok(SampledQuasigeodesics {
        paths,
        generated,
        rejected,
    })
}
