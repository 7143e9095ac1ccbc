//! Exact algebra for free products of finitely many free abelian groups.
//!
//! Elements are kept in reduced normal form: an alternating sequence of
//! syllables, each a nonzero exponent vector in one free abelian factor,
//! with adjacent syllables in distinct factors. The standard generating set
//! is the union of the standard basis vectors of every factor (and their
//! inverses), so the word length of an element is the sum of the L1 norms of
//! its syllables.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::GroupError;
use crate::rng::SplitMix64;

/// A free product `Z^{n_1} * Z^{n_2} * ... * Z^{n_k}` with labelled standard
/// generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeProductPresentation {
    factor_ranks: Vec<usize>,
    generator_labels: Vec<String>,
    /// Index of the first label of each factor.
    offsets: Vec<usize>,
    /// Set when the single-factor escape hatch was used; the relative
    /// structure is degenerate and the projection machinery refuses to run.
    degenerate: bool,
}

impl FreeProductPresentation {
    /// A presentation with at least two infinite factors.
    pub fn new(factor_ranks: Vec<usize>, generator_labels: Vec<String>) -> Result<Arc<Self>, GroupError> {
        if factor_ranks.len() < 2 {
            return Err(GroupError::TooFewFactors(factor_ranks.len()));
        }
        Self::build(factor_ranks, generator_labels, false)
    }

    /// Degenerate one-factor presentation, explicitly marked as such.
    pub fn single_factor(rank: usize, generator_labels: Vec<String>) -> Result<Arc<Self>, GroupError> {
        Self::build(vec![rank], generator_labels, true)
    }

    fn build(
        factor_ranks: Vec<usize>,
        generator_labels: Vec<String>,
        degenerate: bool,
    ) -> Result<Arc<Self>, GroupError> {
        for (i, &r) in factor_ranks.iter().enumerate() {
            if r == 0 {
                return Err(GroupError::ZeroRankFactor(i));
            }
        }
        let total: usize = factor_ranks.iter().sum();
        if generator_labels.len() != total {
            return Err(GroupError::LabelCount {
                expected: total,
                got: generator_labels.len(),
            });
        }
        let mut seen = HashSet::new();
        for l in &generator_labels {
            if !seen.insert(l.clone()) {
                return Err(GroupError::DuplicateLabel(l.clone()));
            }
        }
        let mut offsets = Vec::with_capacity(factor_ranks.len());
        let mut acc = 0;
        for &r in &factor_ranks {
            offsets.push(acc);
            acc += r;
        }
        Ok(Arc::new(FreeProductPresentation {
            factor_ranks,
            generator_labels,
            offsets,
            degenerate,
        }))
    }

    /// Ranks with automatic labels: one letter per factor (`a`, `b`, ...),
    /// suffixed `a1, a2, ...` when the factor has rank above one.
    pub fn from_ranks(ranks: &[usize]) -> Result<Arc<Self>, GroupError> {
        let letters = "abcdefghijklmnopqrstuvwxyz";
        let mut labels = Vec::new();
        for (i, &r) in ranks.iter().enumerate() {
            let letter = letters
                .chars()
                .nth(i)
                .map(|c| c.to_string())
                .unwrap_or_else(|| format!("g{i}"));
            if r == 1 {
                labels.push(letter);
            } else {
                for j in 1..=r {
                    labels.push(format!("{letter}{j}"));
                }
            }
        }
        Self::new(ranks.to_vec(), labels)
    }

    /// The free group `F_n` as a free product of `n` copies of `Z`.
    pub fn free_group(n: usize) -> Result<Arc<Self>, GroupError> {
        Self::from_ranks(&vec![1; n])
    }

    /// Parse the plain-text presentation format:
    ///
    /// ```text
    /// factors = [2, 1]
    /// labels = a1 a2 b
    /// ```
    ///
    /// The `labels` line is optional.
    pub fn parse(text: &str) -> Result<Arc<Self>, GroupError> {
        let mut ranks: Option<Vec<usize>> = None;
        let mut labels: Option<Vec<String>> = None;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(GroupError::PresentationParse(format!(
                    "expected `key = value`, got `{line}`"
                )));
            };
            match key.trim() {
                "factors" => {
                    let v = value.trim();
                    let inner = v
                        .strip_prefix('[')
                        .and_then(|s| s.strip_suffix(']'))
                        .ok_or_else(|| {
                            GroupError::PresentationParse(format!("factors must be `[n1, n2, ...]`, got `{v}`"))
                        })?;
                    let parsed: Result<Vec<usize>, _> = inner
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect();
                    ranks = Some(parsed.map_err(|e| {
                        GroupError::PresentationParse(format!("bad factor rank: {e}"))
                    })?);
                }
                "labels" => {
                    labels = Some(value.split_whitespace().map(|s| s.to_string()).collect());
                }
                other => {
                    return Err(GroupError::PresentationParse(format!("unknown key `{other}`")));
                }
            }
        }
        let ranks = ranks.ok_or_else(|| {
            GroupError::PresentationParse("missing `factors = [...]` line".into())
        })?;
        match labels {
            Some(l) => Self::new(ranks, l),
            None => Self::from_ranks(&ranks),
        }
    }

    /// Emit in the same plain-text format.
    pub fn emit(&self) -> String {
        let ranks: Vec<String> = self.factor_ranks.iter().map(|r| r.to_string()).collect();
        format!(
            "factors = [{}]\nlabels = {}\n",
            ranks.join(", "),
            self.generator_labels.join(" ")
        )
    }

    pub fn num_factors(&self) -> usize {
        self.factor_ranks.len()
    }

    pub fn rank(&self, factor: usize) -> usize {
        self.factor_ranks[factor]
    }

    pub fn num_generators(&self) -> usize {
        self.generator_labels.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn label(&self, factor: usize, coord: usize) -> &str {
        &self.generator_labels[self.offsets[factor] + coord]
    }

    /// `(factor, coordinate)` of a global generator index.
    pub fn factor_of_generator(&self, global: usize) -> (usize, usize) {
        let mut f = 0;
        while f + 1 < self.offsets.len() && self.offsets[f + 1] <= global {
            f += 1;
        }
        (f, global - self.offsets[f])
    }

    fn lookup_label(&self, label: &str) -> Option<(usize, usize)> {
        self.generator_labels
            .iter()
            .position(|l| l == label)
            .map(|g| self.factor_of_generator(g))
    }
}

/// One syllable: a nonzero exponent vector in one factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub factor: usize,
    pub exponents: Vec<i64>,
}

impl Syllable {
    pub fn l1(&self) -> u64 {
        self.exponents.iter().map(|e| e.unsigned_abs()).sum()
    }

    fn is_zero(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    fn inverse(&self) -> Syllable {
        Syllable {
            factor: self.factor,
            exponents: self.exponents.iter().map(|&e| -e).collect(),
        }
    }
}

/// A group element in reduced normal form. Immutable; clones are cheap-ish
/// (the presentation is shared behind an `Arc`).
#[derive(Debug, Clone)]
pub struct GroupElement {
    pres: Arc<FreeProductPresentation>,
    syllables: Vec<Syllable>,
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.same_presentation(other) && self.syllables == other.syllables
    }
}

impl Eq for GroupElement {}

impl Hash for GroupElement {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.syllables.hash(state);
    }
}

impl Ord for GroupElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.word_length()
            .cmp(&other.word_length())
            .then_with(|| self.syllables.cmp(&other.syllables))
    }
}

impl PartialOrd for GroupElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Syllable {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.factor
            .cmp(&other.factor)
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl PartialOrd for Syllable {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl GroupElement {
    pub fn identity(pres: &Arc<FreeProductPresentation>) -> Self {
        GroupElement {
            pres: Arc::clone(pres),
            syllables: Vec::new(),
        }
    }

    /// The `coord`-th standard generator of `factor`.
    pub fn generator(pres: &Arc<FreeProductPresentation>, factor: usize, coord: usize) -> Self {
        let mut exponents = vec![0i64; pres.rank(factor)];
        exponents[coord] = 1;
        GroupElement {
            pres: Arc::clone(pres),
            syllables: vec![Syllable { factor, exponents }],
        }
    }

    /// All standard generators, in factor-then-coordinate order.
    pub fn generators(pres: &Arc<FreeProductPresentation>) -> Vec<Self> {
        let mut out = Vec::with_capacity(pres.num_generators());
        for f in 0..pres.num_factors() {
            for c in 0..pres.rank(f) {
                out.push(Self::generator(pres, f, c));
            }
        }
        out
    }

    /// Single-syllable element for an exponent vector (must be nonzero).
    pub fn from_syllable(
        pres: &Arc<FreeProductPresentation>,
        factor: usize,
        exponents: Vec<i64>,
    ) -> Self {
        let syl = Syllable { factor, exponents };
        debug_assert!(!syl.is_zero());
        debug_assert_eq!(syl.exponents.len(), pres.rank(factor));
        GroupElement {
            pres: Arc::clone(pres),
            syllables: vec![syl],
        }
    }

    pub fn presentation(&self) -> &Arc<FreeProductPresentation> {
        &self.pres
    }

    pub fn same_presentation(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pres, &other.pres) || self.pres == other.pres
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn first_syllable(&self) -> Option<&Syllable> {
        self.syllables.first()
    }

    pub fn last_syllable(&self) -> Option<&Syllable> {
        self.syllables.last()
    }

    /// Word length in the standard generating set: the sum of the L1 norms of
    /// the syllables. Equals the Cayley-graph distance from the identity.
    pub fn word_length(&self) -> u64 {
        self.syllables.iter().map(Syllable::l1).sum()
    }

    /// Reduced product. Errors when the operands live in different
    /// presentations.
    pub fn multiply(&self, other: &Self) -> Result<Self, GroupError> {
        if !self.same_presentation(other) {
            return Err(GroupError::PresentationMismatch);
        }
        let mut stack: Vec<Syllable> = self.syllables.clone();
        for syl in &other.syllables {
            push_reduced(&mut stack, syl.clone());
        }
        Ok(GroupElement {
            pres: Arc::clone(&self.pres),
            syllables: stack,
        })
    }

    pub fn inverse(&self) -> Self {
        let syllables = self
            .syllables
            .iter()
            .rev()
            .map(Syllable::inverse)
            .collect();
        GroupElement {
            pres: Arc::clone(&self.pres),
            syllables,
        }
    }

    /// `self^n` for any integer `n` (square-and-multiply).
    pub fn pow(&self, n: i64) -> Self {
        if n == 0 {
            return Self::identity(&self.pres);
        }
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut n = n.unsigned_abs();
        let mut acc = Self::identity(&self.pres);
        let mut sq = base;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.multiply(&sq).expect("same presentation");
            }
            sq = sq.multiply(&sq).expect("same presentation");
            n >>= 1;
        }
        acc
    }

    /// `g self g^{-1}`.
    pub fn conjugate_by(&self, g: &Self) -> Result<Self, GroupError> {
        g.multiply(self)?.multiply(&g.inverse())
    }

    /// Cyclic reduction: returns `(core, conjugator)` with
    /// `self = conjugator * core * conjugator^{-1}`, where `core` is
    /// cyclically reduced (at most one syllable, or first and last syllables
    /// in distinct factors) of minimal word length in the conjugacy class.
    pub fn cyclic_reduce(&self) -> (Self, Self) {
        let mut core: Vec<Syllable> = self.syllables.clone();
        let mut conj: Vec<Syllable> = Vec::new();

        // Strip fully cancelling boundary pairs into the conjugator.
        while core.len() >= 2 {
            let first = &core[0];
            let last = &core[core.len() - 1];
            if first.factor == last.factor
                && first
                    .exponents
                    .iter()
                    .zip(&last.exponents)
                    .all(|(a, b)| a + b == 0)
            {
                let first = core.remove(0);
                core.pop();
                conj.push(first);
            } else {
                break;
            }
        }

        // One boundary merge when first and last still share a factor: rotate
        // the last syllable to the front and add the exponent vectors.
        if core.len() >= 2 && core[0].factor == core[core.len() - 1].factor {
            let last = core.pop().expect("nonempty");
            // conjugating by last^{-1} sends s1...sk to (sk s1) s2 ... s(k-1)
            for (a, b) in core[0].exponents.iter_mut().zip(&last.exponents) {
                *a += b;
            }
            debug_assert!(!core[0].is_zero(), "full cancellation was stripped above");
            conj.push(last.inverse());
        }

        let conjugator = conj.into_iter().fold(Self::identity(&self.pres), |acc, s| {
            acc.multiply(&GroupElement {
                pres: Arc::clone(&self.pres),
                syllables: vec![s],
            })
            .expect("same presentation")
        });
        let core = GroupElement {
            pres: Arc::clone(&self.pres),
            syllables: core,
        };
        debug_assert!(core.is_cyclically_reduced());
        (core, conjugator)
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match self.syllables.len() {
            0 | 1 => true,
            n => self.syllables[0].factor != self.syllables[n - 1].factor,
        }
    }

    /// The letters of the normal form in canonical order: per syllable, the
    /// signed standard generators coordinate by coordinate.
    pub fn letters(&self) -> Vec<GroupElement> {
        let mut out = Vec::with_capacity(self.word_length() as usize);
        for syl in &self.syllables {
            for (coord, &e) in syl.exponents.iter().enumerate() {
                let step = if e >= 0 { 1 } else { -1 };
                for _ in 0..e.unsigned_abs() {
                    let mut exps = vec![0i64; self.pres.rank(syl.factor)];
                    exps[coord] = step;
                    out.push(GroupElement {
                        pres: Arc::clone(&self.pres),
                        syllables: vec![Syllable {
                            factor: syl.factor,
                            exponents: exps,
                        }],
                    });
                }
            }
        }
        out
    }

    /// Parse a word such as `a^3 b^-2 a` (whitespace-separated letters with
    /// optional integer exponents; `1` is the identity) and reduce it.
    pub fn parse(pres: &Arc<FreeProductPresentation>, text: &str) -> Result<Self, GroupError> {
        let text = text.trim();
        if text.is_empty() || text == "1" {
            return Ok(Self::identity(pres));
        }
        let mut out = Self::identity(pres);
        for token in text.split_whitespace() {
            let (label, exp) = match token.split_once('^') {
                Some((l, e)) => {
                    let e: i64 = e
                        .parse()
                        .map_err(|_| GroupError::Parse(format!("bad exponent in `{token}`")))?;
                    (l, e)
                }
                None => (token, 1),
            };
            let (factor, coord) = pres
                .lookup_label(label)
                .ok_or_else(|| GroupError::Parse(format!("unknown generator `{label}`")))?;
            if exp == 0 {
                continue;
            }
            let mut exponents = vec![0i64; pres.rank(factor)];
            exponents[coord] = exp;
            out = out.multiply(&GroupElement {
                pres: Arc::clone(pres),
                syllables: vec![Syllable { factor, exponents }],
            })?;
        }
        Ok(out)
    }
}

/// Push a syllable onto a reduced stack, merging and cancelling at the seam.
fn push_reduced(stack: &mut Vec<Syllable>, syl: Syllable) {
    if syl.is_zero() {
        return;
    }
    match stack.last_mut() {
        Some(top) if top.factor == syl.factor => {
            for (a, b) in top.exponents.iter_mut().zip(&syl.exponents) {
                *a += b;
            }
            if top.is_zero() {
                stack.pop();
            }
        }
        _ => stack.push(syl),
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let mut first = true;
        for syl in &self.syllables {
            for (coord, &e) in syl.exponents.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                let label = self.pres.label(syl.factor, coord);
                if e == 1 {
                    write!(f, "{label}")?;
                } else {
                    write!(f, "{label}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

// --- enumeration ------------------------------------------------------------

/// Exponent vectors in `Z^rank` of L1 norm exactly `l`, in a fixed order.
pub(crate) fn vectors_with_l1(rank: usize, l: u64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut current = vec![0i64; rank];
    fn rec(rank: usize, idx: usize, rem: i64, current: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if idx + 1 == rank {
            if rem == 0 {
                current[idx] = 0;
                out.push(current.clone());
            } else {
                current[idx] = -rem;
                out.push(current.clone());
                current[idx] = rem;
                out.push(current.clone());
            }
            return;
        }
        for e in -rem..=rem {
            current[idx] = e;
            rec(rank, idx + 1, rem - e.abs(), current, out);
        }
    }
    rec(rank, 0, l as i64, &mut current, &mut out);
    out
}

/// Number of vectors in `Z^rank` with L1 norm exactly `l`.
fn sphere_count_abelian(rank: usize, l: u64) -> u128 {
    if l == 0 {
        return 1;
    }
    // sum over k nonzero coordinates: C(rank,k) C(l-1,k-1) 2^k
    let mut total: u128 = 0;
    for k in 1..=rank.min(l as usize) {
        total += binomial(rank as u128, k as u128)
            * binomial((l - 1) as u128, (k - 1) as u128)
            * (1u128 << k);
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

/// Sphere sizes of the free product out to `radius`, by dynamic programming
/// over (length, last factor).
pub fn sphere_sizes(pres: &FreeProductPresentation, radius: u32) -> Vec<u128> {
    let r = radius as usize;
    let nf = pres.num_factors();
    // ending[f][len] = words of length len whose last syllable is in factor f
    let mut ending = vec![vec![0u128; r + 1]; nf];
    for len in 1..=r {
        for f in 0..nf {
            let mut acc = 0u128;
            for l in 1..=len {
                let syl = sphere_count_abelian(pres.rank(f), l as u64);
                let rest_len = len - l;
                if rest_len == 0 {
                    acc += syl;
                } else {
                    for (g, counts) in ending.iter().enumerate() {
                        if g != f {
                            acc += syl * counts[rest_len];
                        }
                    }
                }
            }
            ending[f][len] = acc;
        }
    }
    let mut out = vec![0u128; r + 1];
    out[0] = 1;
    for len in 1..=r {
        out[len] = (0..nf).map(|f| ending[f][len]).sum();
    }
    out
}

pub fn ball_size_estimate(pres: &FreeProductPresentation, radius: u32) -> u128 {
    sphere_sizes(pres, radius).iter().sum()
}

/// All elements of word length exactly `length`, in a deterministic order.
pub fn sphere(
    pres: &Arc<FreeProductPresentation>,
    length: u32,
    cap: usize,
) -> Result<Vec<GroupElement>, GroupError> {
    let estimate = sphere_sizes(pres, length)[length as usize];
    if estimate > cap as u128 {
        return Err(GroupError::BallBudget {
            radius: length,
            estimate,
            cap,
        });
    }
    let mut out = Vec::new();
    let mut prefix: Vec<Syllable> = Vec::new();
    extend_words(pres, length as u64, true, &mut prefix, &mut out);
    Ok(out)
}

/// All elements of word length at most `radius`, ordered by length and then
/// by the generation order (deterministic).
pub fn enumerate_ball(
    pres: &Arc<FreeProductPresentation>,
    radius: u32,
    cap: usize,
) -> Result<Vec<GroupElement>, GroupError> {
    let estimate = ball_size_estimate(pres, radius);
    if estimate > cap as u128 {
        return Err(GroupError::BallBudget {
            radius,
            estimate,
            cap,
        });
    }
    let mut out = Vec::new();
    for len in 0..=radius {
        let mut prefix: Vec<Syllable> = Vec::new();
        extend_words(pres, len as u64, true, &mut prefix, &mut out);
    }
    Ok(out)
}

fn extend_words(
    pres: &Arc<FreeProductPresentation>,
    remaining: u64,
    _first: bool,
    prefix: &mut Vec<Syllable>,
    out: &mut Vec<GroupElement>,
) {
    if remaining == 0 {
        out.push(GroupElement {
            pres: Arc::clone(pres),
            syllables: prefix.clone(),
        });
        return;
    }
    let last_factor = prefix.last().map(|s| s.factor);
    for f in 0..pres.num_factors() {
        if Some(f) == last_factor {
            continue;
        }
        for l in 1..=remaining {
            for exps in vectors_with_l1(pres.rank(f), l) {
                prefix.push(Syllable {
                    factor: f,
                    exponents: exps,
                });
                extend_words(pres, remaining - l, false, prefix, out);
                prefix.pop();
            }
        }
    }
}

/// A seeded random reduced word of exact length `len`: a random walk that
/// never cancels (each new letter either starts a new syllable in a different
/// factor or extends the current syllable away from zero).
pub fn random_reduced(
    pres: &Arc<FreeProductPresentation>,
    len: u32,
    rng: &mut SplitMix64,
) -> GroupElement {
    let mut syllables: Vec<Syllable> = Vec::new();
    for _ in 0..len {
        let extend = match syllables.last() {
            Some(_) if pres.num_factors() > 1 => rng.next_below(3) > 0,
            Some(_) => true,
            None => false,
        };
        if extend {
            let top = syllables.last_mut().expect("nonempty");
            let rank = pres.rank(top.factor);
            let coord = rng.next_below(rank);
            let e = top.exponents[coord];
            let step = if e > 0 {
                1
            } else if e < 0 {
                -1
            } else if rng.next_bool() {
                1
            } else {
                -1
            };
            top.exponents[coord] += step;
        } else {
            let last = syllables.last().map(|s| s.factor);
            let mut f = rng.next_below(pres.num_factors());
            while Some(f) == last {
                f = rng.next_below(pres.num_factors());
            }
            let rank = pres.rank(f);
            let coord = rng.next_below(rank);
            let mut exponents = vec![0i64; rank];
            exponents[coord] = if rng.next_bool() { 1 } else { -1 };
            syllables.push(Syllable {
                factor: f,
                exponents,
            });
        }
    }
    let g = GroupElement {
        pres: Arc::clone(pres),
        syllables,
    };
    debug_assert_eq!(g.word_length(), len as u64);
    g
}
