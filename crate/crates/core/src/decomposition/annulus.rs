//! Greedy ball-growing decompositions into annuli with disjoint doubles, and
//! the separated-domain alternative for the local variant.

use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::space::MetricMeasureSpace;
use crate::error::{Error, Result};

/// Separation radius of the domain route.
pub const DOMAIN_RHO: f64 = 1.0 / 1600.0;

/// Outer radius cap of the doubled annuli in the local variant.
pub const LOCAL_OUTER_CAP: f64 = 1.0;

/// Above this size only balls are tried as candidates.
pub const ANNULUS_CANDIDATE_MAX_N: usize = 200;

const BISECTION_STEPS: usize = 48;

/// Success of the greedy run is not monotone in the threshold, so a coarse
/// top-down scan locates a feasible level before bisecting.
const THRESHOLD_LEVELS: usize = 24;

/// {x : r <= d(x, center) < big_r}; the double is {r/2 <= d < 2 big_r}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annulus {
    pub center: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

impl Annulus {
    pub fn new(center: usize, r: f64, big_r: f64) -> Result<Self> {
        if !(r >= 0.0 && big_r > r && big_r.is_finite()) {
            return Err(Error::invalid(format!("need 0 <= r < R < inf, got r = {r}, R = {big_r}")));
        }
        Ok(Annulus { center, r, big_r })
    }

    pub fn contains(&self, d: f64) -> bool {
        self.r <= d && d < self.big_r
    }

    pub fn doubled_contains(&self, d: f64) -> bool {
        0.5 * self.r <= d && d < 2.0 * self.big_r
    }

    pub fn members(&self, space: &MetricMeasureSpace) -> Vec<usize> {
        let row = space.row(self.center);
        (0..space.len()).filter(|&j| self.contains(row[j])).collect()
    }

    pub fn mass(&self, space: &MetricMeasureSpace) -> f64 {
        let row = space.row(self.center);
        (0..space.len()).filter(|&j| self.contains(row[j])).map(|j| space.weight(j)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionKind {
    Annuli,
    SeparatedDomains,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionResult {
    pub kind: DecompositionKind,
    pub k: usize,
    /// Filled for the annuli kind.
    pub annuli: Vec<Annulus>,
    /// Point sets, filled for the domain kind.
    pub domains: Vec<Vec<usize>>,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// k min_i mu(A_i) / mu(X).
    pub achieved_c: f64,
    pub rho: Option<f64>,
    /// Set by the local variant: every 2A_i has outer radius at most this.
    pub outer_cap: Option<f64>,
}

/// Per-center neighbour order with prefix masses.
struct Neighbours {
    n: usize,
    order: Vec<u32>,
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl Neighbours {
    fn new(space: &MetricMeasureSpace) -> Self {
        let n = space.len();
        let per: Vec<(Vec<u32>, Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|c| {
                let row = space.row(c);
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(a.cmp(&b)));
                let sorted: Vec<f64> = idx.iter().map(|&j| row[j as usize]).collect();
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &j in &idx {
                    acc += space.weight(j as usize);
                    prefix.push(acc);
                }
                (idx, sorted, prefix)
            })
            .collect();
        let mut nb = Neighbours {
            n,
            order: Vec::with_capacity(n * n),
            sorted: Vec::with_capacity(n * n),
            prefix: Vec::with_capacity(n * (n + 1)),
        };
        for (o, s, p) in per {
            nb.order.extend(o);
            nb.sorted.extend(s);
            nb.prefix.extend(p);
        }
        nb
    }

    fn sorted(&self, c: usize) -> &[f64] {
        &self.sorted[c * self.n..(c + 1) * self.n]
    }

    fn order(&self, c: usize) -> &[u32] {
        &self.order[c * self.n..(c + 1) * self.n]
    }

    fn prefix(&self, c: usize) -> &[f64] {
        &self.prefix[c * (self.n + 1)..(c + 1) * (self.n + 1)]
    }

    /// Sorted-index range of the points with lo <= d < hi.
    fn range(&self, c: usize, lo: f64, hi: f64) -> (usize, usize) {
        let s = self.sorted(c);
        (s.partition_point(|&d| d < lo), s.partition_point(|&d| d < hi))
    }

    fn mass(&self, c: usize, (a, b): (usize, usize)) -> f64 {
        let p = self.prefix(c);
        if b > a {
            p[b] - p[a]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    annulus: Annulus,
    mass: f64,
    doubled_mass: f64,
    inner: usize,
}

struct Greedy<'a> {
    space: &'a MetricMeasureSpace,
    nb: &'a Neighbours,
    annuli: bool,
    outer_cap: f64,
}

impl Greedy<'_> {
    /// Smallest annulus around `c` starting at sorted index `j` whose mass
    /// reaches `m`, if it exists and respects the outer cap.
    fn minimal(&self, c: usize, j: usize, m: f64) -> Option<Candidate> {
        let s = self.nb.sorted(c);
        let p = self.nb.prefix(c);
        let r = s[j];
        // first end index e with p[e] - p[j] >= m
        let target = p[j] + m;
        let e = j + p[j..].partition_point(|&v| v < target);
        if e > self.nb.n {
            return None;
        }
        let mut e = e.max(j + 1);
        // points at the same distance as the last member come along
        while e < self.nb.n && s[e] == s[e - 1] {
            e += 1;
        }
        let big_r = s[e - 1].next_up();
        if 2.0 * big_r > self.outer_cap {
            return None;
        }
        let annulus = Annulus { center: c, r, big_r };
        let mass = p[e] - p[j];
        let doubled = self.nb.range(c, 0.5 * r, 2.0 * big_r);
        Some(Candidate {
            annulus,
            mass,
            doubled_mass: self.nb.mass(c, doubled),
            inner: j,
        })
    }

    /// Greedy selection of k sets at mass threshold m; None when it gets stuck.
    fn run(&self, k: usize, m: f64) -> Option<Vec<Candidate>> {
        let n = self.nb.n;
        let mut used = vec![false; n];
        let mut nearest_used = vec![f64::INFINITY; n];
        // per center, the number of used points among the first i neighbours
        let mut used_prefix = if self.annuli { vec![0u32; n * (n + 1)] } else { Vec::new() };
        let mut chosen: Vec<Candidate> = Vec::with_capacity(k);
        for _ in 0..k {
            let best = (0..n)
                .into_par_iter()
                .filter_map(|c| {
                    let mut best: Option<Candidate> = None;
                    let inner_max = if self.annuli { n } else { 1 };
                    let s = self.nb.sorted(c);
                    for j in 0..inner_max {
                        // dominant inner radii: the first index of each distance value
                        if j > 0 && s[j] == s[j - 1] {
                            continue;
                        }
                        // later inner radii leave less mass and need a larger R
                        let Some(cand) = self.minimal(c, j, m) else {
                            break;
                        };
                        let ok = if j == 0 {
                            nearest_used[c] >= 2.0 * cand.annulus.big_r
                        } else {
                            let (a, b) = self.nb.range(c, 0.5 * cand.annulus.r, 2.0 * cand.annulus.big_r);
                            let up = &used_prefix[c * (n + 1)..(c + 1) * (n + 1)];
                            up[b] == up[a]
                        };
                        if ok && better(&cand, best.as_ref()) {
                            best = Some(cand);
                        }
                    }
                    best
                })
                .reduce_with(|a, b| if better(&b, Some(&a)) { b } else { a })?;
            let a = best.annulus;
            let row = self.space.row(a.center);
            let fresh: Vec<usize> = (0..n).filter(|&q| !used[q] && a.doubled_contains(row[q])).collect();
            for &q in &fresh {
                used[q] = true;
            }
            nearest_used.par_iter_mut().enumerate().for_each(|(c, v)| {
                let row = self.space.row(c);
                for &q in &fresh {
                    *v = v.min(row[q]);
                }
            });
            if self.annuli {
                used_prefix.par_chunks_mut(n + 1).enumerate().for_each(|(c, up)| {
                    let mut acc = 0;
                    for (i, &q) in self.nb.order(c).iter().enumerate() {
                        acc += u32::from(used[q as usize]);
                        up[i + 1] = acc;
                    }
                });
            }
            chosen.push(best);
        }
        Some(chosen)
    }
}

/// Order: smaller doubled mass, then lower center id, then smaller inner radius.
fn better(a: &Candidate, b: Option<&Candidate>) -> bool {
    match b {
        None => true,
        Some(b) => a
            .doubled_mass
            .total_cmp(&b.doubled_mass)
            .then(a.annulus.center.cmp(&b.annulus.center))
            .then(a.inner.cmp(&b.inner))
            .is_lt(),
    }
}

fn check_k(space: &MetricMeasureSpace, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let positive = space.weights.iter().filter(|&&w| w > 0.0).count();
    if positive < k {
        return Err(Error::DecompositionFailure(format!(
            "only {positive} points carry mass, fewer than k = {k}"
        )));
    }
    let mu = space.total_mass();
    let atom = space.weights.iter().copied().fold(0.0, f64::max);
    if atom > mu / (2.0 * k as f64) {
        return Err(Error::invalid(format!(
            "an atom of weight {atom} exceeds mu(X)/(2k) = {}",
            mu / (2.0 * k as f64)
        )));
    }
    Ok(())
}

fn annuli_result(space: &MetricMeasureSpace, k: usize, chosen: Vec<Candidate>, outer_cap: Option<f64>) -> DecompositionResult {
    let mu = space.total_mass();
    let masses: Vec<f64> = chosen.iter().map(|c| c.mass).collect();
    let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
    DecompositionResult {
        kind: DecompositionKind::Annuli,
        k,
        annuli: chosen.iter().map(|c| c.annulus).collect(),
        domains: Vec::new(),
        masses,
        total_mass: mu,
        achieved_c: k as f64 * min / mu,
        rho: None,
        outer_cap,
    }
}

fn whole_space(space: &MetricMeasureSpace, outer_cap: Option<f64>) -> Option<DecompositionResult> {
    let big_r = space.diameter().next_up();
    if let Some(cap) = outer_cap {
        if 2.0 * big_r > cap {
            return None;
        }
    }
    let mu = space.total_mass();
    Some(DecompositionResult {
        kind: DecompositionKind::Annuli,
        k: 1,
        annuli: vec![Annulus {
            center: 0,
            r: 0.0,
            big_r,
        }],
        domains: Vec::new(),
        masses: vec![mu],
        total_mass: mu,
        achieved_c: 1.0,
        rho: None,
        outer_cap,
    })
}

fn greedy_search(space: &MetricMeasureSpace, k: usize, outer_cap: f64) -> Option<DecompositionResult> {
    let nb = Neighbours::new(space);
    let g = Greedy {
        space,
        nb: &nb,
        annuli: space.len() <= ANNULUS_CANDIDATE_MAX_N,
        outer_cap,
    };
    let mu = space.total_mass();
    let min_w = space.weights.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    let top = mu / k as f64;
    let mut hi = top;
    let mut found = None;
    for i in (1..=THRESHOLD_LEVELS).rev() {
        let m = top * i as f64 / THRESHOLD_LEVELS as f64;
        if m <= min_w {
            break;
        }
        if let Some(f) = g.run(k, m) {
            found = Some(f);
            break;
        }
        hi = m;
    }
    let mut best = match found {
        Some(f) => f,
        None => g.run(k, min_w)?,
    };
    let mut lo = best.iter().map(|c| c.mass).fold(f64::INFINITY, f64::min);
    for _ in 0..BISECTION_STEPS {
        if lo >= hi || hi - lo <= 1e-12 * mu {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match g.run(k, mid) {
            Some(f) => {
                lo = f.iter().map(|c| c.mass).fold(f64::INFINITY, f64::min);
                best = f;
            }
            None => hi = mid,
        }
    }
    let cap = (outer_cap < f64::INFINITY).then_some(outer_cap);
    Some(annuli_result(space, k, best, cap))
}

/// k annuli with pairwise disjoint doubles, each of mass at least
/// achieved_c mu(X) / k, by greedy ball growing under a scanned, then bisected, mass threshold.
pub fn decompose_global(space: &MetricMeasureSpace, k: usize) -> Result<DecompositionResult> {
    check_k(space, k)?;
    if k == 1 {
        return Ok(whole_space(space, None).expect("no cap"));
    }
    greedy_search(space, k, f64::INFINITY)
        .ok_or_else(|| Error::DecompositionFailure(format!("greedy search found no {k} disjoint doubled annuli")))
}

/// Groups of points whose mutual gaps are at least 2 rho, balanced into k
/// bins by mass (largest component first into the lightest bin).
fn separated_domains(space: &MetricMeasureSpace, k: usize, rho: f64) -> Option<DecompositionResult> {
    let n = space.len();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![s];
        comp[s] = id;
        let mut members = Vec::new();
        while let Some(p) = stack.pop() {
            members.push(p);
            let row = space.row(p);
            for q in 0..n {
                if comp[q] == usize::MAX && row[q] < 2.0 * rho {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    if comps.len() < k {
        return None;
    }
    let mass = |set: &[usize]| set.iter().map(|&i| space.weight(i)).sum::<f64>();
    let mut order: Vec<(f64, usize)> = comps.iter().enumerate().map(|(i, c)| (mass(c), i)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut bins: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new()); k];
    for (m, i) in order {
        let (slot, _) = bins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .expect("k >= 1");
        bins[slot].0 += m;
        bins[slot].1.extend_from_slice(&comps[i]);
    }
    let mu = space.total_mass();
    let masses: Vec<f64> = bins.iter().map(|b| b.0).collect();
    let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return None;
    }
    let domains = bins
        .into_iter()
        .map(|(_, mut d)| {
            d.sort_unstable();
            d
        })
        .collect();
    Some(DecompositionResult {
        kind: DecompositionKind::SeparatedDomains,
        k,
        annuli: Vec::new(),
        domains,
        masses,
        total_mass: mu,
        achieved_c: k as f64 * min / mu,
        rho: Some(rho),
        outer_cap: None,
    })
}

/// Either annuli whose doubles have outer radius at most 1, or k domains with
/// disjoint rho-neighbourhoods (rho = 1/1600). When the unconstrained greedy
/// result already fits under the cap it is returned unchanged; otherwise the
/// route with the larger achieved_c wins, annuli on ties.
pub fn decompose_local(space: &MetricMeasureSpace, k: usize) -> Result<DecompositionResult> {
    check_k(space, k)?;
    if 2.0 * space.diameter().next_up() <= LOCAL_OUTER_CAP {
        let mut r = decompose_global(space, k)?;
        r.outer_cap = Some(LOCAL_OUTER_CAP);
        return Ok(r);
    }
    let annuli = if k == 1 {
        whole_space(space, Some(LOCAL_OUTER_CAP)).or_else(|| greedy_search(space, 1, LOCAL_OUTER_CAP))
    } else {
        greedy_search(space, k, LOCAL_OUTER_CAP)
    };
    let domains = separated_domains(space, k, DOMAIN_RHO);
    match (annuli, domains) {
        (Some(a), Some(d)) => Ok(if d.achieved_c > a.achieved_c { d } else { a }),
        (Some(a), None) => Ok(a),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::DecompositionFailure(format!(
            "neither {k} capped annuli nor {k} separated domains were found"
        ))),
    }
}

/// Optimal constant over all annuli, by exhaustive search over the dominant
/// (center, r, R) triples: r at a distance value, R just above one. Meant
/// for small instances (n <= 64 with k <= 2, n <= 24 with k = 3).
#[derive(Debug, Clone, Serialize)]
pub struct ExhaustiveOptimum {
    pub achieved_c: f64,
    pub annuli: Vec<Annulus>,
}

pub fn exhaustive_optimum(space: &MetricMeasureSpace, k: usize) -> Result<ExhaustiveOptimum> {
    let n = space.len();
    if k == 0 || k > 3 || n > 64 || (k == 3 && n > 24) {
        return Err(Error::invalid(format!(
            "exhaustive search needs n <= 64 with k <= 2, or n <= 24 with k = 3; got n = {n}, k = {k}"
        )));
    }
    let nb = Neighbours::new(space);
    // every contiguous block of a neighbour order is an annulus mass
    let mut levels: Vec<f64> = Vec::new();
    for c in 0..n {
        let p = nb.prefix(c);
        for a in 0..n {
            for b in a + 1..=n {
                levels.push(p[b] - p[a]);
            }
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.retain(|&m| m > 0.0);

    let g = Greedy {
        space,
        nb: &nb,
        annuli: true,
        outer_cap: f64::INFINITY,
    };
    let bits = |c: usize, lo: f64, hi: f64| -> u64 {
        let row = space.row(c);
        (0..n).filter(|&q| lo <= row[q] && row[q] < hi).fold(0u64, |acc, q| acc | (1u64 << q))
    };
    let feasible = |m: f64| -> Option<Vec<Annulus>> {
        let mut cands: Vec<(u64, Annulus)> = Vec::new();
        for c in 0..n {
            let s = nb.sorted(c);
            for j in 0..n {
                if j > 0 && s[j] == s[j - 1] {
                    continue;
                }
                if let Some(cand) = g.minimal(c, j, m) {
                    let a = cand.annulus;
                    cands.push((bits(c, 0.5 * a.r, 2.0 * a.big_r), a));
                }
            }
        }
        fn search(cands: &[(u64, Annulus)], from: usize, used: u64, left: usize, acc: &mut Vec<Annulus>) -> bool {
            if left == 0 {
                return true;
            }
            for i in from..cands.len() {
                if cands[i].0 & used == 0 {
                    acc.push(cands[i].1);
                    if search(cands, i + 1, used | cands[i].0, left - 1, acc) {
                        return true;
                    }
                    acc.pop();
                }
            }
            false
        }
        let mut acc = Vec::new();
        search(&cands, 0, 0, k, &mut acc).then_some(acc)
    };
    let (mut lo, mut hi) = (0usize, levels.len());
    let mut best = None;
    // largest feasible level
    while lo < hi {
        let mid = (lo + hi) / 2;
        match feasible(levels[mid]) {
            Some(a) => {
                best = Some((levels[mid], a));
                lo = mid + 1;
            }
            None => hi = mid,
        }
    }
    let (m, annuli) = best.ok_or_else(|| Error::DecompositionFailure("no feasible family of annuli".into()))?;
    Ok(ExhaustiveOptimum {
        achieved_c: k as f64 * m / space.total_mass(),
        annuli,
    })
}
