//! Persistence measures and distances between diagrams.
//!
//! Points live in the `(birth, death)` half-plane with the L∞ norm. The
//! distance from a point to the diagonal is half its persistence, so "within
//! τ of the diagonal" and "persistence at most 2τ" are the same condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::{AnnotatedDiagram, PersistencePoint};
use crate::signal::Signal;

/// Largest diagram handled by [`bottleneck`].
pub const BOTTLENECK_LIMIT: usize = 500;

pub type Point = (f64, f64);

pub fn linf(p: Point, q: Point) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

pub fn diagonal_distance(p: Point) -> f64 {
    (p.1 - p.0) / 2.0
}

/// A diagram as a finitely supported counting measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MeasureEntry>", into = "Vec<MeasureEntry>")]
pub struct PersistenceMeasure {
    support: Vec<Point>,
    multiplicities: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct MeasureEntry {
    birth: f64,
    death: f64,
    multiplicity: usize,
}

impl TryFrom<Vec<MeasureEntry>> for PersistenceMeasure {
    type Error = Error;

    fn try_from(entries: Vec<MeasureEntry>) -> Result<Self> {
        Self::new(
            entries.iter().map(|e| (e.birth, e.death)).collect(),
            entries.iter().map(|e| e.multiplicity).collect(),
        )
    }
}

impl From<PersistenceMeasure> for Vec<MeasureEntry> {
    fn from(m: PersistenceMeasure) -> Self {
        m.iter()
            .map(|((birth, death), multiplicity)| MeasureEntry {
                birth,
                death,
                multiplicity,
            })
            .collect()
    }
}

impl PersistenceMeasure {
    pub fn new(support: Vec<Point>, multiplicities: Vec<usize>) -> Result<Self> {
        if support.len() != multiplicities.len() {
            return Err(Error::Shape {
                expected: support.len(),
                got: multiplicities.len(),
            });
        }
        if multiplicities.contains(&0) {
            return Err(Error::Domain("multiplicities must be positive".into()));
        }
        if support.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::Domain("support points must be finite".into()));
        }
        for (i, p) in support.iter().enumerate() {
            if support[..i].contains(p) {
                return Err(Error::Domain(format!("support point {p:?} is repeated")));
            }
        }
        Ok(Self {
            support,
            multiplicities,
        })
    }

    /// Measure of a list of points, grouping exact duplicates.
    pub fn from_points(points: &[Point]) -> Self {
        group(points, 0.0)
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, usize)> + '_ {
        self.support.iter().copied().zip(self.multiplicities.iter().copied())
    }

    pub fn total_mass(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Multiplicity of an exact support point, 0 if absent.
    pub fn multiplicity_of(&self, p: Point) -> usize {
        self.iter().find(|(q, _)| *q == p).map_or(0, |(_, k)| k)
    }

    /// Each support point repeated by its multiplicity.
    pub fn expand(&self) -> Vec<Point> {
        self.iter()
            .flat_map(|(p, k)| std::iter::repeat_n(p, k))
            .collect()
    }

    /// Every multiplicity multiplied by `n`.
    pub fn scaled(&self, n: usize) -> Self {
        Self {
            support: self.support.clone(),
            multiplicities: self.multiplicities.iter().map(|k| k * n).collect(),
        }
    }
}

/// The band `Δ_τ` of points with persistence at most `2τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalBand {
    pub tau: f64,
}

impl DiagonalBand {
    pub fn contains(&self, p: Point) -> bool {
        p.1 - p.0 <= 2.0 * self.tau
    }
}

fn group(points: &[Point], tol: f64) -> PersistenceMeasure {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for i in 0..n {
        for j in 0..i {
            if linf(points[i], points[j]) <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Point>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(points[i]),
            None => groups.push((r, vec![points[i]])),
        }
    }
    let mut entries: Vec<(Point, usize)> = groups
        .into_iter()
        .map(|(_, members)| {
            let k = members.len();
            let centre = if members.iter().all(|p| *p == members[0]) {
                members[0]
            } else {
                let b = members.iter().map(|p| p.0).sum::<f64>() / k as f64;
                let d = members.iter().map(|p| p.1).sum::<f64>() / k as f64;
                (b, d)
            };
            (centre, k)
        })
        .collect();
    entries.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
    // averaging distinct groups can in principle land on the same point
    let mut support: Vec<Point> = Vec::with_capacity(entries.len());
    let mut multiplicities: Vec<usize> = Vec::with_capacity(entries.len());
    for (p, k) in entries {
        if support.last() == Some(&p) {
            *multiplicities.last_mut().unwrap() += k;
        } else {
            support.push(p);
            multiplicities.push(k);
        }
    }
    PersistenceMeasure {
        support,
        multiplicities,
    }
}

/// Groups points closer than `merge_tol` (single linkage, L∞) and replaces each
/// group by its mean. `merge_tol = 0` groups exact duplicates only.
pub fn to_measure(d: &AnnotatedDiagram, merge_tol: f64) -> PersistenceMeasure {
    let points: Vec<Point> = d.points.iter().map(PersistencePoint::coords).collect();
    group(&points, merge_tol.max(0.0))
}

/// Smallest distance between distinct support points or from a support point
/// to the diagonal.
pub fn separation_delta(m: &PersistenceMeasure) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Domain("separation of an empty measure".into()));
    }
    let s = m.support();
    let mut delta = f64::INFINITY;
    for (i, &p) in s.iter().enumerate() {
        delta = delta.min(diagonal_distance(p));
        for &q in &s[..i] {
            delta = delta.min(linf(p, q));
        }
    }
    Ok(delta)
}

/// Mass of the open L∞ ball of radius `tau` around `p`.
pub fn count_ball(m: &PersistenceMeasure, p: Point, tau: f64) -> usize {
    m.iter().filter(|(q, _)| linf(*q, p) < tau).map(|(_, k)| k).sum()
}

/// `Σ pers(p) / 2`, the 1-Wasserstein distance to the empty diagram.
pub fn total_persistence(m: &PersistenceMeasure) -> f64 {
    m.iter().map(|(p, k)| k as f64 * diagonal_distance(p)).sum()
}

/// Divides every multiplicity by `n`.
pub fn divide_measure(m: &PersistenceMeasure, n: usize) -> Result<PersistenceMeasure> {
    if n == 0 {
        return Err(Error::Domain("cannot divide a measure by 0".into()));
    }
    if let Some((p, k)) = m.iter().find(|(_, k)| k % n != 0) {
        return Err(Error::Domain(format!(
            "multiplicity {k} of {p:?} is not divisible by {n}"
        )));
    }
    Ok(PersistenceMeasure {
        support: m.support.clone(),
        multiplicities: m.multiplicities.iter().map(|k| k / n).collect(),
    })
}

/// Exact bottleneck distance between two annotated diagrams.
pub fn bottleneck(a: &AnnotatedDiagram, b: &AnnotatedDiagram) -> Result<f64> {
    let pa: Vec<Point> = a.points.iter().map(PersistencePoint::coords).collect();
    let pb: Vec<Point> = b.points.iter().map(PersistencePoint::coords).collect();
    bottleneck_points(&pa, &pb)
}

/// Exact bottleneck distance between two finite point sets. The answer is one
/// of the pairwise or point-to-diagonal distances, found by binary search with
/// a perfect-matching feasibility test.
pub fn bottleneck_points(a: &[Point], b: &[Point]) -> Result<f64> {
    for size in [a.len(), b.len()] {
        if size > BOTTLENECK_LIMIT {
            return Err(Error::Capacity {
                size,
                limit: BOTTLENECK_LIMIT,
            });
        }
    }
    let mut candidates = vec![0.0];
    candidates.extend(a.iter().chain(b).map(|&p| diagonal_distance(p)));
    for &p in a {
        candidates.extend(b.iter().map(|&q| linf(p, q)));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_within(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Hopcroft–Karp on `A ∪ Δ(B)` versus `B ∪ Δ(A)`, where `Δ(x)` is the
/// diagonal projection of `x`. Diagonal copies match each other freely.
fn perfect_matching_within(a: &[Point], b: &[Point], t: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    // left u < n is a[u], otherwise the diagonal copy of b[u - n];
    // right v < m is b[v], otherwise the diagonal copy of a[v - m]
    let adjacent = |u: usize, v: usize| match (u < n, v < m) {
        (true, true) => linf(a[u], b[v]) <= t,
        (true, false) => v - m == u && diagonal_distance(a[u]) <= t,
        (false, true) => u - n == v && diagonal_distance(b[v]) <= t,
        (false, false) => true,
    };
    let adj: Vec<Vec<usize>> = (0..size)
        .map(|u| (0..size).filter(|&v| adjacent(u, v)).collect())
        .collect();

    const FREE: usize = usize::MAX;
    let mut match_l = vec![FREE; size];
    let mut match_r = vec![FREE; size];
    let mut dist = vec![0usize; size];
    let mut matched = 0;
    loop {
        // layered BFS from free left vertices
        let mut queue: Vec<usize> = Vec::with_capacity(size);
        for u in 0..size {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; size];
        for u in 0..size {
            if match_l[u] == FREE && augment(u, &adj, &mut match_l, &mut match_r, &mut dist, &mut next) {
                matched += 1;
            }
        }
    }
    matched == size
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    while next[u] < adj[u].len() {
        let v = adj[u][next[u]];
        next[u] += 1;
        let w = match_r[v];
        if w == usize::MAX
            || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist, next))
        {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

/// One period of a piecewise-linear zigzag whose circle diagram is `m`.
///
/// With the most persistent point `(b₀, d₀)` first and the others sorted by
/// increasing birth then decreasing death, the knot values are
/// `d₀, b₀, d₁, b₁, …, d₀`. Each `b_k` merges into its left neighbour at `d_k`,
/// which reproduces the point `(b_k, d_k)`.
pub fn realize_diagram(m: &PersistenceMeasure) -> Result<Signal> {
    if m.is_empty() {
        return Err(Error::Precondition("cannot realize an empty measure".into()));
    }
    let points = m.expand();
    let top = points
        .iter()
        .map(|&p| p.1 - p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let leaders: Vec<Point> = points.iter().copied().filter(|p| p.1 - p.0 == top).collect();
    if leaders.len() > 1 {
        return Err(Error::Precondition(format!(
            "{} points share the largest persistence {top}",
            leaders.len()
        )));
    }
    let (b0, d0) = leaders[0];
    for &(b, d) in &points {
        if !(d > b) {
            return Err(Error::Precondition(format!("point ({b}, {d}) is not above the diagonal")));
        }
        if b < b0 || d > d0 {
            return Err(Error::Precondition(format!(
                "point ({b}, {d}) lies outside [{b0}, {d0}]²"
            )));
        }
    }
    let mut rest: Vec<Point> = points.into_iter().filter(|&p| p != (b0, d0)).collect();
    rest.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.total_cmp(&p.1)));

    let mut values = vec![d0, b0];
    for (b, d) in rest {
        values.push(d);
        values.push(b);
    }
    let knots = values.len();
    values.push(d0);

    let mut spacing = vec![1.0 / knots as f64; knots];
    if knots > 2 && smallest_cyclic_period(&values[..knots]) < knots {
        spacing[0] = 1.1 / knots as f64;
        let share = (1.0 - spacing[0]) / (knots - 1) as f64;
        spacing[1..].fill(share);
    }
    let mut times = Vec::with_capacity(knots + 1);
    let mut t = 0.0;
    times.push(t);
    for h in &spacing[..knots - 1] {
        t += h;
        times.push(t);
    }
    times.push(1.0);
    Signal::new(times, values)
}

fn smallest_cyclic_period(v: &[f64]) -> usize {
    let n = v.len();
    (1..=n)
        .find(|&p| n % p == 0 && (0..n).all(|i| v[i] == v[(i + p) % n]))
        .unwrap_or(n)
}
