//! Estimators for the number of periods in a sampled signal.
//!
//! All of them read the number of periods as a common divisor of how often a
//! diagram point repeats. The exact estimator works on noiseless measures. The
//! ball and cluster estimators tolerate noise up to a scale `τ`. The
//! automatic variant picks `τ` from the most stable range of the cluster
//! count.

use serde::{Deserialize, Serialize};

use crate::diagram::{diagonal_distance, linf, PersistenceMeasure, Point};
use crate::error::{Error, Result};
use crate::persistence::{AnnotatedDiagram, PersistencePoint};
use crate::signal::Signal;

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// gcd of a multiset, with `gcd(∅) = 1`.
pub fn gcd_all(values: impl IntoIterator<Item = usize>) -> usize {
    match values.into_iter().fold(0, gcd) {
        0 => 1,
        g => g,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Ball,
    Cluster,
    ClusterAuto,
    ZeroCrossings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub n_hat: usize,
    pub method: Method,
    pub tau_used: Option<f64>,
    pub interval_lo: Option<f64>,
    pub interval_hi: Option<f64>,
}

impl EstimatorReport {
    pub fn plain(n_hat: usize, method: Method, tau_used: Option<f64>) -> Self {
        Self {
            n_hat,
            method,
            tau_used,
            interval_lo: None,
            interval_hi: None,
        }
    }
}

/// gcd of the multiplicities.
pub fn n_exact(m: &PersistenceMeasure) -> usize {
    gcd_all(m.multiplicities().iter().copied())
}

fn coords(d: &AnnotatedDiagram) -> Vec<Point> {
    d.points.iter().map(PersistencePoint::coords).collect()
}

/// gcd of open-ball counts `#{q : ‖q − p‖∞ < τ}` over centres `p` with
/// persistence above `2τ`. Low-persistence points still count as members.
pub fn n_hat_ball(d: &AnnotatedDiagram, tau: f64) -> usize {
    let pts = coords(d);
    gcd_all(
        pts.iter()
            .filter(|&&p| p.1 - p.0 > 2.0 * tau)
            .map(|&p| pts.iter().filter(|&&q| linf(p, q) < tau).count()),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Indices into the diagram's points.
    pub members: Vec<usize>,
    /// Whether the cluster contains the diagonal.
    pub diagonal: bool,
}

/// Edge weight between nodes of the diagram-plus-diagonal graph; node `n` is
/// the diagonal.
fn weight(pts: &[Point], i: usize, j: usize) -> f64 {
    let n = pts.len();
    match (i == n, j == n) {
        (false, false) => linf(pts[i], pts[j]),
        (true, false) => diagonal_distance(pts[j]),
        (false, true) => diagonal_distance(pts[i]),
        (true, true) => 0.0,
    }
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Connected components of the graph on the diagram points plus one diagonal
/// node, keeping edges shorter than `tau`. Clusters are ordered by their first
/// member; a cluster holding only the diagonal has no members.
pub fn single_linkage_partition(d: &AnnotatedDiagram, tau: f64) -> Vec<Cluster> {
    let pts = coords(d);
    let n = pts.len();
    let mut parent: Vec<usize> = (0..=n).collect();
    for i in 0..=n {
        for j in 0..i {
            if weight(&pts, i, j) < tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let diag_root = find(&mut parent, n);
    let mut clusters: Vec<(usize, Cluster)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match clusters.iter_mut().find(|(root, _)| *root == r) {
            Some((_, c)) => c.members.push(i),
            None => clusters.push((
                r,
                Cluster {
                    members: vec![i],
                    diagonal: r == diag_root,
                },
            )),
        }
    }
    let mut out: Vec<Cluster> = clusters.into_iter().map(|(_, c)| c).collect();
    if !out.iter().any(|c| c.diagonal) {
        out.push(Cluster {
            members: Vec::new(),
            diagonal: true,
        });
    }
    out
}

/// gcd of the sizes of clusters that avoid the diagonal.
pub fn n_hat_cluster(d: &AnnotatedDiagram, tau: f64) -> usize {
    gcd_all(
        single_linkage_partition(d, tau)
            .iter()
            .filter(|c| !c.diagonal)
            .map(|c| c.members.len()),
    )
}

/// The cluster count as a step function of `τ`.
///
/// `values[0]` holds on `(0, breakpoints[0]]`, `values[i]` on
/// `(breakpoints[i-1], breakpoints[i]]` and the last value beyond the last
/// breakpoint. Adjacent steps always differ.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterScan {
    pub breakpoints: Vec<f64>,
    pub values: Vec<usize>,
    /// Half the signal range; no merge happens above it.
    pub domain_max: f64,
}

impl ClusterScan {
    pub fn value_at(&self, tau: f64) -> usize {
        self.values[self.breakpoints.partition_point(|&b| b < tau)]
    }

    /// `(lo, hi, value)` steps clipped to `[0, domain_max]`.
    pub fn intervals(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut lo = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let hi = self.breakpoints.get(i).copied().unwrap_or(self.domain_max).min(self.domain_max);
            if hi > lo {
                out.push((lo, hi, v));
            }
            lo = hi.max(lo);
        }
        out
    }
}

/// Minimum spanning tree (Prim, dense) of the diagram-plus-diagonal graph,
/// returned as `(weight, u, v)` sorted by weight.
fn spanning_tree(pts: &[Point]) -> Vec<(f64, usize, usize)> {
    let nodes = pts.len() + 1;
    let mut in_tree = vec![false; nodes];
    let mut best = vec![f64::INFINITY; nodes];
    let mut from = vec![0usize; nodes];
    let mut edges = Vec::with_capacity(nodes - 1);
    let mut current = nodes - 1;
    in_tree[current] = true;
    for _ in 1..nodes {
        let mut pick = usize::MAX;
        for v in 0..nodes {
            if in_tree[v] {
                continue;
            }
            let w = weight(pts, current, v);
            if w < best[v] {
                best[v] = w;
                from[v] = current;
            }
            if pick == usize::MAX || best[v] < best[pick] {
                pick = v;
            }
        }
        in_tree[pick] = true;
        edges.push((best[pick], from[pick], pick));
        current = pick;
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    edges
}

/// Tracks component sizes while merging, and the gcd of sizes of components
/// that do not contain the diagonal.
fn cluster_gcd(parent: &mut [usize], size: &[usize], diag: usize) -> usize {
    let diag_root = find(parent, diag);
    let mut roots: Vec<usize> = (0..diag).map(|i| find(parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    gcd_all(roots.into_iter().filter(|&r| r != diag_root).map(|r| size[r]))
}

/// The full step function of [`n_hat_cluster`], computed from one spanning
/// tree.
pub fn scan_h(d: &AnnotatedDiagram) -> ClusterScan {
    let pts = coords(d);
    let n = pts.len();
    let domain_max = if n == 0 { 0.0 } else { d.half_range() };
    let edges = spanning_tree(&pts);

    let mut parent: Vec<usize> = (0..=n).collect();
    // size counts diagram points only; the diagonal node weighs nothing
    let mut size: Vec<usize> = (0..=n).map(|i| usize::from(i < n)).collect();
    let mut breakpoints = Vec::new();
    let mut values = vec![cluster_gcd(&mut parent, &size, n)];
    let mut k = 0;
    while k < edges.len() {
        let w = edges[k].0;
        while k < edges.len() && edges[k].0 == w {
            let (_, u, v) = edges[k];
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[b] = a;
                size[a] += size[b];
            }
            k += 1;
        }
        let h = cluster_gcd(&mut parent, &size, n);
        if h == *values.last().unwrap() {
            continue;
        }
        breakpoints.push(w);
        values.push(h);
    }
    ClusterScan {
        breakpoints,
        values,
        domain_max,
    }
}

/// Picks the value `n > 1` whose longest constant step of `h` is longest
/// (ties go to the larger `n`) and reports the midpoint of that step as `τ`.
/// Falls back to `1` when `h` never exceeds 1.
pub fn n_hat_auto(d: &AnnotatedDiagram) -> EstimatorReport {
    let scan = scan_h(d);
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for (lo, hi, v) in scan.intervals() {
        if v <= 1 {
            continue;
        }
        let len = hi - lo;
        let better = match best {
            None => true,
            Some((blen, bn, _, _)) => len > blen || (len == blen && v > bn),
        };
        if better {
            best = Some((len, v, lo, hi));
        }
    }
    match best {
        Some((_, n, lo, hi)) => EstimatorReport {
            n_hat: n,
            method: Method::ClusterAuto,
            tau_used: Some(0.5 * (lo + hi)),
            interval_lo: Some(lo),
            interval_hi: Some(hi),
        },
        None => EstimatorReport::plain(1, Method::ClusterAuto, None),
    }
}

/// Sign changes between consecutive samples. A zero takes the sign of the
/// sample before it; leading zeros are skipped.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let mut prev: Option<bool> = None;
    let mut count = 0;
    for &v in values {
        let sign = if v > 0.0 {
            Some(true)
        } else if v < 0.0 {
            Some(false)
        } else {
            prev
        };
        if let (Some(p), Some(s)) = (prev, sign) {
            if p != s {
                count += 1;
            }
        }
        prev = sign;
    }
    count
}

/// Zero crossings divided by the number expected per period, rounded, and at
/// least 1.
pub fn zero_crossings_estimate(s: &Signal, crossings_per_period: usize) -> Result<usize> {
    if crossings_per_period < 2 || crossings_per_period % 2 != 0 {
        return Err(Error::Domain(format!(
            "crossings per period must be even and at least 2, got {crossings_per_period}"
        )));
    }
    let count = count_sign_changes(s.values());
    Ok(((count as f64 / crossings_per_period as f64).round() as usize).max(1))
}
