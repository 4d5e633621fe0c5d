//! 0-dimensional sublevel-set persistence of piecewise-linear signals.
//!
//! Local minima are swept in increasing `(value, index)` order with a
//! union-find whose roots are always the elder minimum of their component.
//! At a local maximum the two flanking components merge and the younger one
//! dies. The global minimum never dies and is paired with the maximum value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// A diagram point tied to the sample index of the minimum that created it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
    pub birth_index: usize,
}

impl PersistencePoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// L∞ distance to the diagonal.
    pub fn diagonal_distance(&self) -> f64 {
        self.persistence() / 2.0
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.birth, self.death)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDiagram {
    pub points: Vec<PersistencePoint>,
    pub domain_kind: DomainKind,
    /// `birth_index` of the essential class.
    pub essential_index: usize,
}

impl AnnotatedDiagram {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn essential(&self) -> &PersistencePoint {
        self.points
            .iter()
            .find(|p| p.birth_index == self.essential_index)
            .expect("the essential point is always present")
    }

    /// `(birth, death)` pairs sorted lexicographically.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.points.iter().map(PersistencePoint::coords).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pairs
    }

    /// Half the range of the signal: the diagonal distance of the essential
    /// point and an upper bound for every other diagonal distance.
    pub fn half_range(&self) -> f64 {
        self.essential().diagonal_distance()
    }

    /// Total persistence `Σ pers(p) / 2`, the 1-Wasserstein distance to the
    /// empty diagram.
    pub fn total_persistence(&self) -> f64 {
        self.points.iter().map(PersistencePoint::diagonal_distance).sum()
    }
}

struct Forest {
    parent: Vec<usize>,
}

impl Forest {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
}

/// Runs of equal consecutive values collapsed to their first sample.
fn collapse_plateaus(values: &[f64], index_of: impl Fn(usize) -> usize) -> (Vec<f64>, Vec<usize>) {
    let mut vals = Vec::with_capacity(values.len());
    let mut idx = Vec::with_capacity(values.len());
    for (k, &v) in values.iter().enumerate() {
        if vals.last() != Some(&v) {
            vals.push(v);
            idx.push(index_of(k));
        }
    }
    (vals, idx)
}

/// Elder-rule sweep on a path (`cyclic = false`) or a cycle. Returns points in
/// collapsed coordinates `(birth_pos, death_value)`; the essential class is
/// returned separately.
fn sweep(vals: &[f64], cyclic: bool) -> (Vec<(usize, f64)>, usize) {
    let n = vals.len();
    let key = |i: usize| (vals[i], i);
    let elder = |a: usize, b: usize| {
        if vals[a].total_cmp(&vals[b]).then(a.cmp(&b)).is_le() {
            a
        } else {
            b
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(a).0.total_cmp(&key(b).0).then(a.cmp(&b)));

    let mut forest = Forest::new(n);
    let mut seen = vec![false; n];
    let mut deaths = Vec::new();
    for &i in &order {
        seen[i] = true;
        let mut nbrs = [None, None];
        if i > 0 {
            nbrs[0] = Some(i - 1);
        } else if cyclic && n > 1 {
            nbrs[0] = Some(n - 1);
        }
        if i + 1 < n {
            nbrs[1] = Some(i + 1);
        } else if cyclic && n > 1 {
            nbrs[1] = Some(0);
        }
        let mut roots: Vec<usize> = nbrs
            .iter()
            .flatten()
            .filter(|&&j| seen[j] && j != i)
            .map(|&j| forest.find(j))
            .collect();
        roots.dedup();
        match roots[..] {
            [] => {}
            [r] => forest.parent[i] = r,
            [a, b] => {
                let old = elder(a, b);
                let young = if old == a { b } else { a };
                deaths.push((young, vals[i]));
                forest.parent[young] = old;
                forest.parent[i] = old;
            }
            _ => unreachable!("a vertex has at most two neighbours"),
        }
    }
    (deaths, order[0])
}

fn assemble(
    vals: &[f64],
    idx: &[usize],
    deaths: Vec<(usize, f64)>,
    essential: usize,
    max: f64,
    domain_kind: DomainKind,
) -> AnnotatedDiagram {
    let mut points: Vec<PersistencePoint> = deaths
        .into_iter()
        .map(|(pos, death)| PersistencePoint {
            birth: vals[pos],
            death,
            birth_index: idx[pos],
        })
        .collect();
    points.push(PersistencePoint {
        birth: vals[essential],
        death: max,
        birth_index: idx[essential],
    });
    points.sort_by_key(|p| p.birth_index);
    AnnotatedDiagram {
        points,
        domain_kind,
        essential_index: idx[essential],
    }
}

/// Annotated diagram of the signal on its time interval.
pub fn diagram_interval(s: &Signal) -> AnnotatedDiagram {
    let (vals, idx) = collapse_plateaus(s.values(), |k| k);
    let (deaths, essential) = sweep(&vals, false);
    assemble(&vals, &idx, deaths, essential, s.max_value(), DomainKind::Interval)
}

/// Annotated diagram of one period read as a function on the circle. The
/// first and last samples must agree to within `1e-9`; the last is dropped.
pub fn diagram_circle(s: &Signal) -> Result<AnnotatedDiagram> {
    let v = s.values();
    let (first, last) = (v[0], v[v.len() - 1]);
    if (first - last).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "circle diagram needs matching endpoints, got {first} and {last}"
        )));
    }
    let v = &v[..v.len() - 1];
    let n = v.len();
    let start = (0..n)
        .min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)))
        .expect("non-empty");
    let rotated: Vec<f64> = (0..n).map(|k| v[(start + k) % n]).collect();
    let (mut vals, mut idx) = collapse_plateaus(&rotated, |k| (start + k) % n);
    // a plateau wrapping around the end continues the leading one
    if vals.len() > 1 && vals[vals.len() - 1] == vals[0] {
        vals.pop();
        idx.pop();
    }
    let (deaths, essential) = sweep(&vals, true);
    Ok(assemble(&vals, &idx, deaths, essential, s.max_value(), DomainKind::Circle))
}

/// Independent quadratic-time oracle for [`diagram_interval`]: for every
/// critical level, split the sublevel set into runs of consecutive samples,
/// and track which minima are still the `(value, index)`-smallest sample of
/// their run.
pub fn brute_force_diagram(s: &Signal) -> AnnotatedDiagram {
    let v = s.values();
    let n = v.len();
    let mut levels: Vec<f64> = v.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let lex_less = |a: usize, b: usize| v[a] < v[b] || (v[a] == v[b] && a < b);
    let mut alive: Vec<usize> = Vec::new();
    let mut points = Vec::new();
    let mut run_min = vec![usize::MAX; n];
    for &level in &levels {
        // label each sample of the sublevel set with its run's minimum
        let mut j = 0;
        while j < n {
            if v[j] > level {
                run_min[j] = usize::MAX;
                j += 1;
                continue;
            }
            let start = j;
            let mut best = j;
            while j < n && v[j] <= level {
                if lex_less(j, best) {
                    best = j;
                }
                j += 1;
            }
            run_min[start..j].fill(best);
        }
        alive.retain(|&m| {
            let survives = run_min[m] == m;
            if !survives {
                points.push(PersistencePoint {
                    birth: v[m],
                    death: level,
                    birth_index: m,
                });
            }
            survives
        });
        alive.extend((0..n).filter(|&m| v[m] == level && run_min[m] == m));
    }
    debug_assert_eq!(alive.len(), 1);
    let essential = alive[0];
    points.push(PersistencePoint {
        birth: v[essential],
        death: s.max_value(),
        birth_index: essential,
    });
    points.sort_by_key(|p| p.birth_index);
    AnnotatedDiagram {
        points,
        domain_kind: DomainKind::Interval,
        essential_index: essential,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::PeriodicTemplate;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sig(v: &[f64]) -> Signal {
        Signal::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn monotone_signal_has_one_point() {
        let d = diagram_interval(&sig(&[0.0, 1.0]));
        assert_eq!(d.sorted_pairs(), vec![(0.0, 1.0)]);
        assert_eq!(d.essential_index, 0);
        assert_eq!(brute_force_diagram(&sig(&[0.0, 1.0])).sorted_pairs(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn hand_traced_example() {
        let s = sig(&[1.0, 0.0, 2.0, 0.5, 3.0]);
        let d = diagram_interval(&s);
        assert_eq!(d.sorted_pairs(), vec![(0.0, 3.0), (0.5, 2.0)]);
        assert_eq!(d.essential_index, 1);
        assert_eq!(d.points[1].birth_index, 3);
        assert_eq!(brute_force_diagram(&s), d);
    }

    #[test]
    fn plateaus_do_not_create_spurious_points() {
        let d = diagram_interval(&sig(&[2.0, 1.0, 1.0, 0.0]));
        assert_eq!(d.sorted_pairs(), vec![(0.0, 2.0)]);
        let d = diagram_interval(&sig(&[0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(d.sorted_pairs(), vec![(0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(d.essential_index, 0);
        assert_eq!(d.points[1].birth_index, 3);
        let d = diagram_interval(&sig(&[3.0, 3.0]));
        assert_eq!(d.sorted_pairs(), vec![(3.0, 3.0)]);
    }

    #[test]
    fn sine_period_on_the_circle() {
        let values: Vec<f64> = (0..1000).map(|i| (2.0 * PI * i as f64 / 999.0).sin()).collect();
        let mut values = values;
        values[999] = values[0];
        let d = diagram_circle(&Signal::from_values(values).unwrap()).unwrap();
        assert_eq!(d.len(), 1);
        let (b, dd) = d.points[0].coords();
        assert!((b + 1.0).abs() < 1e-4 && (dd - 1.0).abs() < 1e-4);
        assert_eq!(d.domain_kind, DomainKind::Circle);
    }

    #[test]
    fn concatenated_periods_on_the_circle() {
        let f = PeriodicTemplate::from_fn("sine", |x| (2.0 * PI * x).sin());
        let d = diagram_circle(&f.sampled_periods(4, 200)).unwrap();
        assert_eq!(d.len(), 4);
        let one = diagram_circle(&f.sampled_periods(1, 200)).unwrap().sorted_pairs()[0];
        assert!(d.sorted_pairs().iter().all(|p| *p == one));
        assert!((one.0 + 1.0).abs() < 1e-9 && (one.1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn split_family_on_the_circle() {
        let d = PeriodicTemplate::f_r(0.5).circle_diagram(2000);
        let pairs = d.sorted_pairs();
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].0 + 1.5).abs() < 0.01 && (pairs[0].1 - 1.5).abs() < 0.01);
        assert!((pairs[1].0 + 1.0).abs() < 0.01 && (pairs[1].1 - 1.0).abs() < 0.01);

        let d = PeriodicTemplate::f_r(0.0).circle_diagram(2000);
        let pairs = d.sorted_pairs();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0], pairs[1]);
    }

    #[test]
    fn split_family_on_the_interval_sees_the_boundary() {
        // f_r(0) = 0 rises, so the interval version has an extra boundary minimum
        let f = PeriodicTemplate::f_r(0.5);
        let d = diagram_interval(&f.sampled_periods(1, 2000));
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn circle_rejects_open_signals() {
        assert!(matches!(
            diagram_circle(&sig(&[0.0, 1.0, 0.5])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn circle_handles_wrapping_plateau() {
        let d = diagram_circle(&sig(&[0.0, 1.0, 2.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.sorted_pairs(), vec![(0.0, 2.0)]);
        let d = diagram_circle(&sig(&[1.0, 1.0])).unwrap();
        assert_eq!(d.sorted_pairs(), vec![(1.0, 1.0)]);
    }

    #[test]
    fn circle_is_rotation_invariant() {
        let v = [3.0, 0.0, 2.0, 1.0, 4.0, 0.5, 3.0];
        let base = diagram_circle(&sig(&v)).unwrap().sorted_pairs();
        let n = v.len() - 1;
        for shift in 0..n {
            let mut r: Vec<f64> = (0..n).map(|k| v[(k + shift) % n]).collect();
            r.push(r[0]);
            assert_eq!(diagram_circle(&sig(&r)).unwrap().sorted_pairs(), base);
        }
    }

    proptest! {
        #[test]
        fn sweep_matches_brute_force(v in prop::collection::vec(-4i32..5, 2..40)) {
            let s = sig(&v.iter().map(|&x| x as f64 / 2.0).collect::<Vec<_>>());
            prop_assert_eq!(diagram_interval(&s), brute_force_diagram(&s));
        }

        #[test]
        fn structural_invariants(v in prop::collection::vec(-100.0f64..100.0, 2..60)) {
            let s = sig(&v);
            let d = diagram_interval(&s);
            let (lo, hi) = (s.min_value(), s.max_value());
            prop_assert_eq!(d.essential().coords(), (lo, hi));
            prop_assert_eq!(d.points.iter().filter(|p| p.coords() == (lo, hi)).count() >= 1, true);
            for p in &d.points {
                prop_assert!(p.death >= p.birth);
                prop_assert!(p.birth >= lo && p.death <= hi);
                prop_assert_eq!(v[p.birth_index], p.birth);
            }
            // one point per local minimum
            let minima = (0..v.len())
                .filter(|&i| {
                    (i == 0 || v[i - 1] > v[i]) && (i + 1 == v.len() || v[i + 1] > v[i])
                })
                .count();
            prop_assert_eq!(d.len(), minima);
        }
    }
}
