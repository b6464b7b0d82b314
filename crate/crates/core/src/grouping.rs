//! LiDAL-assisted user grouping.
//!
//! Users are homed on their nearest AP, split per AP into a low-error and a
//! high-error class by their CRLB, paired near-far across classes, and each
//! group is finally handed to the AP, among those every member can reach,
//! with the lowest average location error bound. Ties go to the lowest AP
//! index, then the lowest user id.

use rayon::prelude::*;

use crate::crlb::crlb_with_mono;
use crate::scenario::{Point2, Scenario};

/// Reachable APs of one user, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub aps: Vec<(usize, f64)>,
}

impl CandidateSet {
    pub fn nearest(&self) -> usize {
        self.aps[0].0
    }

    pub fn contains(&self, k: usize) -> bool {
        self.aps.iter().any(|&(a, _)| a == k)
    }
}

/// APs whose projection lies within the footprint radius; the nearest is always kept.
pub fn candidate_aps(scn: &Scenario, xy: Point2) -> CandidateSet {
    let r = scn.footprint_radius();
    let all = scn.aps_by_distance(xy);
    let mut aps: Vec<(usize, f64)> = all.iter().copied().filter(|&(_, d)| d <= r + 1e-12).collect();
    if aps.is_empty() {
        aps.push(all[0]);
    }
    CandidateSet { aps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    I,
    II,
}

impl Class {
    pub fn name(self) -> &'static str {
        match self {
            Class::I => "I",
            Class::II => "II",
        }
    }
}

/// Median split on the error bound: lower half (Class I) gets ⌈n/2⌉ users.
pub fn split_classes(users: &[usize], b_l: impl Fn(usize) -> f64) -> (Vec<usize>, Vec<usize>) {
    let mut v: Vec<usize> = users.to_vec();
    v.sort_by(|&a, &b| b_l(a).total_cmp(&b_l(b)).then(a.cmp(&b)));
    let cut = v.len().div_ceil(2);
    let hi = v.split_off(cut);
    (v, hi)
}

/// Near-far pairing of two classes already sorted by ascending access distance:
/// the j-th nearest of `a` goes with the j-th farthest of `b`. Users left over
/// become singletons.
pub fn pair_users(a: &[usize], b: &[usize]) -> Vec<Vec<usize>> {
    let n = a.len().min(b.len());
    let mut out: Vec<Vec<usize>> = (0..n).map(|j| vec![a[j], b[b.len() - 1 - j]]).collect();
    out.extend(a[n..].iter().map(|&u| vec![u]));
    out.extend(b[..b.len() - n].iter().map(|&u| vec![u]));
    out
}

/// Merge groups pairwise, near-far again, until groups reach `size` members.
fn grow_groups(mut groups: Vec<Vec<usize>>, size: usize, lam: &impl Fn(usize) -> f64) -> Vec<Vec<usize>> {
    let key = |g: &Vec<usize>| g.iter().map(|&u| lam(u)).fold(f64::INFINITY, f64::min);
    while groups.iter().map(Vec::len).max().unwrap_or(0) * 2 <= size {
        let (full, mut small): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| g.len() * 2 > size);
        if small.len() < 2 {
            groups = full.into_iter().chain(small).collect();
            break;
        }
        small.sort_by(|x, y| key(x).total_cmp(&key(y)).then(x[0].cmp(&y[0])));
        let n = small.len();
        let mut merged = Vec::with_capacity(n.div_ceil(2));
        for j in 0..n / 2 {
            let mut g = small[j].clone();
            g.extend_from_slice(&small[n - 1 - j]);
            merged.push(g);
        }
        if n % 2 == 1 {
            merged.push(small[n / 2].clone());
        }
        groups = full.into_iter().chain(merged).collect();
    }
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: usize,
    pub ap: usize,
    /// Members in ascending access distance to `ap` (NOMA decoding order).
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub groups: Vec<Group>,
    /// Per user: group index, position in its group, class, and error bound at its AP.
    pub user_group: Vec<usize>,
    pub user_order: Vec<usize>,
    pub user_class: Vec<Class>,
    pub user_b_l: Vec<f64>,
    pub candidates: Vec<CandidateSet>,
}

impl GroupAssignment {
    pub fn assigned_ap(&self, user: usize) -> usize {
        self.groups[self.user_group[user]].ap
    }

    /// Fraction of users served by each AP.
    pub fn shares(&self, ap_count: usize) -> Vec<f64> {
        let mut c = vec![0usize; ap_count];
        for g in &self.groups {
            c[g.ap] += g.members.len();
        }
        let n = self.user_group.len().max(1) as f64;
        c.into_iter().map(|x| x as f64 / n).collect()
    }
}

/// Error bound of every user with each of its candidate APs as monostatic receiver.
pub fn error_bounds(scn: &Scenario, users: &[Point2], candidates: &[CandidateSet]) -> Vec<Vec<f64>> {
    users
        .par_iter()
        .zip(candidates)
        .map(|(&xy, cs)| {
            let mut row = vec![f64::INFINITY; scn.ap_count()];
            for &(k, _) in &cs.aps {
                row[k] = crlb_with_mono(scn, xy, k).map(|r| r.b_l).unwrap_or(f64::INFINITY);
            }
            row
        })
        .collect()
}

/// Run the full grouping over `users` with groups of up to `group_size`.
pub fn assign_groups(scn: &Scenario, users: &[Point2], group_size: usize) -> GroupAssignment {
    let candidates: Vec<CandidateSet> = users.iter().map(|&xy| candidate_aps(scn, xy)).collect();
    let b_l = error_bounds(scn, users, &candidates);
    assign_groups_with(scn, users, group_size, candidates, &b_l)
}

/// As [`assign_groups`] with precomputed candidate sets and error bounds.
#[allow(clippy::needless_range_loop)]
pub fn assign_groups_with(
    scn: &Scenario,
    users: &[Point2],
    group_size: usize,
    candidates: Vec<CandidateSet>,
    b_l: &[Vec<f64>],
) -> GroupAssignment {
    let n = users.len();
    let access = |u: usize, k: usize| (scn.ap(k) - scn.user_point(users[u])).norm();
    let mut user_class = vec![Class::I; n];
    let mut raw_groups: Vec<Vec<usize>> = Vec::new();

    for k in 0..scn.ap_count() {
        let homed: Vec<usize> = (0..n).filter(|&u| candidates[u].nearest() == k).collect();
        if homed.is_empty() {
            continue;
        }
        let (mut c1, mut c2) = split_classes(&homed, |u| b_l[u][k]);
        for &u in &c2 {
            user_class[u] = Class::II;
        }
        let by_access = |x: &usize, y: &usize| access(*x, k).total_cmp(&access(*y, k)).then(x.cmp(y));
        c1.sort_by(by_access);
        c2.sort_by(by_access);
        let pairs = if group_size >= 2 { pair_users(&c1, &c2) } else { homed.iter().map(|&u| vec![u]).collect() };
        raw_groups.extend(grow_groups(pairs, group_size, &|u| access(u, k)));
    }

    let mut assigned = vec![false; n];
    let mut groups = Vec::with_capacity(raw_groups.len());
    let mut user_group = vec![usize::MAX; n];
    let mut user_order = vec![0; n];
    let mut user_b_l = vec![f64::NAN; n];
    for members in raw_groups {
        // first assignment wins
        let members: Vec<usize> = members.into_iter().filter(|&u| !assigned[u]).collect();
        if members.is_empty() {
            continue;
        }
        let ap = (0..scn.ap_count())
            .filter(|&k| members.iter().all(|&u| candidates[u].contains(k)))
            .map(|k| (k, members.iter().map(|&u| b_l[u][k]).sum::<f64>() / members.len() as f64))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(k, _)| k)
            .expect("members share their home AP");
        let mut members = members;
        members.sort_by(|&x, &y| access(x, ap).total_cmp(&access(y, ap)).then(x.cmp(&y)));
        let gid = groups.len();
        for (order, &u) in members.iter().enumerate() {
            assigned[u] = true;
            user_group[u] = gid;
            user_order[u] = order;
            user_b_l[u] = b_l[u][ap];
        }
        groups.push(Group { id: gid, ap, members });
    }
    debug_assert!(assigned.iter().all(|&a| a));
    GroupAssignment { groups, user_group, user_order, user_class, user_b_l, candidates }
}
