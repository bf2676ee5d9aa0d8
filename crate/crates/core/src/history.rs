//! Eagerly enumerated joint and per-agent histories up to a horizon.
//!
//! A joint history at time `t` is `h_t = (o_{1:t}, a_{1:t-1})`. Agent `n`
//! sees the view `(o0_{1:t}, on_{1:t}, an_{1:t-1})`. Both are stored level by
//! level in canonical order: lexicographic in the observation sequence, then
//! in the action sequence. For views the observation sequence is the
//! sequence of `(common, private)` pairs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Model;

/// Default cap on the total number of joint histories.
pub const DEFAULT_MAX_HISTORIES: u64 = 10_000_000;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct JointLevel {
    parent: Vec<u32>,
    action: Vec<u32>,
    obs: Vec<u32>,
    /// `len * N` agent-view indices.
    projection: Vec<u32>,
    /// `len * |A| * |O|` child indices at `t + 1`; empty on the last level.
    children: Vec<u32>,
}

impl JointLevel {
    fn len(&self) -> usize {
        self.obs.len()
    }
}

#[derive(Debug, Clone)]
struct ViewLevel {
    parent: Vec<u32>,
    action: Vec<u32>,
    common: Vec<u32>,
    private: Vec<u32>,
    /// CSR over `(view, own action)`; empty on the last level.
    child_start: Vec<u32>,
    child_list: Vec<u32>,
}

impl ViewLevel {
    fn len(&self) -> usize {
        self.common.len()
    }
}

/// Joint histories `H_1..H_T` and agent views with parent and projection links.
#[derive(Debug, Clone)]
pub struct HistoryLattice {
    horizon: usize,
    num_states: usize,
    num_obs: usize,
    num_actions: usize,
    agent_actions: Vec<usize>,
    agent_obs: Vec<usize>,
    levels: Vec<JointLevel>,
    views: Vec<Vec<ViewLevel>>,
    view_offset: Vec<Vec<usize>>,
}

/// Candidate child during construction.
struct Candidate {
    parent: u32,
    action: u32,
    obs: u32,
    support: Vec<u64>,
}

fn bit(words: &[u64], i: usize) -> bool {
    words[i / 64] >> (i % 64) & 1 == 1
}

fn set_bit(words: &mut [u64], i: usize) {
    words[i / 64] |= 1 << (i % 64);
}

/// Dense ranks of `keys` (equal keys share a rank, ranks follow key order).
fn dense_rank<K: Ord + Copy>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

/// Builds the lattice with the default history cap.
pub fn build_lattice(m: &Model, horizon: usize, prune_unreachable: bool) -> Result<HistoryLattice> {
    build_lattice_with_cap(m, horizon, prune_unreachable, DEFAULT_MAX_HISTORIES)
}

/// Builds the lattice, failing once the total history count exceeds `cap`.
///
/// With pruning, a history is kept only if its observation sequence has
/// positive probability given its action sequence.
pub fn build_lattice_with_cap(
    m: &Model,
    horizon: usize,
    prune_unreachable: bool,
    cap: u64,
) -> Result<HistoryLattice> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let n_agents = m.num_agents();
    let ns = m.num_states();
    let n_obs = m.num_joint_obs();
    let n_act = m.num_joint_actions();
    let words = ns.div_ceil(64);
    let agent_actions: Vec<usize> = (0..n_agents).map(|n| m.num_actions(n)).collect();
    let agent_obs: Vec<usize> = (0..n_agents).map(|n| m.num_private_obs(n)).collect();

    let mut total: u128 = 0;

    // level 1
    let mut candidates = Vec::new();
    for o in 0..n_obs {
        let mut support = vec![0u64; words];
        for s in 0..ns {
            if m.initial(s, o) > 0.0 {
                set_bit(&mut support, s);
            }
        }
        if prune_unreachable && support.iter().all(|&w| w == 0) {
            continue;
        }
        candidates.push(Candidate { parent: NONE, action: NONE, obs: o as u32, support });
    }
    total += candidates.len() as u128;
    if total > cap as u128 {
        return Err(Error::HistoryCap { t: 1, count: total, cap });
    }

    let mut levels: Vec<JointLevel> = Vec::with_capacity(horizon);
    let mut views: Vec<Vec<ViewLevel>> = vec![Vec::with_capacity(horizon); n_agents];
    // ranks of the current level's observation / action sequences
    let mut obs_rank: Vec<u32> = candidates.iter().map(|c| c.obs).collect();
    let mut act_rank: Vec<u32> = vec![0; candidates.len()];
    let mut view_obs_rank: Vec<Vec<u32>> = vec![Vec::new(); n_agents];
    let mut view_act_rank: Vec<Vec<u32>> = vec![Vec::new(); n_agents];

    let mut supports: Vec<Vec<u64>> = candidates.iter().map(|c| c.support.clone()).collect();
    let mut current = JointLevel {
        parent: vec![NONE; candidates.len()],
        action: vec![NONE; candidates.len()],
        obs: candidates.iter().map(|c| c.obs).collect(),
        projection: Vec::new(),
        children: Vec::new(),
    };

    for t in 1..=horizon {
        // agent views of the current level
        let len = current.len();
        let mut projection = vec![0u32; len * n_agents];
        for n in 0..n_agents {
            let n_priv = agent_obs[n] as u64;
            // key: (parent view obs rank, obs pair, parent view act rank, own action)
            let keys: Vec<(u32, u64, u32, u32, u32)> = (0..len)
                .map(|h| {
                    let o = current.obs[h] as usize;
                    let pair = m.obs_component(o, 0) as u64 * n_priv + m.obs_component(o, n + 1) as u64;
                    if t == 1 {
                        (0, pair, 0, 0, NONE)
                    } else {
                        let parent = current.parent[h] as usize;
                        let pv = levels[t - 2].projection[parent * n_agents + n];
                        let a = m.action_component(current.action[h] as usize, n) as u32;
                        (
                            view_obs_rank[n][pv as usize],
                            pair,
                            view_act_rank[n][pv as usize],
                            a,
                            pv,
                        )
                    }
                })
                .collect();
            let mut unique = keys.clone();
            unique.sort_unstable();
            unique.dedup();
            for h in 0..len {
                projection[h * n_agents + n] = unique.binary_search(&keys[h]).unwrap() as u32;
            }
            let level = ViewLevel {
                parent: unique.iter().map(|k| k.4).collect(),
                action: unique.iter().map(|k| if t == 1 { NONE } else { k.3 }).collect(),
                common: unique.iter().map(|k| (k.1 / n_priv) as u32).collect(),
                private: unique.iter().map(|k| (k.1 % n_priv) as u32).collect(),
                child_start: Vec::new(),
                child_list: Vec::new(),
            };
            let obs_keys: Vec<(u32, u64)> = unique.iter().map(|k| (k.0, k.1)).collect();
            let act_keys: Vec<(u32, u32)> = unique.iter().map(|k| (k.2, k.3)).collect();
            view_obs_rank[n] = dense_rank(&obs_keys);
            view_act_rank[n] = if t == 1 { vec![0; unique.len()] } else { dense_rank(&act_keys) };

            if t > 1 {
                // children CSR on the previous view level
                let prev = &mut views[n][t - 2];
                let na = agent_actions[n];
                let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); prev.len() * na];
                for (v, k) in unique.iter().enumerate() {
                    buckets[k.4 as usize * na + k.3 as usize].push(v as u32);
                }
                prev.child_start = Vec::with_capacity(buckets.len() + 1);
                prev.child_start.push(0);
                for b in &buckets {
                    prev.child_list.extend_from_slice(b);
                    prev.child_start.push(prev.child_list.len() as u32);
                }
            }
            views[n].push(level);
        }
        current.projection = projection;

        if t == horizon {
            levels.push(current);
            break;
        }

        // expand
        let mut next = Vec::new();
        let mut level_count: u128 = 0;
        for h in 0..len {
            for a in 0..n_act {
                let mut by_obs: Vec<Option<Vec<u64>>> = vec![None; n_obs];
                for s in 0..ns {
                    if !bit(&supports[h], s) {
                        continue;
                    }
                    for tr in m.transition_row(s, a) {
                        let slot = by_obs[tr.obs].get_or_insert_with(|| vec![0u64; words]);
                        set_bit(slot, tr.next_state);
                    }
                }
                for (o, support) in by_obs.into_iter().enumerate() {
                    let support = match (support, prune_unreachable) {
                        (Some(s), _) => s,
                        (None, false) => vec![0u64; words],
                        (None, true) => continue,
                    };
                    next.push(Candidate { parent: h as u32, action: a as u32, obs: o as u32, support });
                    level_count += 1;
                    if total + level_count > cap as u128 {
                        let full = if prune_unreachable {
                            total + level_count
                        } else {
                            total + (len * n_act * n_obs) as u128
                        };
                        return Err(Error::HistoryCap { t: t + 1, count: full, cap });
                    }
                }
            }
        }
        total += level_count;

        let keys: Vec<(u32, u32, u32, u32)> = next
            .iter()
            .map(|c| (obs_rank[c.parent as usize], c.obs, act_rank[c.parent as usize], c.action))
            .collect();
        let mut order: Vec<usize> = (0..next.len()).collect();
        order.sort_unstable_by_key(|&i| keys[i]);

        let mut children = vec![NONE; len * n_act * n_obs];
        for (new_idx, &i) in order.iter().enumerate() {
            let c = &next[i];
            children[(c.parent as usize * n_act + c.action as usize) * n_obs + c.obs as usize] =
                new_idx as u32;
        }
        current.children = children;
        levels.push(current);

        let sorted_keys: Vec<(u32, u32, u32, u32)> = order.iter().map(|&i| keys[i]).collect();
        obs_rank = dense_rank(&sorted_keys.iter().map(|k| (k.0, k.1)).collect::<Vec<_>>());
        act_rank = dense_rank(&sorted_keys.iter().map(|k| (k.2, k.3)).collect::<Vec<_>>());
        let mut next_sorted: Vec<Option<Candidate>> = next.into_iter().map(Some).collect();
        let mut parent = Vec::with_capacity(order.len());
        let mut action = Vec::with_capacity(order.len());
        let mut obs = Vec::with_capacity(order.len());
        supports = Vec::with_capacity(order.len());
        for &i in &order {
            let c = next_sorted[i].take().unwrap();
            parent.push(c.parent);
            action.push(c.action);
            obs.push(c.obs);
            supports.push(c.support);
        }
        current = JointLevel { parent, action, obs, projection: Vec::new(), children: Vec::new() };
    }

    let view_offset = views
        .iter()
        .map(|per_t| {
            let mut acc = 0;
            let mut offs = Vec::with_capacity(per_t.len() + 1);
            for v in per_t {
                offs.push(acc);
                acc += v.len();
            }
            offs.push(acc);
            offs
        })
        .collect();

    Ok(HistoryLattice {
        horizon,
        num_states: ns,
        num_obs: n_obs,
        num_actions: n_act,
        agent_actions,
        agent_obs,
        levels,
        views,
        view_offset,
    })
}

impl HistoryLattice {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_agents(&self) -> usize {
        self.agent_actions.len()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_joint_obs(&self) -> usize {
        self.num_obs
    }

    /// Action count of agent `n`.
    pub fn agent_actions(&self, n: usize) -> usize {
        self.agent_actions[n]
    }

    /// Number of joint histories at time `t` (1-based).
    pub fn num_joint(&self, t: usize) -> usize {
        self.levels[t - 1].len()
    }

    pub fn total_joint(&self) -> usize {
        self.levels.iter().map(JointLevel::len).sum()
    }

    /// Number of views of agent `n` at time `t`.
    pub fn num_views(&self, n: usize, t: usize) -> usize {
        self.views[n][t - 1].len()
    }

    /// Views of agent `n` over all times.
    pub fn total_views(&self, n: usize) -> usize {
        self.view_offset[n][self.horizon]
    }

    /// Global index of the first view of agent `n` at time `t`.
    pub fn view_offset(&self, n: usize, t: usize) -> usize {
        self.view_offset[n][t - 1]
    }

    /// Checks that the lattice was built from a model with matching spaces.
    pub fn check_model(&self, m: &Model) -> Result<()> {
        let same = m.num_states() == self.num_states
            && m.num_joint_obs() == self.num_obs
            && m.num_joint_actions() == self.num_actions
            && m.num_agents() == self.num_agents()
            && (0..self.num_agents()).all(|n| {
                m.num_actions(n) == self.agent_actions[n] && m.num_private_obs(n) == self.agent_obs[n]
            });
        if same {
            Ok(())
        } else {
            Err(Error::LatticeMismatch("lattice was built for a different model".into()))
        }
    }

    fn check_joint(&self, t: usize, h: usize) -> Result<()> {
        if t == 0 || t > self.horizon || h >= self.num_joint(t) {
            return Err(Error::OutOfRange(format!("joint history ({t}, {h})")));
        }
        Ok(())
    }

    /// Agent-view index (within level `t`) of joint history `h` for agent `n`.
    pub fn agent_view(&self, t: usize, h: usize, n: usize) -> Result<usize> {
        self.check_joint(t, h)?;
        if n >= self.num_agents() {
            return Err(Error::OutOfRange(format!("agent {n}")));
        }
        Ok(self.view(t, h, n))
    }

    #[inline]
    pub(crate) fn view(&self, t: usize, h: usize, n: usize) -> usize {
        self.levels[t - 1].projection[h * self.num_agents() + n] as usize
    }

    /// `(parent index, joint action at t-1, joint observation at t)`; `None` at `t = 1`.
    pub fn parent(&self, t: usize, h: usize) -> Option<(usize, usize, usize)> {
        if t <= 1 {
            return None;
        }
        let l = &self.levels[t - 1];
        Some((l.parent[h] as usize, l.action[h] as usize, l.obs[h] as usize))
    }

    /// Joint observation received at time `t` by history `h`.
    pub fn last_obs(&self, t: usize, h: usize) -> usize {
        self.levels[t - 1].obs[h] as usize
    }

    /// Child `(h, a, o)` at `t + 1`, if present.
    #[inline]
    pub fn child(&self, t: usize, h: usize, a: usize, o: usize) -> Option<usize> {
        let c = self.levels[t - 1].children[(h * self.num_actions + a) * self.num_obs + o];
        (c != NONE).then_some(c as usize)
    }

    pub fn obs_seq(&self, t: usize, h: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(t);
        let (mut t, mut h) = (t, h);
        loop {
            out.push(self.last_obs(t, h));
            match self.parent(t, h) {
                Some((p, _, _)) => {
                    h = p;
                    t -= 1;
                }
                None => break,
            }
        }
        out.reverse();
        out
    }

    pub fn action_seq(&self, t: usize, h: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(t);
        let (mut t, mut h) = (t, h);
        while let Some((p, a, _)) = self.parent(t, h) {
            out.push(a);
            h = p;
            t -= 1;
        }
        out.reverse();
        out
    }

    /// `(parent view, own action at t-1)` of view `v` of agent `n` at `t`.
    pub fn view_parent(&self, n: usize, t: usize, v: usize) -> Option<(usize, usize)> {
        if t <= 1 {
            return None;
        }
        let l = &self.views[n][t - 1];
        Some((l.parent[v] as usize, l.action[v] as usize))
    }

    /// Views at `t + 1` reached from view `v` by own action `a`.
    pub fn view_children(&self, n: usize, t: usize, v: usize, a: usize) -> &[u32] {
        let l = &self.views[n][t - 1];
        if l.child_start.is_empty() {
            return &[];
        }
        let i = v * self.agent_actions[n] + a;
        &l.child_list[l.child_start[i] as usize..l.child_start[i + 1] as usize]
    }

    /// `(common, private)` observation at time `t` of view `v`.
    pub fn view_obs(&self, n: usize, t: usize, v: usize) -> (usize, usize) {
        let l = &self.views[n][t - 1];
        (l.common[v] as usize, l.private[v] as usize)
    }

    /// One line per joint history: `t idx | o-seq | a-seq | parent-idx`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in 1..=self.horizon {
            for h in 0..self.num_joint(t) {
                let join = |v: Vec<usize>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                let parent = match self.parent(t, h) {
                    Some((p, _, _)) => p.to_string(),
                    None => "-".to_string(),
                };
                writeln!(
                    out,
                    "{} {} | {} | {} | {}",
                    t,
                    h,
                    join(self.obs_seq(t, h)),
                    join(self.action_seq(t, h)),
                    parent
                )
                .unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, random_instance, Dims};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn chain(n_obs: usize, n_act: usize) -> Model {
        let obs: Vec<String> = (0..n_obs).map(|i| format!("y{i}")).collect();
        let acts: Vec<String> = (0..n_act).map(|i| format!("a{i}")).collect();
        let mut text = format!(
            "agents: 1\ndiscount: 0.5\nstates: s\nobs common: x\nobs 1: {}\nactions 1: {}\nconstraints: 0\ndbar:\n",
            obs.join(" "),
            acts.join(" ")
        );
        let p = 1.0 / n_obs as f64;
        for o in &obs {
            text += &format!("init: s x {o} {p}\n");
        }
        for a in &acts {
            for o in &obs {
                text += &format!("T: s {a} -> s x {o} {p}\n");
            }
        }
        parse_model(&text).unwrap()
    }

    #[test]
    fn degenerate_counts() {
        let l = build_lattice(&chain(1, 1), 3, true).unwrap();
        for t in 1..=3 {
            assert_eq!(l.num_joint(t), 1);
            assert_eq!(l.num_views(0, t), 1);
        }
        assert_eq!(l.total_views(0), 3);
    }

    #[test]
    fn product_counts() {
        let l = build_lattice(&chain(2, 2), 2, false).unwrap();
        assert_eq!(l.num_joint(1), 2);
        assert_eq!(l.num_joint(2), 8);
    }

    #[test]
    fn canonical_order_is_observations_then_actions() {
        let l = build_lattice(&chain(2, 2), 3, false).unwrap();
        for t in 1..=3 {
            let keys: Vec<(Vec<usize>, Vec<usize>)> =
                (0..l.num_joint(t)).map(|h| (l.obs_seq(t, h), l.action_seq(t, h))).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            assert_eq!(keys, sorted);
        }
    }

    #[test]
    fn single_agent_views_biject_with_histories() {
        let l = build_lattice(&chain(2, 2), 3, false).unwrap();
        for t in 1..=3 {
            assert_eq!(l.num_views(0, t), l.num_joint(t));
            for h in 0..l.num_joint(t) {
                assert_eq!(l.agent_view(t, h, 0).unwrap(), h);
            }
        }
    }

    #[test]
    fn cap_reports_level() {
        match build_lattice_with_cap(&chain(2, 2), 4, false, 20) {
            Err(Error::HistoryCap { t, count, .. }) => {
                assert_eq!(t, 3);
                assert_eq!(count, 2 + 8 + 32);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_view() {
        let l = build_lattice(&chain(1, 1), 2, true).unwrap();
        assert!(matches!(l.agent_view(3, 0, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(l.agent_view(1, 5, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(l.agent_view(1, 0, 1), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn dump_has_one_line_per_history() {
        let l = build_lattice(&chain(2, 2), 2, false).unwrap();
        let dump = l.dump();
        assert_eq!(dump.lines().count(), 10);
        assert!(dump.starts_with("1 0 | 0 |  | -"));
    }

    fn switch() -> Model {
        let path = format!("{}/fixtures/switch.dcpomdp", env!("CARGO_MANIFEST_DIR"));
        parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn switch_pruning() {
        let m = switch();
        let pruned = build_lattice(&m, 3, true).unwrap();
        assert_eq!((1..=3).map(|t| pruned.num_joint(t)).collect::<Vec<_>>(), vec![1, 4, 20]);
        let full = build_lattice(&m, 3, false).unwrap();
        assert_eq!((1..=3).map(|t| full.num_joint(t)).collect::<Vec<_>>(), vec![2, 16, 128]);
        // agent 2 sees the lamp, so its view reveals the joint history
        assert_eq!(pruned.num_views(1, 2), 4);
    }

    #[test]
    fn blind_agent_view_ignores_other_action() {
        let m = switch();
        let l = build_lattice(&m, 2, true).unwrap();
        assert_eq!(l.num_views(0, 2), 2);
        for h in 0..l.num_joint(2) {
            for k in 0..l.num_joint(2) {
                let (a, b) = (l.action_seq(2, h)[0], l.action_seq(2, k)[0]);
                let same = m.action_component(a, 0) == m.action_component(b, 0);
                assert_eq!(l.agent_view(2, h, 0).unwrap() == l.agent_view(2, k, 0).unwrap(), same);
            }
        }
    }

    fn projection(m: &Model, l: &HistoryLattice, t: usize, h: usize, n: usize) -> (Vec<(usize, usize)>, Vec<usize>) {
        let obs = l.obs_seq(t, h).iter().map(|&o| (m.obs_component(o, 0), m.obs_component(o, n + 1))).collect();
        let acts = l.action_seq(t, h).iter().map(|&a| m.action_component(a, n)).collect();
        (obs, acts)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lattice_structure(seed in 0u64..10_000, agents in 1usize..=2, common in 1usize..=2, private in 1usize..=2, actions in 1usize..=2, prune: bool) {
            let dims = Dims { agents, common_obs: common, private_obs: private, actions, ..Dims::default() };
            let m = random_instance(seed, dims).unwrap();
            let l = build_lattice(&m, 3, prune).unwrap();
            let (no, na) = (m.num_joint_obs(), m.num_joint_actions());
            for t in 1..=3 {
                if !prune {
                    prop_assert_eq!(l.num_joint(t), no.pow(t as u32) * na.pow(t as u32 - 1));
                }
                for h in 0..l.num_joint(t) {
                    if t > 1 {
                        let (p, a, o) = l.parent(t, h).unwrap();
                        prop_assert_eq!(l.child(t - 1, p, a, o), Some(h));
                        prop_assert_eq!(&l.obs_seq(t, h)[..t - 1], &l.obs_seq(t - 1, p)[..]);
                        prop_assert_eq!(&l.action_seq(t, h)[..t - 2], &l.action_seq(t - 1, p)[..]);
                    } else {
                        prop_assert!(l.parent(t, h).is_none());
                    }
                }
                for n in 0..agents {
                    let mut by_proj = HashMap::new();
                    let mut by_view = HashMap::new();
                    for h in 0..l.num_joint(t) {
                        let (proj, v) = (projection(&m, &l, t, h, n), l.agent_view(t, h, n).unwrap());
                        prop_assert_eq!(*by_proj.entry(proj.clone()).or_insert(v), v);
                        prop_assert_eq!(by_view.entry(v).or_insert(proj.clone()), &proj);
                    }
                    prop_assert_eq!(by_view.len(), l.num_views(n, t));
                }
            }
        }
    }
}
