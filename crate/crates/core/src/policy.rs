//! Behavioral policy profiles, deterministic profiles and product mixtures.
//!
//! A policy of agent `n` stores one distribution over `A^n` per agent view,
//! addressed by the global view index `lattice.view_offset(n, t) + v`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::history::HistoryLattice;
use crate::model::INTERNAL_TOLERANCE;

/// Default cap on the number of enumerated deterministic profiles.
pub const DEFAULT_MAX_PROFILES: u64 = 1_000_000;

/// Per-view action distributions of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl AgentPolicy {
    /// Builds a policy from a flat `views * actions` table.
    pub fn from_probs(num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || probs.len() % num_actions != 0 {
            return Err(Error::InvalidArgument("policy table has the wrong shape".into()));
        }
        for (i, row) in probs.chunks(num_actions).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > INTERNAL_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "view {i}: not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(AgentPolicy { num_actions, probs })
    }

    pub fn uniform(lattice: &HistoryLattice, n: usize) -> Self {
        let na = lattice.agent_actions(n);
        AgentPolicy {
            num_actions: na,
            probs: vec![1.0 / na as f64; lattice.total_views(n) * na],
        }
    }

    /// Point masses on `actions[view]`.
    pub fn deterministic(num_actions: usize, actions: &[u32]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (v, &a) in actions.iter().enumerate() {
            probs[v * num_actions + a as usize] = 1.0;
        }
        AgentPolicy { num_actions, probs }
    }

    /// Independent uniform-Dirichlet draws at every view.
    pub fn random<R: Rng>(lattice: &HistoryLattice, n: usize, rng: &mut R) -> Self {
        let na = lattice.agent_actions(n);
        let views = lattice.total_views(n);
        let mut probs = Vec::with_capacity(views * na);
        for _ in 0..views {
            let row: Vec<f64> = (0..na).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let sum: f64 = row.iter().sum();
            probs.extend(row.iter().map(|x| x / sum));
        }
        AgentPolicy { num_actions: na, probs }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_views(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    /// Distribution at global view `g`.
    #[inline]
    pub fn dist(&self, g: usize) -> &[f64] {
        &self.probs[g * self.num_actions..(g + 1) * self.num_actions]
    }

    #[inline]
    pub fn prob(&self, g: usize, a: usize) -> f64 {
        self.probs[g * self.num_actions + a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The action of a point-mass view, if every view is a point mass.
    pub fn as_deterministic(&self) -> Option<Vec<u32>> {
        self.probs
            .chunks(self.num_actions)
            .map(|row| row.iter().position(|&p| p == 1.0).map(|a| a as u32))
            .collect()
    }
}

/// A behavioral profile `u = (u^1, .., u^N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    agents: Vec<AgentPolicy>,
}

impl PolicyProfile {
    pub fn new(agents: Vec<AgentPolicy>) -> Self {
        PolicyProfile { agents }
    }

    pub fn uniform(lattice: &HistoryLattice) -> Self {
        PolicyProfile {
            agents: (0..lattice.num_agents()).map(|n| AgentPolicy::uniform(lattice, n)).collect(),
        }
    }

    pub fn random<R: Rng>(lattice: &HistoryLattice, rng: &mut R) -> Self {
        PolicyProfile {
            agents: (0..lattice.num_agents()).map(|n| AgentPolicy::random(lattice, n, rng)).collect(),
        }
    }

    pub fn agents(&self) -> &[AgentPolicy] {
        &self.agents
    }

    pub fn agent(&self, n: usize) -> &AgentPolicy {
        &self.agents[n]
    }

    pub fn agent_mut(&mut self, n: usize) -> &mut AgentPolicy {
        &mut self.agents[n]
    }

    pub fn set_agent(&mut self, n: usize, policy: AgentPolicy) {
        self.agents[n] = policy;
    }

    /// Checks that every agent has one distribution per lattice view.
    pub fn check_lattice(&self, lattice: &HistoryLattice) -> Result<()> {
        let ok = self.agents.len() == lattice.num_agents()
            && self.agents.iter().enumerate().all(|(n, p)| {
                p.num_actions == lattice.agent_actions(n) && p.num_views() == lattice.total_views(n)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::LatticeMismatch("policy does not match the history lattice".into()))
        }
    }

    /// `prod_n u^n(a^n | view of h)` for joint history `h` at time `t`.
    pub fn joint_action_prob(&self, lattice: &HistoryLattice, t: usize, h: usize, a: usize) -> f64 {
        let mut rest = a;
        let mut prob = 1.0;
        for n in (0..self.agents.len()).rev() {
            let na = lattice.agent_actions(n);
            let an = rest % na;
            rest /= na;
            let g = lattice.view_offset(n, t) + lattice.view(t, h, n);
            prob *= self.agents[n].prob(g, an);
        }
        prob
    }

    /// Writes the joint action distribution at `(t, h)` into `out`; the
    /// factor of agent `skip`, if any, is replaced by 1.
    pub(crate) fn joint_dist(
        &self,
        lattice: &HistoryLattice,
        t: usize,
        h: usize,
        skip: Option<usize>,
        out: &mut [f64],
    ) {
        out[0] = 1.0;
        let mut len = 1;
        // agent 1 is most significant, so fold agents in order
        for (n, p) in self.agents.iter().enumerate() {
            let na = p.num_actions;
            let d = p.dist(lattice.view_offset(n, t) + lattice.view(t, h, n));
            for i in (0..len).rev() {
                let base = out[i];
                for an in (0..na).rev() {
                    out[i * na + an] = if skip == Some(n) { base } else { base * d[an] };
                }
            }
            len *= na;
        }
    }
}

/// One action per view for every agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicProfile {
    pub actions: Vec<Vec<u32>>,
}

impl DeterministicProfile {
    pub fn to_profile(&self, lattice: &HistoryLattice) -> PolicyProfile {
        PolicyProfile::new(
            self.actions
                .iter()
                .enumerate()
                .map(|(n, acts)| AgentPolicy::deterministic(lattice.agent_actions(n), acts))
                .collect(),
        )
    }
}

/// Number of deterministic policies of agent `n`, as a float.
pub fn count_agent_deterministic(lattice: &HistoryLattice, n: usize) -> f64 {
    (lattice.agent_actions(n) as f64).powi(lattice.total_views(n) as i32)
}

/// Enumerates every deterministic policy of agent `n` in lexicographic order.
pub fn enumerate_agent_deterministic(
    lattice: &HistoryLattice,
    n: usize,
    cap: u64,
) -> Result<impl Iterator<Item = Vec<u32>>> {
    let count = count_agent_deterministic(lattice, n);
    if count > cap as f64 {
        return Err(Error::EnumerationCap { what: "deterministic policy", count, cap });
    }
    Ok(Odometer::new(vec![lattice.agent_actions(n) as u32; lattice.total_views(n)]))
}

/// Enumerates every deterministic profile in lexicographic order of the
/// agent-major concatenation of per-view actions.
pub fn enumerate_deterministic(
    lattice: &HistoryLattice,
    cap: u64,
) -> Result<impl Iterator<Item = DeterministicProfile>> {
    let count: f64 = (0..lattice.num_agents()).map(|n| count_agent_deterministic(lattice, n)).product();
    if count > cap as f64 {
        return Err(Error::EnumerationCap { what: "deterministic profile", count, cap });
    }
    let sizes: Vec<usize> = (0..lattice.num_agents()).map(|n| lattice.total_views(n)).collect();
    let radix: Vec<u32> = (0..lattice.num_agents())
        .flat_map(|n| std::iter::repeat(lattice.agent_actions(n) as u32).take(sizes[n]))
        .collect();
    Ok(Odometer::new(radix).map(move |flat| {
        let mut actions = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &len in &sizes {
            actions.push(flat[start..start + len].to_vec());
            start += len;
        }
        DeterministicProfile { actions }
    }))
}

struct Odometer {
    radix: Vec<u32>,
    next: Option<Vec<u32>>,
}

impl Odometer {
    fn new(radix: Vec<u32>) -> Self {
        let next = Some(vec![0; radix.len()]);
        Odometer { radix, next }
    }
}

impl Iterator for Odometer {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < self.radix[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

/// Finite-support product mixture: agent `n` draws policy `j` with weight `w^n_j`.
#[derive(Debug, Clone)]
pub struct ProductMixture {
    components: Vec<Vec<(f64, AgentPolicy)>>,
}

impl ProductMixture {
    pub fn new(components: Vec<Vec<(f64, AgentPolicy)>>) -> Result<Self> {
        for (n, comp) in components.iter().enumerate() {
            if comp.is_empty() {
                return Err(Error::InvalidArgument(format!("agent {} has an empty mixture", n + 1)));
            }
            let sum: f64 = comp.iter().map(|c| c.0).sum();
            if comp.iter().any(|c| !(c.0 >= 0.0)) || (sum - 1.0).abs() > INTERNAL_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "agent {} mixture weights sum to {sum}",
                    n + 1
                )));
            }
            let shape = (comp[0].1.num_actions, comp[0].1.num_views());
            if comp.iter().any(|c| (c.1.num_actions, c.1.num_views()) != shape) {
                return Err(Error::LatticeMismatch("mixture policies differ in shape".into()));
            }
        }
        Ok(ProductMixture { components })
    }

    pub fn components(&self) -> &[Vec<(f64, AgentPolicy)>] {
        &self.components
    }

    pub fn num_agents(&self) -> usize {
        self.components.len()
    }

    /// Every joint support combination with its product weight.
    pub fn support(&self) -> Vec<(f64, PolicyProfile)> {
        let mut out = vec![(1.0, Vec::new())];
        for comp in &self.components {
            let mut next = Vec::with_capacity(out.len() * comp.len());
            for (w, agents) in &out {
                for (wj, p) in comp {
                    let mut a: Vec<AgentPolicy> = agents.clone();
                    a.push(p.clone());
                    next.push((w * wj, a));
                }
            }
            out = next;
        }
        out.into_iter().map(|(w, a)| (w, PolicyProfile::new(a))).collect()
    }
}

/// Behavioral replica of a product mixture via agent-local posterior weights.
///
/// At view `v` of agent `n` the output is `sum_j w_j W_j(v) u_j(.|v) / sum_j w_j W_j(v)`
/// with `W_j(v)` the probability that policy `j` plays the own actions recorded in `v`;
/// views with zero normalizer get the uniform distribution.
pub fn replicate_mixture(mu: &ProductMixture, lattice: &HistoryLattice) -> Result<PolicyProfile> {
    if mu.num_agents() != lattice.num_agents() {
        return Err(Error::LatticeMismatch("mixture does not match the lattice".into()));
    }
    let mut agents = Vec::with_capacity(mu.num_agents());
    for (n, comp) in mu.components.iter().enumerate() {
        let na = lattice.agent_actions(n);
        let views = lattice.total_views(n);
        if comp.iter().any(|c| c.1.num_actions != na || c.1.num_views() != views) {
            return Err(Error::LatticeMismatch("mixture does not match the lattice".into()));
        }
        // weight[j][g] = w_j * W_j(view g)
        let mut weight = vec![vec![0.0; views]; comp.len()];
        let mut probs = vec![0.0; views * na];
        for t in 1..=lattice.horizon() {
            let off = lattice.view_offset(n, t);
            for v in 0..lattice.num_views(n, t) {
                let g = off + v;
                for (j, (w, p)) in comp.iter().enumerate() {
                    weight[j][g] = match lattice.view_parent(n, t, v) {
                        None => *w,
                        Some((pv, a)) => {
                            let pg = lattice.view_offset(n, t - 1) + pv;
                            weight[j][pg] * p.prob(pg, a)
                        }
                    };
                }
                let norm: f64 = (0..comp.len()).map(|j| weight[j][g]).sum();
                let row = &mut probs[g * na..(g + 1) * na];
                let mut active = (0..comp.len()).filter(|&j| weight[j][g] != 0.0);
                if norm == 0.0 {
                    row.fill(1.0 / na as f64);
                } else if let (Some(j), None) = (active.next(), active.next()) {
                    row.copy_from_slice(comp[j].1.dist(g));
                } else {
                    for (j, (_, p)) in comp.iter().enumerate() {
                        let wj = weight[j][g];
                        if wj != 0.0 {
                            for (r, &q) in row.iter_mut().zip(p.dist(g)) {
                                *r += wj * q;
                            }
                        }
                    }
                    for r in row.iter_mut() {
                        *r /= norm;
                    }
                }
            }
        }
        agents.push(AgentPolicy { num_actions: na, probs });
    }
    Ok(PolicyProfile::new(agents))
}

fn same_shape(u: &PolicyProfile, v: &PolicyProfile) -> Result<()> {
    let ok = u.agents.len() == v.agents.len()
        && u.agents
            .iter()
            .zip(&v.agents)
            .all(|(a, b)| a.num_actions == b.num_actions && a.probs.len() == b.probs.len());
    if ok {
        Ok(())
    } else {
        Err(Error::LatticeMismatch("policies are defined on different lattices".into()))
    }
}

/// `sum_i 2^-i TV(u_i, v_i)` over views ordered by time, then agent, then view index.
pub fn policy_distance(lattice: &HistoryLattice, u: &PolicyProfile, v: &PolicyProfile) -> Result<f64> {
    same_shape(u, v)?;
    u.check_lattice(lattice)?;
    let mut weight = 1.0;
    let mut total = 0.0;
    for t in 1..=lattice.horizon() {
        for n in 0..lattice.num_agents() {
            let off = lattice.view_offset(n, t);
            for k in 0..lattice.num_views(n, t) {
                weight *= 0.5;
                let tv: f64 = u.agents[n]
                    .dist(off + k)
                    .iter()
                    .zip(v.agents[n].dist(off + k))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    / 2.0;
                total += weight * tv;
            }
        }
    }
    Ok(total)
}

/// Per-view convex combination `theta u + (1 - theta) v`.
pub fn mix_toward(u: &PolicyProfile, v: &PolicyProfile, theta: f64) -> Result<PolicyProfile> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta = {theta} outside [0, 1]")));
    }
    same_shape(u, v)?;
    Ok(PolicyProfile::new(
        u.agents
            .iter()
            .zip(&v.agents)
            .map(|(a, b)| AgentPolicy {
                num_actions: a.num_actions,
                probs: if theta == 1.0 {
                    a.probs.clone()
                } else if theta == 0.0 {
                    b.probs.clone()
                } else {
                    a.probs.iter().zip(&b.probs).map(|(x, y)| theta * x + (1.0 - theta) * y).collect()
                },
            })
            .collect(),
    ))
}

/// Text form: one line `n t view : p(a0) p(a1) ..` per agent view, or
/// `n t view -> a` for point masses. Agents are numbered from 1.
pub fn write_policy(lattice: &HistoryLattice, u: &PolicyProfile) -> String {
    let mut out = String::new();
    for n in 0..lattice.num_agents() {
        let p = &u.agents[n];
        for t in 1..=lattice.horizon() {
            let off = lattice.view_offset(n, t);
            for v in 0..lattice.num_views(n, t) {
                let d = p.dist(off + v);
                match d.iter().position(|&x| x == 1.0) {
                    Some(a) => writeln!(out, "{} {} {} -> {}", n + 1, t, v, a).unwrap(),
                    None => {
                        let probs: Vec<String> = d.iter().map(|&x| crate::numfmt::fmt_g17(x)).collect();
                        writeln!(out, "{} {} {} : {}", n + 1, t, v, probs.join(" ")).unwrap()
                    }
                }
            }
        }
    }
    out
}

/// Parses the text form; every view must appear exactly once.
pub fn parse_policy(text: &str, lattice: &HistoryLattice) -> Result<PolicyProfile> {
    let mut tables: Vec<Vec<Option<Vec<f64>>>> =
        (0..lattice.num_agents()).map(|n| vec![None; lattice.total_views(n)]).collect();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |msg: &str| Error::Syntax { line, msg: msg.to_string() };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() < 5 {
            return Err(syntax("expected `n t view : probs` or `n t view -> a`"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| syntax(&format!("bad index `{s}`")));
        let (n, t, v) = (num(tokens[0])?, num(tokens[1])?, num(tokens[2])?);
        if n == 0 || n > lattice.num_agents() || t == 0 || t > lattice.horizon() || v >= lattice.num_views(n - 1, t) {
            return Err(Error::OutOfRange(format!("line {line}: view ({n}, {t}, {v})")));
        }
        let na = lattice.agent_actions(n - 1);
        let row = match tokens[3] {
            "->" => {
                if tokens.len() != 5 {
                    return Err(syntax("expected a single action after `->`"));
                }
                let a = num(tokens[4])?;
                if a >= na {
                    return Err(Error::OutOfRange(format!("line {line}: action {a}")));
                }
                let mut row = vec![0.0; na];
                row[a] = 1.0;
                row
            }
            ":" => {
                let row: Vec<f64> = tokens[4..]
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|_| syntax(&format!("bad probability `{s}`"))))
                    .collect::<Result<_>>()?;
                if row.len() != na {
                    return Err(syntax(&format!("expected {na} probabilities")));
                }
                row
            }
            _ => return Err(syntax("expected `:` or `->`")),
        };
        let g = lattice.view_offset(n - 1, t) + v;
        if tables[n - 1][g].replace(row).is_some() {
            return Err(Error::Duplicate { line, what: format!("view ({n}, {t}, {v})") });
        }
    }
    let mut agents = Vec::new();
    for (n, table) in tables.into_iter().enumerate() {
        let na = lattice.agent_actions(n);
        let mut probs = Vec::with_capacity(table.len() * na);
        for row in table {
            probs.extend(row.ok_or(Error::Missing("policy view"))?);
        }
        let p = AgentPolicy::from_probs(na, probs).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::InvalidArgument(format!("agent {}: {msg}", n + 1)),
            other => other,
        })?;
        agents.push(p);
    }
    Ok(PolicyProfile::new(agents))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::build_lattice;
    use crate::model::{parse_model, random_instance, Dims};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_agent_lattice(horizon: usize) -> HistoryLattice {
        let m = random_instance(3, Dims::default()).unwrap();
        build_lattice(&m, horizon, false).unwrap()
    }

    fn one_agent_one_view() -> HistoryLattice {
        let m = parse_model(
            "agents: 1\ndiscount: 0.5\nstates: s\nobs common: x\nobs 1: y\nactions 1: a b\nconstraints: 0\ndbar:\n\
             init: s x y 1\nT: s a -> s x y 1\nT: s b -> s x y 1\n",
        )
        .unwrap();
        build_lattice(&m, 1, true).unwrap()
    }

    #[test]
    fn uniform_joint_probability() {
        let l = two_agent_lattice(1);
        let u = PolicyProfile::uniform(&l);
        for a in 0..4 {
            assert_eq!(u.joint_action_prob(&l, 1, 0, a), 0.25);
        }
    }

    #[test]
    fn factorized_joint_probability() {
        let l = two_agent_lattice(1);
        let mut u = PolicyProfile::uniform(&l);
        let views = l.total_views(0);
        u.set_agent(0, AgentPolicy::from_probs(2, [0.3, 0.7].repeat(views)).unwrap());
        // a = (a1 = 1, a2 = 0)
        assert!((u.joint_action_prob(&l, 1, 0, 2) - 0.35).abs() < 1e-15);
        let mut out = vec![0.0; 4];
        u.joint_dist(&l, 1, 0, None, &mut out);
        for a in 0..4 {
            assert_eq!(out[a], u.joint_action_prob(&l, 1, 0, a));
        }
    }

    #[test]
    fn deterministic_is_indicator() {
        let l = two_agent_lattice(2);
        let d = enumerate_deterministic(&l, u64::MAX).unwrap().nth(77).unwrap();
        let u = d.to_profile(&l);
        for t in 1..=2 {
            for h in 0..l.num_joint(t) {
                let probs: Vec<f64> = (0..4).map(|a| u.joint_action_prob(&l, t, h, a)).collect();
                assert_eq!(probs.iter().filter(|&&p| p == 1.0).count(), 1);
                assert_eq!(probs.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn enumeration_counts_and_order() {
        let l = one_agent_one_view();
        assert_eq!(enumerate_deterministic(&l, 10).unwrap().count(), 2);
        let l = two_agent_lattice(1);
        let all: Vec<_> = enumerate_deterministic(&l, 100).unwrap().collect();
        assert_eq!(all.len(), 16);
        assert!(all[0].actions.iter().all(|a| a.iter().all(|&x| x == 0)));
        assert_eq!(all[1].actions, vec![vec![0, 0], vec![0, 1]]);
        assert!(matches!(enumerate_deterministic(&l, 15), Err(Error::EnumerationCap { .. })));
    }

    fn always(l: &HistoryLattice, n: usize, a: u32) -> AgentPolicy {
        AgentPolicy::deterministic(l.agent_actions(n), &vec![a; l.total_views(n)])
    }

    #[test]
    fn replication_prior_and_posterior() {
        let l = two_agent_lattice(2);
        let mu = ProductMixture::new(vec![
            vec![(0.5, always(&l, 0, 0)), (0.5, always(&l, 0, 1))],
            vec![(1.0, always(&l, 1, 0))],
        ])
        .unwrap();
        let r = replicate_mixture(&mu, &l).unwrap();
        let a1 = r.agent(0);
        for v in 0..l.num_views(0, 1) {
            assert_eq!(a1.dist(v), &[0.5, 0.5]);
        }
        for v in 0..l.num_views(0, 2) {
            let g = l.view_offset(0, 2) + v;
            let (_, a) = l.view_parent(0, 2, v).unwrap();
            assert_eq!(a1.dist(g), if a == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
        }
    }

    #[test]
    fn replication_uniform_fallback() {
        let l = two_agent_lattice(2);
        let mu = ProductMixture::new(vec![vec![(1.0, always(&l, 0, 0))], vec![(1.0, always(&l, 1, 1))]]).unwrap();
        let r = replicate_mixture(&mu, &l).unwrap();
        for v in 0..l.num_views(1, 2) {
            let g = l.view_offset(1, 2) + v;
            let (_, a) = l.view_parent(1, 2, v).unwrap();
            let expect: &[f64] = if a == 1 { &[0.0, 1.0] } else { &[0.5, 0.5] };
            assert_eq!(r.agent(1).dist(g), expect);
        }
    }

    #[test]
    fn distance_weights() {
        let l = two_agent_lattice(2);
        let u = PolicyProfile::new(vec![always(&l, 0, 0), always(&l, 1, 0)]);
        assert_eq!(policy_distance(&l, &u, &u).unwrap(), 0.0);
        let mut v = u.clone();
        let na = 2;
        let mut probs = v.agent(0).probs().to_vec();
        probs[0] = 0.0;
        probs[1] = 1.0;
        v.set_agent(0, AgentPolicy::from_probs(na, probs).unwrap());
        assert_eq!(policy_distance(&l, &u, &v).unwrap(), 0.5);
    }

    #[test]
    fn mixing_endpoints() {
        let l = two_agent_lattice(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = PolicyProfile::random(&l, &mut rng);
        let v = PolicyProfile::random(&l, &mut rng);
        assert_eq!(mix_toward(&u, &v, 1.0).unwrap(), u);
        assert_eq!(mix_toward(&u, &v, 0.0).unwrap(), v);
        assert!(mix_toward(&u, &v, 1.5).is_err());
        let a = PolicyProfile::new(vec![always(&l, 0, 0), always(&l, 1, 0)]);
        let b = PolicyProfile::new(vec![always(&l, 0, 1), always(&l, 1, 1)]);
        let half = mix_toward(&a, &b, 0.5).unwrap();
        assert_eq!(half, PolicyProfile::uniform(&l));
    }

    #[test]
    fn text_round_trip() {
        let l = two_agent_lattice(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut u = PolicyProfile::random(&l, &mut rng);
        u.set_agent(1, always(&l, 1, 1));
        let text = write_policy(&l, &u);
        assert!(text.contains("2 1 0 -> 1"));
        assert_eq!(parse_policy(&text, &l).unwrap(), u);
        let missing: String = text.lines().skip(1).map(|s| format!("{s}\n")).collect();
        assert!(parse_policy(&missing, &l).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distance_is_a_metric_and_mixing_scales_it(seed in 0u64..100_000, theta in 0.0f64..=1.0) {
            let l = two_agent_lattice(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (u, v, w) = (PolicyProfile::random(&l, &mut rng), PolicyProfile::random(&l, &mut rng), PolicyProfile::random(&l, &mut rng));
            let d = |a: &PolicyProfile, b: &PolicyProfile| policy_distance(&l, a, b).unwrap();
            prop_assert_eq!(d(&u, &u), 0.0);
            prop_assert!((d(&u, &v) - d(&v, &u)).abs() <= 1e-15);
            prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-15);
            prop_assert!(d(&u, &v) <= 1.0);
            let mix = mix_toward(&u, &v, theta).unwrap();
            prop_assert!((d(&mix, &v) - theta * d(&u, &v)).abs() <= 1e-12);
        }

        #[test]
        fn replication_matches_mixture_probabilities(seed in 0u64..100_000) {
            let l = two_agent_lattice(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let components = (0..2)
                .map(|n| {
                    let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.01).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|w| (w / total, AgentPolicy::random(&l, n, &mut rng))).collect()
                })
                .collect();
            let mu = ProductMixture::new(components).unwrap();
            let rep = replicate_mixture(&mu, &l).unwrap();
            let support = mu.support();
            for t in 1..=2 {
                for h in 0..l.num_joint(t) {
                    for a in 0..l.num_joint_actions() {
                        // probability of the action sequence up to t, then a
                        let path = |u: &PolicyProfile| {
                            let mut p = u.joint_action_prob(&l, t, h, a);
                            let (mut tt, mut hh) = (t, h);
                            while let Some((parent, pa, _)) = l.parent(tt, hh) {
                                p *= u.joint_action_prob(&l, tt - 1, parent, pa);
                                tt -= 1;
                                hh = parent;
                            }
                            p
                        };
                        let mixed: f64 = support.iter().map(|(w, u)| w * path(u)).sum();
                        prop_assert!((mixed - path(&rep)).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
