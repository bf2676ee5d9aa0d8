//! Exact forward evaluation of policy profiles on a history lattice.
//!
//! Policies act on the lattice for `t <= H` (the lattice horizon). When costs
//! are requested for an evaluation horizon `T > H`, every agent plays the
//! uniform distribution from `H + 1` on, which makes the continuation a plain
//! Markov chain on states.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::history::HistoryLattice;
use crate::model::{cost_bounds, discounted_tail_bound, Model};
use crate::numfmt::fmt_g17;
use crate::policy::{PolicyProfile, ProductMixture};

/// `xi`, `p` and `z` of a profile, per time step.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    num_states: usize,
    num_actions: usize,
    num_constraints: usize,
    xi: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    stage_d: Vec<Vec<f64>>,
    terminal: Vec<f64>,
}

impl ForwardPass {
    pub fn horizon(&self) -> usize {
        self.xi.len()
    }

    /// `P(S_t = s, H_t = h)`.
    pub fn xi(&self, t: usize, s: usize, h: usize) -> f64 {
        self.xi[t - 1][h * self.num_states + s]
    }

    /// `P(H_t = h, A_t = a)`.
    pub fn p(&self, t: usize, h: usize, a: usize) -> f64 {
        self.p[t - 1][h * self.num_actions + a]
    }

    /// All `p(t, h, a)` at time `t`, indexed `h * |A| + a`.
    pub fn p_level(&self, t: usize) -> &[f64] {
        &self.p[t - 1]
    }

    /// `p(t, h, a) * E[c(S_t, a) | h, a]`.
    pub fn z(&self, t: usize, h: usize, a: usize) -> f64 {
        self.z[t - 1][h * self.num_actions + a]
    }

    /// `P(H_t = h)`.
    pub fn mass(&self, t: usize, h: usize) -> f64 {
        self.xi[t - 1][h * self.num_states..(h + 1) * self.num_states].iter().sum()
    }

    /// Undiscounted expected objective cost at stage `t`.
    pub fn stage_cost(&self, t: usize) -> f64 {
        self.z[t - 1].iter().sum()
    }

    /// Undiscounted expected constraint costs at stage `t`.
    pub fn stage_constraint(&self, t: usize) -> &[f64] {
        &self.stage_d[t - 1]
    }

    /// State distribution at `H + 1`.
    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }
}

/// Runs the recursion `xi[t+1](s', h.(a,o')) = sum_s xi[t](s,h) u(a|h) P(s',o'|s,a)`.
pub fn forward_pass(m: &Model, lattice: &HistoryLattice, u: &PolicyProfile) -> Result<ForwardPass> {
    lattice.check_model(m)?;
    u.check_lattice(lattice)?;
    let ns = m.num_states();
    let na = m.num_joint_actions();
    let k = m.num_constraints();
    let horizon = lattice.horizon();

    let mut xi: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut first = vec![0.0; lattice.num_joint(1) * ns];
    for h in 0..lattice.num_joint(1) {
        let o = lattice.last_obs(1, h);
        for s in 0..ns {
            first[h * ns + s] = m.initial(s, o);
        }
    }
    xi.push(first);

    let mut p = Vec::with_capacity(horizon);
    let mut z = Vec::with_capacity(horizon);
    let mut stage_d = Vec::with_capacity(horizon);
    let mut terminal = vec![0.0; ns];
    let mut dist = vec![0.0; na];
    for t in 1..=horizon {
        let nh = lattice.num_joint(t);
        let cur = &xi[t - 1];
        let mut pt = vec![0.0; nh * na];
        let mut zt = vec![0.0; nh * na];
        let mut dt = vec![0.0; k];
        let mut next = if t < horizon { vec![0.0; lattice.num_joint(t + 1) * ns] } else { Vec::new() };
        for h in 0..nh {
            let row = &cur[h * ns..(h + 1) * ns];
            let mass: f64 = row.iter().sum();
            if mass == 0.0 {
                continue;
            }
            u.joint_dist(lattice, t, h, None, &mut dist);
            for a in 0..na {
                let ua = dist[a];
                pt[h * na + a] = mass * ua;
                if ua == 0.0 {
                    continue;
                }
                let mut zc = 0.0;
                for (s, &x) in row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let w = x * ua;
                    zc += w * m.objective_cost(s, a);
                    for (acc, &d) in dt.iter_mut().zip(m.constraint_costs(s, a)) {
                        *acc += w * d;
                    }
                    for tr in m.transition_row(s, a) {
                        if t < horizon {
                            let child = lattice
                                .child(t, h, a, tr.obs)
                                .expect("positive-probability history is in the lattice");
                            next[child * ns + tr.next_state] += w * tr.prob;
                        } else {
                            terminal[tr.next_state] += w * tr.prob;
                        }
                    }
                }
                zt[h * na + a] = zc;
            }
        }
        p.push(pt);
        z.push(zt);
        stage_d.push(dt);
        if t < horizon {
            xi.push(next);
        }
    }
    Ok(ForwardPass { num_states: ns, num_actions: na, num_constraints: k, xi, p, z, stage_d, terminal })
}

/// Truncated discounted costs with their tail bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub horizon: usize,
    pub c: f64,
    pub d: Vec<f64>,
    pub c_tail: f64,
    pub d_tail: f64,
}

impl CostReport {
    pub fn csv_header(k: usize) -> String {
        let mut s = "policy_id,T,C_T,c_tail".to_string();
        for i in 1..=k {
            write!(s, ",D_{i}").unwrap();
        }
        s + ",d_tail"
    }

    /// `policy-id, T, C_T, c_tail, D_1..D_K, d_tail`.
    pub fn csv_row(&self, policy_id: &str) -> String {
        let mut s = format!("{},{},{},{}", policy_id, self.horizon, fmt_g17(self.c), fmt_g17(self.c_tail));
        for d in &self.d {
            write!(s, ",{}", fmt_g17(*d)).unwrap();
        }
        write!(s, ",{}", fmt_g17(self.d_tail)).unwrap();
        s
    }

    /// `C_T + <lambda, D_T - dbar>`.
    pub fn lagrangian(&self, lambda: &[f64], dbar: &[f64]) -> f64 {
        self.c + lambda.iter().zip(&self.d).zip(dbar).map(|((l, d), b)| l * (d - b)).sum::<f64>()
    }
}

/// Action-averaged costs and kernel of the uniform continuation.
struct UniformChain {
    c: Vec<f64>,
    d: Vec<f64>,
    kernel: Vec<f64>,
}

impl UniformChain {
    fn new(m: &Model) -> Self {
        let ns = m.num_states();
        let na = m.num_joint_actions();
        let k = m.num_constraints();
        let w = 1.0 / na as f64;
        let mut c = vec![0.0; ns];
        let mut d = vec![0.0; ns * k];
        let mut kernel = vec![0.0; ns * ns];
        for s in 0..ns {
            for a in 0..na {
                c[s] += w * m.objective_cost(s, a);
                for (i, &x) in m.constraint_costs(s, a).iter().enumerate() {
                    d[s * k + i] += w * x;
                }
                for tr in m.transition_row(s, a) {
                    kernel[s * ns + tr.next_state] += w * tr.prob;
                }
            }
        }
        UniformChain { c, d, kernel }
    }

    /// `W_steps(s)`: discounted cost of `steps` uniform stages from `s`, objective first.
    fn values(&self, alpha: f64, steps: usize, k: usize) -> Vec<Vec<f64>> {
        let ns = self.c.len();
        let mut w = vec![vec![0.0; ns]; 1 + k];
        for _ in 0..steps {
            let mut next = vec![vec![0.0; ns]; 1 + k];
            for s in 0..ns {
                for (j, row) in next.iter_mut().enumerate() {
                    let stage = if j == 0 { self.c[s] } else { self.d[s * k + j - 1] };
                    let cont: f64 = (0..ns).map(|s2| self.kernel[s * ns + s2] * w[j][s2]).sum();
                    row[s] = stage + alpha * cont;
                }
            }
            w = next;
        }
        w
    }
}

/// Costs of a finished forward pass, truncated at `horizon`.
pub fn costs_from_pass(m: &Model, fp: &ForwardPass, horizon: usize) -> CostReport {
    let alpha = m.discount();
    let k = fp.num_constraints;
    let h = fp.horizon();
    let mut c = 0.0;
    let mut d = vec![0.0; k];
    let mut disc = 1.0;
    for t in 1..=h.min(horizon) {
        c += disc * fp.stage_cost(t);
        for (acc, x) in d.iter_mut().zip(fp.stage_constraint(t)) {
            *acc += disc * x;
        }
        disc *= alpha;
    }
    if horizon > h {
        let chain = UniformChain::new(m);
        let ns = m.num_states();
        let mut q = fp.terminal.clone();
        for _ in h + 1..=horizon {
            for s in 0..ns {
                c += disc * q[s] * chain.c[s];
                for (i, acc) in d.iter_mut().enumerate() {
                    *acc += disc * q[s] * chain.d[s * k + i];
                }
            }
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                for (s2, acc) in next.iter_mut().enumerate() {
                    *acc += q[s] * chain.kernel[s * ns + s2];
                }
            }
            q = next;
            disc *= alpha;
        }
    }
    let (c_tail, d_tail) = discounted_tail_bound(&cost_bounds(m), alpha, horizon);
    CostReport { horizon, c, d, c_tail, d_tail }
}

/// `C_T(u)` and `D_T(u)` with tail bounds.
pub fn expected_costs(m: &Model, lattice: &HistoryLattice, u: &PolicyProfile, horizon: usize) -> Result<CostReport> {
    Ok(costs_from_pass(m, &forward_pass(m, lattice, u)?, horizon))
}

pub(crate) fn check_multiplier(lambda: &[f64], k: usize) -> Result<()> {
    if lambda.len() != k {
        return Err(Error::InvalidArgument(format!("expected {k} multipliers, got {}", lambda.len())));
    }
    if let Some(x) = lambda.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative multiplier {x}")));
    }
    Ok(())
}

/// `L_T(u, lambda) = C_T(u) + <lambda, D_T(u) - dbar>`.
pub fn lagrangian(
    m: &Model,
    lattice: &HistoryLattice,
    u: &PolicyProfile,
    lambda: &[f64],
    horizon: usize,
) -> Result<f64> {
    check_multiplier(lambda, m.num_constraints())?;
    Ok(expected_costs(m, lattice, u, horizon)?.lagrangian(lambda, m.threshold()))
}

/// Mixture Lagrangian: the weighted average of `L_T` over joint support combinations.
pub fn mixture_costs(
    m: &Model,
    lattice: &HistoryLattice,
    mu: &ProductMixture,
    lambda: &[f64],
    horizon: usize,
) -> Result<f64> {
    check_multiplier(lambda, m.num_constraints())?;
    let mut total = 0.0;
    for (w, u) in mu.support() {
        total += w * lagrangian(m, lattice, &u, lambda, horizon)?;
    }
    Ok(total)
}

/// Discounted stage costs on the lattice with the uniform continuation folded
/// into the last lattice stage.
#[derive(Debug, Clone)]
pub struct StageCosts {
    lattice_horizon: usize,
    horizon: usize,
    num_actions: usize,
    num_constraints: usize,
    weight: Vec<f64>,
    cont_c: Vec<f64>,
    cont_d: Vec<f64>,
}

impl StageCosts {
    pub fn new(m: &Model, lattice_horizon: usize, horizon: usize) -> Self {
        let alpha = m.discount();
        let ns = m.num_states();
        let na = m.num_joint_actions();
        let k = m.num_constraints();
        let weight = (1..=lattice_horizon)
            .map(|t| if t <= horizon { alpha.powi(t as i32 - 1) } else { 0.0 })
            .collect();
        let mut cont_c = vec![0.0; ns * na];
        let mut cont_d = vec![0.0; ns * na * k];
        if horizon > lattice_horizon {
            let w = UniformChain::new(m).values(alpha, horizon - lattice_horizon, k);
            let scale = alpha.powi(lattice_horizon as i32);
            for s in 0..ns {
                for a in 0..na {
                    for tr in m.transition_row(s, a) {
                        let x = scale * tr.prob;
                        cont_c[s * na + a] += x * w[0][tr.next_state];
                        for i in 0..k {
                            cont_d[(s * na + a) * k + i] += x * w[1 + i][tr.next_state];
                        }
                    }
                }
            }
        }
        StageCosts {
            lattice_horizon,
            horizon,
            num_actions: na,
            num_constraints: k,
            weight,
            cont_c,
            cont_d,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lattice_horizon(&self) -> usize {
        self.lattice_horizon
    }

    /// Objective stage cost `g_t(s, a)`.
    #[inline]
    pub fn c(&self, m: &Model, t: usize, s: usize, a: usize) -> f64 {
        let mut g = self.weight[t - 1] * m.objective_cost(s, a);
        if t == self.lattice_horizon {
            g += self.cont_c[s * self.num_actions + a];
        }
        g
    }

    /// Constraint stage cost `g_t(s, a)_k`.
    #[inline]
    pub fn d(&self, m: &Model, t: usize, s: usize, a: usize, k: usize) -> f64 {
        let mut g = self.weight[t - 1] * m.constraint_costs(s, a)[k];
        if t == self.lattice_horizon {
            g += self.cont_d[(s * self.num_actions + a) * self.num_constraints + k];
        }
        g
    }
}

/// Linear coefficients of `C_T` and `D_T` in agent `n`'s realization plan,
/// with every other agent fixed. Indexed by `(global view, own action)`.
#[derive(Debug, Clone)]
pub struct AgentCoefficients {
    pub num_actions: usize,
    pub num_constraints: usize,
    pub c: Vec<f64>,
    /// `(view * |A^n| + a) * K + k`.
    pub d: Vec<f64>,
}

impl AgentCoefficients {
    /// Coefficients of `C_T + <lambda, D_T>`.
    pub fn combine(&self, lambda: &[f64]) -> Vec<f64> {
        let k = self.num_constraints;
        self.c
            .iter()
            .enumerate()
            .map(|(i, c)| c + (0..k).map(|j| lambda[j] * self.d[i * k + j]).sum::<f64>())
            .collect()
    }

    pub fn dot(&self, plan: &[f64]) -> (f64, Vec<f64>) {
        let k = self.num_constraints;
        let mut d = vec![0.0; k];
        let mut c = 0.0;
        for (i, &r) in plan.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            c += r * self.c[i];
            for j in 0..k {
                d[j] += r * self.d[i * k + j];
            }
        }
        (c, d)
    }
}

/// Forward pass with agent `n`'s own action probabilities left out, folded
/// into coefficients on agent `n`'s realization plan.
pub fn agent_coefficients(
    m: &Model,
    lattice: &HistoryLattice,
    u: &PolicyProfile,
    n: usize,
    stage: &StageCosts,
) -> Result<AgentCoefficients> {
    lattice.check_model(m)?;
    u.check_lattice(lattice)?;
    if stage.lattice_horizon != lattice.horizon() {
        return Err(Error::LatticeMismatch("stage costs built for another lattice horizon".into()));
    }
    let ns = m.num_states();
    let na = m.num_joint_actions();
    let k = m.num_constraints();
    let own = lattice.agent_actions(n);
    let horizon = lattice.horizon();
    let mut coef_c = vec![0.0; lattice.total_views(n) * own];
    let mut coef_d = vec![0.0; lattice.total_views(n) * own * k];
    let own_of: Vec<usize> = (0..na).map(|a| m.action_component(a, n)).collect();

    let mut cur = vec![0.0; lattice.num_joint(1) * ns];
    for h in 0..lattice.num_joint(1) {
        let o = lattice.last_obs(1, h);
        for s in 0..ns {
            cur[h * ns + s] = m.initial(s, o);
        }
    }
    let mut dist = vec![0.0; na];
    for t in 1..=horizon {
        let mut next = if t < horizon { vec![0.0; lattice.num_joint(t + 1) * ns] } else { Vec::new() };
        let off = lattice.view_offset(n, t);
        for h in 0..lattice.num_joint(t) {
            let row = &cur[h * ns..(h + 1) * ns];
            if row.iter().all(|&x| x == 0.0) {
                continue;
            }
            u.joint_dist(lattice, t, h, Some(n), &mut dist);
            let g = off + lattice.view(t, h, n);
            for a in 0..na {
                let ua = dist[a];
                if ua == 0.0 {
                    continue;
                }
                let slot = g * own + own_of[a];
                for (s, &x) in row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let w = x * ua;
                    coef_c[slot] += w * stage.c(m, t, s, a);
                    for j in 0..k {
                        coef_d[slot * k + j] += w * stage.d(m, t, s, a, j);
                    }
                    if t < horizon {
                        for tr in m.transition_row(s, a) {
                            let child = lattice.child(t, h, a, tr.obs).expect("reachable child");
                            next[child * ns + tr.next_state] += w * tr.prob;
                        }
                    }
                }
            }
        }
        cur = next;
    }
    Ok(AgentCoefficients { num_actions: own, num_constraints: k, c: coef_c, d: coef_d })
}

/// Realization plan `r(v, a) = prod of own action probabilities along v, then a`.
pub fn realization_plan(lattice: &HistoryLattice, n: usize, policy: &crate::policy::AgentPolicy) -> Vec<f64> {
    let na = lattice.agent_actions(n);
    let mut r = vec![0.0; lattice.total_views(n) * na];
    for t in 1..=lattice.horizon() {
        let off = lattice.view_offset(n, t);
        for v in 0..lattice.num_views(n, t) {
            let reach = match lattice.view_parent(n, t, v) {
                None => 1.0,
                Some((pv, a)) => r[(lattice.view_offset(n, t - 1) + pv) * na + a],
            };
            let g = off + v;
            for a in 0..na {
                r[g * na + a] = reach * policy.prob(g, a);
            }
        }
    }
    r
}
