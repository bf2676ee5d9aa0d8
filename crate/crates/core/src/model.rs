//! Finite multi-agent constrained POMDP instances, the `.dcpomdp` text
//! format, cost bounds and a seeded instance generator.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numfmt::fmt_g17;

/// Probability rows read from text may be off by this much.
pub const PARSE_TOLERANCE: f64 = 1e-9;
/// Probability rows built in memory must sum to one within this.
pub const INTERNAL_TOLERANCE: f64 = 1e-12;

/// Raw model contents before validation.
///
/// Dense layouts (row-major):
/// * `initial[s * |O| + o]`
/// * `transition[((s * |A| + a) * |S| + s') * |O| + o]`
/// * `objective_cost[s * |A| + a]`
/// * `constraint_cost[(s * |A| + a) * K + k]`
///
/// Joint observations are mixed-radix over `(o0, o1, .., oN)` with the common
/// coordinate most significant; joint actions over `(a1, .., aN)` likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub discount: f64,
    pub states: Vec<String>,
    pub common_obs: Vec<String>,
    pub private_obs: Vec<Vec<String>>,
    pub actions: Vec<Vec<String>>,
    pub threshold: Vec<f64>,
    pub initial: Vec<f64>,
    pub transition: Vec<f64>,
    pub objective_cost: Vec<f64>,
    pub constraint_cost: Vec<f64>,
}

/// One nonzero entry of a transition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub obs: usize,
    pub prob: f64,
}

/// A validated, immutable MA-C-POMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    parts: ModelParts,
    obs_radix: Vec<usize>,
    obs_stride: Vec<usize>,
    action_radix: Vec<usize>,
    action_stride: Vec<usize>,
    num_obs: usize,
    num_actions: usize,
    rows: Vec<Vec<Transition>>,
    next_state: Vec<f64>,
}

fn strides(radix: &[usize]) -> Vec<usize> {
    let mut stride = vec![1; radix.len()];
    for i in (0..radix.len().saturating_sub(1)).rev() {
        stride[i] = stride[i + 1] * radix[i + 1];
    }
    stride
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    if names.is_empty() {
        return Err(Error::InvalidModel(format!("{what} must not be empty")));
    }
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidModel(format!("{what} lists `{n}` twice")));
        }
    }
    Ok(())
}

impl Model {
    /// Validates `parts` with the in-memory tolerance.
    pub fn new(parts: ModelParts) -> Result<Self> {
        Self::with_tolerance(parts, INTERNAL_TOLERANCE)
    }

    /// Validates `parts`, accepting probability vectors that sum to one
    /// within `tol`.
    pub fn with_tolerance(parts: ModelParts, tol: f64) -> Result<Self> {
        let n_agents = parts.actions.len();
        if n_agents == 0 {
            return Err(Error::InvalidModel("at least one agent is required".into()));
        }
        if parts.private_obs.len() != n_agents {
            return Err(Error::InvalidModel(format!(
                "{} private observation sets for {} agents",
                parts.private_obs.len(),
                n_agents
            )));
        }
        if !(parts.discount > 0.0 && parts.discount < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {} outside (0, 1)",
                parts.discount
            )));
        }
        check_unique(&parts.states, "states")?;
        check_unique(&parts.common_obs, "common observations")?;
        for (n, o) in parts.private_obs.iter().enumerate() {
            check_unique(o, &format!("observations of agent {}", n + 1))?;
        }
        for (n, a) in parts.actions.iter().enumerate() {
            check_unique(a, &format!("actions of agent {}", n + 1))?;
        }

        let mut obs_radix = vec![parts.common_obs.len()];
        obs_radix.extend(parts.private_obs.iter().map(Vec::len));
        let action_radix: Vec<usize> = parts.actions.iter().map(Vec::len).collect();
        let num_obs: usize = obs_radix.iter().product();
        let num_actions: usize = action_radix.iter().product();
        let ns = parts.states.len();
        let k = parts.threshold.len();

        let expect = |len: usize, want: usize, what: &str| -> Result<()> {
            if len != want {
                Err(Error::InvalidModel(format!("{what} has {len} entries, expected {want}")))
            } else {
                Ok(())
            }
        };
        expect(parts.initial.len(), ns * num_obs, "initial distribution")?;
        expect(parts.transition.len(), ns * num_actions * ns * num_obs, "transition table")?;
        expect(parts.objective_cost.len(), ns * num_actions, "objective cost")?;
        expect(parts.constraint_cost.len(), ns * num_actions * k, "constraint cost")?;
        for (what, v) in [
            ("objective cost", &parts.objective_cost),
            ("constraint cost", &parts.constraint_cost),
            ("constraint threshold", &parts.threshold),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("{what} must be finite")));
            }
        }

        if parts.initial.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel("negative initial probability".into()));
        }
        let total: f64 = parts.initial.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InitialSum(total));
        }

        let mut model = Model {
            obs_stride: strides(&obs_radix),
            action_stride: strides(&action_radix),
            obs_radix,
            action_radix,
            num_obs,
            num_actions,
            rows: Vec::with_capacity(ns * num_actions),
            next_state: vec![0.0; ns * num_actions * ns],
            parts,
        };

        let row_len = ns * num_obs;
        for s in 0..ns {
            for a in 0..num_actions {
                let base = (s * num_actions + a) * row_len;
                let row = &model.parts.transition[base..base + row_len];
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "negative probability in transition row ({}, {})",
                        model.parts.states[s],
                        model.action_label(a)
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::RowSum {
                        state: model.parts.states[s].clone(),
                        action: model.action_label(a),
                        sum,
                    });
                }
                let mut sparse = Vec::new();
                for (i, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        let next_state = i / num_obs;
                        sparse.push(Transition { next_state, obs: i % num_obs, prob: p });
                        model.next_state[(s * num_actions + a) * ns + next_state] += p;
                    }
                }
                model.rows.push(sparse);
            }
        }
        Ok(model)
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn num_agents(&self) -> usize {
        self.parts.actions.len()
    }

    pub fn discount(&self) -> f64 {
        self.parts.discount
    }

    pub fn num_states(&self) -> usize {
        self.parts.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.parts.states
    }

    /// Size of the joint observation space `O = O0 x O1 x .. x ON`.
    pub fn num_joint_obs(&self) -> usize {
        self.num_obs
    }

    /// Size of the joint action space.
    pub fn num_joint_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_common_obs(&self) -> usize {
        self.obs_radix[0]
    }

    /// Private observation count of agent `n` (0-based).
    pub fn num_private_obs(&self, n: usize) -> usize {
        self.obs_radix[n + 1]
    }

    /// Action count of agent `n` (0-based).
    pub fn num_actions(&self, n: usize) -> usize {
        self.action_radix[n]
    }

    pub fn num_constraints(&self) -> usize {
        self.parts.threshold.len()
    }

    pub fn threshold(&self) -> &[f64] {
        &self.parts.threshold
    }

    pub fn initial(&self, s: usize, o: usize) -> f64 {
        self.parts.initial[s * self.num_obs + o]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize, o: usize) -> f64 {
        let ns = self.num_states();
        self.parts.transition[((s * self.num_actions + a) * ns + next) * self.num_obs + o]
    }

    /// Nonzero entries of the row `P(., . | s, a)`, ordered by `(s', o)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[Transition] {
        &self.rows[s * self.num_actions + a]
    }

    /// `P(S' = next | s, a)` with the observation marginalised out.
    pub fn next_state_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.next_state[(s * self.num_actions + a) * self.num_states() + next]
    }

    pub fn objective_cost(&self, s: usize, a: usize) -> f64 {
        self.parts.objective_cost[s * self.num_actions + a]
    }

    /// The constraint cost vector `d(s, a)` of length K.
    pub fn constraint_costs(&self, s: usize, a: usize) -> &[f64] {
        let k = self.num_constraints();
        let base = (s * self.num_actions + a) * k;
        &self.parts.constraint_cost[base..base + k]
    }

    /// Coordinate `c` of joint observation `o`; `c = 0` is the common part,
    /// `c = n + 1` the private part of agent `n`.
    pub fn obs_component(&self, o: usize, c: usize) -> usize {
        (o / self.obs_stride[c]) % self.obs_radix[c]
    }

    pub fn encode_obs(&self, components: &[usize]) -> usize {
        components.iter().zip(&self.obs_stride).map(|(c, s)| c * s).sum()
    }

    /// Action of agent `n` within joint action `a`.
    pub fn action_component(&self, a: usize, n: usize) -> usize {
        (a / self.action_stride[n]) % self.action_radix[n]
    }

    pub fn encode_action(&self, per_agent: &[usize]) -> usize {
        per_agent.iter().zip(&self.action_stride).map(|(c, s)| c * s).sum()
    }

    pub fn decode_action(&self, a: usize) -> Vec<usize> {
        (0..self.num_agents()).map(|n| self.action_component(a, n)).collect()
    }

    fn action_label(&self, a: usize) -> String {
        (0..self.num_agents())
            .map(|n| self.parts.actions[n][self.action_component(a, n)].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn obs_label(&self, o: usize) -> String {
        let mut out = vec![self.parts.common_obs[self.obs_component(o, 0)].as_str()];
        for n in 0..self.num_agents() {
            out.push(self.parts.private_obs[n][self.obs_component(o, n + 1)].as_str());
        }
        out.join(" ")
    }

    /// Initial state marginal `P1(s, O)`.
    pub fn initial_state_marginal(&self) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| (0..self.num_obs).map(|o| self.initial(s, o)).sum())
            .collect()
    }

    /// Exact infinite-horizon costs `(C, D)` when every agent picks its
    /// actions uniformly at random at every step.
    pub fn uniform_policy_costs(&self) -> (f64, Vec<f64>) {
        let ns = self.num_states();
        let na = self.num_actions;
        let k = self.num_constraints();
        let alpha = self.discount();
        let w = 1.0 / na as f64;
        // stage cost vectors: column 0 is c, columns 1..=K are d
        let mut stage = vec![0.0; ns * (k + 1)];
        let mut kernel = vec![0.0; ns * ns];
        for s in 0..ns {
            for a in 0..na {
                stage[s * (k + 1)] += w * self.objective_cost(s, a);
                for (j, d) in self.constraint_costs(s, a).iter().enumerate() {
                    stage[s * (k + 1) + 1 + j] += w * d;
                }
                for next in 0..ns {
                    kernel[s * ns + next] += w * self.next_state_prob(s, a, next);
                }
            }
        }
        let iterations = ((1e-18f64).ln() / alpha.ln()).ceil() as usize + 1;
        let mut value = stage.clone();
        for _ in 0..iterations {
            let mut next_value = stage.clone();
            for s in 0..ns {
                for next in 0..ns {
                    let p = alpha * kernel[s * ns + next];
                    if p != 0.0 {
                        for j in 0..=k {
                            next_value[s * (k + 1) + j] += p * value[next * (k + 1) + j];
                        }
                    }
                }
            }
            value = next_value;
        }
        let rho = self.initial_state_marginal();
        let mut out = vec![0.0; k + 1];
        for s in 0..ns {
            for j in 0..=k {
                out[j] += rho[s] * value[s * (k + 1) + j];
            }
        }
        let c = out[0];
        (c, out.split_off(1))
    }

    /// Writes the model in `.dcpomdp` form; nonzero entries only.
    pub fn to_text(&self) -> String {
        let p = &self.parts;
        let mut out = String::new();
        let n = self.num_agents();
        writeln!(out, "agents: {n}").unwrap();
        writeln!(out, "discount: {}", fmt_g17(p.discount)).unwrap();
        writeln!(out, "states: {}", p.states.join(" ")).unwrap();
        writeln!(out, "obs common: {}", p.common_obs.join(" ")).unwrap();
        for (i, o) in p.private_obs.iter().enumerate() {
            writeln!(out, "obs {}: {}", i + 1, o.join(" ")).unwrap();
        }
        for (i, a) in p.actions.iter().enumerate() {
            writeln!(out, "actions {}: {}", i + 1, a.join(" ")).unwrap();
        }
        writeln!(out, "constraints: {}", self.num_constraints()).unwrap();
        let dbar: Vec<String> = p.threshold.iter().map(|&x| fmt_g17(x)).collect();
        writeln!(out, "dbar: {}", dbar.join(" ")).unwrap();
        let ns = self.num_states();
        for s in 0..ns {
            for o in 0..self.num_obs {
                let pr = self.initial(s, o);
                if pr != 0.0 {
                    writeln!(out, "init: {} {} {}", p.states[s], self.obs_label(o), fmt_g17(pr))
                        .unwrap();
                }
            }
        }
        for s in 0..ns {
            for a in 0..self.num_actions {
                for next in 0..ns {
                    for o in 0..self.num_obs {
                        let pr = self.transition_prob(s, a, next, o);
                        if pr != 0.0 {
                            writeln!(
                                out,
                                "T: {} {} -> {} {} {}",
                                p.states[s],
                                self.action_label(a),
                                p.states[next],
                                self.obs_label(o),
                                fmt_g17(pr)
                            )
                            .unwrap();
                        }
                    }
                }
            }
        }
        for s in 0..ns {
            for a in 0..self.num_actions {
                let c = self.objective_cost(s, a);
                if c != 0.0 {
                    writeln!(out, "c: {} {} {}", p.states[s], self.action_label(a), fmt_g17(c))
                        .unwrap();
                }
            }
        }
        for k in 0..self.num_constraints() {
            for s in 0..ns {
                for a in 0..self.num_actions {
                    let d = self.constraint_costs(s, a)[k];
                    if d != 0.0 {
                        writeln!(
                            out,
                            "d {}: {} {} {}",
                            k + 1,
                            p.states[s],
                            self.action_label(a),
                            fmt_g17(d)
                        )
                        .unwrap();
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Line<'a> {
    no: usize,
    head: Vec<&'a str>,
    body: Vec<&'a str>,
}

fn single<'a>(l: &Line<'a>) -> Result<&'a str> {
    match l.body.as_slice() {
        [x] => Ok(x),
        _ => Err(syntax(l.no, format!("`{}:` takes exactly one value", l.head.join(" ")))),
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| syntax(line, format!("expected {what}, found `{tok}`")))
}

fn index_of(names: &HashMap<&str, usize>, line: usize, tok: &str) -> Result<usize> {
    names.get(tok).copied().ok_or_else(|| Error::UnknownIdentifier {
        line,
        name: tok.to_string(),
    })
}

fn name_map(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

#[derive(Default)]
struct Header<T> {
    value: Option<T>,
}

impl<T> Header<T> {
    fn set(&mut self, line: usize, what: &str, v: T) -> Result<()> {
        if self.value.is_some() {
            return Err(Error::Duplicate { line, what: what.to_string() });
        }
        self.value = Some(v);
        Ok(())
    }
}

/// Parses and validates a `.dcpomdp` document.
pub fn parse_model(text: &str) -> Result<Model> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (head, body) = content
            .split_once(':')
            .ok_or_else(|| syntax(no, "expected `<keyword>: ...`"))?;
        lines.push(Line {
            no,
            head: head.split_whitespace().collect(),
            body: body.split_whitespace().collect(),
        });
    }

    // pass 1: declarations
    let mut agents: Header<usize> = Header::default();
    let mut discount: Header<f64> = Header::default();
    let mut states: Header<Vec<String>> = Header::default();
    let mut common: Header<Vec<String>> = Header::default();
    let mut private: HashMap<usize, (usize, Vec<String>)> = HashMap::new();
    let mut actions: HashMap<usize, (usize, Vec<String>)> = HashMap::new();
    let mut constraints: Header<usize> = Header::default();
    let mut dbar: Header<(usize, Vec<f64>)> = Header::default();
    let names = |body: &[&str]| body.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    for l in &lines {
        match l.head.as_slice() {
            ["agents"] => {
                let n: usize = parse_num(l.no, single(l)?, "agent count")?;
                agents.set(l.no, "agents", n)?;
            }
            ["discount"] => {
                let a: f64 = parse_num(l.no, single(l)?, "discount")?;
                discount.set(l.no, "discount", a)?;
            }
            ["states"] => states.set(l.no, "states", names(&l.body))?,
            ["obs", "common"] => common.set(l.no, "obs common", names(&l.body))?,
            ["obs", n] => {
                let n: usize = parse_num(l.no, n, "agent number")?;
                if private.insert(n, (l.no, names(&l.body))).is_some() {
                    return Err(Error::Duplicate { line: l.no, what: format!("obs {n}") });
                }
            }
            ["actions", n] => {
                let n: usize = parse_num(l.no, n, "agent number")?;
                if actions.insert(n, (l.no, names(&l.body))).is_some() {
                    return Err(Error::Duplicate { line: l.no, what: format!("actions {n}") });
                }
            }
            ["constraints"] => {
                let k: usize = parse_num(l.no, single(l)?, "constraint count")?;
                constraints.set(l.no, "constraints", k)?;
            }
            ["dbar"] => {
                let v = l
                    .body
                    .iter()
                    .map(|t| parse_num(l.no, t, "threshold"))
                    .collect::<Result<Vec<f64>>>()?;
                dbar.set(l.no, "dbar", (l.no, v))?;
            }
            ["init"] | ["T"] | ["c"] | ["d", _] => {}
            other => return Err(syntax(l.no, format!("unknown keyword `{}`", other.join(" ")))),
        }
    }

    let n_agents = agents.value.ok_or(Error::Missing("agents"))?;
    if n_agents == 0 {
        return Err(Error::InvalidModel("at least one agent is required".into()));
    }
    let discount = discount.value.ok_or(Error::Missing("discount"))?;
    let states = states.value.ok_or(Error::Missing("states"))?;
    let common_obs = common.value.ok_or(Error::Missing("obs common"))?;
    let k = constraints.value.ok_or(Error::Missing("constraints"))?;
    let (dbar_line, threshold) = dbar.value.unwrap_or((0, Vec::new()));
    if threshold.len() != k {
        return Err(syntax(
            dbar_line,
            format!("dbar lists {} values for {} constraints", threshold.len(), k),
        ));
    }
    let mut private_obs = Vec::with_capacity(n_agents);
    let mut agent_actions = Vec::with_capacity(n_agents);
    for n in 1..=n_agents {
        private_obs.push(private.remove(&n).ok_or(Error::Missing("obs <n> for every agent"))?.1);
        agent_actions.push(actions.remove(&n).ok_or(Error::Missing("actions <n> for every agent"))?.1);
    }
    if let Some((&n, &(line, _))) = private.iter().next() {
        return Err(syntax(line, format!("agent {n} out of range 1..={n_agents}")));
    }
    if let Some((&n, &(line, _))) = actions.iter().next() {
        return Err(syntax(line, format!("agent {n} out of range 1..={n_agents}")));
    }
    for (what, list) in std::iter::once(("states", &states))
        .chain(std::iter::once(("obs common", &common_obs)))
        .chain(private_obs.iter().map(|o| ("private observations", o)))
        .chain(agent_actions.iter().map(|a| ("actions", a)))
    {
        let mut seen = HashSet::new();
        for name in list {
            if !seen.insert(name) {
                return Err(Error::Duplicate { line: 0, what: format!("{what} identifier `{name}`") });
            }
        }
        if list.is_empty() {
            return Err(Error::InvalidModel(format!("{what} must not be empty")));
        }
    }

    // pass 2: entries
    let state_ix = name_map(&states);
    let common_ix = name_map(&common_obs);
    let private_ix: Vec<_> = private_obs.iter().map(|o| name_map(o)).collect();
    let action_ix: Vec<_> = agent_actions.iter().map(|a| name_map(a)).collect();

    let mut obs_radix = vec![common_obs.len()];
    obs_radix.extend(private_obs.iter().map(Vec::len));
    let obs_stride = strides(&obs_radix);
    let action_radix: Vec<usize> = agent_actions.iter().map(Vec::len).collect();
    let action_stride = strides(&action_radix);
    let n_obs: usize = obs_radix.iter().product();
    let n_act: usize = action_radix.iter().product();
    let ns = states.len();

    let read_obs = |line: usize, toks: &[&str]| -> Result<usize> {
        let mut o = index_of(&common_ix, line, toks[0])? * obs_stride[0];
        for n in 0..n_agents {
            o += index_of(&private_ix[n], line, toks[n + 1])? * obs_stride[n + 1];
        }
        Ok(o)
    };
    let read_action = |line: usize, toks: &[&str]| -> Result<usize> {
        let mut a = 0;
        for n in 0..n_agents {
            a += index_of(&action_ix[n], line, toks[n])? * action_stride[n];
        }
        Ok(a)
    };

    let mut initial = vec![0.0; ns * n_obs];
    let mut transition = vec![0.0; ns * n_act * ns * n_obs];
    let mut objective = vec![0.0; ns * n_act];
    let mut constraint = vec![0.0; ns * n_act * k];
    let mut seen_entries: HashSet<(u8, usize, usize)> = HashSet::new();
    let mut claim = |line: usize, tag: u8, idx: usize, sub: usize, what: &str| -> Result<()> {
        if seen_entries.insert((tag, idx, sub)) {
            Ok(())
        } else {
            Err(Error::Duplicate { line, what: what.to_string() })
        }
    };

    for l in &lines {
        let b = &l.body;
        match l.head.as_slice() {
            ["init"] => {
                if b.len() != n_agents + 3 {
                    return Err(syntax(l.no, format!("init expects {} tokens", n_agents + 3)));
                }
                let s = index_of(&state_ix, l.no, b[0])?;
                let o = read_obs(l.no, &b[1..n_agents + 2])?;
                let p: f64 = parse_num(l.no, b[n_agents + 2], "probability")?;
                claim(l.no, 0, s * n_obs + o, 0, "init entry")?;
                initial[s * n_obs + o] = p;
            }
            ["T"] => {
                let want = 1 + n_agents + 1 + 1 + (n_agents + 1) + 1;
                if b.len() != want || b[n_agents + 1] != "->" {
                    return Err(syntax(
                        l.no,
                        format!("T expects `<s> <a1>..<aN> -> <s'> <o0>..<oN> <prob>` ({want} tokens)"),
                    ));
                }
                let s = index_of(&state_ix, l.no, b[0])?;
                let a = read_action(l.no, &b[1..n_agents + 1])?;
                let next = index_of(&state_ix, l.no, b[n_agents + 2])?;
                let o = read_obs(l.no, &b[n_agents + 3..2 * n_agents + 4])?;
                let p: f64 = parse_num(l.no, b[want - 1], "probability")?;
                let idx = ((s * n_act + a) * ns + next) * n_obs + o;
                claim(l.no, 1, idx, 0, "transition entry")?;
                transition[idx] = p;
            }
            ["c"] => {
                if b.len() != n_agents + 2 {
                    return Err(syntax(l.no, format!("c expects {} tokens", n_agents + 2)));
                }
                let s = index_of(&state_ix, l.no, b[0])?;
                let a = read_action(l.no, &b[1..n_agents + 1])?;
                let v: f64 = parse_num(l.no, b[n_agents + 1], "cost")?;
                claim(l.no, 2, s * n_act + a, 0, "objective cost entry")?;
                objective[s * n_act + a] = v;
            }
            ["d", kk] => {
                let kk: usize = parse_num(l.no, kk, "constraint number")?;
                if kk == 0 || kk > k {
                    return Err(syntax(l.no, format!("constraint {kk} out of range 1..={k}")));
                }
                if b.len() != n_agents + 2 {
                    return Err(syntax(l.no, format!("d expects {} tokens", n_agents + 2)));
                }
                let s = index_of(&state_ix, l.no, b[0])?;
                let a = read_action(l.no, &b[1..n_agents + 1])?;
                let v: f64 = parse_num(l.no, b[n_agents + 1], "cost")?;
                claim(l.no, 3, s * n_act + a, kk, "constraint cost entry")?;
                constraint[(s * n_act + a) * k + kk - 1] = v;
            }
            _ => {}
        }
    }

    Model::with_tolerance(
        ModelParts {
            discount,
            states,
            common_obs,
            private_obs,
            actions: agent_actions,
            threshold,
            initial,
            transition,
            objective_cost: objective,
            constraint_cost: constraint,
        },
        PARSE_TOLERANCE,
    )
}

// ---------------------------------------------------------------------------
// bounds

/// Componentwise bounds on the immediate costs over the finite grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBounds {
    pub c_lower: f64,
    pub c_upper: f64,
    pub d_lower: Vec<f64>,
    pub d_upper: Vec<f64>,
    /// Largest absolute constraint cost entry.
    pub d_inf_norm: f64,
}

pub fn cost_bounds(m: &Model) -> CostBounds {
    let k = m.num_constraints();
    let mut b = CostBounds {
        c_lower: f64::INFINITY,
        c_upper: f64::NEG_INFINITY,
        d_lower: vec![f64::INFINITY; k],
        d_upper: vec![f64::NEG_INFINITY; k],
        d_inf_norm: 0.0,
    };
    for s in 0..m.num_states() {
        for a in 0..m.num_joint_actions() {
            let c = m.objective_cost(s, a);
            b.c_lower = b.c_lower.min(c);
            b.c_upper = b.c_upper.max(c);
            for (j, &d) in m.constraint_costs(s, a).iter().enumerate() {
                b.d_lower[j] = b.d_lower[j].min(d);
                b.d_upper[j] = b.d_upper[j].max(d);
                b.d_inf_norm = b.d_inf_norm.max(d.abs());
            }
        }
    }
    b
}

/// Truncation error bounds `(c_tail, d_tail)` of the discounted series cut
/// after `horizon` stages.
pub fn discounted_tail_bound(b: &CostBounds, alpha: f64, horizon: usize) -> (f64, f64) {
    let scale = alpha.powi(horizon as i32) / (1.0 - alpha);
    let c_abs = b.c_lower.abs().max(b.c_upper.abs());
    (scale * c_abs, scale * b.d_inf_norm)
}

// ---------------------------------------------------------------------------
// generator

/// Dimensions for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub agents: usize,
    pub states: usize,
    pub common_obs: usize,
    pub private_obs: usize,
    pub actions: usize,
    pub constraints: usize,
    pub discount: f64,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            agents: 2,
            states: 2,
            common_obs: 1,
            private_obs: 2,
            actions: 2,
            constraints: 1,
            discount: 0.5,
        }
    }
}

pub const MAX_AGENTS: usize = 4;
pub const MAX_STATES: usize = 16;
pub const MAX_JOINT: usize = 256;
pub const MAX_CONSTRAINTS: usize = 8;
/// Margin by which the uniform policy satisfies generated constraints.
pub const SLATER_MARGIN: f64 = 0.05;

/// Seeded random instance. Rows are normalised uniform draws, costs are
/// uniform on [-1, 1], and each threshold is the exact uniform-policy
/// constraint cost plus [`SLATER_MARGIN`].
pub fn random_instance(seed: u64, dims: Dims) -> Result<Model> {
    let joint_obs = dims.common_obs.checked_mul(dims.private_obs.checked_pow(dims.agents as u32).unwrap_or(usize::MAX));
    let joint_act = dims.actions.checked_pow(dims.agents as u32);
    let within = dims.agents >= 1
        && dims.agents <= MAX_AGENTS
        && (1..=MAX_STATES).contains(&dims.states)
        && dims.common_obs >= 1
        && dims.private_obs >= 1
        && dims.actions >= 1
        && joint_obs.is_some_and(|o| o <= MAX_JOINT)
        && joint_act.is_some_and(|a| a <= MAX_JOINT)
        && dims.constraints <= MAX_CONSTRAINTS;
    if !within {
        return Err(Error::InvalidArgument(format!(
            "dimensions {dims:?} exceed generator caps (agents <= {MAX_AGENTS}, states <= {MAX_STATES}, joint obs/actions <= {MAX_JOINT}, constraints <= {MAX_CONSTRAINTS})"
        )));
    }
    if !(dims.discount > 0.0 && dims.discount < 1.0) {
        return Err(Error::InvalidArgument(format!("discount {} outside (0, 1)", dims.discount)));
    }
    let n_obs = joint_obs.unwrap();
    let n_act = joint_act.unwrap();
    let ns = dims.states;
    let k = dims.constraints;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let draw_row = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut row: Vec<f64> = (0..len).map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
        row
    };
    let initial = draw_row(ns * n_obs, &mut rng);
    let mut transition = Vec::with_capacity(ns * n_act * ns * n_obs);
    for _ in 0..ns * n_act {
        transition.extend(draw_row(ns * n_obs, &mut rng));
    }
    let objective_cost: Vec<f64> = (0..ns * n_act).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let constraint_cost: Vec<f64> = (0..ns * n_act * k).map(|_| rng.gen_range(-1.0..=1.0)).collect();

    let label = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let mut parts = ModelParts {
        discount: dims.discount,
        states: label("s", ns),
        common_obs: label("x", dims.common_obs),
        private_obs: vec![label("y", dims.private_obs); dims.agents],
        actions: vec![label("a", dims.actions); dims.agents],
        threshold: vec![0.0; k],
        initial,
        transition,
        objective_cost,
        constraint_cost,
    };
    let provisional = Model::new(parts.clone())?;
    let (_, d_uniform) = provisional.uniform_policy_costs();
    parts.threshold = d_uniform.iter().map(|d| d + SLATER_MARGIN).collect();
    Model::new(parts)
}
