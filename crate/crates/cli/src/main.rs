use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use macpomdp_core::duality::{certify, CertifyParams, DualityCertificate};
use macpomdp_core::evaluation::{expected_costs, forward_pass, CostReport};
use macpomdp_core::history::{build_lattice_with_cap, HistoryLattice, DEFAULT_MAX_HISTORIES};
use macpomdp_core::minimax::{parse_game, MinimaxValues};
use macpomdp_core::numfmt::fmt_g17;
use macpomdp_core::policy::{
    mix_toward, parse_policy, replicate_mixture, AgentPolicy, PolicyProfile, ProductMixture, DEFAULT_MAX_PROFILES,
};
use macpomdp_core::{parse_model, random_instance, Dims, Model};

/// Exact solver and verifier for finite multi-agent constrained POMDPs.
///
/// Exit codes: 0 pass, 1 usage or parse error, 2 claim not certified
/// (unresolved gap or failed check), 3 infeasible.
#[derive(Parser)]
#[command(name = "macpomdp", version)]
struct Cli {
    #[command(flatten)]
    caps: Caps,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Caps {
    /// Cap on histories per lattice.
    #[arg(long, global = true, env = "MACPOMDP_MAX_HISTORIES", default_value_t = DEFAULT_MAX_HISTORIES)]
    max_histories: u64,
    /// Cap on enumerated deterministic profiles.
    #[arg(long, global = true, env = "MACPOMDP_MAX_PROFILES", default_value_t = DEFAULT_MAX_PROFILES)]
    max_profiles: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the duality claims on one or more instances; writes one CSV row per instance.
    Certify {
        /// Model files; rows are written in this order.
        #[arg(long, required = true, num_args = 1..)]
        model: Vec<PathBuf>,
        /// Target gap; the evaluation horizon makes both tails smaller than tol / 10.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Decision horizon of the policy lattice (default: largest within caps, at most 6).
        #[arg(long)]
        horizon: Option<usize>,
        /// Primal search restarts.
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        /// Instances certified concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare random product mixtures with their behavioral replicas.
    #[command(name = "verify-lemma1")]
    VerifyReplication {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 20)]
        mixtures: usize,
        /// Largest support size per agent.
        #[arg(long, default_value_t = 3)]
        support: usize,
        #[arg(long, default_value_t = 8)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Move 0.1 of probability at one view of each replica, to check that faults are caught.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track p along u_i = (1 - 2^-i) u + 2^-i v for i = 1..20.
    #[command(name = "verify-convergence")]
    VerifyConvergence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        horizon: usize,
        #[arg(long, default_value_t = 5)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use deterministic endpoints.
        #[arg(long)]
        deterministic: bool,
        /// Use v = u.
        #[arg(long)]
        identical: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Values v_flat, v_natural, v_sharp of matrix games with +inf rows.
    Minimax {
        #[arg(long, required = true, num_args = 1..)]
        game: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded random instance whose uniform policy is strictly feasible.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        /// Private observations per agent.
        #[arg(long, default_value_t = 2)]
        obs: usize,
        #[arg(long, default_value_t = 1)]
        common_obs: usize,
        /// Number of constraints.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        discount: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the history lattice, one history per line.
    #[command(name = "dump-lattice")]
    DumpLattice {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        /// Keep histories of probability zero.
        #[arg(long)]
        no_prune: bool,
    },
    /// Expected truncated costs of a policy profile (uniform when no policy is given).
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Decision horizon of the policy lattice.
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        /// Evaluation horizon T (default: the decision horizon).
        #[arg(long)]
        eval_horizon: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model(&text).with_context(|| format!("parsing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn lattice(m: &Model, horizon: usize, caps: &Caps) -> Result<HistoryLattice> {
    if horizon == 0 {
        bail!("horizon must be at least 1");
    }
    Ok(build_lattice_with_cap(m, horizon, true, caps.max_histories)?)
}

fn cmd_certify(
    models: &[PathBuf],
    params: CertifyParams,
    jobs: usize,
    out: &Option<PathBuf>,
) -> Result<i32> {
    let parsed: Vec<(String, Model)> =
        models.iter().map(|p| Ok((stem(p), read_model(p)?))).collect::<Result<_>>()?;
    let results: Vec<Mutex<Option<Result<DualityCertificate>>>> = parsed.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(parsed.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= parsed.len() {
                    break;
                }
                let r = certify(&parsed[i].1, &params).map_err(anyhow::Error::from);
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut csv = format!("{}\n", DualityCertificate::csv_header());
    let mut code = 0;
    for ((id, _), r) in parsed.iter().zip(results) {
        let cert = r.into_inner().unwrap().expect("every instance ran").with_context(|| format!("certifying {id}"))?;
        eprintln!("{id}:\n{}", cert.summary());
        csv += &cert.csv_row(id);
        csv.push('\n');
        code = code.max(cert.verdict.exit_code());
    }
    emit(out, &csv)?;
    Ok(code)
}

fn random_mixture(l: &HistoryLattice, support: usize, rng: &mut ChaCha8Rng) -> Result<ProductMixture> {
    let components = (0..l.num_agents())
        .map(|n| {
            let size = rng.gen_range(1..=support);
            let raw: Vec<f64> = (0..size).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|w| (w / total, AgentPolicy::random(l, n, rng))).collect()
        })
        .collect();
    Ok(ProductMixture::new(components)?)
}

/// Moves 0.1 of probability at the first view where some action holds at least 0.1.
fn corrupt(l: &HistoryLattice, u: &PolicyProfile) -> Result<PolicyProfile> {
    let mut v = u.clone();
    for n in 0..l.num_agents() {
        let a = u.agent(n);
        let na = a.num_actions();
        if na < 2 {
            continue;
        }
        for g in 0..a.num_views() {
            let dist = a.dist(g);
            if let Some(from) = (0..na).find(|&x| dist[x] >= 0.1) {
                let mut probs = a.probs().to_vec();
                probs[g * na + from] -= 0.1;
                probs[g * na + (from + 1) % na] += 0.1;
                v.set_agent(n, AgentPolicy::from_probs(na, probs)?);
                return Ok(v);
            }
        }
    }
    bail!("no agent has two actions; nothing to corrupt")
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify_replication(
    model: &Path,
    mixtures: usize,
    support: usize,
    horizon: usize,
    seed: u64,
    inject_fault: bool,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> Result<i32> {
    if support == 0 {
        bail!("support must be at least 1");
    }
    let m = read_model(model)?;
    let l = lattice(&m, horizon, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("mixture,max_deviation,t,h,a\n");
    let mut worst: f64 = 0.0;
    for i in 0..mixtures {
        let mu = random_mixture(&l, support, &mut rng)?;
        let mut rep = replicate_mixture(&mu, &l)?;
        if inject_fault {
            rep = corrupt(&l, &rep)?;
        }
        let rp = forward_pass(&m, &l, &rep)?;
        let support_passes = mu
            .support()
            .into_iter()
            .map(|(w, u)| Ok((w, forward_pass(&m, &l, &u)?)))
            .collect::<Result<Vec<_>>>()?;
        let na = l.num_joint_actions();
        let mut at = (0.0, 1, 0, 0);
        for t in 1..=l.horizon() {
            for (j, y) in rp.p_level(t).iter().enumerate() {
                let mixed: f64 = support_passes.iter().map(|(w, fp)| w * fp.p_level(t)[j]).sum();
                let dev = (mixed - y).abs();
                if dev > at.0 {
                    at = (dev, t, j / na, j % na);
                }
            }
        }
        csv += &format!("{},{},{},{},{}\n", i, fmt_g17(at.0), at.1, at.2, at.3);
        if at.0 > worst {
            worst = at.0;
        }
    }
    let pass = worst <= 1e-10;
    eprintln!("{} max deviation {worst:e} over {mixtures} mixtures", if pass { "PASS" } else { "FAIL" });
    emit(out, &csv)?;
    Ok(if pass { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify_convergence(
    model: &Path,
    horizon: usize,
    pairs: usize,
    seed: u64,
    deterministic: bool,
    identical: bool,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> Result<i32> {
    let m = read_model(model)?;
    let l = lattice(&m, horizon, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        if deterministic {
            let actions = (0..l.num_agents())
                .map(|n| (0..l.total_views(n)).map(|_| rng.gen_range(0..l.agent_actions(n)) as u32).collect())
                .collect();
            macpomdp_core::policy::DeterministicProfile { actions }.to_profile(&l)
        } else {
            PolicyProfile::random(&l, rng)
        }
    };
    let mut csv = String::from("pair,i,deviation\n");
    let mut pass = true;
    for k in 0..pairs {
        let u = draw(&mut rng);
        let v = if identical { u.clone() } else { draw(&mut rng) };
        let limit = forward_pass(&m, &l, &u)?;
        let mut devs = Vec::with_capacity(20);
        for i in 1..=20 {
            let ui = mix_toward(&u, &v, 1.0 - 0.5f64.powi(i))?;
            let fp = forward_pass(&m, &l, &ui)?;
            let mut dev: f64 = 0.0;
            for t in 1..=l.horizon() {
                for (x, y) in fp.p_level(t).iter().zip(limit.p_level(t)) {
                    dev = dev.max((x - y).abs());
                }
            }
            csv += &format!("{k},{i},{}\n", fmt_g17(dev));
            devs.push(dev);
        }
        let ok = devs[19] <= 1e-6 && devs[2..].windows(2).all(|w| w[1] <= w[0]);
        eprintln!("pair {k}: deviation at i = 20 {:e} {}", devs[19], if ok { "ok" } else { "FAIL" });
        pass &= ok;
    }
    eprintln!("{}", if pass { "PASS" } else { "FAIL" });
    emit(out, &csv)?;
    Ok(if pass { 0 } else { 2 })
}

fn cmd_minimax(games: &[PathBuf], out: &Option<PathBuf>) -> Result<i32> {
    let mut csv = format!("{}\n", MinimaxValues::csv_header());
    let mut pass = true;
    for p in games {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let g = parse_game(&text).with_context(|| format!("parsing {}", p.display()))?;
        let v = MinimaxValues::compute(&g)?;
        let ok = v.chain_holds() && v.v_natural.close(v.v_sharp, 1e-9) && v.minmax_equal();
        if !ok {
            eprintln!("{}: invariant violated", stem(p));
        }
        pass &= ok;
        csv += &v.csv_row(&stem(p));
        csv.push('\n');
    }
    emit(out, &csv)?;
    Ok(if pass { 0 } else { 2 })
}

fn cmd_evaluate(
    model: &Path,
    policy: &Option<PathBuf>,
    horizon: usize,
    eval_horizon: Option<usize>,
    caps: &Caps,
    out: &Option<PathBuf>,
) -> Result<i32> {
    let m = read_model(model)?;
    let l = lattice(&m, horizon, caps)?;
    let (id, u) = match policy {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            (stem(p), parse_policy(&text, &l).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => ("uniform".to_string(), PolicyProfile::uniform(&l)),
    };
    let r = expected_costs(&m, &l, &u, eval_horizon.unwrap_or(horizon))?;
    emit(out, &format!("{}\n{}\n", CostReport::csv_header(m.num_constraints()), r.csv_row(&id)))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    let caps = &cli.caps;
    if caps.max_histories == 0 || caps.max_profiles == 0 {
        bail!("caps must be positive");
    }
    match cli.command {
        Command::Certify { model, tol, seed, horizon, restarts, jobs, out } => {
            if !(tol > 0.0) {
                bail!("tolerance must be positive");
            }
            let params = CertifyParams {
                tol,
                seed,
                decision_horizon: horizon,
                restarts,
                max_histories: caps.max_histories,
                max_profiles: caps.max_profiles,
                ..CertifyParams::default()
            };
            cmd_certify(&model, params, jobs, &out)
        }
        Command::VerifyReplication { model, mixtures, support, horizon, seed, inject_fault, out } => {
            cmd_verify_replication(&model, mixtures, support, horizon, seed, inject_fault, caps, &out)
        }
        Command::VerifyConvergence { model, horizon, pairs, seed, deterministic, identical, out } => {
            cmd_verify_convergence(&model, horizon, pairs, seed, deterministic, identical, caps, &out)
        }
        Command::Minimax { game, out } => cmd_minimax(&game, &out),
        Command::Gen { seed, agents, states, actions, obs, common_obs, k, discount, out } => {
            let dims = Dims { agents, states, common_obs, private_obs: obs, actions, constraints: k, discount };
            emit(&out, &random_instance(seed, dims)?.to_text())?;
            Ok(0)
        }
        Command::DumpLattice { model, horizon, no_prune } => {
            let m = read_model(&model)?;
            if horizon == 0 {
                bail!("horizon must be at least 1");
            }
            let l = build_lattice_with_cap(&m, horizon, !no_prune, caps.max_histories)?;
            emit(&None, &l.dump())?;
            Ok(0)
        }
        Command::Evaluate { model, policy, horizon, eval_horizon, out } => {
            cmd_evaluate(&model, &policy, horizon, eval_horizon, caps, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
