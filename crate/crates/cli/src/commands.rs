use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use lfoeq::analysis::{
    equivalent, pooled_std, run_cell, sweep_cells, uniqueness_report, xi_bound_check, NoiseSweep, SeedSummary,
    XiBoundReport,
};
use lfoeq::env::Env;
use lfoeq::expert::{export_dataset, load_dataset, train_expert, DatasetView, ExpertError, TrajectoryDataset};
use lfoeq::imitation::{train, LearningCurve, Mode};
use lfoeq::neural::GaussianPolicy;
use lfoeq::tabular::verify_suite;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::plot::{render, Band};

/// Output root, resolved config and worker count shared by every command.
pub struct Context {
    pub root: PathBuf,
    pub cfg: ExperimentConfig,
}

impl Context {
    fn env_id(&self) -> &str {
        self.cfg.get("env")
    }

    fn env_dir(&self) -> PathBuf {
        self.root.join(self.env_id())
    }

    fn expert_dir(&self) -> PathBuf {
        self.env_dir().join("expert")
    }

    fn dataset_path(&self) -> PathBuf {
        match self.cfg.get("imitate.dataset") {
            "" => self.expert_dir().join("dataset.lfoeq"),
            p => PathBuf::from(p),
        }
    }

    fn env(&self) -> Result<Env> {
        Ok(Env::new(self.env_id(), 0.0, 0)?)
    }
}

fn prepare_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.txt"), cfg.resolved())?;
    Ok(())
}

pub fn expert(ctx: &Context) -> Result<()> {
    let env = ctx.env()?;
    let ecfg = ctx.cfg.expert()?;
    let (run, converged) = match train_expert(&env, &ecfg) {
        Ok(run) => (run, true),
        Err(ExpertError::BudgetExhausted(run)) => {
            eprintln!("warning: step budget exhausted before a plateau; keeping the best policy");
            (*run, false)
        }
        Err(e) => return Err(e.into()),
    };
    let dir = ctx.expert_dir();
    prepare_dir(&dir, &ctx.cfg)?;
    run.policy.save(&dir.join("policy.ckpt"))?;
    fs::write(dir.join("curve.csv"), run.curve.to_csv())?;
    let n = ctx.cfg.usize("expert.n_trajectories")?;
    let seed = ctx.cfg.u64("expert.dataset_seed")?;
    let ds = export_dataset(&env, &run.policy, n, seed, Some(&dir.join("dataset.lfoeq")))?;
    fs::write(dir.join("dataset.csv"), ds.to_csv())?;
    fs::write(
        dir.join("summary.csv"),
        format!(
            "eval_return,eval_std,dataset_return,cycles,converged\n{},{},{},{},{}\n",
            run.eval_return,
            run.eval_std,
            ds.mean_return(),
            run.cycles,
            converged
        ),
    )?;
    println!(
        "expert {}: eval return {:.4} ± {:.4} after {} cycles; {} trajectories (mean return {:.4}) in {}",
        ctx.env_id(),
        run.eval_return,
        run.eval_std,
        run.cycles,
        n,
        ds.mean_return(),
        dir.display()
    );
    Ok(())
}

fn load_expert_data(ctx: &Context, cfg: &ExperimentConfig) -> Result<TrajectoryDataset> {
    let path = ctx.dataset_path();
    let n = cfg.usize("imitate.n_trajectories")?;
    let seed = cfg.u64("imitate.subsample_seed")?;
    let ds = load_dataset(&path, DatasetView::Lfd, (n > 0).then_some(n), seed)
        .with_context(|| format!("loading expert data from {} (run `expert` first?)", path.display()))?;
    if ds.env_id != ctx.env_id() {
        bail!("dataset {} was recorded on `{}`, config says `{}`", path.display(), ds.env_id, ctx.env_id());
    }
    Ok(ds)
}

/// Final returns per mode, in seed order.
pub struct ImitationResults {
    pub finals: Vec<(Mode, Vec<f64>)>,
}

fn curve_name(mode: Mode, seed: u64) -> String {
    format!("{mode}_seed{seed}.csv")
}

/// Trains every (mode, seed) pair of `cfg` and writes curves, the
/// aggregate table and a plot into `dir`.
fn run_imitation(ctx: &Context, cfg: &ExperimentConfig, dir: &Path) -> Result<ImitationResults> {
    let env = ctx.env()?;
    let ds = load_expert_data(ctx, cfg)?;
    let seeds = cfg.seeds()?;
    let modes = cfg.modes()?;
    prepare_dir(dir, cfg)?;
    let cells: Vec<(Mode, u64)> = modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let curves: Vec<LearningCurve> = cells
        .par_iter()
        .map(|&(mode, seed)| -> Result<LearningCurve> {
            let icfg = cfg.imitation(mode, seed)?;
            let data = match mode {
                Mode::Gail => ds.clone(),
                Mode::Gaifo => ds.strip_actions(),
            };
            let curve = train(&env, &data, &icfg)?.curve;
            fs::write(dir.join(curve_name(mode, seed)), curve.to_csv())?;
            eprintln!("{} {mode} seed {seed}: final return {:.4}", env.id(), curve.final_return());
            Ok(curve)
        })
        .collect::<Result<_>>()?;

    let mut aggregate = String::from("mode,seed,final_return\n");
    let mut finals = Vec::new();
    let mut bands = Vec::new();
    for &mode in &modes {
        let idx: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].0 == mode).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| curves[i].final_return()).collect();
        for (&i, x) in idx.iter().zip(&xs) {
            let _ = writeln!(aggregate, "{mode},{},{x}", cells[i].1);
        }
        let group: Vec<LearningCurve> = idx.iter().map(|&i| curves[i].clone()).collect();
        bands.extend(Band::from_curves(mode.as_str(), &group));
        finals.push((mode, xs));
    }
    for (mode, xs) in &finals {
        let s = SeedSummary::of(xs);
        let _ = writeln!(aggregate, "# {mode} mean={} std={} n={}", s.mean, s.std, s.n);
    }
    fs::write(dir.join("aggregate.csv"), aggregate)?;
    fs::write(dir.join("curves.svg"), render(&format!("{} imitation", ctx.env_id()), &bands))?;
    Ok(ImitationResults { finals })
}

fn equivalence_line(results: &ImitationResults) -> Option<String> {
    let get = |m: Mode| results.finals.iter().find(|(x, _)| *x == m).map(|(_, v)| SeedSummary::of(v));
    let (g, o) = (get(Mode::Gail)?, get(Mode::Gaifo)?);
    Some(format!(
        "|gail - gaifo| = {:.4}, pooled std = {:.4}: {}",
        (g.mean - o.mean).abs(),
        pooled_std(&g, &o),
        if equivalent(&g, &o) { "equivalent" } else { "not equivalent" }
    ))
}

pub fn imitate(ctx: &Context) -> Result<()> {
    let dir = ctx.env_dir().join("imitate");
    let results = run_imitation(ctx, &ctx.cfg, &dir)?;
    for (mode, xs) in &results.finals {
        println!("{} {mode}: {:.3} over {} seeds", ctx.env_id(), SeedSummary::of(xs), xs.len());
    }
    if let Some(line) = equivalence_line(&results) {
        println!("{line}");
    }
    println!("curves in {}", dir.display());
    Ok(())
}

pub fn ablate(ctx: &Context) -> Result<()> {
    let kind = ctx.cfg.get("ablate.kind").to_string();
    let key = match kind.as_str() {
        "input_norm" | "spectral_norm" | "transition_deltas" => format!("imitation.{kind}"),
        "n_trajectories" => "imitate.n_trajectories".to_string(),
        other => bail!("unknown ablation `{other}` (input_norm, spectral_norm, transition_deltas or n_trajectories)"),
    };
    let values = ctx.cfg.list("ablate.values");
    if values.is_empty() {
        bail!("`ablate.values` is empty");
    }
    let base = ctx.env_dir().join("ablate");
    let mut table = String::from("kind,value,mode,mean,std,n\n");
    for value in &values {
        let mut cfg = ctx.cfg.clone();
        cfg.set(&key, value)?;
        let results = run_imitation(ctx, &cfg, &base.join(format!("{kind}={value}")))?;
        for (mode, xs) in &results.finals {
            let s = SeedSummary::of(xs);
            let _ = writeln!(table, "{kind},{value},{mode},{},{},{}", s.mean, s.std, s.n);
            println!("{kind}={value} {mode}: {s:.3}");
        }
    }
    fs::write(base.join("summary.csv"), table)?;
    Ok(())
}

/// Up to `n` states from the dataset, cycling when it holds fewer.
fn dataset_states(ds: &TrajectoryDataset, n: usize) -> DMatrix<f64> {
    let all: Vec<&[f64]> = ds.steps().map(|s| s.state.as_slice()).collect();
    if all.is_empty() {
        return DMatrix::zeros(ds.state_dim, 0);
    }
    DMatrix::from_fn(ds.state_dim, n, |r, c| all[c % all.len()][r])
}

pub fn analyze(ctx: &Context) -> Result<()> {
    let env = ctx.env()?;
    let dir = ctx.env_dir().join("analyze");
    prepare_dir(&dir, &ctx.cfg)?;
    let ds = load_expert_data(ctx, &ctx.cfg)?;
    let mut text = String::new();

    let probe = ctx.cfg.usize("analyze.probe_candidates")?;
    let uniq = uniqueness_report(env.model(), &ds, probe, 0)?;
    fs::write(dir.join("uniqueness.csv"), uniq.to_csv())?;
    let _ = writeln!(text, "uniqueness: {}", uniq.summary());

    let policy_path = ctx.expert_dir().join("policy.ckpt");
    let policy = GaussianPolicy::load(&policy_path)
        .with_context(|| format!("loading expert policy {}", policy_path.display()))?;
    let states = dataset_states(&ds, ctx.cfg.usize("analyze.xi_states")?);
    let grid = ctx.cfg.usize("analyze.grid_points")?;
    let mut xi_csv = format!("{}\n", XiBoundReport::csv_header());
    for delta in ctx.cfg.floats("analyze.deltas")? {
        let r = xi_bound_check(&policy, &states, delta, grid, 0)?;
        xi_csv.push_str(&r.csv_row());
        xi_csv.push('\n');
        let _ = writeln!(
            text,
            "xi: delta {delta}: {} samples ({} skipped), max |xi - 1| {:.4e}, {} bracket violations",
            r.n_samples, r.skipped, r.max_xi_deviation, r.bound_violations
        );
    }
    fs::write(dir.join("xi.csv"), xi_csv)?;

    if ctx.cfg.bool("analyze.sweep")? {
        let seeds = ctx.cfg.seeds()?;
        let base = ctx.cfg.imitation(Mode::Gail, 0)?;
        let cells = sweep_cells(&ctx.cfg.floats("analyze.epsilons")?, &seeds)?;
        let results = cells
            .par_iter()
            .map(|cell| -> Result<_> {
                let curve = run_cell(&env, &ds, &base, cell)?;
                fs::write(
                    dir.join(format!("sweep_eps{}_{}", cell.epsilon, curve_name(cell.mode, cell.seed))),
                    curve.to_csv(),
                )?;
                eprintln!("sweep ε={} {} seed {}: {:.4}", cell.epsilon, cell.mode, cell.seed, curve.final_return());
                Ok((*cell, curve.final_return()))
            })
            .collect::<Result<Vec<_>>>()?;
        let sweep = NoiseSweep::aggregate(&seeds, &results);
        fs::write(dir.join("sweep_detail.csv"), sweep.detail_csv())?;
        fs::write(dir.join("sweep_summary.csv"), sweep.summary_csv())?;
        let _ = writeln!(text, "noise sweep:\n{}", sweep.summary_text());
    }
    fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Decomposition-residual tolerance of the tabular suite.
const TABULAR_TOL: f64 = 1e-10;

pub fn tabular_verify(ctx: &Context) -> Result<()> {
    let report = verify_suite(
        ctx.cfg.usize("tabular.n_random")?,
        ctx.cfg.usize("tabular.n_unique")?,
        ctx.cfg.usize("tabular.pairs")?,
        ctx.cfg.u64("tabular.seed")?,
    )?;
    let dir = ctx.root.join("tabular");
    prepare_dir(&dir, &ctx.cfg)?;
    let text = format!("{}\nmax decomposition residual {:.3e}\n", report.summary(), report.max_decomposition_residual);
    fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    if !report.passes(TABULAR_TOL) {
        bail!("tabular identities violated beyond {TABULAR_TOL:e}");
    }
    Ok(())
}

/// Final returns of every `<mode>_seed<k>.csv` curve in `dir`, by mode.
fn read_finals(dir: &Path, mode: Mode) -> Result<Vec<f64>> {
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    let prefix = format!("{mode}_seed");
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".csv")) {
            if let Ok(seed) = seed.parse() {
                files.push((seed, path));
            }
        }
    }
    files.sort();
    files
        .iter()
        .map(|(_, p)| Ok(LearningCurve::from_csv(&fs::read_to_string(p)?)?.final_return()))
        .collect()
}

pub fn report(ctx: &Context) -> Result<()> {
    let mut rows: Vec<(String, SeedSummary, String)> = Vec::new();
    let summary = ctx.expert_dir().join("summary.csv");
    if let Ok(text) = fs::read_to_string(&summary) {
        let fields: Vec<&str> = text.lines().nth(1).unwrap_or("").split(',').collect();
        if let (Some(m), Some(s)) = (fields.first(), fields.get(1)) {
            let (mean, std) = (m.parse()?, s.parse()?);
            let episodes = ctx.cfg.expert()?.rl.eval_episodes;
            rows.push(("expert".into(), SeedSummary { n: episodes, mean, std }, format!("{episodes} episodes")));
        }
    }
    let imitate = ctx.env_dir().join("imitate");
    let mut per_mode = Vec::new();
    for mode in [Mode::Gail, Mode::Gaifo] {
        let xs = if imitate.is_dir() { read_finals(&imitate, mode)? } else { Vec::new() };
        if !xs.is_empty() {
            let s = SeedSummary::of(&xs);
            rows.push((mode.to_string(), s, format!("{} seeds", xs.len())));
            per_mode.push((mode, xs));
        }
    }
    if rows.is_empty() {
        bail!("nothing to report under {}", ctx.env_dir().display());
    }
    let mut text = format!("{}\n{:<8} {:>22}  {}\n", ctx.env_id(), "method", "return (mean±std)", "n");
    let mut csv = String::from("method,mean,std,n\n");
    for (name, s, n) in &rows {
        let _ = writeln!(text, "{name:<8} {:>22}  {n}", format!("{s:.2}"));
        let _ = writeln!(csv, "{name},{},{},{}", s.mean, s.std, s.n);
    }
    if let Some(line) = equivalence_line(&ImitationResults { finals: per_mode }) {
        let _ = writeln!(text, "{line}");
    }
    fs::create_dir_all(ctx.env_dir())?;
    fs::write(ctx.env_dir().join("report.txt"), &text)?;
    fs::write(ctx.env_dir().join("report.csv"), csv)?;
    print!("{text}");
    Ok(())
}
