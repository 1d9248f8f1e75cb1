use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::expr::ExpressionTree;
use crate::integrate::{rollout_eval, Trajectory};
use crate::metrics::{aggregate, histogram, mse_over_time, relative_energy_error, sai, Statistic};
use crate::search::{finetune, search_loop, Candidate, SearchState};
use crate::systems::{generate_dataset, Dataset};

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn train(&self) -> PathBuf {
        self.root.join("data/train")
    }
    pub fn test(&self) -> PathBuf {
        self.root.join("data/test")
    }
    pub fn search(&self) -> PathBuf {
        self.root.join("search")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.search().join("checkpoint.json")
    }
    pub fn log(&self) -> PathBuf {
        self.search().join("log.jsonl")
    }
    pub fn pool(&self) -> PathBuf {
        self.search().join("pool.json")
    }
    pub fn finetuned(&self) -> PathBuf {
        self.search().join("finetuned.json")
    }
    pub fn best(&self) -> PathBuf {
        self.search().join("best.json")
    }
    pub fn best_text(&self) -> PathBuf {
        self.search().join("best.txt")
    }
    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }
    pub fn summary(&self) -> PathBuf {
        self.eval().join("summary.json")
    }
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file so a crash never leaves a torn file.
fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Generates and stores both datasets of the experiment.
pub fn gen_data(cfg: &ExperimentConfig, run: &RunDir) -> Result<(Dataset, Dataset)> {
    mkdir(&run.root)?;
    write(&run.config(), cfg.to_json())?;
    let train = generate_dataset(&cfg.train_spec(), cfg.seed)?;
    train.save(&run.train())?;
    let test = generate_dataset(&cfg.test_spec(), cfg.seed)?;
    test.save(&run.test())?;
    for (name, d) in [("train", &train), ("test", &test)] {
        println!(
            "{name}: {} trajectories, t in [{}, {}] step {}, seed {}",
            d.len(),
            d.grid().start,
            d.grid().end(),
            d.grid().step,
            cfg.seed
        );
    }
    Ok((train, test))
}

/// The selected expression together with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestExpression {
    pub tree: ExpressionTree,
    pub score: f64,
    pub loss: Option<f64>,
    pub expression: String,
    pub raw: String,
    pub coefficients: Vec<(String, f64)>,
}

impl BestExpression {
    pub fn new(cfg: &ExperimentConfig, c: &Candidate) -> Result<Self> {
        let tree = ExpressionTree::new(cfg.template(), c.sequence.clone(), c.weights.clone())?;
        let folded = tree.fold();
        Ok(Self {
            expression: folded.render(),
            raw: tree.render(),
            coefficients: folded.coefficients(),
            tree,
            score: c.score,
            loss: c.loss,
        })
    }
}

/// Runs the search (optionally resuming from the checkpoint), fine-tunes the
/// pool and stores the best expression.
pub fn search(cfg: &ExperimentConfig, run: &RunDir, resume: bool) -> Result<Option<BestExpression>> {
    let data = Dataset::load(&run.train())?;
    let template = cfg.template();
    let scfg = cfg.search_config();
    mkdir(&run.search())?;
    write(&run.config(), cfg.to_json())?;

    let mut state = if resume && run.checkpoint().exists() {
        let s: SearchState = read_json(&run.checkpoint())?;
        log::info!("resuming at iteration {}", s.next_iteration);
        s
    } else {
        File::create(run.log()).map_err(|e| Error::io(run.log(), e))?;
        SearchState::new(&template, &cfg.operators, &scfg)?
    };
    let mut log_file = OpenOptions::new()
        .append(true)
        .create(true)
        .open(run.log())
        .map_err(|e| Error::io(run.log(), e))?;

    search_loop(
        &template,
        &cfg.operators,
        &data.trajectories,
        &scfg,
        &mut state,
        |record, state| {
            let line = serde_json::to_string(record)?;
            writeln!(log_file, "{line}").map_err(|e| Error::io(run.log(), e))?;
            write_atomic(&run.checkpoint(), serde_json::to_string(state)?)
        },
    )?;
    write_atomic(&run.checkpoint(), serde_json::to_string(&state)?)?;
    write(&run.pool(), serde_json::to_string_pretty(&state.pool)?)?;

    if state.pool.is_empty() {
        println!("search finished with an empty pool");
        return Ok(None);
    }
    let tuned = finetune(&template, &state.pool, &data.trajectories, &scfg)?;
    write(&run.finetuned(), serde_json::to_string_pretty(&tuned)?)?;
    let best = BestExpression::new(cfg, &tuned[0])?;
    write(&run.best(), serde_json::to_string_pretty(&best)?)?;
    write(&run.best_text(), format!("{}\n", best.expression))?;
    println!("best: {}  (score {:.9})", best.expression, best.score);
    Ok(Some(best))
}

/// Headline numbers from an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub expression: String,
    pub trajectories: usize,
    /// `(trajectory, last valid index)` for rollouts that diverged.
    pub diverged: Vec<(usize, usize)>,
    pub max_mean_mse: Option<f64>,
    pub final_mean_mse: Option<f64>,
    pub max_mean_energy_error: Option<f64>,
    pub final_mean_energy_error: Option<f64>,
    pub sai_max: f64,
    pub sai_p99: f64,
}

fn write_series(path: &Path, times: &[f64], series: &[(usize, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut header = vec!["t".to_string()];
    let stats = [
        ("mean", Statistic::Mean),
        ("median", Statistic::Median),
        ("p25", Statistic::Percentile(25.0)),
        ("p75", Statistic::Percentile(75.0)),
    ];
    let cols: Vec<Vec<f64>> = series.iter().map(|s| s.1.clone()).collect();
    let agg = if cols.is_empty() {
        vec![]
    } else {
        stats
            .iter()
            .map(|(_, s)| aggregate(&cols, *s))
            .collect::<Result<Vec<_>>>()?
    };
    if !agg.is_empty() {
        header.extend(stats.iter().map(|s| s.0.to_string()));
    }
    header.extend(series.iter().map(|(i, _)| format!("traj_{i}")));
    let fmt = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(&header).map_err(fmt)?;
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(agg.iter().map(|a| format!("{:.16e}", a[k])));
        row.extend(series.iter().map(|s| format!("{:.16e}", s.1[k])));
        w.write_record(&row).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_histogram(path: &Path, values: &[f64], bins: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let fmt = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["left", "right", "density"]).map_err(fmt)?;
    for b in histogram(values, bins)? {
        w.write_record([
            format!("{:.16e}", b.left),
            format!("{:.16e}", b.right),
            format!("{:.16e}", b.density),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn flat_sai(data: &[Trajectory]) -> Result<Vec<f64>> {
    let mut all = Vec::new();
    for t in data {
        all.extend(sai(t)?);
    }
    Ok(all)
}

fn max_of(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

/// Rolls `tree` forward from every test initial condition and writes
/// MSE, relative energy error and SAI series plus a summary.
pub fn eval(cfg: &ExperimentConfig, run: &RunDir, tree: &ExpressionTree, data: &Dataset) -> Result<EvalSummary> {
    mkdir(&run.eval())?;
    let scfg = cfg.search_config();
    let grid = data.grid().with_substeps(scfg.substeps)?;
    let system = *data.system();
    let rollouts: Vec<Result<Trajectory>> = {
        use rayon::prelude::*;
        data.trajectories
            .par_iter()
            .map(|t| rollout_eval(tree, tree.weights(), t.initial(), &grid, scfg.scheme))
            .collect()
    };
    let mut mse = Vec::new();
    let mut energy = Vec::new();
    let mut diverged = Vec::new();
    for (i, (r, obs)) in rollouts.into_iter().zip(&data.trajectories).enumerate() {
        match r {
            Ok(pred) => {
                mse.push((i, mse_over_time(&pred, obs)?));
                energy.push((i, relative_energy_error(|s| system.hamiltonian(s), &pred)?));
            }
            Err(Error::Divergence { index }) => diverged.push((i, index)),
            Err(e) => return Err(e),
        }
    }
    let times = data.grid().times();
    write_series(&run.eval().join("mse.csv"), &times, &mse)?;
    write_series(&run.eval().join("energy_error.csv"), &times, &energy)?;
    let sai_series: Vec<(usize, Vec<f64>)> = data
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((i, sai(t)?)))
        .collect::<Result<_>>()?;
    write_series(&run.eval().join("sai.csv"), &times[..times.len() - 1], &sai_series)?;
    let sai_all = flat_sai(&data.trajectories)?;
    write_histogram(&run.eval().join("sai_histogram.csv"), &sai_all, 50)?;
    if let Ok(train) = Dataset::load(&run.train()) {
        let v = flat_sai(&train.trajectories)?;
        write_histogram(&run.eval().join("sai_train_histogram.csv"), &v, 50)?;
    }

    let mean = |s: &[(usize, Vec<f64>)]| -> Result<Option<Vec<f64>>> {
        if s.is_empty() {
            return Ok(None);
        }
        let cols: Vec<Vec<f64>> = s.iter().map(|x| x.1.clone()).collect();
        aggregate(&cols, Statistic::Mean).map(Some)
    };
    let mse_mean = mean(&mse)?;
    let energy_mean = mean(&energy)?;
    let summary = EvalSummary {
        expression: tree.fold().render(),
        trajectories: data.len(),
        diverged,
        max_mean_mse: mse_mean.as_deref().and_then(max_of),
        final_mean_mse: mse_mean.as_ref().and_then(|m| m.last().copied()),
        max_mean_energy_error: energy_mean.as_deref().and_then(max_of),
        final_mean_energy_error: energy_mean.as_ref().and_then(|m| m.last().copied()),
        sai_max: max_of(&sai_all).unwrap_or(0.0),
        sai_p99: crate::metrics::percentile(&sai_all, 99.0)?,
    };
    write(&run.summary(), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "eval: {} trajectories, {} diverged, max mean MSE {:?}, max mean E_rel {:?}",
        summary.trajectories,
        summary.diverged.len(),
        summary.max_mean_mse,
        summary.max_mean_energy_error
    );
    Ok(summary)
}

/// Consolidated view of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub best: BestExpression,
    pub eval: EvalSummary,
}

impl Report {
    pub fn text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("expression: {}\n", self.best.expression));
        s.push_str(&format!("raw:        {}\n", self.best.raw));
        s.push_str(&format!("score:      {:.9}\n", self.best.score));
        if let Some(l) = self.best.loss {
            s.push_str(&format!("loss:       {l:.6e}\n"));
        }
        s.push_str("coefficients:\n");
        for (term, c) in &self.best.coefficients {
            s.push_str(&format!("  {c:>+14.7}  {term}\n"));
        }
        let e = &self.eval;
        s.push_str(&format!(
            "evaluation: {} trajectories, {} diverged\n",
            e.trajectories,
            e.diverged.len()
        ));
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
        s.push_str(&format!("  max mean MSE:    {}\n", opt(e.max_mean_mse)));
        s.push_str(&format!("  final mean MSE:  {}\n", opt(e.final_mean_mse)));
        s.push_str(&format!("  max mean E_rel:  {}\n", opt(e.max_mean_energy_error)));
        s.push_str(&format!("  final mean E_rel: {}\n", opt(e.final_mean_energy_error)));
        s.push_str(&format!("  SAI max {:.6e}, p99 {:.6e}\n", e.sai_max, e.sai_p99));
        s
    }
}

pub fn load_best(run: &RunDir) -> Result<BestExpression> {
    read_json(&run.best())
}

pub fn report(run: &RunDir) -> Result<Report> {
    let best = load_best(run)?;
    let eval: EvalSummary = read_json(&run.summary())?;
    let report = Report { best, eval };
    write(&run.root.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let text = report.text();
    write(&run.root.join("report.txt"), &text)?;
    print!("{text}");
    Ok(report)
}
