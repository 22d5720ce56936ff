//! Trial orchestration and statistics: draw a network realization, run
//! every power-allocation strategy on the identical realization (paired
//! comparison), record spectral-efficiency metrics, and aggregate records
//! across trials into ECDFs and sweep means with confidence intervals.
//!
//! Determinism contract: each (K̃, trial) cell derives its own RNG stream
//! from the master seed, so campaign results are identical whether trials
//! run serially or in parallel, and re-running a campaign with the same
//! config and seed reproduces every output byte for byte. To keep that
//! guarantee, written artifacts never contain timestamps or timing data;
//! per-solve wall times stay in memory only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{
    build_maxmin_gp, build_maxsum_gp, solve_allocation_with, SolveOptions, SolveStatus,
    StrategyKind,
};
use crate::beamforming::{build_gain_table, compute_combiners, compute_precoders};
use crate::channel::build_channel_set;
use crate::link_metrics::{se_report, SeReport};
use crate::scenario::{generate_topology, trial_rng, SystemConfig};
use crate::{Error, Result};

/// Everything recorded about one (trial, strategy) cell. All strategies
/// within a trial consume the identical channel realization, so records
/// with equal `(ktilde, trial)` are directly comparable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Relay-served UE count of the sweep point this record belongs to.
    pub ktilde: usize,
    pub trial: u64,
    pub strategy: StrategyKind,
    pub status: SolveStatus,
    /// The strategy's achieved objective under exact SINRs.
    pub objective: f64,
    /// Whether every budget and backhaul-rate constraint verified at the
    /// returned allocation.
    pub verified: bool,
    /// Access-link SE sums per group, exact SINRs, no capping.
    pub sum_se_u_gnb: f64,
    pub sum_se_d_gnb: f64,
    pub sum_se_u_iab: f64,
    pub sum_se_d_iab: f64,
    /// Relay-area sums after capping each direction at the SE its
    /// backhaul stream carries (the physical bottleneck); equal to the
    /// raw sums when capping is disabled or inactive.
    pub sum_se_u_iab_capped: f64,
    pub sum_se_d_iab_capped: f64,
    /// True when capping actually reduced a relay-area sum.
    pub capped: bool,
    /// Per-group minimum access SINR (`None` for empty groups).
    pub min_sinr_u_gnb: Option<f64>,
    pub min_sinr_d_gnb: Option<f64>,
    pub min_sinr_u_iab: Option<f64>,
    pub min_sinr_d_iab: Option<f64>,
    /// Minimum over the area's UEs of each UE's UL+DL SE (uncapped).
    pub min_ue_se_gnb_area: Option<f64>,
    pub min_ue_se_iab_area: Option<f64>,
    /// SE of the backhaul stream carrying relay-downlink data (received
    /// at the relay) and relay-uplink data (received at the gNB).
    pub se_backhaul_dl: f64,
    pub se_backhaul_ul: f64,
    /// Solve wall time. In-memory diagnostic only: excluded from every
    /// written artifact so outputs stay byte-reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Empirical CDF of one metric for one (K̃, strategy, group) cell:
/// `probs[i]` is the fraction of samples ≤ `values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub metric: String,
    pub strategy: StrategyKind,
    pub group: String,
    pub ktilde: usize,
    /// Sample values, ascending.
    pub values: Vec<f64>,
    /// Cumulative probabilities (i+1)/n, nondecreasing in (0, 1].
    pub probs: Vec<f64>,
}

impl EcdfSeries {
    /// Build from unsorted samples (NaNs rejected upstream by
    /// construction: SEs of finite SINRs are finite).
    pub fn from_samples(
        metric: &str,
        strategy: StrategyKind,
        group: &str,
        ktilde: usize,
        mut samples: Vec<f64>,
    ) -> Self {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let probs = (0..samples.len()).map(|i| (i + 1) as f64 / n).collect();
        EcdfSeries {
            metric: metric.into(),
            strategy,
            group: group.into(),
            ktilde,
            values: samples,
            probs,
        }
    }

    /// Fraction of samples ≤ `x` (right-continuous step function; 1.0 at
    /// and beyond the largest sample).
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|v| *v <= x);
        idx as f64 / self.values.len() as f64
    }
}

/// One sweep-curve point: mean metric with a 95% normal-approximation
/// confidence interval over `n` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ktilde: usize,
    pub strategy: StrategyKind,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Average total sum SE versus the relay-UE count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Metric the sweep averages (the capped total sum SE).
    pub metric: String,
    pub points: Vec<SweepPoint>,
}

/// Final program listing of one sweep point's geometric program (the
/// trial-0 realization), attached when program dumps are requested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramDump {
    pub ktilde: usize,
    pub strategy: StrategyKind,
    pub listing: String,
}

/// Campaign-level knobs beyond the system config.
#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Relay-UE counts to sweep; empty means the config's `k_iab` only.
    pub ktilde_list: Vec<usize>,
    /// Run trials on all cores (results are identical either way).
    pub parallel: bool,
    /// AM-GM re-weighting rounds per GP solve.
    pub condense_iters: usize,
    /// Attach the trial-0 program listing of every (K̃, GP strategy) cell.
    pub dump_gp: bool,
}

/// Everything a campaign produced, ready for [`write_outputs`].
#[derive(Debug, Clone, Serialize)]
pub struct CampaignResult {
    /// Exact configuration the campaign ran with (seed included).
    pub config: SystemConfig,
    pub seed: u64,
    pub n_trials: u64,
    pub ktilde_list: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    /// All records, sorted by (ktilde, trial, requested strategy order).
    pub records: Vec<TrialRecord>,
    pub ecdfs: Vec<EcdfSeries>,
    pub sweep: SweepResult,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dumps: Vec<ProgramDump>,
}

/// Output flavor: CSV always writes the ECDF/sweep/trial tables plus a
/// `run.json` metadata echo; JSON additionally mirrors the full
/// [`CampaignResult`] into `results.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Output(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// The (metric, group) pairs aggregated into ECDFs.
const ECDF_METRICS: [(&str, &str); 5] = [
    ("sum_se", "gnb_area"),
    ("sum_se", "iab_area"),
    ("sum_se", "total"),
    ("min_ue_se", "gnb_area"),
    ("min_ue_se", "iab_area"),
];

/// Extract one scalar metric from a record (`None` when undefined, e.g.
/// a per-UE minimum over an empty area).
fn metric_value(r: &TrialRecord, metric: &str, group: &str) -> Option<f64> {
    match (metric, group) {
        ("sum_se", "gnb_area") => Some(r.sum_se_u_gnb + r.sum_se_d_gnb),
        ("sum_se", "iab_area") => Some(r.sum_se_u_iab_capped + r.sum_se_d_iab_capped),
        ("sum_se", "total") => Some(
            r.sum_se_u_gnb + r.sum_se_d_gnb + r.sum_se_u_iab_capped + r.sum_se_d_iab_capped,
        ),
        ("min_ue_se", "gnb_area") => r.min_ue_se_gnb_area,
        ("min_ue_se", "iab_area") => r.min_ue_se_iab_area,
        _ => None,
    }
}

fn make_record(
    cfg: &SystemConfig,
    trial: u64,
    strategy: StrategyKind,
    status: SolveStatus,
    objective: f64,
    verified: bool,
    rep: &SeReport,
    wall_time_s: f64,
) -> TrialRecord {
    let (capped_u, capped_d) = if cfg.enforce_backhaul_cap {
        (
            rep.sum_se_u_iab.min(rep.se_u_gnb_0),
            rep.sum_se_d_iab.min(rep.se_u_iab_0),
        )
    } else {
        (rep.sum_se_u_iab, rep.sum_se_d_iab)
    };
    let min_ue = |ul: &[f64], dl: &[f64]| -> Option<f64> {
        ul.iter().zip(dl).map(|(u, d)| u + d).reduce(f64::min)
    };
    TrialRecord {
        ktilde: cfg.k_iab,
        trial,
        strategy,
        status,
        objective,
        verified,
        sum_se_u_gnb: rep.sum_se_u_gnb,
        sum_se_d_gnb: rep.sum_se_d_gnb,
        sum_se_u_iab: rep.sum_se_u_iab,
        sum_se_d_iab: rep.sum_se_d_iab,
        sum_se_u_iab_capped: capped_u,
        sum_se_d_iab_capped: capped_d,
        capped: capped_u < rep.sum_se_u_iab || capped_d < rep.sum_se_d_iab,
        min_sinr_u_gnb: rep.min_sinr_u_gnb,
        min_sinr_d_gnb: rep.min_sinr_d_gnb,
        min_sinr_u_iab: rep.min_sinr_u_iab,
        min_sinr_d_iab: rep.min_sinr_d_iab,
        min_ue_se_gnb_area: min_ue(&rep.se_u_gnb, &rep.se_d_gnb),
        min_ue_se_iab_area: min_ue(&rep.se_u_iab, &rep.se_d_iab),
        se_backhaul_dl: rep.se_u_iab_0,
        se_backhaul_ul: rep.se_u_gnb_0,
        wall_time_s,
    }
}

/// Run one trial with default solve options; see [`run_trial_with`].
pub fn run_trial(
    cfg: &SystemConfig,
    trial: u64,
    strategies: &[StrategyKind],
) -> Result<Vec<TrialRecord>> {
    run_trial_with(cfg, trial, strategies, &SolveOptions::default())
}

/// Draw the trial's network realization (topology → channels →
/// beamforming → gain table) and solve every strategy on it, returning
/// one record per strategy in the order given. Deterministic per
/// (config seed, `cfg.k_iab`, trial index); solver-level failures are
/// carried in each record's status rather than discarding the trial.
pub fn run_trial_with(
    cfg: &SystemConfig,
    trial: u64,
    strategies: &[StrategyKind],
    opts: &SolveOptions,
) -> Result<Vec<TrialRecord>> {
    let mut rng = trial_rng(cfg.seed, cfg.k_iab, trial);
    let topology = generate_topology(cfg, &mut rng);
    let channels = build_channel_set(&topology, cfg, &mut rng)?;
    let precoders = compute_precoders(&channels)?;
    let combiners = compute_combiners(&channels, &precoders);
    let gains = build_gain_table(&channels, &precoders, &combiners, cfg)?;
    let mut records = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let start = Instant::now();
        let res = solve_allocation_with(strategy, &gains, cfg, opts)?;
        let wall = start.elapsed().as_secs_f64();
        let rep = se_report(&gains, &res.allocation);
        records.push(make_record(
            cfg,
            trial,
            strategy,
            res.status,
            res.objective,
            res.verification.all_ok,
            &rep,
            wall,
        ));
    }
    Ok(records)
}

/// Run a campaign with default options; see [`run_campaign_with`].
pub fn run_campaign(
    cfg: &SystemConfig,
    n_trials: u64,
    strategies: &[StrategyKind],
) -> Result<CampaignResult> {
    run_campaign_with(cfg, n_trials, strategies, &CampaignOptions::default())
}

/// Run `n_trials` per sweep point and aggregate: ECDFs per (K̃, metric,
/// group, strategy) and the sweep of mean capped total sum SE over the
/// K̃ list. Trials are independent work units; aggregation is a single
/// sequential reduction, so serial and parallel execution produce
/// identical results.
pub fn run_campaign_with(
    cfg: &SystemConfig,
    n_trials: u64,
    strategies: &[StrategyKind],
    options: &CampaignOptions,
) -> Result<CampaignResult> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let ktilde_list = if options.ktilde_list.is_empty() {
        vec![cfg.k_iab]
    } else {
        options.ktilde_list.clone()
    };
    let solve_opts = SolveOptions {
        condense_iters: options.condense_iters,
        ..SolveOptions::default()
    };
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut dumps = Vec::new();
    for &ktilde in &ktilde_list {
        let cfg_kt = SystemConfig { k_iab: ktilde, ..cfg.clone() };
        let run = |t: u64| run_trial_with(&cfg_kt, t, strategies, &solve_opts);
        let per_trial: Vec<Result<Vec<TrialRecord>>> = if options.parallel {
            (0..n_trials).into_par_iter().map(run).collect()
        } else {
            (0..n_trials).map(run).collect()
        };
        for recs in per_trial {
            records.extend(recs?);
        }
        if options.dump_gp {
            dumps.extend(dump_programs(&cfg_kt, strategies)?);
        }
    }
    let rank = |s: StrategyKind| strategies.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        (a.ktilde, a.trial, rank(a.strategy)).cmp(&(b.ktilde, b.trial, rank(b.strategy)))
    });

    let mut ecdfs = Vec::new();
    let mut points = Vec::new();
    for &ktilde in &ktilde_list {
        for (metric, group) in ECDF_METRICS {
            for &strategy in strategies {
                let samples: Vec<f64> = records
                    .iter()
                    .filter(|r| r.ktilde == ktilde && r.strategy == strategy)
                    .filter_map(|r| metric_value(r, metric, group))
                    .collect();
                if !samples.is_empty() {
                    ecdfs.push(EcdfSeries::from_samples(metric, strategy, group, ktilde, samples));
                }
            }
        }
        for &strategy in strategies {
            let samples: Vec<f64> = records
                .iter()
                .filter(|r| r.ktilde == ktilde && r.strategy == strategy)
                .filter_map(|r| metric_value(r, "sum_se", "total"))
                .collect();
            if let Some(point) = sweep_point(ktilde, strategy, &samples) {
                points.push(point);
            }
        }
    }
    Ok(CampaignResult {
        config: cfg.clone(),
        seed: cfg.seed,
        n_trials,
        ktilde_list,
        strategies: strategies.to_vec(),
        records,
        ecdfs,
        sweep: SweepResult { metric: "sum_se_total".into(), points },
        dumps,
    })
}

/// Mean with a 95% normal-approximation confidence interval
/// (±1.96·s/√n, sample standard deviation; zero-width for n = 1).
fn sweep_point(ktilde: usize, strategy: StrategyKind, samples: &[f64]) -> Option<SweepPoint> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = if samples.len() > 1 {
        (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / n.sqrt();
    Some(SweepPoint {
        ktilde,
        strategy,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        n: samples.len(),
    })
}

/// Program listings for the GP strategies on the sweep point's trial-0
/// realization (building only; no solve).
fn dump_programs(cfg_kt: &SystemConfig, strategies: &[StrategyKind]) -> Result<Vec<ProgramDump>> {
    let mut rng = trial_rng(cfg_kt.seed, cfg_kt.k_iab, 0);
    let topology = generate_topology(cfg_kt, &mut rng);
    let channels = build_channel_set(&topology, cfg_kt, &mut rng)?;
    let precoders = compute_precoders(&channels)?;
    let combiners = compute_combiners(&channels, &precoders);
    let gains = build_gain_table(&channels, &precoders, &combiners, cfg_kt)?;
    let mut out = Vec::new();
    for &strategy in strategies {
        let build = match strategy {
            StrategyKind::Uniform => continue,
            StrategyKind::MaxMin => build_maxmin_gp(&gains, cfg_kt)?,
            StrategyKind::MaxSumSe => build_maxsum_gp(&gains, cfg_kt)?,
        };
        out.push(ProgramDump {
            ktilde: cfg_kt.k_iab,
            strategy,
            listing: build.problem.dump(),
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render the per-K̃ ECDF table (`metric,strategy,group,value,prob`).
fn ecdf_csv(result: &CampaignResult, ktilde: usize) -> String {
    let mut out = String::from("metric,strategy,group,value,prob\n");
    for series in result.ecdfs.iter().filter(|s| s.ktilde == ktilde) {
        for (v, p) in series.values.iter().zip(&series.probs) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                series.metric,
                series.strategy.as_str(),
                series.group,
                v,
                p
            );
        }
    }
    out
}

/// Render the sweep table (`ktilde,strategy,mean,ci_low,ci_high`).
fn sweep_csv(result: &CampaignResult) -> String {
    let mut out = String::from("ktilde,strategy,mean,ci_low,ci_high\n");
    for p in &result.sweep.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.ktilde,
            p.strategy.as_str(),
            p.mean,
            p.ci_low,
            p.ci_high
        );
    }
    out
}

/// Render the full per-record table.
fn trials_csv(result: &CampaignResult) -> String {
    let mut out = String::from(
        "ktilde,trial,strategy,status,objective,verified,\
         sum_se_u_gnb,sum_se_d_gnb,sum_se_u_iab,sum_se_d_iab,\
         sum_se_u_iab_capped,sum_se_d_iab_capped,capped,\
         min_sinr_u_gnb,min_sinr_d_gnb,min_sinr_u_iab,min_sinr_d_iab,\
         min_ue_se_gnb_area,min_ue_se_iab_area,se_backhaul_dl,se_backhaul_ul\n",
    );
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.ktilde,
            r.trial,
            r.strategy.as_str(),
            r.status.as_str(),
            r.objective,
            r.verified,
            r.sum_se_u_gnb,
            r.sum_se_d_gnb,
            r.sum_se_u_iab,
            r.sum_se_d_iab,
            r.sum_se_u_iab_capped,
            r.sum_se_d_iab_capped,
            r.capped,
            fmt_opt(r.min_sinr_u_gnb),
            fmt_opt(r.min_sinr_d_gnb),
            fmt_opt(r.min_sinr_u_iab),
            fmt_opt(r.min_sinr_d_iab),
            fmt_opt(r.min_ue_se_gnb_area),
            fmt_opt(r.min_ue_se_iab_area),
            r.se_backhaul_dl,
            r.se_backhaul_ul
        );
    }
    out
}

/// Run metadata echoed next to every campaign's tables.
#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    seed: u64,
    version: String,
    revision: &'static str,
    n_trials: u64,
    ktilde_list: &'a [usize],
    strategies: Vec<&'static str>,
    config: &'a SystemConfig,
}

/// Source revision stamped at compile time (`FDIAB_GIT_DESCRIBE`), with a
/// placeholder when the build was not stamped.
fn build_revision() -> &'static str {
    option_env!("FDIAB_GIT_DESCRIBE").unwrap_or("untracked")
}

/// Write the campaign's artifacts into `dir` (created if missing):
/// `ecdf_kt{n}.csv` per sweep point, `sweep.csv`, `trials.csv`, and a
/// `run.json` metadata echo; JSON format adds a full `results.json`
/// mirror; program dumps (when attached) land in
/// `gp_kt{n}_{strategy}.txt`. Returns the written paths.
pub fn write_outputs(
    result: &CampaignResult,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    if result.records.is_empty() || result.strategies.is_empty() {
        return Err(Error::Output("nothing to write".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, contents: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    for &ktilde in &result.ktilde_list {
        emit(format!("ecdf_kt{ktilde}.csv"), ecdf_csv(result, ktilde))?;
    }
    emit("sweep.csv".into(), sweep_csv(result))?;
    emit("trials.csv".into(), trials_csv(result))?;
    let meta = RunMetadata {
        seed: result.seed,
        version: format!("fdiab {}", env!("CARGO_PKG_VERSION")),
        revision: build_revision(),
        n_trials: result.n_trials,
        ktilde_list: &result.ktilde_list,
        strategies: result.strategies.iter().map(|s| s.as_str()).collect(),
        config: &result.config,
    };
    emit("run.json".into(), serde_json::to_string_pretty(&meta)? + "\n")?;
    if format == OutputFormat::Json {
        emit(
            "results.json".into(),
            serde_json::to_string_pretty(result)? + "\n",
        )?;
    }
    for dump in &result.dumps {
        emit(
            format!("gp_kt{}_{}.txt", dump.ktilde, dump.strategy.as_str()),
            dump.listing.clone(),
        )?;
    }
    Ok(written)
}
