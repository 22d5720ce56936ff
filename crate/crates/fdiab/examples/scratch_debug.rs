//! Temporary debugging harness for a single slow trial.

use fdiab::allocation::{SolveOptions, StrategyKind};
use fdiab::montecarlo::run_trial_with;
use fdiab::scenario::{ArrayDims, SystemConfig};

fn main() {
    let cfg = SystemConfig {
        k_gnb: 4,
        k_iab: 2,
        n_gnb: ArrayDims { horizontal: 16, vertical: 4 },
        n_iab: ArrayDims { horizontal: 8, vertical: 4 },
        n_ue: ArrayDims { horizontal: 4, vertical: 2 },
        seed: 11,
        ..SystemConfig::default()
    };
    let opts = SolveOptions { condense_iters: 3, ..SolveOptions::default() };
    let records =
        run_trial_with(&cfg, 57, &[StrategyKind::MaxSumSe], &opts).expect("trial runs");
    for r in &records {
        eprintln!(
            "strategy={:?} status={:?} objective={} verified={}",
            r.strategy, r.status, r.objective, r.verified
        );
    }
}
