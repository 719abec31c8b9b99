//! The six pipeline subcommands. Each one reads earlier artifacts from the
//! output directory, runs the corresponding core stage, and writes its own
//! artifacts atomically.

use std::path::{Path, PathBuf};

use persuade_core::design::{self, SearchOutcome};
use persuade_core::eval::{
    self, estimate_revenue_mc, residual_analysis, signal_variates, simulate_bids_under_policy,
    EvalMode,
};
use persuade_core::ledger::{Ledger, LedgerRecord};
use persuade_core::market;
use persuade_core::predictor::{
    build_features, rank_leaderboard, regression_metrics, score_combo, split_dataset,
    train_gbm_traced, Dataset, GbmModel, LeaderboardEntry,
};
use persuade_core::seed::substream;

use crate::config::ValidatedExperiment;
use crate::error::CliError;
use crate::formats::{self, OptimizeReport, OutputPaths, SplitRows, TrainMetrics, WinnerSummary};
use crate::manifest;

/// Everything a command needs: the validated experiment, where to write,
/// and the training thread budget.
pub struct Context {
    pub experiment: ValidatedExperiment,
    pub paths: OutputPaths,
    pub threads: Option<usize>,
}

impl Context {
    pub fn new(experiment: ValidatedExperiment, out: PathBuf, threads: Option<usize>) -> Self {
        Self {
            experiment,
            paths: OutputPaths::new(out),
            threads,
        }
    }
}

/// `generate`: advertiser population and auction instances.
pub fn cmd_generate(ctx: &Context) -> Result<(), CliError> {
    let x = &ctx.experiment;
    formats::atomic_write(&ctx.paths.config(), &x.config.canonical_bytes())?;

    let population =
        market::generate_advertisers(&x.market).map_err(|e| CliError::Other(e.to_string()))?;
    let instances =
        market::generate_instances(&x.market).map_err(|e| CliError::Other(e.to_string()))?;
    formats::write_population(&ctx.paths.population(), &population)?;
    formats::write_instances(&ctx.paths.instances(), &instances)?;

    let mean_budget = population.iter().map(|p| p.budget).sum::<f64>() / population.len() as f64;
    let mut state_counts = vec![0usize; x.states.len()];
    for instance in &instances {
        state_counts[instance.true_state] += 1;
    }
    println!(
        "generated {} advertisers (mean budget {mean_budget:.2})",
        population.len()
    );
    println!("generated {} auction instances", instances.len());
    for (state, count) in state_counts.iter().enumerate() {
        println!(
            "  state {} ({}): {:.4}",
            state,
            x.states.labels()[state],
            *count as f64 / instances.len() as f64
        );
    }
    println!("config digest {}", x.config.digest_hex());
    Ok(())
}

/// `simulate`: behavioral bid dataset and the public ledger under one
/// named policy.
pub fn cmd_simulate(ctx: &Context, policy_name: &str) -> Result<(), CliError> {
    let x = &ctx.experiment;
    let policy = x.policies.get(policy_name).ok_or_else(|| {
        CliError::config(
            format!("policies.{policy_name}"),
            "policy is not defined in the experiment config",
        )
    })?;
    let population = formats::read_population(&ctx.paths.population())?;
    let instances = formats::read_instances(&ctx.paths.instances())?;

    let records =
        market::simulate_records(&x.market, &x.vocabulary, policy, &population, &instances)
            .map_err(|e| CliError::Other(e.to_string()))?;
    formats::write_dataset(&ctx.paths.dataset(), &records)?;

    let mut ledger = Ledger::new();
    for record in &records {
        ledger
            .append_record(LedgerRecord::from(record))
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    formats::write_ledger(&ctx.paths.ledger(), &ledger)?;
    let summary = formats::verify_ledger_file(&ctx.paths.ledger())?;

    let bids: Vec<f64> = records
        .iter()
        .flat_map(|r| r.participants.iter().map(|p| p.bid))
        .collect();
    let n = bids.len() as f64;
    let mean = bids.iter().sum::<f64>() / n;
    let std = (bids.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n).sqrt();
    let mut signal_counts = vec![0usize; x.vocabulary.len()];
    for record in &records {
        signal_counts[record.signal] += 1;
    }
    println!(
        "simulated {} auctions under policy `{policy_name}`",
        records.len()
    );
    println!("bids: count {} mean {mean:.4} std {std:.4}", bids.len());
    for (signal, count) in signal_counts.iter().enumerate() {
        println!(
            "  signal {} ({}): {:.4}",
            signal,
            x.vocabulary.labels()[signal],
            *count as f64 / records.len() as f64
        );
    }
    println!(
        "ledger: {} entries, head {}",
        summary.entries, summary.head_hex
    );
    Ok(())
}

/// `train`: grid search, final fit, test metrics, residual diagnostics.
pub fn cmd_train(ctx: &Context) -> Result<(), CliError> {
    let x = &ctx.experiment;
    let records = formats::read_dataset(&ctx.paths.dataset())?;
    let data = build_features(&records, x.vocabulary.len(), x.market.sector_count)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let mut split_rng = substream(x.config.master_seed, "split");
    let (train, validation, test) = split_dataset(&data, (0.70, 0.15, 0.15), &mut split_rng)
        .map_err(|e| CliError::Other(e.to_string()))?;

    let bounds = (x.market.bid_floor, x.market.bid_cap);
    let combos = x
        .grid
        .combos()
        .map_err(|e| CliError::Other(e.to_string()))?;
    let mut leaderboard = score_grid(&train, &validation, &combos, bounds, ctx.threads)?;
    rank_leaderboard(&mut leaderboard);
    let best = leaderboard[0].hyperparams;
    let best_validation_rmse = leaderboard[0].validation_rmse;

    let (model, _trace) =
        train_gbm_traced(&train, &best, bounds).map_err(|e| CliError::Other(e.to_string()))?;
    let predicted = model
        .predict(&test.features)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let test_metrics = regression_metrics(&predicted, &test.targets)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let residuals = residual_analysis(&model, &test).map_err(|e| CliError::Other(e.to_string()))?;

    formats::write_json(&ctx.paths.model(), &model)?;
    formats::write_json(
        &ctx.paths.metrics(),
        &TrainMetrics {
            seed: x.config.master_seed,
            config_digest: x.config.digest_hex(),
            best_hyperparams: best,
            best_validation_rmse,
            test: test_metrics.clone(),
            rows: SplitRows {
                train: train.n_rows(),
                validation: validation.n_rows(),
                test: test.n_rows(),
            },
        },
    )?;
    formats::write_json(&ctx.paths.residuals(), &residuals)?;
    formats::write_leaderboard(&ctx.paths.leaderboard(), &leaderboard)?;
    formats::write_residual_csvs(
        &ctx.paths.residual_deciles(),
        &ctx.paths.residual_histogram(),
        &residuals,
    )?;

    println!(
        "grid searched {} combinations; best lr={} depth={} trees={} (val RMSE {:.4})",
        leaderboard.len(),
        best.learning_rate,
        best.max_depth,
        best.n_trees,
        best_validation_rmse
    );
    println!(
        "test: rmse {:.4} mae {:.4} r2 {}",
        test_metrics.rmse,
        test_metrics.mae,
        test_metrics
            .r_squared
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| String::from("undefined")),
    );
    println!(
        "residuals: mean {:.4} std {:.4}",
        residuals.mean, residuals.std
    );
    Ok(())
}

/// Scores grid combinations, optionally across a bounded rayon pool.
/// Combination order (and therefore every tie-break) is identical to the
/// sequential path.
fn score_grid(
    train: &Dataset,
    validation: &Dataset,
    combos: &[persuade_core::predictor::Hyperparams],
    bounds: (f64, f64),
    threads: Option<usize>,
) -> Result<Vec<LeaderboardEntry>, CliError> {
    use rayon::prelude::*;

    let score = |hp: &persuade_core::predictor::Hyperparams| {
        score_combo(train, validation, hp, bounds).map_err(|e| CliError::Other(e.to_string()))
    };
    match threads {
        Some(1) => combos.iter().map(score).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Other(format!("building thread pool: {e}")))?;
            pool.install(|| combos.par_iter().map(score).collect())
        }
        None => combos.par_iter().map(score).collect(),
    }
}

/// `optimize`: counterfactual policy search with the trained model and a
/// common-random-number revenue report.
pub fn cmd_optimize(ctx: &Context) -> Result<(), CliError> {
    let x = &ctx.experiment;
    let model: GbmModel = formats::read_json(&ctx.paths.model())?;
    let population = formats::read_population(&ctx.paths.population())?;
    let instances = formats::read_instances(&ctx.paths.instances())?;
    if instances.len() < x.search.mc_auctions {
        return Err(CliError::Other(format!(
            "instances file holds {} auctions, search.mc_auctions wants {}",
            instances.len(),
            x.search.mc_auctions
        )));
    }
    let instances = &instances[..x.search.mc_auctions];
    let variates = signal_variates(x.search.seed, instances.len());

    let evaluate = |policy: &persuade_core::belief::SignalingPolicy| -> Result<f64, CliError> {
        let predicted = simulate_bids_under_policy(
            &model,
            instances,
            &population,
            policy,
            &variates,
            x.vocabulary.len(),
            x.market.sector_count,
        )
        .map_err(|e| CliError::Other(e.to_string()))?;
        estimate_revenue_mc(&predicted).map_err(|e| CliError::Other(e.to_string()))
    };

    // Surface model/feature mismatches once; they are policy-independent,
    // so the search evaluator below cannot fail after this succeeds.
    let full = design::full_disclosure(&x.states, &x.vocabulary)
        .map_err(|e| CliError::Other(e.to_string()))?;
    evaluate(&full)?;

    let outcome: SearchOutcome =
        design::optimize_policy(&x.states, &x.vocabulary, &x.prior, &x.search, |policy| {
            evaluate(policy).expect("evaluator is total after the preflight check")
        })
        .map_err(|e| CliError::Other(e.to_string()))?;

    let none = design::no_disclosure(&x.states, &x.vocabulary);
    let named = vec![
        (String::from("full"), full),
        (String::from("none"), none),
        (String::from("optimized"), outcome.best.policy.clone()),
    ];
    let report = eval::compare_policies(
        &named,
        |policy| Ok(evaluate(policy).expect("evaluator is total after the preflight check")),
        EvalMode::MlCounterfactual,
        x.search.mc_auctions,
        x.search.seed,
    )
    .map_err(|e: persuade_core::eval::EvalError| CliError::Other(e.to_string()))?;

    let optimize_report = OptimizeReport {
        config_digest: x.config.digest_hex(),
        report,
        winner: WinnerSummary {
            kind: outcome.best.kind.tag().to_string(),
            params: outcome.best.kind.params(),
            matrix: outcome.best.policy.rows().to_vec(),
        },
    };
    formats::write_json(&ctx.paths.revenue_report_json(), &optimize_report)?;
    formats::write_revenue_csv(&ctx.paths.revenue_report_csv(), &optimize_report.report)?;
    formats::write_search_audit(&ctx.paths.search_audit(), &outcome.trail)?;

    println!(
        "searched {} candidates ({} feasible)",
        outcome.trail.len(),
        outcome.trail.iter().filter(|c| c.feasible).count()
    );
    for policy in &optimize_report.report.policies {
        println!(
            "  {}: total {:.2}, mean payment {:.4}",
            policy.name, policy.total, policy.mean_payment
        );
    }
    for increase in &optimize_report.report.increases {
        if increase.baseline == "full" && increase.policy == "optimized" {
            if let Some(percent) = increase.percent {
                println!("revenue increase over full disclosure: {percent:.2}%");
            }
        }
    }
    println!(
        "winning policy: {} {}",
        optimize_report.winner.kind, optimize_report.winner.params
    );
    Ok(())
}

/// `verify`: strict load, chain verification, and outcome replay of a
/// ledger file.
pub fn cmd_verify(ledger_path: &Path) -> Result<(), CliError> {
    let summary = formats::verify_ledger_file(ledger_path)?;
    println!(
        "ledger ok: {} entries, head {}",
        summary.entries, summary.head_hex
    );
    Ok(())
}

/// `report`: run manifest from whatever artifacts exist.
pub fn cmd_report(ctx: &Context) -> Result<(), CliError> {
    let built = manifest::build_manifest(&ctx.paths)?;
    manifest::check_digest(&ctx.paths, &built)?;
    formats::write_json(&ctx.paths.manifest(), &built)?;

    println!("config digest {}", built.config_digest);
    println!("artifacts: {}", built.artifacts.join(", "));
    if let Some(head) = &built.ledger_head {
        println!("ledger head {head}");
    }
    let h = &built.headline;
    if let (Some(mean), Some(std), Some(count)) = (h.bid_mean, h.bid_std, h.bid_count) {
        println!("bids: count {count} mean {mean:.4} std {std:.4}");
    }
    if let Some(rmse) = h.test_rmse {
        println!(
            "model: test rmse {rmse:.4} r2 {}",
            h.test_r_squared
                .map(|r| format!("{r:.4}"))
                .unwrap_or_else(|| "undefined".into())
        );
    }
    if let Some(best) = &h.best_policy {
        println!(
            "optimized policy: {best}{}",
            h.increase_over_full_percent
                .map(|p| format!(" (+{p:.2}% vs full)"))
                .unwrap_or_default()
        );
    }
    Ok(())
}
