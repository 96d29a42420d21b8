use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use crawl_core::expressiveness::{compare_graphs_within, DistributionMode};
use crawl_core::graph::{
    disjoint_union, load_graphs, make_csl_dataset, make_csl_dataset_with_seed, make_cycle, make_three_paths,
    save_graphs, Dataset, Graph, Label, Task,
};
use crawl_core::model::audit::model_gradient_audit;
use crawl_core::model::Model;
use crawl_core::nn::audit::kernel_audit;
use crawl_core::nn::checkpoint::Dtype;
use crawl_core::stats::{mean, std_population};
use crawl_core::trainer::{ablation_matrix, ablation_table, eval_seed_list, evaluate, kfold_run_with_hooks};
use crawl_core::walker::WalkStrategy;
use serde_json::json;

use crate::args::{Cli, Command, DistinguishArgs, EvalArgs, GenTarget, GradcheckArgs, RunArgs, StrategyArg};
use crate::config::resolve;
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen { what } => gen(what, seed),
        Command::Train(a) => train(a, seed),
        Command::Eval(a) => eval(a, seed),
        Command::Ablate(a) => ablate(a, seed),
        Command::Distinguish(a) => distinguish(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A two-graph classification dataset, one graph per fold.
fn pair_dataset(a: Graph, b: Graph) -> Result<Dataset> {
    Ok(Dataset::new(
        vec![a.with_label(Label::Class(0)), b.with_label(Label::Class(1))],
        vec![0, 1],
        Task::Classification { num_classes: 2 },
    )?)
}

fn cycle_pair(n: usize) -> Result<Dataset> {
    if n < 6 || !n.is_multiple_of(2) {
        bail!(crawl_core::Error::InvalidArgument(format!("cycle pair needs an even n >= 6, got {n}")));
    }
    let half = make_cycle(n / 2)?;
    pair_dataset(make_cycle(n)?, disjoint_union(&half, &half))
}

fn three_path_pair(n: usize) -> Result<Dataset> {
    pair_dataset(make_three_paths(n, true)?, make_three_paths(n, false)?)
}

fn gen(what: GenTarget, seed: Option<u64>) -> Result<ExitCode> {
    let (name, ds, out) = match what {
        GenTarget::Csl { out } => {
            let ds = seed.map_or_else(make_csl_dataset, make_csl_dataset_with_seed);
            ("gen csl", ds, out)
        }
        GenTarget::Cycles { n, out } => ("gen cycles", cycle_pair(n)?, out),
        GenTarget::Threepaths { n, out } => ("gen threepaths", three_path_pair(n)?, out),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_graphs(&ds, &out)?;
    let mut manifest = RunManifest::new(name, seed, json!(null));
    manifest.output(&out, out.parent().unwrap_or(Path::new("")))?;
    manifest.write(&sibling_manifest(&out))?;
    say(&format!("wrote {} graphs to {}", ds.len(), out.display()))?;
    Ok(ExitCode::SUCCESS)
}

/// `data.json` -> `data.manifest.json`.
fn sibling_manifest(file: &Path) -> PathBuf {
    let stem = file.file_stem().map_or("out".into(), |s| s.to_string_lossy().into_owned());
    file.with_file_name(format!("{stem}.{MANIFEST_FILE}"))
}

fn load_data(path: Option<&Path>) -> Result<Dataset> {
    Ok(match path {
        Some(p) => load_graphs(p)?,
        None => make_csl_dataset(),
    })
}

fn train(a: RunArgs, seed: Option<u64>) -> Result<ExitCode> {
    let ds = load_data(a.data.as_deref())?;
    let cfg = resolve(a.config.as_deref(), &ds, &a.hyper, &a.overrides, seed)?;
    let runs = a.runs.unwrap_or(ds.num_folds());
    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("train", Some(cfg.seed), serde_json::to_value(&cfg)?);
    if let Some(p) = &a.data {
        manifest.input(p)?;
    }
    let quiet = a.quiet;
    let out = a.out.clone();
    let metrics = kfold_run_with_hooks(
        &ds,
        &cfg,
        runs,
        |run, e| {
            if !quiet {
                eprintln!(
                    "run {run} epoch {:>3} lr {:.1e} loss {:.4} val {:.4}",
                    e.epoch, e.lr, e.train_loss, e.val_score
                );
            }
        },
        |run, model| model.save(&out.join(format!("run-{run}")), Dtype::F32),
    )?;
    metrics.write_history_csv(&a.out.join("metrics.csv"))?;
    metrics.write_summary_json(&a.out.join("summary.json"))?;
    for run in 0..runs {
        manifest.output(&a.out.join(format!("run-{run}")), &a.out)?;
    }
    manifest.output(&a.out.join("metrics.csv"), &a.out)?;
    manifest.output(&a.out.join("summary.json"), &a.out)?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    say(&format!(
        "{}: mean test score {:.4} over {} runs, {} parameters, IMD {}, CMD {}",
        metrics.label,
        metrics.mean,
        runs,
        metrics.num_parameters,
        metrics.imd.map_or("-".into(), |v| format!("{v:.4}")),
        metrics.cmd.map_or("-".into(), |v| format!("{v:.4}")),
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs, seed: Option<u64>) -> Result<ExitCode> {
    let model = Model::load(&a.checkpoint)?;
    let ds = load_data(a.data.as_deref())?;
    let indices = match a.fold {
        Some(f) => ds.fold_members(f),
        None => (0..ds.len()).collect(),
    };
    if a.seeds == 0 {
        bail!(crawl_core::Error::InvalidArgument("need at least one walk seed".into()));
    }
    let root = seed.unwrap_or(0);
    let scores = evaluate(&model, &ds, &indices, &eval_seed_list(root, a.seeds))?;
    let report = json!({
        "checkpoint": a.checkpoint,
        "graphs": indices.len(),
        "seed": root,
        "scores": scores,
        "mean": mean(&scores),
        "std": std_population(&scores),
    });
    let text = serde_json::to_string_pretty(&report)?;
    say(&text)?;
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("eval.json"), &text)?;
        let mut manifest = RunManifest::new("eval", Some(root), serde_json::to_value(model.config())?);
        manifest.input(&a.checkpoint)?;
        if let Some(p) = &a.data {
            manifest.input(p)?;
        }
        manifest.output(&out.join("eval.json"), out)?;
        manifest.write(&out.join(MANIFEST_FILE))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn ablate(a: RunArgs, seed: Option<u64>) -> Result<ExitCode> {
    let ds = load_data(a.data.as_deref())?;
    let cfg = resolve(a.config.as_deref(), &ds, &a.hyper, &a.overrides, seed)?;
    let runs = a.runs.unwrap_or(ds.num_folds());
    create_dir(&a.out)?;
    let mut manifest = RunManifest::new("ablate", Some(cfg.seed), serde_json::to_value(&cfg)?);
    if let Some(p) = &a.data {
        manifest.input(p)?;
    }
    let cells = ablation_matrix(&ds, &cfg, runs)?;
    let table = ablation_table(&cells);
    write_file(&a.out.join("ablation.md"), &table)?;
    write_file(&a.out.join("ablation.json"), &serde_json::to_string_pretty(&cells)?)?;
    manifest.output(&a.out.join("ablation.md"), &a.out)?;
    manifest.output(&a.out.join("ablation.json"), &a.out)?;
    manifest.write(&a.out.join(MANIFEST_FILE))?;
    say(table.trim_end())?;
    Ok(ExitCode::SUCCESS)
}

/// Resolves `cyclesN`, `threepathsN` or a dataset file with two graphs.
fn named_pair(pair: &str) -> Result<(Vec<String>, Dataset)> {
    let number = |prefix: &str| -> Option<Result<usize>> {
        pair.strip_prefix(prefix)
            .map(|n| n.parse().with_context(|| format!("bad size in {pair:?}")))
    };
    if let Some(n) = number("cycles") {
        let n = n?;
        return Ok((vec![format!("C{n}"), format!("C{0}+C{0}", n / 2)], cycle_pair(n)?));
    }
    if let Some(n) = number("threepaths") {
        let n = n?;
        return Ok((vec![format!("G{n}"), format!("G'{n}")], three_path_pair(n)?));
    }
    let ds = load_graphs(pair)?;
    if ds.len() != 2 {
        bail!(crawl_core::Error::InvalidArgument(format!("{pair} holds {} graphs, expected 2", ds.len())));
    }
    Ok((vec![format!("{pair}[0]"), format!("{pair}[1]")], ds))
}

fn distinguish(a: DistinguishArgs) -> Result<ExitCode> {
    let (names, ds) = named_pair(&a.pair)?;
    let strategy = match a.strategy {
        StrategyArg::Uniform => WalkStrategy::Uniform,
        StrategyArg::Nb => WalkStrategy::NonBacktracking,
    };
    let mode = match a.samples {
        Some(samples) => DistributionMode::Sampled {
            samples,
            seed: a.sample_seed,
        },
        None => DistributionMode::Exact,
    };
    let g = ds.graphs();
    let report = compare_graphs_within([&names[0], &names[1]], [&g[0], &g[1]], strategy, a.s, a.ell, mode, a.budget)?;
    let text = serde_json::to_string_pretty(&report)?;
    say(&text)?;
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("distinguish.json"), &text)?;
        let mut manifest = RunManifest::new(
            "distinguish",
            None,
            json!({"pair": a.pair, "s": a.s, "ell": a.ell, "strategy": strategy, "mode": mode, "budget": a.budget}),
        );
        if Path::new(&a.pair).is_file() {
            manifest.input(Path::new(&a.pair))?;
        }
        manifest.output(&out.join("distinguish.json"), out)?;
        manifest.write(&out.join(MANIFEST_FILE))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    let mut failed = 0;
    for seed in 0..a.seeds {
        let reports = kernel_audit(seed).into_iter().chain(model_gradient_audit(seed)?);
        for r in reports {
            let ok = r.passes(a.tol);
            failed += usize::from(!ok);
            say(&format!(
                "{} seed {seed} {:<28} checked {:>4} skipped {:>3} max rel err {:.2e} max abs err {:.2e}",
                if ok { "ok  " } else { "FAIL" },
                r.name,
                r.checked,
                r.skipped,
                r.max_rel_err,
                r.max_abs_err
            ))?;
        }
    }
    if failed > 0 {
        eprintln!("{failed} gradient checks above tolerance {:e}", a.tol);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
