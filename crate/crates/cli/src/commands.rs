use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use oppmodel::adapt::{
    argument_sets, build_ca_instances, filter_dnd, remap_dnd, ArgumentSet, CaTemplate, IssueMapping,
};
use oppmodel::baselines::RandomModel;
use oppmodel::corpus::casino::{load_casino, parse_casino, FieldMap};
use oppmodel::corpus::dnd::load_dnd;
use oppmodel::corpus::folds::dialogue_keys;
use oppmodel::corpus::synthetic::{
    generate_synthetic, generate_synthetic_arguments, generate_synthetic_dnd, SynthConfig,
};
use oppmodel::corpus::{
    extract_perspectives, partial_view, read_instances, write_instances, FoldPlan, FoldSpec,
    Instance, Source,
};
use oppmodel::metrics::{evaluate, MetricConfig, MetricReport, PriorityModel};
use oppmodel::ranker::predict_ranking;
use oppmodel::train::{
    crossval, data_fraction_sweep, derive_seed, train_model, AnyModel, Checkpoint,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_mix, read_config_file, resolve};
use crate::manifest::{beside, unix_now, FileDigest, RunManifest};
use crate::render::{curves_csv, render_table};
use crate::{
    AdaptCommand, Cli, Command, CorpusCommand, CrossvalArgs, EvaluateArgs, Failure, GenerateKind,
    MappingArg, ModelArg, ModelSource, PredictArgs, RawFormat, ReportArgs, TrainArgs,
    TrainSettings, ENV_DATA_DIR, ENV_SEED,
};

type Outcome = Result<(), Failure>;

/// Salt separating the tuning hold-out shuffle from other uses of the seed.
const TUNE_SPLIT_SALT: u64 = 0x7475_6e65;

/// Run-wide settings after layering flags over the environment.
struct Ctx {
    argv: Vec<String>,
    flag_seed: Option<u64>,
    env_seed: Option<u64>,
    deterministic: bool,
    data_dir: Option<PathBuf>,
    manifest: Option<PathBuf>,
    started: Option<u64>,
}

impl Ctx {
    fn seed(&self) -> (u64, &'static str) {
        match (self.flag_seed, self.env_seed) {
            (Some(s), _) => (s, "flag"),
            (None, Some(s)) => (s, "env"),
            _ => (0, "default"),
        }
    }

    /// Relative input paths resolve under the data directory when one is set.
    fn input(&self, path: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        config: Value,
        seed: (u64, &str),
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        details: Value,
        default_path: Option<PathBuf>,
    ) -> Outcome {
        let Some(path) = self.manifest.clone().or(default_path) else {
            info!("output went to stdout; no manifest written");
            return Ok(());
        };
        let manifest = RunManifest {
            tool: "oppmodel".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.argv.iter().skip(1).cloned().collect(),
            config,
            seed: seed.0,
            seed_source: seed.1.to_string(),
            deterministic: self.deterministic,
            inputs: inputs
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<Result<_, _>>()?,
            outputs: outputs
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<Result<_, _>>()?,
            started_at: self.started,
            finished_at: (!self.deterministic).then(unix_now),
            details,
        };
        write_json(&path, &manifest)
    }
}

fn parse_env_seed(env: &BTreeMap<String, String>) -> Result<Option<u64>, Failure> {
    env.get(ENV_SEED)
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Failure::usage(format!("{ENV_SEED}={s:?} is not an unsigned integer")))
        })
        .transpose()
}

pub(crate) fn run(cli: Cli, argv: &[String], env: &BTreeMap<String, String>) -> Outcome {
    let ctx = Ctx {
        argv: argv.to_vec(),
        flag_seed: cli.seed,
        env_seed: parse_env_seed(env)?,
        deterministic: cli.deterministic,
        data_dir: cli.data_dir.or_else(|| {
            env.get(ENV_DATA_DIR)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
        }),
        manifest: cli.manifest,
        started: (!cli.deterministic).then(unix_now),
    };
    match cli.command {
        Command::Corpus(CorpusCommand::Ingest(a)) => ingest(&ctx, a),
        Command::Corpus(CorpusCommand::Generate(a)) => generate(&ctx, a),
        Command::Corpus(CorpusCommand::Folds(a)) => folds(&ctx, a),
        Command::Adapt(AdaptCommand::Ca(a)) => adapt_ca(&ctx, a),
        Command::Adapt(AdaptCommand::Dnd(a)) => adapt_dnd(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Report(a) => report(&ctx, a),
        Command::Crossval(a) => crossval_cmd(&ctx, a),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::runtime(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Outcome {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_instances_to(path: &Path, instances: &[Instance]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(write_instances(path, instances)?)
}

/// Existing file required; a missing one is the caller's mistake.
fn require(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "input file {} not found",
            path.display()
        )))
    }
}

fn read_inputs(path: &Path) -> Result<Vec<Instance>, Failure> {
    require(path)?;
    Ok(read_instances(path)?)
}

fn mapping(arg: MappingArg, seed: u64) -> IssueMapping {
    match arg {
        MappingArg::Default => IssueMapping::default(),
        MappingArg::Random => IssueMapping::random(seed),
    }
}

fn dnd_instances(
    path: &Path,
    mapping: &IssueMapping,
    filter: bool,
) -> Result<(Vec<Instance>, usize), Failure> {
    require(path)?;
    let raw = load_dnd(path)?;
    let mut out = Vec::new();
    let mut dropped = 0;
    for (i, d) in raw.iter().enumerate() {
        if filter && !filter_dnd(d) {
            dropped += 1;
            continue;
        }
        out.push(remap_dnd(d, mapping, &format!("dnd{i:06}:reader"))?);
    }
    Ok((out, dropped))
}

fn ingest(ctx: &Ctx, a: crate::IngestArgs) -> Outcome {
    let input = ctx.input(&a.input);
    let seed = ctx.seed();
    let mut inputs = vec![input.clone()];
    let (instances, details) = match a.format {
        RawFormat::Casino => {
            require(&input)?;
            let fields = match &a.field_map {
                Some(p) => {
                    let p = ctx.input(p);
                    require(&p)?;
                    inputs.push(p.clone());
                    FieldMap::from_file(&p)?
                }
                None => FieldMap::default(),
            };
            let load = load_casino(&input, &fields)?;
            let mut out = Vec::with_capacity(2 * load.dialogues.len());
            for d in &load.dialogues {
                let (x, y) = extract_perspectives(d)?;
                out.push(x);
                out.push(y);
            }
            let details = json!({"dialogues": load.dialogues.len(), "skipped": load.skipped});
            (out, details)
        }
        RawFormat::Dnd => {
            let m = mapping(a.mapping, seed.0);
            let (out, dropped) = dnd_instances(&input, &m, !a.no_filter)?;
            (out, json!({"filtered_out": dropped, "mapping": m}))
        }
        RawFormat::Canonical => (read_inputs(&input)?, Value::Null),
    };
    write_instances_to(&a.out, &instances)?;
    info!("wrote {} instances to {}", instances.len(), a.out.display());
    let config = json!({"format": format!("{:?}", a.format).to_lowercase(), "mapping": format!("{:?}", a.mapping).to_lowercase(), "filter": !a.no_filter});
    let mut details = details;
    if let Value::Object(m) = &mut details {
        m.insert("instances".into(), json!(instances.len()));
    } else {
        details = json!({"instances": instances.len()});
    }
    ctx.finish(
        config,
        seed,
        &inputs,
        &[a.out.clone()],
        details,
        Some(beside(&a.out)),
    )
}

fn generate(ctx: &Ctx, a: crate::GenerateArgs) -> Outcome {
    let seed = ctx.seed();
    let config = SynthConfig {
        count: a.count,
        utterances_per_dialogue: a.utterances,
        noise: a.noise,
        self_statement_rate: a.self_rate,
    };
    config.validate()?;
    let written = match a.kind {
        GenerateKind::Dialogues => {
            let instances = generate_synthetic(&config, seed.0)?;
            write_instances_to(&a.out, &instances)?;
            instances.len()
        }
        GenerateKind::Arguments => {
            let sets = generate_synthetic_arguments(a.count, seed.0);
            write_lines(&a.out, &sets)?;
            sets.len()
        }
        GenerateKind::Dnd => {
            let raw = generate_synthetic_dnd(a.count, a.utterances, a.noise, seed.0);
            let text: String = raw.iter().map(|d| d.to_line() + "\n").collect();
            write_text(&a.out, &text)?;
            raw.len()
        }
    };
    let cfg = json!({"kind": format!("{:?}", a.kind).to_lowercase(), "synthetic": config});
    ctx.finish(
        cfg,
        seed,
        &[],
        &[a.out.clone()],
        json!({"records": written}),
        Some(beside(&a.out)),
    )
}

fn folds(ctx: &Ctx, a: crate::FoldsArgs) -> Outcome {
    let input = ctx.input(&a.input);
    let instances = read_inputs(&input)?;
    let seed = ctx.seed();
    let spec = FoldSpec {
        fold_count: a.folds,
        tune_dialogues: a.tune_dialogues,
        ..FoldSpec::default()
    };
    let plan = FoldPlan::build(&dialogue_keys(&instances), &spec, seed.0)?;
    write_json(&a.out, &plan)?;
    ctx.finish(
        json!(spec),
        seed,
        &[input],
        &[a.out.clone()],
        Value::Null,
        Some(beside(&a.out)),
    )
}

/// Argument sets from JSON lines, or from CaSiNo-style records otherwise.
fn read_argument_sets(path: &Path, fields: &FieldMap) -> Result<Vec<ArgumentSet>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let as_sets: Option<Vec<ArgumentSet>> = lines
        .iter()
        .map(|l| serde_json::from_str::<ArgumentSet>(l).ok())
        .collect();
    match as_sets {
        Some(sets) if !sets.is_empty() => Ok(sets),
        _ => {
            let load = parse_casino(&text, path, fields)?;
            Ok(argument_sets(&load.dialogues))
        }
    }
}

fn adapt_ca(ctx: &Ctx, a: crate::AdaptCaArgs) -> Outcome {
    let input = ctx.input(&a.input);
    require(&input)?;
    let mut inputs = vec![input.clone()];
    let fields = match &a.field_map {
        Some(p) => {
            let p = ctx.input(p);
            require(&p)?;
            inputs.push(p.clone());
            FieldMap::from_file(&p)?
        }
        None => FieldMap::default(),
    };
    let seed = ctx.seed();
    let template = CaTemplate::default();
    let sets = read_argument_sets(&input, &fields)?;
    let mut out = Vec::with_capacity(2 * sets.len());
    for set in &sets {
        out.extend(build_ca_instances(set, &template, seed.0)?);
    }
    write_instances_to(&a.out, &out)?;
    let details = json!({"argument_sets": sets.len(), "instances": out.len()});
    ctx.finish(
        json!({"template": template}),
        seed,
        &inputs,
        &[a.out.clone()],
        details,
        Some(beside(&a.out)),
    )
}

fn adapt_dnd(ctx: &Ctx, a: crate::AdaptDndArgs) -> Outcome {
    let input = ctx.input(&a.input);
    let seed = ctx.seed();
    let m = mapping(a.mapping, seed.0);
    let (out, dropped) = dnd_instances(&input, &m, !a.no_filter)?;
    write_instances_to(&a.out, &out)?;
    let config = json!({"mapping": m, "filter": !a.no_filter});
    let details = json!({"instances": out.len(), "filtered_out": dropped});
    ctx.finish(
        config,
        seed,
        &[input],
        &[a.out.clone()],
        details,
        Some(beside(&a.out)),
    )
}

fn resolve_settings(
    ctx: &Ctx,
    s: &TrainSettings,
) -> Result<(crate::config::Resolved, Option<PathBuf>), Failure> {
    let path = s.config.as_ref().map(|p| ctx.input(p));
    let file = match &path {
        Some(p) => {
            require(p)?;
            Some(read_config_file(p)?)
        }
        None => None,
    };
    Ok((resolve(s, file, ctx.flag_seed, ctx.env_seed)?, path))
}

/// Splits off up to `count` fully labelled dialogues for tuning. Every
/// instance sharing a held-out dialogue key leaves training.
fn hold_out(instances: &[Instance], count: usize, seed: u64) -> (Vec<&Instance>, Vec<&Instance>) {
    let labelled: BTreeSet<&str> = instances
        .iter()
        .filter(|i| i.has_full_label() && i.source != Source::Ca)
        .map(|i| i.dialogue_key())
        .collect();
    let mut keys: Vec<&str> = labelled.into_iter().collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[
        seed,
        TUNE_SPLIT_SALT,
    ])));
    // Keep most dialogues for training on small inputs.
    let n = count.min(keys.len() / 5);
    let tune_keys: BTreeSet<&str> = keys.into_iter().take(n).collect();
    let (mut train, mut tune) = (Vec::new(), Vec::new());
    for inst in instances {
        if tune_keys.contains(inst.dialogue_key()) {
            if inst.has_full_label() && inst.source != Source::Ca {
                tune.push(inst);
            }
        } else {
            train.push(inst);
        }
    }
    (train, tune)
}

fn train(ctx: &Ctx, a: TrainArgs) -> Outcome {
    let (resolved, config_path) = resolve_settings(ctx, &a.settings)?;
    let config = resolved.config;
    let mut inputs: Vec<PathBuf> = config_path.into_iter().collect();
    let mut instances = Vec::new();
    for p in &a.input {
        let p = ctx.input(p);
        instances.extend(read_inputs(&p)?);
        inputs.push(p);
    }
    let tune_file = match &a.tune {
        Some(p) => {
            let p = ctx.input(p);
            let t = read_inputs(&p)?;
            inputs.push(p);
            Some(t)
        }
        None => None,
    };
    let (train_set, tune_set): (Vec<&Instance>, Vec<&Instance>) = match &tune_file {
        Some(t) => (
            instances.iter().collect(),
            t.iter().filter(|i| i.has_full_label()).collect(),
        ),
        None => hold_out(&instances, a.tune_dialogues, config.seed),
    };
    info!(
        "training {} on {} instances, tuning on {}",
        config.model.name(),
        train_set.len(),
        tune_set.len()
    );
    let outcome = train_model(&config, &train_set, &tune_set)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let ckpt_path = a.out_dir.join("checkpoint.json");
    outcome
        .checkpoint
        .save(&ckpt_path)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let mut outputs = vec![ckpt_path];
    if !tune_set.is_empty() {
        let report = evaluate(&tune_set, &outcome.model, &MetricConfig::default())?;
        let path = a.out_dir.join("report.json");
        write_json(&path, &report)?;
        outputs.push(path);
    }
    let details = json!({
        "config_hash": config.hash(),
        "selected_epoch": outcome.checkpoint.epoch,
        "tune_ema_at_5": outcome.checkpoint.tune_ema_at_5,
        "train_instances": train_set.len(),
        "tune_instances": tune_set.len(),
        "history": outcome.history,
    });
    ctx.finish(
        serde_json::to_value(&config)?,
        (config.seed, resolved.seed_source),
        &inputs,
        &outputs,
        details,
        Some(a.out_dir.join("manifest.json")),
    )
}

fn load_model(
    ctx: &Ctx,
    source: &ModelSource,
    seed: u64,
) -> Result<(AnyModel, Vec<PathBuf>, Value), Failure> {
    match (&source.checkpoint, source.model) {
        (Some(p), _) => {
            let p = ctx.input(p);
            require(&p)?;
            let ckpt = Checkpoint::load(&p)?;
            let model = ckpt.model()?;
            if let Some(m) = source.model {
                if crate::config::model_kind(m) != model.kind() {
                    return Err(Failure::usage(format!(
                        "--model {:?} does not match the checkpoint's {}",
                        m,
                        model.kind().name()
                    )));
                }
            }
            let cfg = json!({"checkpoint": p.display().to_string(), "config_hash": ckpt.config_hash, "epoch": ckpt.epoch});
            Ok((model, vec![p], cfg))
        }
        (None, Some(ModelArg::Random)) => Ok((
            AnyModel::Random(RandomModel::new(seed, 3)),
            Vec::new(),
            json!({"model": "random"}),
        )),
        (None, Some(m)) => Err(Failure::usage(format!(
            "--model {} needs --checkpoint",
            format!("{m:?}").to_lowercase()
        ))),
        (None, None) => Err(Failure::usage(
            "either --checkpoint or --model random is required",
        )),
    }
}

fn evaluate_cmd(ctx: &Ctx, a: EvaluateArgs) -> Outcome {
    let seed = ctx.seed();
    let input = ctx.input(&a.input);
    let instances = read_inputs(&input)?;
    let (model, mut inputs, cfg) = load_model(ctx, &a.source, seed.0)?;
    inputs.insert(0, input);
    let refs: Vec<&Instance> = instances.iter().collect();
    let metrics = MetricConfig::default();
    let report = evaluate(&refs, &model, &metrics)?;
    let mut outputs = Vec::new();
    match &a.out {
        Some(p) => {
            write_json(p, &report)?;
            outputs.push(p.clone());
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(p) = &a.curves {
        write_text(p, &curves_csv(std::slice::from_ref(&report)))?;
        outputs.push(p.clone());
    }
    let config = json!({"model": cfg, "metrics": metrics});
    let default = a.out.as_deref().or(a.curves.as_deref()).map(beside);
    ctx.finish(config, seed, &inputs, &outputs, Value::Null, default)
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    k: usize,
    ranking: Vec<String>,
    scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Outcome {
    let seed = ctx.seed();
    let input = ctx.input(&a.input);
    let instances = read_inputs(&input)?;
    let (model, mut inputs, cfg) = load_model(ctx, &a.source, seed.0)?;
    inputs.insert(0, input);
    let ks: Vec<usize> = match a.k {
        Some(0) => return Err(Failure::usage("k must be at least 1")),
        Some(k) => vec![k],
        None => (1..=MetricConfig::default().k_max).collect(),
    };
    let mut text = String::new();
    for inst in &instances {
        for &k in &ks {
            let view = partial_view(inst, k)?;
            let scores = model.scores_at_k(inst, k)?;
            let ranking = predict_ranking(&scores)?.names();
            let warning = view.clamped.then(|| {
                format!(
                    "k={k} exceeds the {} opponent utterances; prediction uses all of them",
                    view.opponent_seen
                )
            });
            let line = PredictionLine {
                id: &inst.id,
                k,
                ranking,
                scores,
                warning,
            };
            text.push_str(&serde_json::to_string(&line)?);
            text.push('\n');
        }
    }
    let mut outputs = Vec::new();
    match &a.out {
        Some(p) => {
            write_text(p, &text)?;
            outputs.push(p.clone());
        }
        None => print!("{text}"),
    }
    let config = json!({"model": cfg, "ks": ks});
    ctx.finish(
        config,
        seed,
        &inputs,
        &outputs,
        Value::Null,
        a.out.as_deref().map(beside),
    )
}

fn report(ctx: &Ctx, a: ReportArgs) -> Outcome {
    let mut inputs = Vec::new();
    let mut reports = Vec::new();
    for p in &a.input {
        let p = ctx.input(p);
        require(&p)?;
        let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        let r: MetricReport = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
        reports.push(r);
        inputs.push(p);
    }
    let table = render_table(&reports);
    let mut outputs = Vec::new();
    match &a.out {
        Some(p) => {
            write_text(p, &table)?;
            outputs.push(p.clone());
        }
        None => print!("{table}"),
    }
    if let Some(p) = &a.curves {
        write_text(p, &curves_csv(&reports))?;
        outputs.push(p.clone());
    }
    let default = a.out.as_deref().or(a.curves.as_deref()).map(beside);
    ctx.finish(
        Value::Null,
        ctx.seed(),
        &inputs,
        &outputs,
        Value::Null,
        default,
    )
}

fn crossval_cmd(ctx: &Ctx, a: CrossvalArgs) -> Outcome {
    let (resolved, config_path) = resolve_settings(ctx, &a.settings)?;
    let config = resolved.config;
    let mut inputs: Vec<PathBuf> = config_path.into_iter().collect();
    let input = ctx.input(&a.input);
    let primary = read_inputs(&input)?;
    inputs.push(input);
    let mut adjuncts = Vec::new();
    for p in &a.adjuncts {
        let p = ctx.input(p);
        adjuncts.extend(read_inputs(&p)?);
        inputs.push(p);
    }
    let spec = FoldSpec {
        fold_count: a.folds,
        tune_dialogues: a.tune_dialogues,
        ..FoldSpec::default()
    };
    let plan = FoldPlan::build(&dialogue_keys(&primary), &spec, config.seed)?;
    let metrics = MetricConfig::default();
    let result = crossval(&config, &plan, &primary, &adjuncts, &metrics)?;

    let mut outputs = Vec::new();
    let report_path = a.out_dir.join("report.json");
    write_json(&report_path, &result.report)?;
    outputs.push(report_path);
    let folds_path = a.out_dir.join("folds.json");
    write_json(&folds_path, &result.folds)?;
    outputs.push(folds_path);
    let plan_path = a.out_dir.join("plan.json");
    write_json(&plan_path, &plan)?;
    outputs.push(plan_path);

    if let Some(list) = &a.fractions {
        let fractions = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("bad fraction {s:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let mixtures = if a.sweep_mix.is_empty() {
            vec![config.mixture.clone()]
        } else {
            a.sweep_mix
                .iter()
                .map(|m| parse_mix(m))
                .collect::<Result<_, _>>()?
        };
        let sweep = data_fraction_sweep(
            &config, &plan, &primary, &adjuncts, &fractions, &mixtures, &metrics,
        )?;
        let path = a.out_dir.join("sweep.json");
        write_json(&path, &sweep)?;
        outputs.push(path);
    }
    let details = json!({"config_hash": config.hash(), "fold_spec": spec});
    ctx.finish(
        serde_json::to_value(&config)?,
        (config.seed, resolved.seed_source),
        &inputs,
        &outputs,
        details,
        Some(a.out_dir.join("manifest.json")),
    )
}
