//! `gruwe {train|eval|predict|synth|inspect|bench-online}`.

mod config;

pub use config::{apply_override, BenchConfig, Config, PredictConfig, QuadratureConfig, SynthConfig};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cell::{forward_sequence, step, MarkovState, StepInput};
use crate::data::synth::{gen_decay_process, gen_hawkes_events, gen_poisson_events};
use crate::data::{
    load_events_jsonl, load_series_jsonl, mean_inter_arrival, split, write_events_jsonl, write_series_jsonl,
    DatasetSplit, EventSequence, IrregularSeries, Standardization,
};
use crate::decay::{classify_regimes, lipschitz_constant};
use crate::error::{GruweError, Result};
use crate::eval::{
    bench_online, eval_events, eval_forecast, series_stream, synthetic_stream, to_csv, EvalReport, EventEvalConfig,
    EVAL_REPORT_FORMAT, EVAL_REPORT_VERSION,
};
use crate::heads::{intensity_at, predict_at, predict_next_event_time};
use crate::model::{GruweParams, ModelDims, Task};
use crate::numerics::RngState;
use crate::parallel::Executor;
use crate::training::{load_checkpoint, save_checkpoint, train, CheckpointMeta, TrainData};

#[derive(Debug, Parser)]
#[command(name = "gruwe", version, about = "GRU with exponential basis decay for irregular series and event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write the best checkpoint.
    Train(CommonArgs),
    /// Score a checkpoint on a data split.
    Eval(CommonArgs),
    /// Decode predictions at given horizons after each input sequence.
    Predict(CommonArgs),
    /// Write a synthetic dataset and its oracle sidecar.
    Synth(CommonArgs),
    /// Print the decay regime of every hidden unit.
    Inspect(CommonArgs),
    /// Time streaming state updates and predictions.
    BenchOnline(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key (dotted path); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

type CommandFn = fn(&Config, &mut dyn Write) -> Result<()>;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (args, cmd): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Train(a) => (a, cmd_train),
        Command::Eval(a) => (a, cmd_eval),
        Command::Predict(a) => (a, cmd_predict),
        Command::Synth(a) => (a, cmd_synth),
        Command::Inspect(a) => (a, cmd_inspect),
        Command::BenchOnline(a) => (a, cmd_bench_online),
    };
    let result = Config::load(args.config.as_deref(), &args.set).and_then(|cfg| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        cmd(&cfg, &mut lock)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let cat = e.category();
            eprintln!("gruwe: {} error: {e}", format!("{cat:?}").to_lowercase());
            cat.exit_code()
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| GruweError::Config(format!("`{key}` must be set for this command")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GruweError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| GruweError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn out(w: &mut dyn Write, text: &str) -> Result<()> {
    w.write_all(text.as_bytes())
        .map_err(|e| GruweError::io("<stdout>", e))
}

enum Dataset {
    Series(Vec<IrregularSeries>),
    Events(Vec<EventSequence>),
}

impl Dataset {
    fn len(&self) -> usize {
        match self {
            Dataset::Series(s) => s.len(),
            Dataset::Events(e) => e.len(),
        }
    }
}

fn load_dataset(task: Task, path: &Path) -> Result<Dataset> {
    Ok(match task {
        Task::Forecast => Dataset::Series(load_series_jsonl(path)?),
        Task::Tpp => Dataset::Events(load_events_jsonl(path)?),
    })
}

/// Model dimensions from config, falling back to the data.
fn resolve_dims(cfg: &Config, data: &Dataset) -> Result<ModelDims> {
    let h = cfg.hidden_dim;
    match data {
        Dataset::Series(s) => {
            let from_data = s.first().map(IrregularSeries::dim);
            let d = match (cfg.input_dim, from_data) {
                (Some(d), Some(x)) if d != x => {
                    return Err(GruweError::Data(format!("data has {x} variables but input_dim is {d}")));
                }
                (Some(d), _) => d,
                (None, Some(x)) => x,
                (None, None) => return Err(GruweError::Data("dataset is empty".into())),
            };
            let p = cfg.output_dim.unwrap_or(d);
            if p != d {
                return Err(GruweError::Config(format!(
                    "forecast targets are the inputs, so output_dim must equal input_dim ({d}), got {p}"
                )));
            }
            Ok(ModelDims {
                input_dim: d,
                hidden_dim: h,
                output_dim: p,
            })
        }
        Dataset::Events(e) => {
            let k = match cfg.num_types {
                Some(k) => k,
                None => e.iter().flat_map(|s| s.types().iter().copied()).max().map_or(1, |m| m + 1),
            };
            for s in e {
                s.check_types(k)?;
            }
            Ok(ModelDims {
                input_dim: k,
                hidden_dim: h,
                output_dim: k,
            })
        }
    }
}

fn pick<T: Clone>(idx: &[usize], items: &[T]) -> Vec<T> {
    DatasetSplit::select(idx, items).into_iter().cloned().collect()
}

fn split_indices<'a>(sp: &'a DatasetSplit, name: &str, all: &'a [usize]) -> &'a [usize] {
    match name {
        "train" => &sp.train,
        "validation" => &sp.validation,
        "test" => &sp.test,
        _ => all,
    }
}

pub fn cmd_train(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let data_path = required(&cfg.data, "data")?;
    let ckpt = required(&cfg.checkpoint, "checkpoint")?;
    let data = load_dataset(cfg.task, data_path)?;
    if data.len() == 0 {
        return Err(GruweError::Config(format!("{} contains no sequences", data_path.display())));
    }
    let dims = resolve_dims(cfg, &data)?;
    let sp = split(data.len(), cfg.split, cfg.seed)?;
    let tc = cfg.train_config();
    let mut meta = CheckpointMeta::new(cfg.task, dims, cfg.seed);
    let (params, report) = match &data {
        Dataset::Series(all) => {
            let tr = pick(&sp.train, all);
            let st = Standardization::fit(&tr, dims.input_dim);
            let tr: Vec<_> = tr.iter().map(|s| st.apply(s)).collect::<Result<_>>()?;
            let va: Vec<_> = pick(&sp.validation, all).iter().map(|s| st.apply(s)).collect::<Result<_>>()?;
            meta.standardization = Some(st);
            train(dims, TrainData::Series(&tr), TrainData::Series(&va), &tc)?
        }
        Dataset::Events(all) => {
            let tr = pick(&sp.train, all);
            let va = pick(&sp.validation, all);
            meta.mean_inter_arrival = mean_inter_arrival(&tr);
            train(dims, TrainData::Events(&tr), TrainData::Events(&va), &tc)?
        }
    };
    meta.selected_epoch = Some(report.selected_epoch);
    save_checkpoint(ckpt, &params, &meta)?;
    if let Some(r) = &cfg.report {
        write_json(r, &report)?;
        write_json(&sidecar(r, ".timing.json"), &report.timing_json())?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "epoch  lr          train_loss    {}", report.validation_metric);
    for e in &report.epochs {
        let mark = if e.epoch == report.selected_epoch { " *" } else { "" };
        let _ = writeln!(
            s,
            "{:<6} {:<11.6e} {:<13.6} {:.6}{mark}",
            e.epoch, e.lr, e.train_loss, e.validation_metric
        );
    }
    let _ = writeln!(s, "checkpoint {}", ckpt.display());
    out(w, &s)
}

fn load_model(cfg: &Config) -> Result<(GruweParams, CheckpointMeta)> {
    let path = required(&cfg.checkpoint, "checkpoint")?;
    let (params, meta) = load_checkpoint(path)?;
    if meta.task != cfg.task {
        return Err(GruweError::Config(format!(
            "checkpoint was trained for {} but the config task is {}",
            meta.task, cfg.task
        )));
    }
    let d = match cfg.task {
        Task::Forecast => cfg.input_dim,
        Task::Tpp => cfg.num_types,
    };
    if let Some(d) = d {
        let p = match cfg.task {
            Task::Forecast => cfg.output_dim.unwrap_or(d),
            Task::Tpp => d,
        };
        meta.check_dims(&ModelDims {
            input_dim: d,
            hidden_dim: meta.dims.hidden_dim,
            output_dim: p,
        })?;
    }
    Ok((params, meta))
}

fn standardize_all(meta: &CheckpointMeta, series: &[IrregularSeries]) -> Result<Vec<IrregularSeries>> {
    match &meta.standardization {
        Some(st) => series.iter().map(|s| st.apply(s)).collect(),
        None => Ok(series.to_vec()),
    }
}

fn max_horizon(cfg: &Config, meta: &CheckpointMeta, fallback: &[EventSequence]) -> Result<f64> {
    let mean = meta
        .mean_inter_arrival
        .or_else(|| mean_inter_arrival(fallback))
        .ok_or_else(|| GruweError::Data("no events to size the waiting-time quadrature".into()))?;
    Ok(cfg.quadrature.hmax_multiplier * mean)
}

pub fn cmd_eval(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let (params, meta) = load_model(cfg)?;
    let data = load_dataset(cfg.task, required(&cfg.data, "data")?)?;
    // same partition as training
    let sp = split(data.len(), cfg.split, meta.seed)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let idx = split_indices(&sp, &cfg.eval_split, &all);
    let exec = Executor::new(cfg.workers)?;
    let mut report = EvalReport {
        format: EVAL_REPORT_FORMAT.into(),
        version: EVAL_REPORT_VERSION,
        task: cfg.task,
        split: cfg.eval_split.clone(),
        forecast: None,
        events: None,
    };
    let csv = match &data {
        Dataset::Series(s) => {
            let sel = standardize_all(&meta, &pick(idx, s))?;
            let (m, points) = eval_forecast(&params, &sel, cfg.observe_fraction, &exec)?;
            report.forecast = Some(m);
            to_csv(&points)?
        }
        Dataset::Events(e) => {
            let sel = pick(idx, e);
            let ec = EventEvalConfig {
                max_horizon: max_horizon(cfg, &meta, &sel)?,
                grid: cfg.quadrature.grid,
                mc_samples: cfg.mc_samples,
                seed: cfg.eval_seed,
            };
            let (m, points) = eval_events(&params, &sel, &ec, &exec)?;
            report.events = Some(m);
            to_csv(&points)?
        }
    };
    if let Some(p) = &cfg.eval_report {
        write_json(p, &report)?;
    }
    if let Some(p) = &cfg.metrics_csv {
        write_text(p, &csv)?;
    }
    out(w, &report.table())
}

#[derive(Serialize)]
struct SeriesPrediction {
    sequence: usize,
    t_last: f64,
    predictions: Vec<HorizonValues>,
}

#[derive(Serialize)]
struct HorizonValues {
    horizon: f64,
    time: f64,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct EventPrediction {
    sequence: usize,
    t_last: f64,
    expected_next_gap: f64,
    predictions: Vec<HorizonValues>,
}

pub fn cmd_predict(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let (params, meta) = load_model(cfg)?;
    let input = cfg
        .predict
        .input
        .as_deref()
        .or(cfg.data.as_deref())
        .ok_or_else(|| GruweError::Config("`predict.input` or `data` must be set".into()))?;
    let out_path = required(&cfg.predict.out, "predict.out")?;
    if cfg.predict.horizons.is_empty() {
        return Err(GruweError::Config("`predict.horizons` is empty".into()));
    }
    if let Some(h) = cfg.predict.horizons.iter().find(|h| !(**h >= 0.0) || !h.is_finite()) {
        return Err(GruweError::Config(format!("horizon {h} must be finite and non-negative")));
    }
    let mut lines = String::new();
    match load_dataset(cfg.task, input)? {
        Dataset::Series(series) => {
            let head = params.forecast_head()?;
            let z = standardize_all(&meta, &series)?;
            for (i, s) in z.iter().enumerate() {
                let (states, _) = forward_sequence(s, &params)?;
                let end = states.last().expect("initial state is always present");
                let mut preds = Vec::new();
                for &h in &cfg.predict.horizons {
                    let mut y = predict_at(end, h, params.decay(), head)?.into_inner();
                    if let Some(st) = &meta.standardization {
                        st.invert_row(&mut y);
                    }
                    preds.push(HorizonValues {
                        horizon: h,
                        time: end.last_time + h,
                        values: y,
                    });
                }
                let rec = SeriesPrediction {
                    sequence: i,
                    t_last: end.last_time,
                    predictions: preds,
                };
                lines.push_str(&serde_json::to_string(&rec).map_err(|e| GruweError::Internal(e.to_string()))?);
                lines.push('\n');
            }
        }
        Dataset::Events(seqs) => {
            let head = params.intensity_head()?;
            let k = head.b_lambda.len();
            let hmax = max_horizon(cfg, &meta, &seqs)?;
            for (i, seq) in seqs.iter().enumerate() {
                seq.check_types(k)?;
                let mut state = MarkovState::initial(params.dims().hidden_dim, 0.0);
                for (&t, &kind) in seq.times().iter().zip(seq.types()) {
                    let (mut next, _) = step(&state, &StepInput::event(kind, k, t - state.last_time), &params)?;
                    next.last_time = t;
                    state = next;
                }
                let mut preds = Vec::new();
                for &h in &cfg.predict.horizons {
                    preds.push(HorizonValues {
                        horizon: h,
                        time: state.last_time + h,
                        values: intensity_at(&state, h, params.decay(), head)?.into_inner(),
                    });
                }
                let rec = EventPrediction {
                    sequence: i,
                    t_last: state.last_time,
                    expected_next_gap: predict_next_event_time(&state, &params, hmax, cfg.quadrature.grid)?,
                    predictions: preds,
                };
                lines.push_str(&serde_json::to_string(&rec).map_err(|e| GruweError::Internal(e.to_string()))?);
                lines.push('\n');
            }
        }
    }
    write_text(out_path, &lines)?;
    out(w, &format!("predictions {}\n", out_path.display()))
}

pub fn cmd_synth(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let path = required(&cfg.synth.out, "synth.out")?;
    let mut rng = RngState::new(cfg.seed);
    let oracle = match cfg.synth.generator.as_str() {
        "decay" => {
            let (series, truth) = gen_decay_process(&mut rng, &cfg.synth.decay)?;
            write_series_jsonl(path, &series)?;
            serde_json::json!({
                "generator": "decay",
                "seed": cfg.seed,
                "config": cfg.synth.decay,
                "truth": truth,
            })
        }
        "poisson" => {
            let (seqs, ll) = gen_poisson_events(&mut rng, &cfg.synth.poisson)?;
            write_events_jsonl(path, &seqs)?;
            serde_json::json!({
                "generator": "poisson",
                "seed": cfg.seed,
                "config": cfg.synth.poisson,
                "mean_log_likelihood": ll.iter().sum::<f64>() / ll.len().max(1) as f64,
                "log_likelihood": ll,
            })
        }
        "hawkes" => {
            let (seqs, ll) = gen_hawkes_events(&mut rng, &cfg.synth.hawkes)?;
            write_events_jsonl(path, &seqs)?;
            serde_json::json!({
                "generator": "hawkes",
                "seed": cfg.seed,
                "config": cfg.synth.hawkes,
                "mean_log_likelihood": ll.iter().sum::<f64>() / ll.len().max(1) as f64,
                "log_likelihood": ll,
            })
        }
        other => {
            return Err(GruweError::Config(format!(
                "unknown generator {other:?} (expected decay, poisson or hawkes)"
            )))
        }
    };
    let side = sidecar(path, ".oracle.json");
    write_json(&side, &oracle)?;
    out(w, &format!("wrote {} and {}\n", path.display(), side.display()))
}

/// Per-unit decay table: weight, bias, regime, Lipschitz constant.
pub fn regime_table(params: &GruweParams, tol: f64) -> String {
    let d = params.decay();
    let regimes = classify_regimes(d, tol);
    let mut s = String::new();
    let _ = writeln!(s, "unit  w_gamma        b_gamma        regime          lipschitz");
    for (i, r) in regimes.iter().enumerate() {
        let (wv, bv) = (d.w()[i], d.b()[i]);
        let lip = lipschitz_constant(wv, bv).map_or_else(|_| "-".to_string(), |l| format!("{l:.6e}"));
        let _ = writeln!(s, "{i:<5} {wv:<14.6e} {bv:<14.6e} {:<15} {lip}", r.to_string());
    }
    s
}

pub fn cmd_inspect(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let path = required(&cfg.checkpoint, "checkpoint")?;
    let (params, meta) = load_checkpoint(path)?;
    let header = format!(
        "task {}  D={} H={} P={}\n",
        meta.task, meta.dims.input_dim, meta.dims.hidden_dim, meta.dims.output_dim
    );
    out(w, &(header + &regime_table(&params, cfg.regime_tol)))
}

pub fn cmd_bench_online(cfg: &Config, w: &mut dyn Write) -> Result<()> {
    let (params, _) = load_model(cfg)?;
    let b = &cfg.bench;
    let stream = match &b.stream {
        Some(p) => match load_dataset(cfg.task, p)? {
            Dataset::Series(s) => series_stream(&s),
            Dataset::Events(e) => {
                let k = params.dims().input_dim;
                let mut v = Vec::new();
                for seq in &e {
                    seq.check_types(k)?;
                    let mut prev = 0.0;
                    for (&t, &kind) in seq.times().iter().zip(seq.types()) {
                        v.push(StepInput::event(kind, k, t - prev));
                        prev = t;
                    }
                }
                v
            }
        },
        None => synthetic_stream(&params, b.steps, cfg.seed),
    };
    let report = bench_online(&params, &stream, b.predict_every, b.warmup)?;
    if let Some(p) = &b.out {
        write_json(p, &report)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "steps {}  state bytes {} (constant: {})", report.steps, report.state_bytes, report.state_bytes_constant);
    let _ = writeln!(s, "decile  history  update_med_ns  update_p90_ns  predict_med_ns");
    for d in &report.deciles {
        let _ = writeln!(
            s,
            "{:<7} {:<8} {:<14.0} {:<14.0} {:.0}",
            d.decile, d.history_start, d.update.median_ns, d.update.p90_ns, d.predict.median_ns
        );
    }
    let _ = writeln!(s, "last/first decile median update latency: {:.3}", report.update_latency_ratio);
    out(w, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path, extra: &[&str]) -> Config {
        let mut o: Vec<String> = vec![
            format!("data={}", dir.join("d.jsonl").display()),
            format!("checkpoint={}", dir.join("m.ckpt").display()),
            format!("synth.out={}", dir.join("d.jsonl").display()),
            "synth.decay.n_seq=12".into(),
            "epochs=2".into(),
            "hidden_dim=4".into(),
        ];
        o.extend(extra.iter().map(|s| s.to_string()));
        Config::load(None, &o).unwrap()
    }

    #[test]
    fn synth_train_eval_predict_inspect() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            dir.path(),
            &[
                &format!("eval_report={}", dir.path().join("e.json").display()),
                &format!("predict.out={}", dir.path().join("p.jsonl").display()),
                "predict.horizons=[2.0,0.0,1.0]",
            ],
        );
        let mut sink = Vec::new();
        cmd_synth(&c, &mut sink).unwrap();
        assert!(dir.path().join("d.jsonl.oracle.json").exists());
        cmd_train(&c, &mut sink).unwrap();
        cmd_eval(&c, &mut sink).unwrap();
        let first = std::fs::read(dir.path().join("e.json")).unwrap();
        cmd_eval(&c, &mut sink).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("e.json")).unwrap());

        cmd_predict(&c, &mut sink).unwrap();
        let text = std::fs::read_to_string(dir.path().join("p.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 12);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let hs: Vec<f64> = v["predictions"].as_array().unwrap().iter().map(|p| p["horizon"].as_f64().unwrap()).collect();
        assert_eq!(hs, vec![2.0, 0.0, 1.0]);

        let mut table = Vec::new();
        cmd_inspect(&c, &mut table).unwrap();
        let table = String::from_utf8(table).unwrap();
        // header line, column line, one row per hidden unit
        assert_eq!(table.lines().count(), 2 + 4);
    }

    #[test]
    fn task_mismatch_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), &[]);
        cmd_synth(&c, &mut Vec::new()).unwrap();
        cmd_train(&c, &mut Vec::new()).unwrap();
        let t = cfg(dir.path(), &["task=tpp"]);
        assert!(matches!(cmd_eval(&t, &mut Vec::new()), Err(GruweError::Config(_))));
        let d = cfg(dir.path(), &["input_dim=4"]);
        assert!(matches!(cmd_eval(&d, &mut Vec::new()), Err(GruweError::Load(_))));
    }

    #[test]
    fn missing_data_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path(), &[]);
        let e = cmd_train(&c, &mut Vec::new()).unwrap_err();
        assert_eq!(e.category().exit_code(), 3);
    }

    #[test]
    fn three_regimes_listed() {
        let dims = ModelDims {
            input_dim: 1,
            hidden_dim: 3,
            output_dim: 1,
        };
        let mut p = GruweParams::zeros(Task::Forecast, dims).unwrap();
        p.value_mut(crate::model::Slot::WGamma)
            .as_mut_slice()
            .copy_from_slice(&[1.0, 0.0, -1.0]);
        let t = regime_table(&p, 1e-6);
        assert!(t.contains("state-reset") && t.contains("constant-decay") && t.contains("no-decay"));
        assert_eq!(t.lines().count(), 4);
    }

    #[test]
    fn fresh_init_regimes() {
        let dims = ModelDims {
            input_dim: 2,
            hidden_dim: 32,
            output_dim: 2,
        };
        let p = GruweParams::init(Task::Forecast, dims, &mut RngState::new(8)).unwrap();
        assert!(!regime_table(&p, 1e-6).contains("no-decay"));
    }

    #[test]
    fn parse_errors_exit_2() {
        assert_eq!(run(["gruwe", "frobnicate"]), 2);
        assert_eq!(run(["gruwe", "train", "--bogus"]), 2);
        assert_eq!(run(["gruwe", "train", "--set", "epochs=0"]), 2);
        assert_eq!(run(["gruwe", "--help"]), 0);
    }
}
