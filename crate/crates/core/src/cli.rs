//! The `sffn` command line. [`run`] is the whole program; `main` only wires
//! up stdio and the thread pool.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::accounting::{count_params, tokens_for_flops_budget, tokens_for_params, training_flops};
use crate::bench::{self, FfnVariant, GenerationOptions, Protocol};
use crate::error::{Error, Result};
use crate::kv::{render, KvMap};
use crate::model::{ModelConfig, TransformerLM};
use crate::numeric::{svd_thin, Rng};
use crate::scaling::{fit_report, read_points_csv, REFERENCE_CSV};
use crate::spectral::spectral_init;
use crate::trainer::{
    evaluate_ppl, synthetic_corpus, Checkpoint, TokenStream, TrainConfig, Trainer,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SFFN_THREADS";

/// Everything a run needs, as one flat `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub corpus: Option<PathBuf>,
    pub eval_corpus: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

const PATH_KEYS: [&str; 4] = ["corpus", "eval_corpus", "checkpoint", "out"];

impl RunConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            train: TrainConfig::default(),
            corpus: None,
            eval_corpus: None,
            checkpoint: None,
            out: None,
        }
    }

    pub fn allowed_keys() -> Vec<&'static str> {
        let mut keys: Vec<&str> = ModelConfig::KEYS.to_vec();
        keys.extend(TrainConfig::KEYS);
        keys.extend(PATH_KEYS);
        keys
    }

    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        let mut s = String::from("# model\n");
        s += &self.model.to_text();
        s += "# training\n";
        s += &self.train.to_text();
        s += "# paths (empty = unset)\n";
        s += &render(&[
            ("corpus", path(&self.corpus)),
            ("eval_corpus", path(&self.eval_corpus)),
            ("checkpoint", path(&self.checkpoint)),
            ("out", path(&self.out)),
        ]);
        s
    }

    /// Overlay `map` onto `base`; unknown keys are rejected.
    pub fn from_kv(map: &KvMap, base: &RunConfig) -> Result<Self> {
        map.reject_unknown(&Self::allowed_keys())?;
        let path = |key: &str, old: &Option<PathBuf>| match map.get_raw(key) {
            None => old.clone(),
            Some("") => None,
            Some(p) => Some(PathBuf::from(p)),
        };
        Ok(Self {
            model: ModelConfig::from_kv(map, Some(&base.model))?,
            train: base.train.clone().apply_kv(map)?,
            corpus: path("corpus", &base.corpus),
            eval_corpus: path("eval_corpus", &base.eval_corpus),
            checkpoint: path("checkpoint", &base.checkpoint),
            out: path("out", &base.out),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let base = RunConfig::new(ModelConfig::dense(768, 12, crate::model::DEFAULT_VOCAB));
        Self::from_kv(&KvMap::parse(text)?, &base)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sffn",
    version,
    about = "Transformer LMs with low-rank feed-forward blocks: accounting, training, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parameter counts by component.
    Count(Common),
    /// Matmul FLOPs per token and for a training run.
    Flops {
        #[command(flatten)]
        common: Common,
        /// Training tokens (default: 20 per parameter).
        #[arg(long)]
        tokens: Option<f64>,
    },
    /// Token budget that a FLOPs budget buys.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        budget: f64,
    },
    /// Train on a token file or a synthetic byte corpus.
    Train {
        #[command(flatten)]
        common: Common,
        /// Generate a synthetic byte corpus of this many tokens instead of `corpus`.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many completed steps (the schedule still spans total_steps).
        #[arg(long)]
        stop_after: Option<usize>,
        #[arg(long, default_value_t = 10)]
        log_every: usize,
    },
    /// Held-out loss and perplexity of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 1 << 20)]
        max_tokens: usize,
    },
    /// f32 FFN latency sweep over widths.
    BenchFfn {
        #[arg(long, value_delimiter = ',', default_values_t = vec![32, 64, 128, 256])]
        widths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec!["dense".to_string(), "lowrank-0.625".to_string(), "lowrank-0.3125".to_string()])]
        variants: Vec<String>,
        #[arg(long, default_value_t = bench::FFN_TOKENS)]
        tokens: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batched KV-cache decode throughput.
    BenchGen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8, 16, 32, 64])]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        prompt_len: usize,
        #[arg(long, default_value_t = 256)]
        gen_len: usize,
        /// KV-cache budget in MiB.
        #[arg(long, default_value_t = 1024)]
        memory_mib: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Fit loss = a·C^b per label and compare slopes.
    FitScaling {
        /// CSV with `label,flops,loss`; the bundled reference curves when omitted.
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Spectral-initialization error of the first factorized FFN block.
    InspectInit {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// s, m, l, xl, gqa-m, gqa-l, wide-m, wide-l or desk.
    #[arg(long)]
    preset: Option<String>,
    /// `key = value` file (see --dump-config).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    intermediate: Option<usize>,
    /// Low-rank FFN with this rank (first block stays dense).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    kv_dim: Option<usize>,
    /// Any config key, repeatable: `--set peak_lr=3e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dump_config: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

impl Common {
    fn resolve(&self, default_preset: &str) -> std::result::Result<RunConfig, Failure> {
        let name = self.preset.as_deref().unwrap_or(default_preset);
        let preset = ModelConfig::preset(name).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown preset `{name}` (expected one of {})",
                ModelConfig::PRESETS.join(", ")
            ))
        })?;
        let mut map = KvMap::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            map.merge(
                &KvMap::parse(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
            );
        }
        let flags = [
            ("width", self.width),
            ("layers", self.layers),
            ("vocab", self.vocab),
            ("seq_len", self.seq_len),
            ("intermediate", self.intermediate),
            ("rank", self.rank),
            ("heads", self.heads),
            ("kv_dim", self.kv_dim),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.set(k, v);
            }
        }
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            map.set(k.trim(), v.trim());
        }
        if let Some(out) = &self.out {
            map.set("out", out.display());
        }
        let rc = RunConfig::from_kv(&map, &RunConfig::new(preset))
            .map_err(|e| Failure::Usage(e.to_string()))?;
        rc.model
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(rc)
    }
}

fn emit(out: &mut dyn Write, dir: Option<&Path>, file: &str, text: &str) -> Outcome {
    out.write_all(text.as_bytes())?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(file), text)?;
    }
    Ok(())
}

fn load_stream(
    path: Option<&PathBuf>,
    synthetic: Option<usize>,
    seed: u64,
) -> std::result::Result<TokenStream, Failure> {
    match (path, synthetic) {
        (_, Some(n)) => Ok(synthetic_corpus(n, seed)),
        (Some(p), None) => Ok(TokenStream::open(p)?),
        (None, None) => Err(Failure::Usage(
            "need a corpus path (corpus = ...) or --synthetic N".into(),
        )),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Outcome {
    macro_rules! resolved {
        ($common:expr, $default:expr) => {{
            let rc = $common.resolve($default)?;
            if $common.dump_config {
                out.write_all(rc.to_text().as_bytes())?;
                return Ok(());
            }
            rc
        }};
    }
    match cli.command {
        Command::Count(common) => {
            let rc = resolved!(common, "s");
            let p = count_params(&rc.model);
            let text = if common.csv { p.to_csv() } else { p.to_table() };
            emit(out, rc.out.as_deref(), "count.csv", &text)?;
        }
        Command::Flops { common, tokens } => {
            let rc = resolved!(common, "s");
            let tokens =
                tokens.unwrap_or_else(|| tokens_for_params(count_params(&rc.model).total as f64));
            let f = training_flops(&rc.model, tokens, rc.model.seq_len);
            let text = if common.csv { f.to_csv() } else { f.to_table() };
            emit(out, rc.out.as_deref(), "flops.csv", &text)?;
        }
        Command::Plan { common, budget } => {
            let rc = resolved!(common, "s");
            if !(budget > 0.0 && budget.is_finite()) {
                return Err(Failure::Usage(format!(
                    "--budget must be positive, got {budget}"
                )));
            }
            let plan = tokens_for_flops_budget(&rc.model, budget);
            emit(out, rc.out.as_deref(), "plan.txt", &plan.to_table())?;
        }
        Command::Train {
            common,
            synthetic,
            resume,
            stop_after,
            log_every,
        } => {
            let rc = resolved!(common, "desk");
            let stream = load_stream(rc.corpus.as_ref(), synthetic, rc.train.seed)?;
            let (train_stream, eval_stream) = match &rc.eval_corpus {
                Some(p) => (stream, Some(TokenStream::open(p)?)),
                None if synthetic.is_some() => {
                    let (a, b) = stream.split_tail(0.05);
                    (a, Some(b))
                }
                None => (stream, None),
            };
            let mut trainer = match &resume {
                Some(path) => Trainer::resume(
                    Checkpoint::load_expecting(path, &rc.model)?,
                    &train_stream,
                    rc.train.clone(),
                )?,
                None => Trainer::new(
                    TransformerLM::new(&rc.model, rc.train.seed)?,
                    &train_stream,
                    rc.train.clone(),
                )?,
            };
            writeln!(
                out,
                "params {}  steps {}..{}",
                trainer.model().param_count(),
                trainer.step() + 1,
                stop_after
                    .unwrap_or(rc.train.total_steps)
                    .min(rc.train.total_steps)
            )?;
            let stop = stop_after.unwrap_or(rc.train.total_steps);
            while trainer.step() < stop.min(rc.train.total_steps) {
                let r = trainer.train_step()?;
                if log_every > 0 && (r.step % log_every == 0 || r.step == 1) {
                    writeln!(
                        out,
                        "step {:>6}  tokens {:>10}  loss {:.4}  lr {:.3e}",
                        r.step, r.tokens, r.loss, r.lr
                    )?;
                }
            }
            if let Some(dir) = &rc.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("log.csv"), trainer.log().to_csv())?;
                std::fs::write(dir.join("config.txt"), rc.to_text())?;
                trainer.checkpoint().save(dir.join("final.ckpt"))?;
            }
            if let Some(ev) = &eval_stream {
                let (loss, ppl) = evaluate_ppl(trainer.model(), ev, 1 << 18)?;
                writeln!(out, "eval loss {loss:.4}  ppl {ppl:.3}")?;
            }
        }
        Command::Eval {
            common,
            synthetic,
            max_tokens,
        } => {
            let rc = resolved!(common, "desk");
            let ckpt = rc.checkpoint.as_ref().ok_or_else(|| {
                Failure::Usage("eval needs `checkpoint = PATH` (e.g. --set checkpoint=...)".into())
            })?;
            let model = Checkpoint::load(ckpt)?.model;
            let stream = match (&rc.eval_corpus, synthetic) {
                (Some(p), None) => TokenStream::open(p)?,
                _ => load_stream(rc.corpus.as_ref(), synthetic, rc.train.seed)?,
            };
            let (loss, ppl) = evaluate_ppl(&model, &stream, max_tokens)?;
            emit(
                out,
                rc.out.as_deref(),
                "eval.csv",
                &format!("loss,ppl\n{loss},{ppl}\n"),
            )?;
        }
        Command::BenchFfn {
            widths,
            variants,
            tokens,
            reps,
            warmup,
            out: dir,
        } => {
            if reps < 5 {
                return Err(Failure::Usage("--reps must be at least 5".into()));
            }
            let vs = variants
                .iter()
                .map(|v| {
                    FfnVariant::parse(v)
                        .ok_or_else(|| Failure::Usage(format!("unknown variant `{v}`")))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let results = bench::bench_ffn(&widths, &vs, tokens, Protocol { warmup, reps })?;
            let mut text = bench::to_csv(&results);
            emit(out, dir.as_deref(), "bench_ffn.csv", &text)?;
            text.clear();
            for (w, v, s) in bench::speedups(&results) {
                text += &format!("# speedup width {w} {v}: {s:.3}x\n");
            }
            out.write_all(text.as_bytes())?;
        }
        Command::BenchGen {
            common,
            batch_sizes,
            prompt_len,
            gen_len,
            memory_mib,
            reps,
        } => {
            let rc = resolved!(common, "desk");
            if reps < 5 {
                return Err(Failure::Usage("--reps must be at least 5".into()));
            }
            let model = TransformerLM::new(&rc.model, rc.train.seed)?;
            let opts = GenerationOptions {
                batch_sizes,
                prompt_len,
                gen_len,
                memory_budget: memory_mib << 20,
                protocol: Protocol { warmup: 2, reps },
                ..GenerationOptions::default()
            };
            let label = common.preset.as_deref().unwrap_or("desk");
            let rep = bench::bench_generation(&model, label, &opts)?;
            emit(
                out,
                rc.out.as_deref(),
                "bench_gen.csv",
                &bench::to_csv(&rep.sweep),
            )?;
            writeln!(
                out,
                "# max throughput {:.1} tokens/s ({})",
                rep.best().tokens_per_s,
                rep.best().label
            )?;
        }
        Command::FitScaling {
            input,
            out: dir,
            csv,
        } => {
            let text = match &input {
                Some(p) => std::fs::read_to_string(p)?,
                None => REFERENCE_CSV.to_string(),
            };
            let report = fit_report(&read_points_csv(&text)?)?;
            if let Some(d) = &dir {
                std::fs::create_dir_all(d)?;
                std::fs::write(d.join("fit.csv"), report.to_csv())?;
                std::fs::write(d.join("fit.txt"), report.to_text())?;
            }
            out.write_all(
                if csv {
                    report.to_csv()
                } else {
                    report.to_text()
                }
                .as_bytes(),
            )?;
        }
        Command::InspectInit { common } => {
            let rc = resolved!(common, "desk");
            let c = &rc.model;
            let layer = (0..c.n_layers).find(|&l| c.ffn.rank_for_layer(l).is_some());
            let (Some(layer), Some(rank)) = (layer, layer.and_then(|l| c.ffn.rank_for_layer(l)))
            else {
                return Err(Failure::Usage(
                    "inspect-init needs a low-rank FFN (--rank R)".into(),
                ));
            };
            let mut rng = Rng::new(rc.train.seed);
            let mut text = format!("block {layer}, rank {rank}\nmatrix,rows,cols,rel_error,tail_bound,top_sigma,sigma_at_rank\n");
            for (name, (m, n)) in [
                ("w_in", (c.width, c.intermediate)),
                ("w_out", (c.intermediate, c.width)),
            ] {
                let w = rng.normal_matrix(m, n, c.init_std);
                let svd = svd_thin(&w)?;
                let pair = spectral_init(&w, rank)?;
                let err = w.sub(&pair.product())?.frobenius_norm();
                let tail: f64 = svd.sigma[rank..]
                    .iter()
                    .fold(0.0, |acc, s| acc + s * s)
                    .sqrt();
                let norm = w.frobenius_norm();
                text += &format!(
                    "{name},{m},{n},{:.6},{:.6},{:.6e},{:.6e}\n",
                    err / norm,
                    tail / norm,
                    svd.sigma[0],
                    svd.sigma[rank - 1]
                );
            }
            emit(out, rc.out.as_deref(), "inspect_init.csv", &text)?;
        }
    }
    Ok(())
}

/// Parse `argv` (including the program name) and run the subcommand.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Size the global pool from `SFFN_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| {
            Error::Parse(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let argv = std::iter::once("sffn").chain(args.iter().copied());
        let code = run(argv, &mut o, &mut e);
        (
            code,
            String::from_utf8(o).unwrap(),
            String::from_utf8(e).unwrap(),
        )
    }

    #[test]
    fn count_small_preset() {
        let (code, out, _) = run_str(&["count", "--preset", "s", "--csv"]);
        assert_eq!(code, 0);
        let total: f64 = out.lines().find(|l| l.starts_with("total,")).unwrap()[6..]
            .parse()
            .unwrap();
        let ffn: f64 = out.lines().find(|l| l.starts_with("ffn,")).unwrap()[4..]
            .parse()
            .unwrap();
        assert!((total / 1e6 - 110.0).abs() / 110.0 < 0.01);
        assert!((ffn / 1e6 - 57.0).abs() / 57.0 < 0.01);
    }

    #[test]
    fn embedding_only_count() {
        let (code, out, _) = run_str(&[
            "count", "--width", "64", "--layers", "0", "--vocab", "10", "--csv",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("embedding,640\n"), "{out}");
    }

    #[test]
    fn plan_wide_m() {
        let (code, out, _) = run_str(&["plan", "--preset", "wide-m", "--budget", "1.55e19"]);
        assert_eq!(code, 0);
        assert!(out.contains("(10.6B)"), "{out}");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_str(&["count", "--preset", "xxl"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["count", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["count", "--set", "nonsense=1"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let (code, _, err) = run_str(&["fit-scaling", "/definitely/not/here.csv"]);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(err.contains("error"));
    }

    #[test]
    fn dump_config_round_trips() {
        let (code, text, _) = run_str(&[
            "count",
            "--preset",
            "wide-l",
            "--set",
            "peak_lr=0.002",
            "--dump-config",
        ]);
        assert_eq!(code, 0);
        let rc = RunConfig::parse(&text).unwrap();
        assert_eq!(rc.model, ModelConfig::preset("wide-l").unwrap());
        assert_eq!(rc.train.peak_lr, 0.002);
        assert_eq!(RunConfig::parse(&rc.to_text()).unwrap(), rc);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, &text).unwrap();
        let (_, again, _) = run_str(&["count", "--config", p.to_str().unwrap(), "--dump-config"]);
        assert_eq!(again, text);
    }

    #[test]
    fn fit_scaling_reference() {
        let (code, out, _) = run_str(&["fit-scaling"]);
        assert_eq!(code, 0);
        assert!(out.contains("lowrank-32 < lowrank-63 < dense"), "{out}");
    }

    #[test]
    fn inspect_init_reports_tail_bound() {
        let (code, out, _) = run_str(&[
            "inspect-init",
            "--width",
            "16",
            "--layers",
            "2",
            "--rank",
            "4",
        ]);
        assert_eq!(code, 0, "{out}");
        let row = out.lines().find(|l| l.starts_with("w_in,")).unwrap();
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[3], f[4]);
        assert_eq!(
            run_str(&["inspect-init", "--width", "16", "--layers", "2"]).0,
            EXIT_USAGE
        );
    }
}
