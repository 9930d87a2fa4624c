use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use eccfm::backbone::{BackboneConfig, BackboneKind, Checkpoint, ModelParams, OutputHead};
use eccfm::channel::modulate_bpsk;
use eccfm::codes::{Code, ParityCheckMatrix};
use eccfm::decoders::{DdeccDecoder, Decoder, NeuralModel};
use eccfm::harness::{
    build_decoder, covering_beta_step, frame, max_step_changes, run_benchmark, run_convergence_stats,
    run_eval, trace_csv, trace_trajectory, BenchRow, ConvergenceRow, DecoderKind, ExperimentConfig,
    ResultHeader,
};
use eccfm::syndrome::{soft_syndrome, soft_syndrome_condition};
use eccfm::trainer::{
    gradient_check, prop1_monte_carlo, ConditionKind, TrainConfig, Trainer, MIN_SYNDROME_SIGMA,
};
use serde::Serialize;

use crate::setup::{
    apply_decoder, base_config, inherit_schedule, load_checkpoint, load_code, load_params, out_dir,
    to_toml, write_file, write_toml, CliError, CliResult, TRAIN_CONFIG_FILE,
};
use crate::{BenchArgs, CheckArgs, EvalArgs, TraceArgs, TrainArgs};

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const MODEL_FILE: &str = "model.bin";

#[derive(Serialize)]
struct TrainSummary<'a> {
    header: ResultHeader,
    result: TrainOutcome,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct TrainOutcome {
    epochs: usize,
    global_step: u64,
    final_loss: f64,
    final_consistency: f64,
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    let t = &mut cfg.train;
    set!(t.epochs, a.epochs);
    set!(t.steps_per_epoch, a.steps);
    set!(t.batch_size, a.batch_size);
    set!(t.lr_init, a.lr);
    set!(t.lr_final, a.lr_final);
    set!(t.lambda_syn, a.lambda);
    set!(t.alpha, a.alpha);
    set!(t.ema_decay, a.ema_decay);
    set!(t.objective, a.objective);
    set!(t.condition_kind, a.condition);
    if a.steps_override.is_some() {
        t.steps_override = a.steps_override;
    }
    if a.syndrome_sigma.is_some() {
        t.syndrome_sigma = a.syndrome_sigma;
    }
    if a.random_codewords {
        t.zero_codeword = false;
    }
    t.seed = cfg.seed;
    set!(cfg.backbone.kind, a.backbone);
    if a.depth.is_some() {
        cfg.backbone.depth = a.depth;
    }
    if a.width.is_some() {
        cfg.backbone.width = a.width;
    }
    if a.embed_dim.is_some() {
        cfg.backbone.embed_dim = a.embed_dim;
    }

    let code = load_code(&cfg.code)?;
    let auto = match a.beta_step.as_deref() {
        Some("auto") => true,
        Some(v) => {
            cfg.train.beta_step = v
                .parse()
                .map_err(|_| eccfm::Error::InvalidConfig(format!("beta_step {v:?} is not a number")))?;
            false
        }
        None => a.common.config.is_none(),
    };
    if auto {
        let sigma = cfg.channel.resolve(&code).sigma()?;
        let steps = cfg.schedule(&code)?.total_steps;
        cfg.train.beta_step = covering_beta_step(sigma, steps);
    }
    cfg.validate(&code, true)?;

    let dir = out_dir(&cfg)?;
    write_toml(&dir, TRAIN_CONFIG_FILE, &cfg)?;

    let mut trainer = match &a.resume {
        Some(p) => Trainer::resume(&code, cfg.train.clone(), load_checkpoint(p)?)?,
        None => {
            let bc = cfg.backbone.resolve(&code, cfg.train.objective.head());
            Trainer::new(&code, bc, cfg.train.clone())?
        }
    };

    let log_path = dir.join("train_log.csv");
    let mut log = String::new();
    if a.resume.is_none() || !log_path.exists() {
        log.push_str("epoch,lr,loss,consistency,condition_mean\n");
    }
    let steps = cfg.train.steps_per_epoch;
    let report_every = (cfg.train.epochs / 20).max(1);
    let (mut last_loss, mut last_cons) = (f64::NAN, f64::NAN);
    while !trainer.is_done() {
        trainer.run_epoch()?;
        let st = trainer.state();
        let recent = &st.history[st.history.len() - steps..];
        let mean = |f: fn(&eccfm::trainer::StepRecord) -> f64| recent.iter().map(f).sum::<f64>() / steps as f64;
        last_loss = mean(|r| r.loss);
        last_cons = mean(|r| r.consistency);
        let _ = writeln!(
            log,
            "{},{:e},{:.9},{:.9},{:.9}",
            st.epoch,
            recent[0].lr,
            last_loss,
            last_cons,
            mean(|r| r.condition_mean)
        );
        if st.epoch % report_every == 0 {
            eprintln!("epoch {}/{} loss {last_loss:.6}", st.epoch, cfg.train.epochs);
        }
        if a.checkpoint_every.is_some_and(|k| k > 0 && st.epoch % k == 0) {
            write_checkpoints(&dir, &trainer)?;
        }
    }
    write_checkpoints(&dir, &trainer)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(a.resume.is_some())
        .write(true)
        .truncate(a.resume.is_none())
        .open(&log_path)
        .map_err(|e| CliError::Io {
            path: log_path.clone(),
            msg: e.to_string(),
        })?;
    file.write_all(log.as_bytes()).map_err(|e| CliError::Io {
        path: log_path.clone(),
        msg: e.to_string(),
    })?;

    let st = trainer.state();
    let summary = TrainSummary {
        header: ResultHeader::new(cfg.seed, &code, st.params.count()),
        result: TrainOutcome {
            epochs: st.epoch,
            global_step: st.global_step,
            final_loss: last_loss,
            final_consistency: last_cons,
        },
        config: &cfg,
    };
    write_toml(&dir, "train_summary.toml", &summary)?;
    println!(
        "trained {} epochs, final loss {last_loss:.6}; weights in {}",
        st.epoch,
        dir.join(MODEL_FILE).display()
    );
    Ok(())
}

/// Full resumable state, plus the EMA weights alone for decoding.
fn write_checkpoints(dir: &Path, trainer: &Trainer) -> CliResult<()> {
    write_file(&dir.join(CHECKPOINT_FILE), trainer.checkpoint().to_bytes())?;
    let ema = Checkpoint {
        params: trainer.ema_params().clone(),
        training: None,
    };
    write_file(&dir.join(MODEL_FILE), ema.to_bytes())
}

fn decoder_params(cfg: &ExperimentConfig, kind: DecoderKind, path: Option<&Path>) -> CliResult<Option<ModelParams>> {
    if !kind.is_neural() {
        return Ok(None);
    }
    let path = path
        .map(Path::to_path_buf)
        .or_else(|| cfg.decoder.checkpoint.as_ref().map(PathBuf::from))
        .ok_or_else(|| eccfm::Error::InvalidConfig(format!("decoder {kind:?} needs --checkpoint")))?;
    Ok(Some(load_params(&path)?))
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    header: ResultHeader,
    result: EvalCounts,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct EvalCounts {
    frames: u64,
    bit_errors: u64,
    frame_errors: u64,
    ber: f64,
    fer: f64,
    neg_ln_ber: Option<f64>,
    decoder_id: String,
    code_id: String,
    channel: String,
    seed: u64,
}

#[derive(Serialize)]
struct Timing {
    wall_time: f64,
    throughput: f64,
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_decoder(&mut cfg, &a.decoder, a.common.config.is_some())?;
    set!(cfg.stop.min_frame_errors, a.min_frame_errors);
    set!(cfg.stop.max_frames, a.max_frames);
    set!(cfg.eval.workers, a.workers);
    set!(cfg.eval.chunk, a.chunk);
    if a.zero_codeword {
        cfg.eval.zero_codeword = true;
    }
    let code = load_code(&cfg.code)?;
    cfg.validate(&code, false)?;
    let params = decoder_params(&cfg, cfg.decoder.kind, None)?;
    let param_count = params.as_ref().map_or(0, ModelParams::count);
    let dec = build_decoder(&cfg.decoder, &code, cfg.schedule(&code)?, params)?;
    let ch = cfg.channel.resolve(&code);

    let dir = out_dir(&cfg)?;
    write_toml(&dir, "eval_config.toml", &cfg)?;
    let r = run_eval(dec.as_ref(), &code, &ch, &cfg.stop, cfg.seed, &cfg.eval)?;
    let summary = EvalSummary {
        header: ResultHeader::new(cfg.seed, &code, param_count),
        result: EvalCounts {
            frames: r.frames,
            bit_errors: r.bit_errors,
            frame_errors: r.frame_errors,
            ber: r.ber,
            fer: r.fer,
            neg_ln_ber: r.neg_ln_ber,
            decoder_id: r.decoder_id.clone(),
            code_id: r.code_id.clone(),
            channel: r.channel.clone(),
            seed: r.seed,
        },
        config: &cfg,
    };
    // Timing varies run to run, so it lives apart from the summary.
    write_toml(&dir, "summary.toml", &summary)?;
    write_toml(
        &dir,
        "timing.toml",
        &Timing {
            wall_time: r.wall_time,
            throughput: r.throughput,
        },
    )?;
    println!(
        "{} on {} at {}: frames {} ber {:.6e} fer {:.6e}",
        r.decoder_id, r.code_id, r.channel, r.frames, r.ber, r.fer
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    header: ResultHeader,
    throughput: &'a [BenchRow],
    convergence: &'a [ConvergenceRow],
    config: &'a ExperimentConfig,
}

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_decoder(&mut cfg, &a.decoder, a.common.config.is_some())?;
    set!(cfg.bench.frames, a.frames);
    set!(cfg.bench.warmup_frames, a.warmup_frames);
    set!(cfg.bench.batch_size, a.batch_size);
    if let (Some(p), None, false) = (&a.noise_checkpoint, a.decoder.beta_step, a.common.config.is_some()) {
        inherit_schedule(&mut cfg, p, false)?;
    }
    let code = load_code(&cfg.code)?;
    if a.decoders.is_empty() {
        return Err(eccfm::Error::InvalidConfig("no decoders to benchmark".into()).into());
    }
    // Checkpoints are checked per decoder below; validate everything else.
    let mut probe = cfg.clone();
    probe.decoder.kind = DecoderKind::Bp;
    probe.validate(&code, false)?;
    cfg.decoder.kind = a.decoders[0];
    let schedule = cfg.schedule(&code)?;

    let mut decoders: Vec<Box<dyn Decoder>> = Vec::new();
    let mut param_count = 0;
    for &kind in &a.decoders {
        let path = match kind {
            DecoderKind::Ddecc => a.noise_checkpoint.as_deref(),
            _ => None,
        };
        let params = decoder_params(&cfg, kind, path)?;
        param_count = param_count.max(params.as_ref().map_or(0, ModelParams::count));
        let spec = eccfm::harness::DecoderSpec {
            kind,
            ..cfg.decoder.clone()
        };
        decoders.push(build_decoder(&spec, &code, schedule, params)?);
    }
    let refs: Vec<&dyn Decoder> = decoders.iter().map(|d| d.as_ref()).collect();
    let ch = cfg.channel.resolve(&code);
    let rows = run_benchmark(&refs, &code, &ch, &cfg.bench, cfg.seed)?;

    let mut conv = Vec::new();
    if let Some(i) = a.decoders.iter().position(|&k| k == DecoderKind::Ddecc) {
        let channels: Vec<_> = a
            .sweep
            .iter()
            .map(|&e| {
                let mut s = cfg.channel;
                s.ebn0_db = e;
                s.sigma_override = None;
                s.resolve(&code)
            })
            .collect();
        conv = run_convergence_stats(refs[i], &code, &channels, cfg.bench.frames, cfg.seed)?;
    }

    let dir = out_dir(&cfg)?;
    write_toml(&dir, "bench_config.toml", &cfg)?;
    let mut csv = String::from("decoder_id,frames,batch_size,wall_time,throughput,speedup\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{:.3},{:.4}",
            r.decoder_id, r.frames, r.batch_size, r.wall_time, r.throughput, r.speedup
        );
    }
    write_file(&dir.join("bench.csv"), &csv)?;
    if !conv.is_empty() {
        let mut c = String::from("ebn0_db,frames,mean_steps,variance,non_converged\n");
        for r in &conv {
            let _ = writeln!(c, "{},{},{:.6},{:.6},{}", r.ebn0_db, r.frames, r.mean_steps, r.variance, r.non_converged);
        }
        write_file(&dir.join("convergence.csv"), &c)?;
    }
    let summary = BenchSummary {
        header: ResultHeader::new(cfg.seed, &code, param_count),
        throughput: &rows,
        convergence: &conv,
        config: &cfg,
    };
    write_toml(&dir, "bench_summary.toml", &summary)?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct TraceSummary<'a> {
    header: ResultHeader,
    rows: usize,
    max_soft_change: f64,
    max_hard_change: f64,
    config: &'a ExperimentConfig,
}

pub fn trace(a: &TraceArgs) -> CliResult<()> {
    let mut cfg = base_config(&a.common)?;
    apply_decoder(&mut cfg, &a.decoder, a.common.config.is_some())?;
    cfg.decoder.kind = DecoderKind::Ddecc;
    let code = load_code(&cfg.code)?;
    cfg.validate(&code, false)?;
    let params = decoder_params(&cfg, DecoderKind::Ddecc, None)?.expect("neural decoder");
    let param_count = params.count();
    let mut dec = DdeccDecoder::new(
        NeuralModel::new(params, &code.h, ConditionKind::Hard)?,
        code.h.clone(),
        cfg.schedule(&code)?,
    );
    if let Some(s) = cfg.decoder.max_steps {
        dec.max_steps = s;
    }
    dec.trace = true;
    let ch = cfg.channel.resolve(&code);
    let ys: Vec<Vec<f64>> = (0..a.samples as u64)
        .map(|i| frame(&code, &ch, cfg.seed, i, cfg.eval.zero_codeword).map(|f| f.y))
        .collect::<eccfm::Result<_>>()?;
    let sigma = ch.sigma()?.max(MIN_SYNDROME_SIGMA);
    let rows = trace_trajectory(&dec, &ys, sigma, cfg.seed)?;
    let (soft, hard) = max_step_changes(&rows, code.m());

    let dir = out_dir(&cfg)?;
    write_toml(&dir, "trace_config.toml", &cfg)?;
    write_file(&dir.join("trace.csv"), trace_csv(&rows))?;
    let summary = TraceSummary {
        header: ResultHeader::new(cfg.seed, &code, param_count),
        rows: rows.len(),
        max_soft_change: soft,
        max_hard_change: hard,
        config: &cfg,
    };
    write_toml(&dir, "trace_summary.toml", &summary)?;
    println!("{} rows; max step change e_soft {soft:.6}, e_hard/m {hard:.6}", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct CheckItem {
    name: String,
    passed: bool,
    value: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct CheckReport<'a> {
    header: ResultHeader,
    checks: &'a [CheckItem],
    config: &'a ExperimentConfig,
}

/// `tanh(a)` via the logistic form `2 sigmoid(2a) - 1`.
fn logistic_tanh(a: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * a).exp()) - 1.0
}

fn syndrome_checks(code: &Code) -> CliResult<Vec<CheckItem>> {
    let mut out = Vec::new();
    let w4 = ParityCheckMatrix::from_rows(vec![vec![1, 1, 1, 1]])?;
    let s = soft_syndrome(&[1.0; 4], &w4, 1.0)?.values[0];
    let reference = 0.5 - 0.5 * logistic_tanh(1.0).powi(4);
    out.push(CheckItem {
        name: "soft_syndrome_weight4".into(),
        passed: (s - 0.331785).abs() < 1e-6 && (s - reference).abs() < 1e-12,
        value: s,
        threshold: 1e-6,
    });
    let erased = soft_syndrome(&[1.0, 0.0, 1.0, 1.0], &w4, 1.0)?.values[0];
    out.push(CheckItem {
        name: "soft_syndrome_erased".into(),
        passed: erased == 0.5,
        value: erased,
        threshold: 0.0,
    });
    let mut worst: f64 = 0.0;
    let k = code.k().min(12);
    for i in 0..(1u64 << k) {
        let x = modulate_bpsk(&code.g.encode_index(i).bits)?;
        worst = worst.max(soft_syndrome_condition(&x, &code.h, 0.3)?);
    }
    out.push(CheckItem {
        name: "e_soft_valid_codewords".into(),
        passed: worst < 1e-6,
        value: worst,
        threshold: 1e-6,
    });
    Ok(out)
}

pub fn check(a: &CheckArgs) -> CliResult<()> {
    let cfg = base_config(&a.common)?;
    let code = load_code(&cfg.code)?;
    let mut items = syndrome_checks(&code)?;

    let violations = prop1_monte_carlo(a.trials, cfg.seed);
    items.push(CheckItem {
        name: format!("consistency_bound_{}_trials", a.trials),
        passed: violations == 0,
        value: violations as f64,
        threshold: 0.0,
    });

    for kind in [BackboneKind::Mlp, BackboneKind::TinyCrossAttention] {
        let tc = TrainConfig {
            epochs: 1,
            steps_per_epoch: 1,
            batch_size: 8,
            beta_step: 0.07,
            seed: cfg.seed,
            ..TrainConfig::default()
        };
        let bc = BackboneConfig::for_code(kind, &code.h).with_head(OutputHead::Codeword);
        let gc = gradient_check(&Trainer::new(&code, bc, tc)?, a.coords, cfg.seed)?;
        items.push(CheckItem {
            name: match kind {
                BackboneKind::Mlp => "gradient_mlp",
                BackboneKind::TinyCrossAttention => "gradient_tiny_cross_attention",
            }
            .into(),
            passed: gc.max_rel_error < 1e-4,
            value: gc.max_rel_error,
            threshold: 1e-4,
        });
    }

    let dir = out_dir(&cfg)?;
    let report = CheckReport {
        header: ResultHeader::new(cfg.seed, &code, 0),
        checks: &items,
        config: &cfg,
    };
    let path = dir.join("check.toml");
    write_file(&path, to_toml(&report, &path)?)?;
    for it in &items {
        println!("{} {} value={:e}", if it.passed { "PASS" } else { "FAIL" }, it.name, it.value);
    }
    let failed: Vec<&str> = items.iter().filter(|i| !i.passed).map(|i| i.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}
