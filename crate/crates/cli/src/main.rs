mod args;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use gaze_ident::analysis::{
    duration_summary, merged_feature_matrices, rank_features, write_duration_csv, write_ranking_csv,
};
use gaze_ident::evaluation::{
    derivative_sweep, fragment_sweep_with, run_experiment, segment_recording, write_derivative_csv,
    write_fragment_csv,
};
use gaze_ident::features::{extract_features, write_features_csv};
use gaze_ident::segmentation::{vt_sweep, write_segments_csv};
use gaze_ident::synthgen::{generate_full, write_synthetic};
use gaze_ident::{load_dataset, resample, write_dataset, Dataset, SgConfig, SynthConfig};
use serde::Serialize;

use args::{Cli, Command, DatasetArgs};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit with clap's status 2.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Validate(a) => validate(a),
        Command::Segment(a) => segment(a),
        Command::Features(a) => features(a),
        Command::Identify(a) => identify(a),
        Command::SweepDerivatives(a) => sweep_derivatives(a),
        Command::SweepFragments(a) => sweep_fragments(a),
        Command::SweepVt(a) => sweep_vt(a),
        Command::RankFeatures(a) => rank(a),
        Command::Resample(a) => resample_cmd(a),
        Command::DurationSummary(a) => durations(a),
    }
}

/// Prints the resolved configuration of a run to stderr.
fn report_config<T: Serialize>(command: &str, config: &T) -> Result<()> {
    let json = serde_json::json!({ "command": command, "config": config });
    eprintln!("{}", serde_json::to_string(&json)?);
    Ok(())
}

fn load(args: &DatasetArgs) -> Result<Dataset> {
    let ds = load_dataset(&args.dataset)?;
    match &args.dataset_id {
        Some(id) => Ok(ds.select(id)?),
        None => Ok(ds),
    }
}

/// Writes a file through `body`, attaching the path to any error.
fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        writeln!(w)
    })
}

fn ensure_empty_dir(dir: &Path, force: bool) -> Result<()> {
    let non_empty = fs::read_dir(dir)
        .map(|mut d| d.next().is_some())
        .unwrap_or(false);
    if non_empty && !force {
        return Err(gaze_ident::Error::OutputExists(dir.to_path_buf()).into());
    }
    Ok(())
}

fn synth(a: args::SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_users: a.users,
        duration_s: a.duration,
        rate_hz: a.rate,
        seed: a.seed,
        session_noise_scale: a.noise,
        dataset_id: a.dataset_id,
    };
    report_config("synth", &cfg)?;
    let synth = generate_full(&cfg)?;
    write_synthetic(&synth, &a.out, a.force)?;
    println!(
        "wrote {} users x 2 sessions of {} s to {}",
        cfg.n_users,
        cfg.duration_s,
        a.out.display()
    );
    Ok(())
}

fn validate(a: DatasetArgs) -> Result<()> {
    report_config(
        "validate",
        &serde_json::json!({ "dataset": a.dataset, "dataset_id": a.dataset_id }),
    )?;
    let ds = load(&a)?;
    let samples: usize = ds.recordings().iter().map(|r| r.trajectory.len()).sum();
    println!(
        "ok: {} dataset id(s), {} users, {} recordings, {} samples at {} Hz",
        ds.dataset_ids().len(),
        ds.users().len(),
        ds.recordings().len(),
        samples,
        ds.manifest().rate_hz
    );
    Ok(())
}

#[derive(Serialize)]
struct PipelineReport {
    ivt: gaze_ident::IvtConfig,
    sg: Option<SgConfig>,
    fragment: Option<gaze_ident::Fragment>,
}

fn pipeline_report(
    p: &args::PipelineArgs,
    f: Option<&args::FragmentArgs>,
) -> Result<PipelineReport> {
    Ok(PipelineReport {
        ivt: p.ivt()?,
        sg: p.sg()?,
        fragment: f.and_then(|f| f.fragment()),
    })
}

fn segment(a: args::SegmentArgs) -> Result<()> {
    let cfg = pipeline_report(&a.pipeline, Some(&a.fragment))?;
    report_config("segment", &cfg)?;
    let ds = load(&a.data)?;
    ensure_empty_dir(&a.out, a.force)?;
    let (mut fix, mut sac) = (0usize, 0usize);
    for r in ds.recordings() {
        let seg = segment_recording(
            &r.trajectory,
            cfg.sg.as_ref(),
            cfg.fragment.as_ref(),
            &cfg.ivt,
        )?;
        let path = a
            .out
            .join(&r.dataset_id)
            .join(&r.user_id)
            .join(format!("{}.csv", r.session));
        write_file(&path, |w| write_segments_csv(w, &seg.segments))?;
        fix += seg.count(gaze_ident::SegmentKind::Fixation);
        sac += seg.count(gaze_ident::SegmentKind::Saccade);
    }
    println!(
        "{} recordings: {fix} fixations, {sac} saccades -> {}",
        ds.recordings().len(),
        a.out.display()
    );
    Ok(())
}

fn features(a: args::FeaturesArgs) -> Result<()> {
    let cfg = pipeline_report(&a.pipeline, Some(&a.fragment))?;
    report_config(
        "features",
        &serde_json::json!({ "pipeline": cfg, "level": a.level }),
    )?;
    let ds = load(&a.data)?;
    ds.require_single_id()?;
    let mut blocks = Vec::new();
    for r in ds.recordings() {
        let seg = segment_recording(
            &r.trajectory,
            cfg.sg.as_ref(),
            cfg.fragment.as_ref(),
            &cfg.ivt,
        )?;
        let (fix, sac) = extract_features(&seg, a.level, &r.user_id);
        blocks.push((r.session, fix));
        blocks.push((r.session, sac));
    }
    let rows: usize = blocks.iter().map(|(_, m)| m.n_rows()).sum();
    write_file(&a.out, |w| {
        write_features_csv(w, a.level, blocks.iter().map(|(s, m)| (*s, m)))
    })?;
    println!(
        "{rows} rows x {} features -> {}",
        a.level.n_features(),
        a.out.display()
    );
    Ok(())
}

fn identify(a: args::IdentifyArgs) -> Result<()> {
    let cfg = a.config()?;
    report_config("identify", &cfg)?;
    let ds = load(&a.data)?;
    let result = run_experiment(&ds, &cfg)?;
    if let Some(out) = &a.out {
        write_json(out, &result)?;
    }
    println!("{:.2} ± {:.2}", result.mean, result.sd);
    Ok(())
}

fn sweep_derivatives(a: args::SweepArgs) -> Result<()> {
    let cfg = args::experiment_config(
        gaze_ident::DerivativeLevel::MAX,
        &a.pipeline,
        a.fragment.fragment(),
        &a.classifier,
    )?;
    report_config("sweep-derivatives", &cfg)?;
    let ds = load(&a.data)?;
    let rows = derivative_sweep(&ds, &cfg)?;
    if let Some(out) = &a.out {
        write_file(out, |w| write_derivative_csv(w, &rows))?;
    }
    if let Some(json) = &a.json {
        write_json(json, &rows)?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "{:<18} {:>10} {:>16}", "features", "n", "accuracy (%)")?;
    for r in &rows {
        let label = format!("{} ({})", r.level.name(), r.level.get());
        let acc = format!("{:.2} ± {:.2}", r.result.mean, r.result.sd);
        writeln!(w, "{label:<18} {:>10} {acc:>16}", r.n_features)?;
    }
    Ok(())
}

fn sweep_fragments(a: args::FragmentSweepArgs) -> Result<()> {
    let cfg = args::experiment_config(
        gaze_ident::DerivativeLevel::MAX,
        &a.pipeline,
        None,
        &a.classifier,
    )?;
    report_config(
        "sweep-fragments",
        &serde_json::json!({ "experiment": cfg, "durations_s": a.durations }),
    )?;
    let ds = load(&a.data)?;
    let sweep = fragment_sweep_with(&ds, &cfg, &a.durations)?;
    if let Some(out) = &a.out {
        write_file(out, |w| write_fragment_csv(w, &sweep))?;
    }
    if let Some(json) = &a.json {
        write_json(json, &sweep)?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(
        w,
        "{:>8} {:>6} {:>14} {:>16}",
        "duration", "anchor", "best", "accuracy (%)"
    )?;
    for b in &sweep.best {
        let best = format!("{} ({})", b.best_level.name(), b.best_level.get());
        let acc = format!("{:.2} ± {:.2}", b.mean, b.sd);
        writeln!(
            w,
            "{:>8} {:>6} {best:>14} {acc:>16}",
            b.fragment.duration_s, b.fragment.anchor
        )?;
    }
    Ok(())
}

fn sweep_vt(a: args::VtSweepArgs) -> Result<()> {
    if !(a.vt_step.is_finite() && a.vt_step > 0.0) || a.vt_min.is_nan() || a.vt_min > a.vt_max {
        bail!(
            "invalid threshold grid: --vt-min {} --vt-max {} --vt-step {}",
            a.vt_min,
            a.vt_max,
            a.vt_step
        );
    }
    let n = ((a.vt_max - a.vt_min) / a.vt_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| a.vt_min + i as f64 * a.vt_step).collect();
    let sg = if a.no_smooth {
        None
    } else {
        Some(SgConfig::new(a.sg_order, a.sg_frame)?)
    };
    report_config(
        "sweep-vt",
        &serde_json::json!({ "vt": grid, "mfd_s": a.mfd, "sg": sg }),
    )?;
    let ds = load(&a.data)?;
    ds.require_single_id()?;
    let points = vt_sweep(&ds, &grid, a.mfd, sg.as_ref())?;
    if let Some(out) = &a.out {
        write_file(out, |w| {
            writeln!(w, "vt,mean_fixations")?;
            for p in &points {
                writeln!(w, "{},{}", p.vt_deg_per_s, p.mean_fixations)?;
            }
            Ok(())
        })?;
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    println!(
        "{} thresholds: {:.1} fixations at {} deg/s, {:.1} at {} deg/s",
        points.len(),
        first.mean_fixations,
        first.vt_deg_per_s,
        last.mean_fixations,
        last.vt_deg_per_s
    );
    Ok(())
}

fn rank(a: args::RankArgs) -> Result<()> {
    let cfg = pipeline_report(&a.pipeline, None)?;
    report_config(
        "rank-features",
        &serde_json::json!({ "pipeline": cfg, "level": a.level }),
    )?;
    let ds = load(&a.data)?;
    let (fix, sac) = merged_feature_matrices(&ds, a.level, &cfg.ivt, cfg.sg.as_ref())?;
    let ranking = rank_features(&fix, &sac)?;
    if let Some(out) = &a.out {
        write_file(out, |w| write_ranking_csv(w, &ranking))?;
    }
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for (kind, list) in [
        ("fixation", &ranking.fixation),
        ("saccade", &ranking.saccade),
    ] {
        for (i, f) in list.iter().take(a.top).enumerate() {
            let score = if f.is_undefined() {
                "undefined".to_string()
            } else {
                format!("{:.3}", f.score)
            };
            writeln!(w, "{kind:<9} {:>3} {:<28} {score}", i + 1, f.name)?;
        }
    }
    Ok(())
}

fn resample_cmd(a: args::ResampleArgs) -> Result<()> {
    report_config(
        "resample",
        &serde_json::json!({ "dataset": a.data.dataset, "rate_hz": a.rate }),
    )?;
    let ds = load(&a.data)?;
    let source = ds.manifest().rate_hz;
    let out = ds.map_trajectories(|t| resample(t, a.rate))?;
    write_dataset(&out, &a.out, a.force)?;
    println!(
        "resampled {} recordings from {source} Hz to {} Hz -> {}",
        out.recordings().len(),
        a.rate,
        a.out.display()
    );
    Ok(())
}

fn durations(a: args::DurationArgs) -> Result<()> {
    let cfg = pipeline_report(&a.pipeline, None)?;
    report_config("duration-summary", &cfg)?;
    let ds = load(&a.data)?;
    let rows = duration_summary(&ds, &cfg.ivt, cfg.sg.as_ref())?;
    if let Some(out) = &a.out {
        write_file(out, |w| write_duration_csv(w, &rows))?;
    }
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "{:<12} {:>10} {:>10}", "user", "fix (s)", "sac (s)")?;
    for r in &rows {
        writeln!(
            w,
            "{:<12} {:>10} {:>10}",
            r.user,
            fmt(r.mean_fix_s),
            fmt(r.mean_sac_s)
        )?;
    }
    Ok(())
}
