use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use reid_core::eval::{run_experiment, write_report, ExperimentConfig};
use reid_core::exec::with_threads;
use reid_core::ingest::{load_feature_set, load_manifest, read_header, save_feature_set, DatasetManifest, FeatureFormat};
use reid_core::matcher::{ranked_gallery, score_matrix, scores_from_bytes, write_scores_binary, write_scores_csv};
use reid_core::normalize::minmax_normalize;
use reid_core::synth::{gen_cross_view, SynthParams};
use reid_core::xqda::{load_model, save_model, train, Ridge};
use reid_core::{Error, NormalizationAxis, RPolicy, Result};

#[derive(Parser)]
#[command(name = "reid", version, about = "Cross-view metric learning and CMC evaluation")]
struct Cli {
    /// Worker threads for the parallel loops (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-camera dataset with a manifest and config.
    Synth(SynthArgs),
    /// Learn a projection and metric from a manifest's probe and gallery views.
    Train(TrainArgs),
    /// Score probes against a gallery with a trained model.
    Match(MatchArgs),
    /// Run the repeated-split evaluation and write the report.
    Eval(EvalArgs),
    /// Print a summary of a feature, model or score file.
    Inspect { file: PathBuf },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    ids: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    images_per_view: usize,
    /// Per-sample noise standard deviation.
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Standard deviation of identity centers.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    /// Written to the generated config as `column_bias`.
    #[arg(long, default_value_t = 0.0)]
    column_bias: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FileFormat::Binary)]
    format: FileFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Csv,
    Binary,
}

impl FileFormat {
    fn feature(self) -> (FeatureFormat, &'static str) {
        match self {
            FileFormat::Csv => (FeatureFormat::Csv, "csv"),
            FileFormat::Binary => (FeatureFormat::Binary, "bin"),
        }
    }
}

/// Overrides applied on top of the config file.
#[derive(Args)]
struct ConfigFlags {
    /// `key=value` experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `auto`, `auto:<scale>` or a fixed value.
    #[arg(long)]
    ridge: Option<Ridge>,
    /// `fixed:<r>` or `threshold:<t>`.
    #[arg(long)]
    r_policy: Option<RPolicy>,
    #[arg(long)]
    negatives_per_positive: Option<usize>,
    #[arg(long)]
    invert_quotient: Option<bool>,
    #[arg(long)]
    probe_view: Option<String>,
    #[arg(long)]
    gallery_view: Option<String>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.ridge {
            cfg.ridge = v;
        }
        if let Some(v) = self.r_policy {
            cfg.r_policy = v;
        }
        if let Some(v) = self.negatives_per_positive {
            cfg.set("negatives_per_positive", &v.to_string())?;
        }
        if let Some(v) = self.invert_quotient {
            cfg.invert_quotient = v;
        }
        if let Some(v) = &self.probe_view {
            cfg.probe_view = Some(v.clone());
        }
        if let Some(v) = &self.gallery_view {
            cfg.gallery_view = Some(v.clone());
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    probes: PathBuf,
    #[arg(long)]
    gallery: PathBuf,
    /// Min-max normalize scores before ranking: `row`, `column` or `two_sided`.
    #[arg(long)]
    axis: Option<NormalizationAxis>,
    #[arg(long)]
    out: PathBuf,
    /// Gallery items listed per probe in ranked.csv.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
    format: FileFormat,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    axis: Option<NormalizationAxis>,
    /// Highest CMC rank to compute (0 = whole gallery).
    #[arg(long)]
    max_rank: Option<usize>,
    #[command(flatten)]
    flags: ConfigFlags,
}

fn pair_views(manifest: &DatasetManifest, cfg: &ExperimentConfig) -> Result<(String, String)> {
    let first = |i: usize| manifest.views.get(i).map(|(id, _)| id.clone());
    let probe = cfg.probe_view.clone().or_else(|| first(0));
    let gallery = cfg.gallery_view.clone().or_else(|| first(1));
    match (probe, gallery) {
        (Some(p), Some(g)) if p != g => Ok((p, g)),
        (Some(p), Some(_)) => Err(Error::Config(format!("probe and gallery view are both `{p}`"))),
        _ => Err(Error::Config("manifest needs two views".into())),
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let params = SynthParams {
        n_ids: a.ids,
        dim: a.dim,
        images_per_view: a.images_per_view,
        view_noise: a.noise,
        identity_spread: a.spread,
        distractors: a.distractors,
        seed: a.seed,
        ..Default::default()
    };
    let data = gen_cross_view(&params)?;
    fs::create_dir_all(&a.out)?;
    let (format, ext) = a.format.feature();
    let file = |stem: &str| format!("{stem}.{ext}");
    save_feature_set(&data.view_a, &a.out.join(file("cam_a")), format)?;
    save_feature_set(&data.view_b, &a.out.join(file("cam_b")), format)?;
    let distractor_file = match &data.distractors {
        Some(d) => {
            save_feature_set(d, &a.out.join(file("distractors")), format)?;
            Some(PathBuf::from(file("distractors")))
        }
        None => None,
    };
    let manifest = DatasetManifest {
        name: format!("synthetic-{}", a.seed),
        views: vec![
            ("cam_a".into(), file("cam_a").into()),
            ("cam_b".into(), file("cam_b").into()),
        ],
        expected_dim: a.dim,
        distractor_file,
        notes: format!("{} identities, noise {}, spread {}", a.ids, a.noise, a.spread),
    };
    fs::write(a.out.join("manifest.txt"), manifest.render())?;
    let cfg = ExperimentConfig {
        seed: a.seed,
        column_bias: a.column_bias,
        ..Default::default()
    };
    fs::write(a.out.join("experiment.cfg"), cfg.render())?;
    println!(
        "wrote {} + {} samples (dim {}) and {} distractors to {}",
        data.view_a.len(),
        data.view_b.len(),
        a.dim,
        a.distractors,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let cfg = a.flags.resolve()?;
    let (p, g) = pair_views(&manifest, &cfg)?;
    let (va, vb) = (manifest.load_view(&p)?, manifest.load_view(&g)?);
    let model = train(&va, &vb, cfg.negatives_per_positive, cfg.seed, &cfg.xqda_options())?;
    save_model(&model, &a.model_out)?;
    let top: Vec<String> = model.eigenvalues().iter().take(5).map(|l| format!("{l:.6}")).collect();
    println!("d = {}", model.d());
    println!("r = {}", model.r());
    println!("ridge = {:e}", model.ridge());
    println!("top eigenvalues = [{}]", top.join(", "));
    println!("model written to {}", a.model_out.display());
    Ok(())
}

fn cmd_match(a: &MatchArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let probes = load_feature_set(&a.probes, model.d())?;
    let gallery = load_feature_set(&a.gallery, model.d())?;
    let mut scores = score_matrix(&model, &probes, &gallery)?;
    if let Some(axis) = a.axis {
        scores = minmax_normalize(&scores, axis)?;
    }
    fs::create_dir_all(&a.out)?;
    match a.format {
        FileFormat::Csv => write_scores_csv(&scores, &a.out.join("scores.csv"))?,
        FileFormat::Binary => write_scores_binary(&scores, &a.out.join("scores.bin"))?,
    }
    let mut ranked = std::io::BufWriter::new(fs::File::create(a.out.join("ranked.csv"))?);
    writeln!(ranked, "probe_index,probe_label,rank,gallery_index,gallery_label,score")?;
    for i in 0..scores.n_probes() {
        let row: Vec<f64> = scores.values().row(i).iter().copied().collect();
        for (rank, &j) in ranked_gallery(&row, scores.polarity()).iter().take(a.top_k).enumerate() {
            writeln!(
                ranked,
                "{i},{},{},{j},{},{:.16e}",
                scores.probe_labels()[i],
                rank + 1,
                scores.gallery_labels()[j],
                row[j]
            )?;
        }
    }
    ranked.flush()?;
    println!(
        "scored {} probes x {} gallery items; results in {}",
        scores.n_probes(),
        scores.n_gallery(),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let mut cfg = a.flags.resolve()?;
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(axis) = a.axis {
        cfg.normalization_axis = axis;
    }
    if let Some(m) = a.max_rank {
        cfg.max_rank = m;
    }
    let report = run_experiment(&manifest, &cfg)?;
    write_report(&report, &a.out_dir)?;
    print!("{}", report.render_text());
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let mut magic = [0u8; 4];
    let n = std::io::Read::read(&mut fs::File::open(path)?, &mut magic)?;
    match &magic[..n] {
        b"XMDL" => {
            let m = load_model(path)?;
            println!("model: d = {}, r = {}, ridge = {:e}", m.d(), m.r(), m.ridge());
            println!("eigenvalues: {:?}", m.eigenvalues());
        }
        b"XSCR" => {
            let s = scores_from_bytes(&fs::read(path)?)?;
            println!(
                "scores: {} probes x {} gallery, polarity {:?}, normalization {:?}",
                s.n_probes(),
                s.n_gallery(),
                s.polarity(),
                s.normalization()
            );
        }
        _ => {
            let h = read_header(path)?;
            let fs = load_feature_set(path, h.dim)?;
            println!(
                "features ({:?}): dim = {}, count = {}, identities = {}",
                h.format,
                h.dim,
                h.count,
                fs.distinct_labels().len()
            );
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Match(a) => cmd_match(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Inspect { file } => cmd_inspect(file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(cli.threads, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
