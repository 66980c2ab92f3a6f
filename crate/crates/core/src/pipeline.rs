//! Experiment presets, configuration and artifact-writing runs on synthetic data.
//!
//! A run draws a blobs image and a stroke mask, diffuses the texture (and,
//! for structure presets, the structure) to `t = T`, runs the reverse process
//! with analytic oracle predictors and writes everything under the output
//! directory. The directory contents depend only on the configuration.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::config::{format_kv, get, parse_value, KeyValues};
use crate::correlation::StatisticScorer;
use crate::error::{Error, Result};
use crate::image::pnm;
use crate::image::{
    apply_mask, edge_map, gen_mask, gen_synthetic, merge_result, to_grayscale, ImageGrid,
    ImageKind, ImageSpec, Mask, MaskKind, MaskSpec,
};
use crate::metrics::{
    discrepancy_curve, mean_gap_after, psnr, region_kl, region_psnr, ssim, write_curve_csv,
    CurveMetric, Region, RegionReport, DEFAULT_KL_BINS,
};
use crate::predictor::OraclePredictor;
use crate::resampler::{
    run_inference, AdoptOn, ResampleConfig, RunRecord, RunRow, DEFAULT_MAX_ITERS,
};
use crate::schedule::ScheduleSpec;
use crate::sde::{
    reverse_chain, terminal_state, Anchors, DiffusionState, Guidance, ReverseChain, ReverseMode,
};
use crate::{rng_stream, Rng};

/// Independent random streams derived from the run seed.
pub mod streams {
    pub const IMAGE: u64 = 0;
    pub const MASK: u64 = 1;
    pub const TEXTURE_NOISE: u64 = 2;
    pub const STRUCTURE_NOISE: u64 = 3;
    pub const RESAMPLE: u64 = 4;
}

/// How the structure is built from the ground truth: `<initial>2<terminal>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// No structure; the unguided reverse process.
    TextureOnly,
    Gray2Edge,
    Gray2Gray,
    Edge2Edge,
    Edge2Gray,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::TextureOnly,
        Preset::Gray2Edge,
        Preset::Gray2Gray,
        Preset::Edge2Edge,
        Preset::Edge2Gray,
    ];

    pub const STRUCTURE: [Preset; 4] = [
        Preset::Gray2Edge,
        Preset::Gray2Gray,
        Preset::Edge2Edge,
        Preset::Edge2Gray,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::TextureOnly => "texture-only",
            Preset::Gray2Edge => "gray2edge",
            Preset::Gray2Gray => "gray2gray",
            Preset::Edge2Edge => "edge2edge",
            Preset::Edge2Gray => "edge2gray",
        }
    }

    pub fn is_guided(&self) -> bool {
        *self != Preset::TextureOnly
    }

    /// `(x_0, μ_x)` for the ground truth and mask; `None` for texture-only.
    pub fn structure_anchors(&self, gt: &ImageGrid, m: &Mask) -> Result<Option<Arc<Anchors>>> {
        let gray = || to_grayscale(gt);
        let edge = || edge_map(gt);
        let (init, terminal) = match self {
            Preset::TextureOnly => return Ok(None),
            Preset::Gray2Edge => (gray()?, edge()?),
            Preset::Gray2Gray => (gray()?, gray()?),
            Preset::Edge2Edge => (edge()?, edge()?),
            Preset::Edge2Gray => (edge()?, gray()?),
        };
        Ok(Some(Anchors::new(init, apply_mask(&terminal, m)?)?))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub image: ImageSpec,
    pub mask: MaskKind,
    pub texture: ScheduleSpec,
    pub structure: ScheduleSpec,
    /// Maximum resampling iterations per timestep.
    pub resample_iters: usize,
    pub adopt_on: AdoptOn,
    pub snapshot_every: usize,
    pub scorer_window: usize,
    pub scorer_sharpness: f64,
    pub kl_bins: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Gray2Edge,
            image: ImageSpec::blobs(32, 32),
            mask: MaskKind::Strokes {
                ratio_lo: 0.2,
                ratio_hi: 0.3,
            },
            texture: ScheduleSpec::constant(100, 0.1, 0.05),
            structure: ScheduleSpec::geometric(100, 0.1, 0.02, 0.08),
            resample_iters: DEFAULT_MAX_ITERS,
            adopt_on: AdoptOn::Lt,
            snapshot_every: 25,
            scorer_window: StatisticScorer::DEFAULT_WINDOW,
            scorer_sharpness: StatisticScorer::DEFAULT_SHARPNESS,
            kl_bins: DEFAULT_KL_BINS,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

/// Every key a config may carry; anything else is rejected.
const KNOWN_KEYS: &[&str] = &[
    "preset",
    "seed",
    "output",
    "image.kind",
    "image.height",
    "image.width",
    "image.channels",
    "image.count",
    "image.period",
    "mask.kind",
    "mask.top",
    "mask.left",
    "mask.height",
    "mask.width",
    "mask.ratio_lo",
    "mask.ratio_hi",
    "texture.kind",
    "texture.T",
    "texture.lambda",
    "texture.theta",
    "texture.theta_min",
    "texture.theta_max",
    "structure.kind",
    "structure.T",
    "structure.lambda",
    "structure.theta",
    "structure.theta_min",
    "structure.theta_max",
    "resample.U",
    "resample.adopt_on",
    "resample.snapshot_every",
    "scorer.window",
    "scorer.sharpness",
    "metrics.kl_bins",
];

impl ExperimentConfig {
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let mut put = |k: &str, v: String| {
            kv.insert(k.to_string(), v);
        };
        put("preset", self.preset.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put("image.height", self.image.height.to_string());
        put("image.width", self.image.width.to_string());
        put("image.channels", self.image.channels.to_string());
        match self.image.kind {
            ImageKind::Gradient => put("image.kind", "gradient".into()),
            ImageKind::Checkerboard { period } => {
                put("image.kind", "checkerboard".into());
                put("image.period", period.to_string());
            }
            ImageKind::Blobs { count } => {
                put("image.kind", "blobs".into());
                put("image.count", count.to_string());
            }
        }
        match self.mask {
            MaskKind::Rect {
                top,
                left,
                height,
                width,
            } => {
                put("mask.kind", "rect".into());
                put("mask.top", top.to_string());
                put("mask.left", left.to_string());
                put("mask.height", height.to_string());
                put("mask.width", width.to_string());
            }
            MaskKind::Strokes { ratio_lo, ratio_hi } => {
                put("mask.kind", "strokes".into());
                put("mask.ratio_lo", ratio_lo.to_string());
                put("mask.ratio_hi", ratio_hi.to_string());
            }
        }
        put("resample.U", self.resample_iters.to_string());
        put("resample.adopt_on", self.adopt_on.to_string());
        put("resample.snapshot_every", self.snapshot_every.to_string());
        put("scorer.window", self.scorer_window.to_string());
        put("scorer.sharpness", self.scorer_sharpness.to_string());
        put("metrics.kl_bins", self.kl_bins.to_string());
        self.texture.write_kv("texture", &mut kv);
        self.structure.write_kv("structure", &mut kv);
        kv
    }

    /// Parses entries layered over the defaults and validates the result.
    pub fn from_kv(overrides: &KeyValues) -> Result<Self> {
        if let Some(k) = overrides.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let mut kv = Self::default().to_kv();
        kv.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));

        let image_kind = match get(&kv, "image.kind")? {
            "gradient" => ImageKind::Gradient,
            "checkerboard" => ImageKind::Checkerboard {
                period: match kv.contains_key("image.period") {
                    true => parse_value(&kv, "image.period")?,
                    false => 4,
                },
            },
            "blobs" => ImageKind::Blobs {
                count: parse_value(&kv, "image.count")?,
            },
            other => return Err(Error::Config(format!("unknown image kind `{other}`"))),
        };
        let image = ImageSpec {
            kind: image_kind,
            height: parse_value(&kv, "image.height")?,
            width: parse_value(&kv, "image.width")?,
            channels: parse_value(&kv, "image.channels")?,
        };
        let mask = match get(&kv, "mask.kind")? {
            "rect" => MaskKind::Rect {
                top: parse_value(&kv, "mask.top")?,
                left: parse_value(&kv, "mask.left")?,
                height: parse_value(&kv, "mask.height")?,
                width: parse_value(&kv, "mask.width")?,
            },
            "strokes" => MaskKind::Strokes {
                ratio_lo: parse_value(&kv, "mask.ratio_lo")?,
                ratio_hi: parse_value(&kv, "mask.ratio_hi")?,
            },
            other => return Err(Error::Config(format!("unknown mask kind `{other}`"))),
        };
        let cfg = Self {
            preset: get(&kv, "preset")?.parse()?,
            image,
            mask,
            texture: ScheduleSpec::read_kv("texture", &kv)?,
            structure: ScheduleSpec::read_kv("structure", &kv)?,
            resample_iters: parse_value(&kv, "resample.U")?,
            adopt_on: get(&kv, "resample.adopt_on")?.parse()?,
            snapshot_every: parse_value(&kv, "resample.snapshot_every")?,
            scorer_window: parse_value(&kv, "scorer.window")?,
            scorer_sharpness: parse_value(&kv, "scorer.sharpness")?,
            kl_bins: parse_value(&kv, "metrics.kl_bins")?,
            seed: parse_value(&kv, "seed")?,
            output: PathBuf::from(get(&kv, "output")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parameter checks that do not need the random draws. A texture and
    /// structure schedule of different lengths is a schedule mismatch.
    pub fn validate(&self) -> Result<()> {
        let bad = |e: Error| Error::Config(e.to_string());
        self.texture.build().map_err(bad)?;
        self.structure.build().map_err(bad)?;
        StatisticScorer::new(self.scorer_window, self.scorer_sharpness).map_err(bad)?;
        if self.image.channels != 3 {
            return Err(Error::Config(format!(
                "texture images need 3 channels, got {}",
                self.image.channels
            )));
        }
        if self.image.height.min(self.image.width) < 8 {
            return Err(Error::Config("images must be at least 8x8".into()));
        }
        if self.kl_bins < 2 {
            return Err(Error::Config("metrics.kl_bins must be >= 2".into()));
        }
        if self.preset.is_guided() && self.texture.steps != self.structure.steps {
            return Err(Error::ScheduleMismatch(format!(
                "texture T = {} but structure T = {}",
                self.texture.steps, self.structure.steps
            )));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> Rng {
        rng_stream(self.seed, stream)
    }

    /// The ground truth and mask this configuration draws.
    pub fn fixtures(&self) -> Result<(ImageGrid, Mask)> {
        let gt = gen_synthetic(&self.image, &mut self.rng(streams::IMAGE))?;
        let spec = MaskSpec {
            kind: self.mask,
            height: self.image.height,
            width: self.image.width,
        };
        let m = gen_mask(&spec, &mut self.rng(streams::MASK))?;
        Ok((gt, m))
    }
}

/// Final quality of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub preset: Preset,
    pub psnr: f64,
    pub psnr_masked: f64,
    pub psnr_unmasked: f64,
    pub ssim: f64,
    pub kl_masked: f64,
    pub kl_unmasked: f64,
    /// Mean KL gap over the whole texture chain.
    pub mean_gap: f64,
    /// Mean KL gap over `t > T/2`.
    pub early_gap: f64,
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "preset",
    "psnr",
    "psnr_masked",
    "psnr_unmasked",
    "ssim",
    "kl_masked",
    "kl_unmasked",
    "mean_gap",
    "early_gap",
];

impl Summary {
    fn fields(&self) -> [String; 9] {
        [
            self.preset.to_string(),
            self.psnr.to_string(),
            self.psnr_masked.to_string(),
            self.psnr_unmasked.to_string(),
            self.ssim.to_string(),
            self.kl_masked.to_string(),
            self.kl_unmasked.to_string(),
            self.mean_gap.to_string(),
            self.early_gap.to_string(),
        ]
    }

    pub fn line(&self) -> String {
        format!(
            "{}: psnr {:.2} dB (masked {:.2}, unmasked {:.2}), ssim {:.4}, kl masked {:.4} unmasked {:.4}, mean gap {:.4}",
            self.preset,
            self.psnr,
            self.psnr_masked,
            self.psnr_unmasked,
            self.ssim,
            self.kl_masked,
            self.kl_unmasked,
            self.mean_gap
        )
    }
}

pub fn write_summary_csv<W: Write>(rows: &[Summary], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: std::io::Read>(input: R) -> Result<Vec<Summary>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Config(format!(
            "unexpected summary header {header:?}"
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            let raw = rec.get(i).unwrap_or_default();
            raw.parse()
                .map_err(|_| Error::Config(format!("bad summary value `{raw}`")))
        };
        out.push(Summary {
            preset: rec.get(0).unwrap_or_default().parse()?,
            psnr: f(1)?,
            psnr_masked: f(2)?,
            psnr_unmasked: f(3)?,
            ssim: f(4)?,
            kl_masked: f(5)?,
            kl_unmasked: f(6)?,
            mean_gap: f(7)?,
            early_gap: f(8)?,
        });
    }
    Ok(out)
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub gt: ImageGrid,
    pub mask: Mask,
    pub merged: ImageGrid,
    pub chain: ReverseChain,
    pub record: RunRecord,
    pub kl_curve: Vec<RegionReport>,
    pub psnr_curve: Vec<RegionReport>,
    pub summary: Summary,
}

/// Runs the configured experiment in memory.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let (gt, mask) = cfg.fixtures()?;
    let sy = Arc::new(cfg.texture.build()?);
    let ya = Anchors::new(gt.clone(), apply_mask(&gt, &mask)?)?;
    let y_terminal = terminal_state(ya.clone(), sy.clone(), &mut cfg.rng(streams::TEXTURE_NOISE))?;

    let (chain, record) = match cfg.preset.structure_anchors(&gt, &mask)? {
        None => {
            let pred = OraclePredictor::unguided(ya.clone(), sy.clone());
            let chain = reverse_chain(
                &y_terminal,
                Guidance::None,
                &pred,
                ReverseMode::DeterministicMean,
                &mut cfg.rng(streams::RESAMPLE),
            )?;
            let record = unguided_record(&chain, &gt, &mask)?;
            (chain, record)
        }
        Some(xa) => {
            let sx = Arc::new(cfg.structure.build()?);
            let x_terminal = terminal_state(
                xa.clone(),
                sx.clone(),
                &mut cfg.rng(streams::STRUCTURE_NOISE),
            )?;
            let pred_x = OraclePredictor::unguided(xa.clone(), sx.clone());
            let pred_y = OraclePredictor::guided(ya.clone(), sy.clone(), xa, sx);
            let scorer = StatisticScorer::new(cfg.scorer_window, cfg.scorer_sharpness)?
                .with_region(mask.clone());
            let rc = ResampleConfig {
                max_iters: cfg.resample_iters,
                scorer: Arc::new(scorer),
                snapshot_every: cfg.snapshot_every,
                adopt_on: cfg.adopt_on,
            };
            let out = run_inference(
                &y_terminal,
                &x_terminal,
                &pred_y,
                &pred_x,
                &mask,
                &rc,
                &mut cfg.rng(streams::RESAMPLE),
            )?;
            (out.chain, out.record)
        }
    };

    let denoised = &chain.final_texture().value;
    let merged = merge_result(denoised, &ya.mean, &mask)?;
    let kl_curve = discrepancy_curve(
        &chain.texture,
        &gt,
        &mask,
        CurveMetric::Kl { bins: cfg.kl_bins },
    )?;
    let psnr_curve = discrepancy_curve(&chain.texture, &gt, &mask, CurveMetric::Psnr)?;
    let final_kl = region_kl(&merged, &gt, &mask, cfg.kl_bins)?;
    let mean = |c: &[RegionReport]| c.iter().map(RegionReport::gap).sum::<f64>() / c.len() as f64;
    let summary = Summary {
        preset: cfg.preset,
        psnr: psnr(&merged, &gt)?,
        psnr_masked: region_psnr(&merged, &gt, &mask, Region::Masked)?,
        psnr_unmasked: region_psnr(&merged, &gt, &mask, Region::Known)?,
        ssim: ssim(&merged, &gt)?,
        kl_masked: final_kl.masked_value,
        kl_unmasked: final_kl.unmasked_value,
        mean_gap: mean(&kl_curve),
        early_gap: mean_gap_after(&kl_curve, cfg.texture.steps / 2).unwrap_or(0.0),
    };
    Ok(Experiment {
        gt,
        mask,
        merged,
        chain,
        record,
        kl_curve,
        psnr_curve,
        summary,
    })
}

/// Per-step record of an unguided chain; no threshold or resampling applies.
fn unguided_record(chain: &ReverseChain, gt: &ImageGrid, m: &Mask) -> Result<RunRecord> {
    let rows = chain.texture[1..]
        .iter()
        .map(|s| {
            Ok(RunRow {
                t: s.t + 1,
                delta: f64::NAN,
                inner_iters: 0,
                adopted: 0,
                final_score: f64::NAN,
                masked_mse: crate::metrics::region_mse(&s.value, gt, m, Region::Masked)
                    .unwrap_or(f64::NAN),
                unmasked_mse: crate::metrics::region_mse(&s.value, gt, m, Region::Known)
                    .unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunRecord { rows })
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Output {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(output_err(dir))
}

fn write_csv_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(output_err(path))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush().map_err(output_err(path))
}

fn snapshot_name(kind: &str, t: usize, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("{kind}_{t:03}.{ext}")
}

fn write_snapshots(dir: &Path, kind: &str, states: &[DiffusionState], every: usize) -> Result<()> {
    if every == 0 {
        return Ok(());
    }
    for s in states.iter().filter(|s| s.t % every == 0) {
        pnm::write_image(
            &dir.join(snapshot_name(kind, s.t, s.value.channels())),
            &s.value,
        )?;
    }
    Ok(())
}

/// Writes the fixtures (`gt.ppm`, `mask.pgm`, `masked.ppm`) into `dir`.
pub fn write_fixtures(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    cfg.validate()?;
    create_dir(dir)?;
    let (gt, m) = cfg.fixtures()?;
    pnm::write_image(&dir.join("gt.ppm"), &gt)?;
    pnm::write_mask(&dir.join("mask.pgm"), &m)?;
    pnm::write_image(&dir.join("masked.ppm"), &apply_mask(&gt, &m)?)?;
    Ok(())
}

/// Runs the experiment and writes its artifacts to `cfg.output`:
/// `config.txt`, `record.csv`, `curve_kl.csv`, `curve_psnr.csv`,
/// `summary.csv`, `result.ppm`, the fixtures and chain snapshots.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate()?;
    let dir = cfg.output.as_path();
    create_dir(dir)?;
    let exp = simulate(cfg)?;

    let config_path = dir.join("config.txt");
    fs::write(&config_path, format_kv(&cfg.to_kv())).map_err(output_err(&config_path))?;
    write_csv_file(&dir.join("record.csv"), |w| exp.record.write_csv(w))?;
    write_csv_file(&dir.join("curve_kl.csv"), |w| {
        write_curve_csv(&exp.kl_curve, w)
    })?;
    write_csv_file(&dir.join("curve_psnr.csv"), |w| {
        write_curve_csv(&exp.psnr_curve, w)
    })?;
    write_csv_file(&dir.join("summary.csv"), |w| {
        write_summary_csv(std::slice::from_ref(&exp.summary), w)
    })?;

    pnm::write_image(&dir.join("gt.ppm"), &exp.gt)?;
    pnm::write_mask(&dir.join("mask.pgm"), &exp.mask)?;
    pnm::write_image(&dir.join("result.ppm"), &exp.merged)?;
    write_snapshots(dir, "texture", &exp.chain.texture, cfg.snapshot_every)?;
    if let Some(xs) = &exp.chain.structure {
        write_snapshots(dir, "structure", xs, cfg.snapshot_every)?;
    }
    Ok(exp.summary)
}

/// Runs every config into `<output>/<preset>` and writes
/// `<output>/comparison.csv`. The configs may differ only in their preset.
pub fn compare_presets(cfgs: &[ExperimentConfig], output: &Path) -> Result<Vec<Summary>> {
    let Some(first) = cfgs.first() else {
        return Err(Error::InvalidArgument(
            "no configurations to compare".into(),
        ));
    };
    let shared = |c: &ExperimentConfig| {
        let mut kv = c.to_kv();
        kv.remove("preset");
        kv.remove("output");
        kv
    };
    let reference = shared(first);
    for c in &cfgs[1..] {
        let other = shared(c);
        if other != reference {
            let key = reference
                .iter()
                .find(|(k, v)| other.get(*k) != Some(*v))
                .map(|(k, _)| k.clone())
                .or_else(|| other.keys().find(|k| !reference.contains_key(*k)).cloned())
                .unwrap_or_default();
            return Err(Error::InvalidArgument(format!(
                "configs must differ only in preset; `{key}` differs"
            )));
        }
    }
    let mut seen = Vec::new();
    for c in cfgs {
        if seen.contains(&c.preset) {
            return Err(Error::InvalidArgument(format!(
                "preset `{}` listed twice",
                c.preset
            )));
        }
        seen.push(c.preset);
    }

    create_dir(output)?;
    let mut rows = Vec::with_capacity(cfgs.len());
    for c in cfgs {
        let mut run = c.clone();
        run.output = output.join(c.preset.name());
        rows.push(run_experiment(&run)?);
    }
    write_csv_file(&output.join("comparison.csv"), |w| {
        write_summary_csv(&rows, w)
    })?;
    Ok(rows)
}
