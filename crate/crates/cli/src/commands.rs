//! The pipeline commands. Each reads its inputs from the output directory
//! (or an explicit `--input`), writes its artifacts there and returns the run
//! record that also lands in `<command>.manifest.json`.

use std::path::PathBuf;
use std::time::Instant;

use wavesense::bem::{assemble_np, simulate_msr, DensitySolver};
use wavesense::features::{
    assemble_gpt, assemble_wavelet_matrix, build_band_mask, localization_fraction, mask_error, n_term_error,
    WaveletCoeffMatrix,
};
use wavesense::geometry::{sample_boundary, BoundaryMesh};
use wavesense::imaging::{image_by_diagonal, image_by_maximum, image_direct_msr, localization_score, BoundaryImage};
use wavesense::nalgebra::DMatrix;
use wavesense::recon::{fista_l1, least_squares_gpt, universal_mu, L1Problem};
use wavesense::sensing::{
    add_noise, condition_number, singular_value_profile, truncation_residual, ForwardOperator, Layout,
    MeasurementSystem, MsrMatrix, NoiseModel,
};
use wavesense::wavelet::{ScalingTable, WaveletGrid};

use crate::config::{LayoutType, Method, Variant};
use crate::formats::{image_csv, matrix_csv, pgm, read_matrix_csv, read_wavelet_csv, table_csv, wavelet_csv};
use crate::manifest::{Run, RunRecord};
use crate::{CliError, Config};

pub const MSR_CLEAN: &str = "msr.csv";
pub const MSR_NOISY: &str = "msr_noisy.csv";
pub const X_TRUE: &str = "x.csv";
pub const X_HAT: &str = "x_hat.csv";
pub const GPT_TRUE: &str = "gpt.csv";
pub const GPT_HAT: &str = "gpt_hat.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Simulate clean and noisy multistatic response matrices.
    Simulate,
    /// Assemble the wavelet coefficient matrix and GPTs of the target.
    Features,
    /// Estimate features from the noisy MSR matrix.
    Reconstruct,
    /// Render boundary images and localization scores.
    Image,
    /// Singular-value profiles and sparsity reports.
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Features => "features",
            Command::Reconstruct => "reconstruct",
            Command::Image => "image",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    /// Overrides the default input file of `reconstruct` and `image`.
    pub input: Option<PathBuf>,
    /// Report stage timings on stderr (never in the manifest).
    pub timings: bool,
}

impl Context {
    pub fn new(config: Config) -> Self {
        Context { config, input: None, timings: false }
    }

    fn stage<T>(&self, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f()?;
        if self.timings {
            eprintln!("{name}: {:.3} s", t.elapsed().as_secs_f64());
        }
        Ok(out)
    }
}

pub fn run(cmd: Command, ctx: &Context) -> Result<RunRecord, CliError> {
    match cmd {
        Command::Simulate => simulate(ctx),
        Command::Features => features(ctx),
        Command::Reconstruct => reconstruct(ctx),
        Command::Image => image(ctx),
        Command::Diagnose => diagnose(ctx),
    }
}

/// Target mesh and a validated measurement system.
pub fn setup(config: &Config) -> Result<(BoundaryMesh, MeasurementSystem), CliError> {
    let mesh = sample_boundary(&config.shape.build()?, config.mesh_nodes)?;
    let system = config.layout.build()?;
    system.validate_against(&mesh)?;
    Ok((mesh, system))
}

/// Noise level of noisy data with relative level `σ₀`:
/// `E‖V + W‖² = (1 + σ₀²)‖V‖²`, so `σ = σ₀‖V + W‖_F / √((1 + σ₀²) N_s N_r)`.
pub fn estimate_sigma(noisy: &DMatrix<f64>, sigma0: f64) -> f64 {
    sigma0 * noisy.norm() / ((1.0 + sigma0 * sigma0) * noisy.len() as f64).sqrt()
}

fn relative_masked_error(truth: &WaveletCoeffMatrix, est: &WaveletCoeffMatrix, half_width: u32) -> f64 {
    let mask = build_band_mask(truth.grid(), half_width);
    let mt = truth.masked(&mask);
    let mut diff = 0.0;
    for (r, c, v) in mt.iter() {
        diff += (v - est.get(r, c)).powi(2);
    }
    for (r, c, v) in est.iter() {
        if mt.get(r, c) == 0.0 {
            diff += v * v;
        }
    }
    diff.sqrt() / mt.frobenius()
}

pub fn simulate(ctx: &Context) -> Result<RunRecord, CliError> {
    let cfg = &ctx.config;
    let mut run = Run::new(&cfg.output, "simulate", cfg);
    let (mesh, system) = setup(cfg)?;
    let clean = ctx.stage("simulate", || Ok(simulate_msr(&mesh, &cfg.cond()?, &system)?))?;
    let (noisy, sigma) = add_noise(&clean, &NoiseModel { sigma0: cfg.noise.sigma0, seed: cfg.noise.seed })?;
    run.put(MSR_CLEAN, &matrix_csv(&clean.entries)?)?;
    run.put(MSR_NOISY, &matrix_csv(&noisy.entries)?)?;
    run.put(
        "transmitters.csv",
        &table_csv(
            &["role", "index", "x", "y"],
            system
                .sources
                .iter()
                .enumerate()
                .map(|(i, p)| ("source", i, p))
                .chain(system.receivers.iter().enumerate().map(|(i, p)| ("receiver", i, p)))
                .map(|(r, i, p)| vec![r.to_string(), i.to_string(), p.x.to_string(), p.y.to_string()]),
        )?,
    )?;
    run.put(
        "boundary.csv",
        &table_csv(
            &["t", "x", "y", "nx", "ny", "weight"],
            (0..mesh.len()).map(|i| {
                let (p, n) = (mesh.points[i], mesh.normals[i]);
                vec![
                    mesh.params[i].to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    n.x.to_string(),
                    n.y.to_string(),
                    mesh.weights[i].to_string(),
                ]
            }),
        )?,
    )?;
    run.metric("sources", system.source_count());
    run.metric("receivers", system.receiver_count());
    run.metric("msr_frobenius", clean.entries.norm());
    run.metric("sigma", sigma);
    run.finish()
}

fn factored(cfg: &Config, mesh: &BoundaryMesh) -> Result<DensitySolver, CliError> {
    Ok(DensitySolver::new(&assemble_np(mesh)?, &cfg.cond()?)?)
}

pub fn true_features(cfg: &Config, mesh: &BoundaryMesh) -> Result<(WaveletCoeffMatrix, DensitySolver), CliError> {
    let solver = factored(cfg, mesh)?;
    let table = ScalingTable::cascade(&cfg.wavelet.filter()?, cfg.wavelet.table_depth)?;
    let x = assemble_wavelet_matrix(mesh, &solver, &cfg.wavelet.grid()?, &table)?;
    Ok((x, solver))
}

const N_TERM_FRACTIONS: [f64; 6] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05];

fn nterm_report(x: &WaveletCoeffMatrix) -> Result<Vec<u8>, CliError> {
    let d2 = (x.dim() * x.dim()) as f64;
    table_csv(
        &["fraction", "kept", "relative_error"],
        N_TERM_FRACTIONS.iter().map(|f| {
            let keep = (f * d2).ceil() as usize;
            vec![f.to_string(), keep.to_string(), n_term_error(x, keep).to_string()]
        }),
    )
}

fn mask_report(x: &WaveletCoeffMatrix) -> Result<Vec<u8>, CliError> {
    table_csv(
        &["half_width", "nnz", "density", "relative_error"],
        (1..=8u32).map(|n0| {
            let m = build_band_mask(x.grid(), n0);
            vec![n0.to_string(), m.nnz().to_string(), m.density().to_string(), mask_error(x, &m).to_string()]
        }),
    )
}

pub fn features(ctx: &Context) -> Result<RunRecord, CliError> {
    let cfg = &ctx.config;
    let mut run = Run::new(&cfg.output, "features", cfg);
    let mesh = sample_boundary(&cfg.shape.build()?, cfg.mesh_nodes)?;
    let (x, solver) = ctx.stage("assemble", || true_features(cfg, &mesh))?;
    run.put(X_TRUE, &wavelet_csv(&x)?)?;
    let gpt = assemble_gpt(&mesh, &solver, cfg.solver.gpt_order)?.contracted();
    run.put(GPT_TRUE, &matrix_csv(&gpt)?)?;
    run.put("nterm.csv", &nterm_report(&x)?)?;
    run.put("mask.csv", &mask_report(&x)?)?;
    let grid = x.grid();
    let mask = build_band_mask(grid, cfg.mask.half_width);
    let keep = (0.005 * (grid.len() * grid.len()) as f64).ceil() as usize;
    run.metric("lattice", vec![grid.counts()[0], grid.counts()[1]]);
    run.metric("nnz", x.nnz());
    run.metric("nnz_fraction", x.nnz() as f64 / (grid.len() * grid.len()) as f64);
    run.metric("frobenius", x.frobenius());
    run.metric("spectral_norm", x.spectral_norm(100)?);
    run.metric("n_term_error_5permille", n_term_error(&x, keep));
    run.metric("mask_nnz", mask.nnz());
    run.metric("mask_error", mask_error(&x, &mask));
    run.metric("mask_density", mask.density());
    run.metric("localization_fraction", localization_fraction(&x, cfg.mask.half_width as i64));
    run.finish()
}

fn wavelet_operator(cfg: &Config, system: &MeasurementSystem, grid: &WaveletGrid) -> Result<ForwardOperator, CliError> {
    let w = &cfg.wavelet;
    Ok(ForwardOperator::wavelet(system, grid, &w.filter()?, w.depth, Some(w.smoothing))?)
}

pub fn reconstruct(ctx: &Context) -> Result<RunRecord, CliError> {
    let cfg = &ctx.config;
    let mut run = Run::new(&cfg.output, "reconstruct", cfg);
    let (_, system) = setup(cfg)?;
    let input = ctx.input.clone().unwrap_or_else(|| cfg.output.join(MSR_NOISY));
    run.input(&input)?;
    let v = MsrMatrix::loaded(read_matrix_csv(&input)?)?;
    let sigma = estimate_sigma(&v.entries, cfg.noise.sigma0);
    run.metric("sigma", sigma);
    match cfg.solver.method {
        Method::L1 => {
            let grid = cfg.wavelet.grid()?;
            let op = ctx.stage("operator", || wavelet_operator(cfg, &system, &grid))?;
            let entries = op.mask_entries(&build_band_mask(&grid, cfg.mask.half_width))?;
            let mu = universal_mu(
                sigma,
                system.source_count(),
                system.receiver_count(),
                entries.len(),
                cfg.solver.mu_scale,
            )?;
            let mut problem = L1Problem::with_entries(&op, &v.entries, entries, mu)?;
            problem.max_iter = cfg.solver.max_iter;
            problem.tol = cfg.solver.tol;
            let res = ctx.stage("fista", || Ok(fista_l1(&problem)?))?;
            let xhat = res.to_matrix(&grid)?;
            run.put(X_HAT, &wavelet_csv(&xhat)?)?;
            run.put(
                "trace.csv",
                &table_csv(
                    &["iteration", "objective", "residual", "nnz"],
                    res.trace.iter().map(|t| {
                        vec![
                            t.iteration.to_string(),
                            t.objective.to_string(),
                            t.residual.to_string(),
                            t.nnz.to_string(),
                        ]
                    }),
                )?,
            )?;
            run.metric("mu", mu);
            run.metric("unknowns", res.entries.len());
            run.metric("iterations", res.iterations);
            run.metric("converged", res.converged);
            run.metric("nnz", res.nnz);
            run.metric("relative_residual", res.residual / v.entries.norm());
            run.metric("lipschitz", res.lipschitz);
            let truth = cfg.output.join(X_TRUE);
            if truth.exists() {
                run.input(&truth)?;
                let x = read_wavelet_csv(&truth, &grid)?;
                run.metric("masked_relative_error", relative_masked_error(&x, &xhat, cfg.mask.half_width));
            }
        }
        Method::Gpt => {
            let op = ForwardOperator::harmonic(&system, cfg.solver.gpt_order)?;
            let ls = least_squares_gpt(&op, &v.entries)?;
            run.put(GPT_HAT, &matrix_csv(&ls.estimate)?)?;
            run.metric("effective_rank", ls.effective_rank);
            run.metric("full_rank", ls.full_rank);
            let truth = cfg.output.join(GPT_TRUE);
            if truth.exists() {
                run.input(&truth)?;
                let g = read_matrix_csv(&truth)?;
                if g.shape() == ls.estimate.shape() {
                    run.metric("relative_error", (&ls.estimate - &g).norm() / g.norm());
                }
            }
        }
    }
    run.finish()
}

fn put_image(run: &mut Run, stem: &str, img: &BoundaryImage, cfg: &Config) -> Result<(), CliError> {
    run.put(&format!("{stem}.pgm"), &pgm(img, cfg.imaging.pgm))?;
    run.put(&format!("{stem}.csv"), &image_csv(img)?)
}

pub fn image(ctx: &Context) -> Result<RunRecord, CliError> {
    let cfg = &ctx.config;
    let mut run = Run::new(&cfg.output, "image", cfg);
    let (mesh, system) = setup(cfg)?;
    let grid = cfg.wavelet.grid()?;
    let input = match &ctx.input {
        Some(p) => p.clone(),
        None => {
            let hat = cfg.output.join(X_HAT);
            if hat.exists() {
                hat
            } else {
                cfg.output.join(X_TRUE)
            }
        }
    };
    run.input(&input)?;
    let x = read_wavelet_csv(&input, &grid)?;
    let (q, d) = (cfg.imaging.q, cfg.imaging.d);
    let max = image_by_maximum(&x, cfg.imaging.variant.into());
    let diag = image_by_diagonal(&x);
    let stem = match cfg.imaging.variant {
        Variant::Prose => "image_max",
        Variant::Literal => "image_max_literal",
    };
    put_image(&mut run, stem, &max, cfg)?;
    put_image(&mut run, "image_diag", &diag, cfg)?;
    run.metric("dims", vec![max.dims[0], max.dims[1]]);
    run.metric("hit_max", localization_score(&max, &mesh, q, d)?.hit_fraction);
    run.metric("hit_diag", localization_score(&diag, &mesh, q, d)?.hit_fraction);
    run.metric("mass95_max", max.mass_count(0.95));
    run.metric("mass95_diag", diag.mass_count(0.95));
    let msr = cfg.output.join(MSR_NOISY);
    if cfg.imaging.direct && matches!(system.layout, Layout::NearField { .. }) && msr.exists() {
        run.input(&msr)?;
        let v = MsrMatrix::loaded(read_matrix_csv(&msr)?)?;
        let direct = image_direct_msr(&v, &system)?;
        put_image(&mut run, "image_direct", &direct, cfg)?;
        run.metric("direct_dims", vec![direct.dims[0], direct.dims[1]]);
        run.metric("hit_direct", localization_score(&direct, &mesh, q, d)?.hit_fraction);
    }
    run.finish()
}

fn svd_report(sv: &[f64]) -> Result<Vec<u8>, CliError> {
    let top = sv.first().copied().unwrap_or(0.0);
    table_csv(
        &["k", "sigma", "relative"],
        sv.iter().enumerate().map(|(k, s)| vec![(k + 1).to_string(), s.to_string(), (s / top).to_string()]),
    )
}

/// Index (1-based) at which the stability gap is reported.
pub const GAP_INDEX: usize = 200;

/// Singular-value profiles of the wavelet operator for the near-field and
/// far-field layouts of the config, plus the sparsity reports of `X`.
pub fn diagnose(ctx: &Context) -> Result<RunRecord, CliError> {
    let cfg = &ctx.config;
    let mut run = Run::new(&cfg.output, "diagnose", cfg);
    let mesh = sample_boundary(&cfg.shape.build()?, cfg.mesh_nodes)?;
    let grid = cfg.wavelet.grid()?;
    let mut rel = Vec::new();
    for (kind, name) in [(LayoutType::NearField, "near"), (LayoutType::FarField, "far")] {
        let system = cfg.layout.build_kind(kind)?;
        system.validate_against(&mesh)?;
        let op = ctx.stage(&format!("operator ({name})"), || wavelet_operator(cfg, &system, &grid))?;
        let count = (op.dim() * op.dim()).min(system.source_count() * system.receiver_count()).min(2 * GAP_INDEX);
        let sv = singular_value_profile(&op, count);
        run.put(&format!("svd_{name}.csv"), &svd_report(&sv)?)?;
        run.metric(&format!("condition_gx_{name}"), condition_number(op.gx()));
        rel.push(sv.get(GAP_INDEX - 1).map(|s| s / sv[0]));
        if let Some(r) = rel[rel.len() - 1] {
            run.metric(&format!("relative_sigma_{GAP_INDEX}_{name}"), r);
        }
        if kind == cfg.layout.kind {
            let v_path = cfg.output.join(MSR_CLEAN);
            let x_path = cfg.output.join(X_TRUE);
            if v_path.exists() && x_path.exists() {
                run.input(&v_path)?;
                run.input(&x_path)?;
                let v = MsrMatrix::loaded(read_matrix_csv(&v_path)?)?;
                let x = read_wavelet_csv(&x_path, &grid)?;
                run.metric("truncation_residual", truncation_residual(&op, &x, &v));
            }
        }
    }
    if let [Some(near), Some(far)] = rel[..] {
        run.metric("stability_gap", near / far);
        run.metric("stability_gap_holds", near >= 1e3 * far);
    }
    run.finish()
}
