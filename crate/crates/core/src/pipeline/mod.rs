//! End-to-end pipeline: sample the parameter box, simulate step responses,
//! identify kernels, train interpolators, predict validation kernels and
//! report reconstruction errors. Every stage works off the artifacts the
//! previous stage wrote, so any stage can be re-run in isolation and the
//! whole run is reproducible from disk.

pub mod config;
pub mod dataset;
pub mod report;

use ndarray::{Array1, Array2};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use config::{
    ExcitationConfig, ExcitationKind, GridConfig, InterpolatorChoice, LaguerreConfig, RunConfig,
    SearchConfig, SplitFractions, ValidationConfig,
};
pub use dataset::{
    ingest_external, load_dataset, AmplitudeRole, DatasetRecord, Manifest, ManifestPoint,
    ManifestResponse, Provenance,
};
pub use report::{InterpolatorSummary, ValidationReport, ValidationRow};

use crate::error::{Result, RomError};
use crate::fcnn::{self, FcnnModel, HyperparameterSpace, TrainOptions};
use crate::gpr::{self, GprHyperparameters, GprModel, HyperSharing};
use crate::identification::{identify_linear, identify_second_order, KernelSet, ResponsePair};
use crate::laguerre::{self, LaguerreBasis};
use crate::sampling::{self, SamplePlan, SampleRole};
use crate::signals::{default_noise_sigma, TimeGrid, TimeSignal};
use crate::synthaero::{self, ParameterPoint, PlantConfig};

// Seed streams carved out of the master seed.
const STREAM_SAMPLE: u64 = 0x01;
const STREAM_SPLIT: u64 = 0x02;
const STREAM_GPR_LINEAR: u64 = 0x20;
const STREAM_GPR_NONLINEAR: u64 = 0x21;
const STREAM_GPR_STEADY: u64 = 0x22;
const STREAM_FCNN_SEARCH_LINEAR: u64 = 0x30;
const STREAM_FCNN_SEARCH_NONLINEAR: u64 = 0x31;
const STREAM_NOISE_BASE: u64 = 0x1000;

/// splitmix64; gives independent deterministic streams per purpose.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn stage_err(stage: &'static str) -> impl Fn(RomError) -> RomError {
    move |e| e.in_stage(stage)
}

fn kernels_path(out: &Path, index: usize) -> PathBuf {
    out.join("kernels").join(format!("point_{index:03}.json"))
}

fn predicted_kernels_path(out: &Path, interpolator: &str, index: usize) -> PathBuf {
    out.join("report")
        .join("predicted_kernels")
        .join(interpolator)
        .join(format!("point_{index:03}.json"))
}

fn excitation_signal(
    kind: ExcitationKind,
    grid: TimeGrid,
    amplitude_deg: f64,
) -> Result<TimeSignal> {
    match kind {
        ExcitationKind::Step => TimeSignal::step(grid, amplitude_deg),
        ExcitationKind::SmoothedStep { tau_ref } => {
            TimeSignal::smoothed_step(grid, amplitude_deg, tau_ref)
        }
    }
}

/// Steady perturbation-response magnitude of the linearized plant for a
/// step of `amplitude_deg`; anchors the default noise level.
fn steady_response_magnitude(
    plant: &PlantConfig,
    point: &ParameterPoint,
    amplitude_deg: f64,
) -> Result<f64> {
    let slope = synthaero::lift_slope(plant, point.mach)?;
    let a3 = synthaero::a3_coefficient(plant, point);
    Ok(slope * amplitude_deg.to_radians() * (plant.a1 + plant.a2 + a3))
}

/// Samples the box, splits it, simulates the two step responses per point
/// and writes `samples.csv`, `signals/` and `manifest.json`.
pub fn generate_stage(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        config.validate()?;
        let out = &config.output_dir;
        std::fs::create_dir_all(out.join("signals"))?;

        let points = sampling::lhs(
            &config.parameter_box,
            config.samples,
            derive_seed(config.seed, STREAM_SAMPLE),
        )?;
        let plan = sampling::split(
            points,
            config.split.as_tuple(),
            derive_seed(config.seed, STREAM_SPLIT),
        )?;
        plan.write_csv(&out.join("samples.csv"))?;

        let grid = TimeGrid::new(config.grid.dt, config.grid.samples)?;
        let mut manifest_points = Vec::with_capacity(plan.len());
        for (i, base_point) in plan.points.iter().enumerate() {
            let mut point = *base_point;
            point.steady_cl = Some(synthaero::steady_lift(&config.plant, &point)?);

            let mut responses = Vec::new();
            let cases = [
                ("small", config.excitation.linear_amplitude_deg, false, 0u64),
                ("large", config.excitation.nonlinear_amplitude_deg, true, 1u64),
            ];
            for (slug, amplitude, nonlinear, stream) in cases {
                let input = excitation_signal(config.excitation.kind, grid, amplitude)?;
                let sigma = match config.plant.noise_sigma {
                    Some(s) => s,
                    None => default_noise_sigma(steady_response_magnitude(
                        &config.plant,
                        &point,
                        amplitude,
                    )?),
                };
                let plant = PlantConfig {
                    seed: derive_seed(config.seed, STREAM_NOISE_BASE + 2 * i as u64 + stream),
                    noise_sigma: Some(sigma),
                    ..config.plant.clone()
                };
                let output = synthaero::simulate(&plant, &point, &input, nonlinear)
                    .map_err(|e| RomError::Dataset(format!("point {i}: {e}")))?;

                let input_rel = format!("signals/point_{i:03}_{slug}_input.csv");
                let output_rel = format!("signals/point_{i:03}_{slug}_output.csv");
                input.write_csv(&out.join(&input_rel))?;
                output.write_csv(&out.join(&output_rel))?;
                responses.push(ManifestResponse {
                    amplitude_deg: amplitude,
                    input_csv: input_rel,
                    output_csv: output_rel,
                    steady_offset: 0.0,
                });
            }
            manifest_points.push(ManifestPoint {
                mach: point.mach,
                alpha0: point.alpha0,
                steady_cl: point.steady_cl,
                steady_cm: point.steady_cm,
                responses,
            });
        }
        Manifest {
            provenance: Provenance::Synthetic,
            points: manifest_points,
        }
        .save_json(&out.join("manifest.json"))?;
        Ok(())
    };
    run().map_err(stage_err("generate"))
}

fn build_basis_for(config: &RunConfig, grid: TimeGrid, m: usize) -> Result<Option<LaguerreBasis>> {
    if !config.laguerre.enabled {
        return Ok(None);
    }
    let time_scale = config
        .laguerre
        .time_scale
        .unwrap_or_else(|| laguerre::default_time_scale(m, grid.dt()));
    Ok(Some(laguerre::build_basis(
        grid,
        m,
        config.laguerre.order,
        time_scale,
    )?))
}

fn records_by_point(records: Vec<DatasetRecord>) -> BTreeMap<usize, Vec<DatasetRecord>> {
    let mut map: BTreeMap<usize, Vec<DatasetRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.point_index).or_default().push(r);
    }
    map
}

/// Identifies h1 (and h2 where a larger amplitude exists) for every point
/// in the dataset and writes `kernels/point_NNN.json`.
pub fn identify_stage(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let out = &config.output_dir;
        let (records, errors) = load_dataset(out)?;
        if !errors.is_empty() {
            return Err(RomError::Dataset(format!(
                "dataset has invalid records: {}",
                errors.join("; ")
            )));
        }
        if records.is_empty() {
            return Err(RomError::Dataset("dataset is empty".into()));
        }
        std::fs::create_dir_all(out.join("kernels"))?;

        let data_grid = records[0].input.grid();
        let m = config.memory_depth().min(data_grid.len());
        let basis = build_basis_for(config, data_grid, m)?;

        for (pi, recs) in records_by_point(records) {
            let ctx = |e: RomError| RomError::Dataset(format!("point {pi}: {e}"));
            let small = recs
                .iter()
                .find(|r| r.role == AmplitudeRole::Small)
                .ok_or_else(|| {
                    RomError::Dataset(format!("point {pi}: no small-amplitude response"))
                })?;
            let pair_a = ResponsePair::new(
                small.input.clone(),
                small.output.minus_offset(small.steady_offset)?,
                small.point,
            )
            .map_err(ctx)?;
            let h1 = identify_linear(&pair_a, m, basis.as_ref()).map_err(ctx)?;
            let mut kernels = KernelSet::linear(
                m,
                data_grid.dt(),
                h1.clone(),
                small.amplitude_deg,
                small.steady_offset,
            )
            .map_err(ctx)?;

            if let Some(large) = recs.iter().find(|r| r.role == AmplitudeRole::Large) {
                let pair_b = ResponsePair::new(
                    large.input.clone(),
                    large.output.minus_offset(large.steady_offset)?,
                    large.point,
                )
                .map_err(ctx)?;
                let h2 = identify_second_order(&h1, &pair_b, m, basis.as_ref()).map_err(ctx)?;
                kernels
                    .set_second_order(h2, large.amplitude_deg)
                    .map_err(ctx)?;
            }
            kernels.save_json(&kernels_path(out, pi))?;
        }
        Ok(())
    };
    run().map_err(stage_err("identify"))
}

/// What the trained interpolators consume and produce.
struct TrainingTables {
    features: Array2<f64>,
    targets_linear: Array2<f64>,
    targets_nonlinear: Option<Array2<f64>>,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
    has_steady_cl: bool,
    has_steady_cm: bool,
}

fn load_kernel_sets(out: &Path, count: usize) -> Result<Vec<KernelSet>> {
    (0..count)
        .map(|i| KernelSet::load_json(&kernels_path(out, i)))
        .collect()
}

fn assemble_tables(
    plan: &SamplePlan,
    manifest: &Manifest,
    kernels: &[KernelSet],
) -> Result<TrainingTables> {
    let n = plan.len();
    if manifest.points.len() != n || kernels.len() != n {
        return Err(RomError::Dataset(format!(
            "plan ({n}), manifest ({}) and kernels ({}) disagree on point count",
            manifest.points.len(),
            kernels.len()
        )));
    }
    let has_steady_cl = manifest.points.iter().all(|p| p.steady_cl.is_some());
    let has_steady_cm = manifest.points.iter().all(|p| p.steady_cm.is_some());
    let d = 2 + usize::from(has_steady_cl) + usize::from(has_steady_cm);
    let features = Array2::from_shape_fn((n, d), |(i, j)| {
        let p = &manifest.points[i];
        match j {
            0 => p.mach,
            1 => p.alpha0,
            2 if has_steady_cl => p.steady_cl.unwrap(),
            _ => p.steady_cm.unwrap(),
        }
    });

    let m = kernels[0].memory_depth;
    let targets_linear = Array2::from_shape_fn((n, m), |(i, j)| kernels[i].h1()[j]);
    let all_have_h2 = kernels.iter().all(|k| k.h2().is_some());
    let targets_nonlinear =
        all_have_h2.then(|| Array2::from_shape_fn((n, m), |(i, j)| kernels[i].h2().unwrap()[j]));

    Ok(TrainingTables {
        features,
        targets_linear,
        targets_nonlinear,
        train_rows: plan.indices_with_role(SampleRole::Train),
        test_rows: plan.indices_with_role(SampleRole::Test),
        has_steady_cl,
        has_steady_cm,
    })
}

fn select_rows(data: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), data.ncols()), |(i, j)| data[(rows[i], j)])
}

fn fit_gpr_model(
    config: &RunConfig,
    features: &Array2<f64>,
    targets: &Array2<f64>,
    rows: &[usize],
    seed: u64,
) -> Result<GprModel> {
    let options = gpr::FitOptions {
        sharing: if config.gpr.per_output {
            HyperSharing::PerOutput
        } else {
            HyperSharing::Shared
        },
        multi_starts: config.gpr.multi_starts,
        max_iterations: config.gpr.max_iterations,
        seed,
    };
    gpr::fit(
        &select_rows(features, rows),
        &select_rows(targets, rows),
        GprHyperparameters::default(),
        config.gpr.jitter,
        options,
    )
}

fn fit_fcnn_model(
    config: &RunConfig,
    tables: &TrainingTables,
    targets: &Array2<f64>,
    seed: u64,
) -> Result<(FcnnModel, fcnn::SearchResult)> {
    let train_x = select_rows(&tables.features, &tables.train_rows);
    let train_y = select_rows(targets, &tables.train_rows);
    let test_x = select_rows(&tables.features, &tables.test_rows);
    let test_y = select_rows(targets, &tables.test_rows);

    let space = HyperparameterSpace::default();
    let mut objective = |hp: &fcnn::Hyperparameters| -> Result<f64> {
        let opts = TrainOptions {
            max_epochs: config.search.trial_epochs,
            patience: config.search.patience,
            seed,
        };
        let (_, report) = fcnn::train(&train_x, &train_y, &test_x, &test_y, hp, &opts)?;
        Ok(report.best_test_mse)
    };
    let search = fcnn::bayesian_search(&space, &mut objective, config.search.trials, seed)?;

    let opts = TrainOptions {
        max_epochs: config.search.final_epochs,
        patience: config.search.patience,
        seed,
    };
    let (model, _) = fcnn::train(&train_x, &train_y, &test_x, &test_y, &search.best, &opts)?;
    Ok((model, search))
}

fn save_search_log(path: &Path, search: &fcnn::SearchResult) -> Result<()> {
    let mut text = serde_json::to_string_pretty(search)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Trains the configured interpolators (the GPR treats both the train and
/// test subsets as exact observations; the FCNN early-stops and scores its
/// hyperparameter search on the test subset) plus a steady-feature GPR for
/// querying off-sample points. Writes everything under `models/`.
pub fn train_stage(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let out = &config.output_dir;
        let plan = SamplePlan::read_csv(&out.join("samples.csv"))?;
        let manifest = Manifest::load_json(&out.join("manifest.json"))?;
        let kernels = load_kernel_sets(out, plan.len())?;
        let tables = assemble_tables(&plan, &manifest, &kernels)?;
        std::fs::create_dir_all(out.join("models"))?;

        let fit_rows: Vec<usize> = {
            let mut rows = tables.train_rows.clone();
            rows.extend(&tables.test_rows);
            rows.sort_unstable();
            rows
        };

        if config.interpolator.wants_gpr() {
            let model = fit_gpr_model(
                config,
                &tables.features,
                &tables.targets_linear,
                &fit_rows,
                derive_seed(config.seed, STREAM_GPR_LINEAR),
            )?;
            model.save_json(&out.join("models").join("gpr_linear.json"))?;
            if let Some(nl) = &tables.targets_nonlinear {
                let model = fit_gpr_model(
                    config,
                    &tables.features,
                    nl,
                    &fit_rows,
                    derive_seed(config.seed, STREAM_GPR_NONLINEAR),
                )?;
                model.save_json(&out.join("models").join("gpr_nonlinear.json"))?;
            }
        }

        if config.interpolator.wants_fcnn() {
            let (model, search) = fit_fcnn_model(
                config,
                &tables,
                &tables.targets_linear,
                derive_seed(config.seed, STREAM_FCNN_SEARCH_LINEAR),
            )?;
            model.save_json(&out.join("models").join("fcnn_linear.json"))?;
            save_search_log(&out.join("models").join("fcnn_search_linear.json"), &search)?;
            if let Some(nl) = &tables.targets_nonlinear {
                let (model, search) = fit_fcnn_model(
                    config,
                    &tables,
                    nl,
                    derive_seed(config.seed, STREAM_FCNN_SEARCH_NONLINEAR),
                )?;
                model.save_json(&out.join("models").join("fcnn_nonlinear.json"))?;
                save_search_log(
                    &out.join("models").join("fcnn_search_nonlinear.json"),
                    &search,
                )?;
            }
        }

        // steady-feature surrogate: (mach, alpha0) -> steady coefficients
        if tables.has_steady_cl {
            let xy = Array2::from_shape_fn((fit_rows.len(), 2), |(i, j)| {
                tables.features[(fit_rows[i], j)]
            });
            let q = 1 + usize::from(tables.has_steady_cm);
            let targets = Array2::from_shape_fn((fit_rows.len(), q), |(i, j)| {
                tables.features[(fit_rows[i], 2 + j)]
            });
            let options = gpr::FitOptions {
                sharing: HyperSharing::Shared,
                multi_starts: config.gpr.multi_starts,
                max_iterations: config.gpr.max_iterations,
                seed: derive_seed(config.seed, STREAM_GPR_STEADY),
            };
            let model = gpr::fit(
                &xy,
                &targets,
                GprHyperparameters::default(),
                config.gpr.jitter,
                options,
            )?;
            model.save_json(&out.join("models").join("steady_gpr.json"))?;
        }
        Ok(())
    };
    run().map_err(stage_err("train"))
}

fn active_interpolators(choice: InterpolatorChoice) -> Vec<&'static str> {
    match choice {
        InterpolatorChoice::Gpr => vec!["gpr"],
        InterpolatorChoice::Fcnn => vec!["fcnn"],
        InterpolatorChoice::Both => vec!["gpr", "fcnn"],
        InterpolatorChoice::None => vec!["identity"],
    }
}

fn predict_kernels_at(
    out: &Path,
    interpolator: &str,
    features: &Array1<f64>,
    template: &KernelSet,
) -> Result<KernelSet> {
    if interpolator == "identity" {
        return Ok(template.clone());
    }
    let models = out.join("models");
    let linear = models.join(format!("{interpolator}_linear.json"));
    let nonlinear = models.join(format!("{interpolator}_nonlinear.json"));
    let (h1, h2) = match interpolator {
        "gpr" => {
            let lin = GprModel::load_json(&linear)?;
            let (h1, _) = lin.predict(features)?;
            let h2 = if nonlinear.exists() {
                Some(GprModel::load_json(&nonlinear)?.predict(features)?.0)
            } else {
                None
            };
            (h1, h2)
        }
        "fcnn" => {
            let lin = FcnnModel::load_json(&linear)?;
            let h1 = lin.predict(features)?;
            let h2 = if nonlinear.exists() {
                Some(FcnnModel::load_json(&nonlinear)?.predict(features)?)
            } else {
                None
            };
            (h1, h2)
        }
        other => {
            return Err(RomError::Config(format!("unknown interpolator `{other}`")));
        }
    };
    template.with_kernels(h1, h2)
}

fn feature_vector(point: &ManifestPoint, has_cl: bool, has_cm: bool) -> Array1<f64> {
    let mut v = vec![point.mach, point.alpha0];
    if has_cl {
        v.push(point.steady_cl.unwrap_or(0.0));
    }
    if has_cm {
        v.push(point.steady_cm.unwrap_or(0.0));
    }
    Array1::from_vec(v)
}

/// Predicts kernels at the validation points with every active
/// interpolator and writes them under `report/predicted_kernels/`.
pub fn predict_stage(config: &RunConfig) -> Result<()> {
    let run = || -> Result<()> {
        let out = &config.output_dir;
        let plan = SamplePlan::read_csv(&out.join("samples.csv"))?;
        let manifest = Manifest::load_json(&out.join("manifest.json"))?;
        let kernels = load_kernel_sets(out, plan.len())?;
        let has_cl = manifest.points.iter().all(|p| p.steady_cl.is_some());
        let has_cm = manifest.points.iter().all(|p| p.steady_cm.is_some());

        for interpolator in active_interpolators(config.interpolator) {
            let dir = out.join("report").join("predicted_kernels").join(interpolator);
            std::fs::create_dir_all(&dir)?;
            for &vi in &plan.indices_with_role(SampleRole::Validation) {
                let features = feature_vector(&manifest.points[vi], has_cl, has_cm);
                let predicted = predict_kernels_at(out, interpolator, &features, &kernels[vi])
                    .map_err(|e| RomError::Dataset(format!("validation point {vi}: {e}")))?;
                predicted.save_json(&predicted_kernels_path(out, interpolator, vi))?;
            }
        }
        Ok(())
    };
    run().map_err(stage_err("predict"))
}

/// Noise-free plant used as the validation reference.
fn oracle_plant(config: &RunConfig) -> PlantConfig {
    PlantConfig {
        noise_sigma: Some(0.0),
        ..config.plant.clone()
    }
}

struct ValidationCase {
    input: TimeSignal,
    oracle: TimeSignal,
    window_start: f64,
}

fn sinusoid_case(
    config: &RunConfig,
    point: &ParameterPoint,
    amplitude_deg: f64,
    nonlinear: bool,
) -> Result<ValidationCase> {
    let grid = TimeGrid::new(config.grid.dt, config.grid.samples)?;
    let input =
        TimeSignal::sinusoid(grid, 0.0, amplitude_deg, config.validation.reduced_frequency)?;
    let oracle = synthaero::exact_response_oracle(&oracle_plant(config), point, &input, nonlinear)?;
    let period = std::f64::consts::TAU / config.validation.reduced_frequency;
    let window_start = grid.total_time() - config.validation.settled_periods * period;
    Ok(ValidationCase {
        input,
        oracle,
        window_start,
    })
}

fn step_case(
    config: &RunConfig,
    point: &ParameterPoint,
    amplitude_deg: f64,
    nonlinear: bool,
) -> Result<ValidationCase> {
    let grid = TimeGrid::new(config.grid.dt, config.grid.samples)?;
    let input = excitation_signal(config.excitation.kind, grid, amplitude_deg)?;
    let oracle = synthaero::exact_response_oracle(&oracle_plant(config), point, &input, nonlinear)?;
    Ok(ValidationCase {
        input,
        oracle,
        window_start: 0.0,
    })
}

fn linear_only(set: &KernelSet) -> Result<KernelSet> {
    set.with_kernels(set.h1(), None)
}

/// Computes validation errors from the persisted artifacts and writes the
/// report (JSON + CSV + hysteresis curves).
pub fn report_stage(config: &RunConfig) -> Result<ValidationReport> {
    let run = || -> Result<ValidationReport> {
        let out = &config.output_dir;
        let plan = SamplePlan::read_csv(&out.join("samples.csv"))?;
        let manifest = Manifest::load_json(&out.join("manifest.json"))?;
        let kernels = load_kernel_sets(out, plan.len())?;
        let synthetic = manifest.provenance == Provenance::Synthetic;
        let report_dir = out.join("report");
        let hysteresis_dir = report_dir.join("hysteresis");
        std::fs::create_dir_all(&hysteresis_dir)?;

        let mut rows = Vec::new();
        for &vi in &plan.indices_with_role(SampleRole::Validation) {
            let mp = &manifest.points[vi];
            let mut point = ParameterPoint::new(mp.mach, mp.alpha0)?;
            point.steady_cl = mp.steady_cl;
            point.steady_cm = mp.steady_cm;
            let identified = &kernels[vi];

            for interpolator in active_interpolators(config.interpolator) {
                let predicted =
                    KernelSet::load_json(&predicted_kernels_path(out, interpolator, vi))?;
                let h1_error_l2 = report::relative_l2(&predicted.h1(), &identified.h1());
                let h2_error_l2 = match (predicted.h2(), identified.h2()) {
                    (Some(p), Some(r)) => Some(report::relative_l2(&p, &r)),
                    _ => None,
                };

                let mut row = ValidationRow {
                    point_index: vi,
                    mach: mp.mach,
                    alpha0: mp.alpha0,
                    interpolator: interpolator.to_string(),
                    h1_error_l2,
                    h2_error_l2,
                    step_linear_rms: None,
                    step_nonlinear_rms: None,
                    sinusoid_linear_rms: None,
                    sinusoid_nonlinear_rms: None,
                };

                if synthetic {
                    let lin_amp = config.excitation.linear_amplitude_deg;
                    let nl_amp = config.excitation.nonlinear_amplitude_deg;

                    // small amplitude through the linear kernels only
                    let case = step_case(config, &point, lin_amp, false)?;
                    let recon = linear_only(&predicted)?.reconstruct(&case.input)?;
                    row.step_linear_rms = Some(report::relative_rms_from(
                        &recon,
                        &case.oracle,
                        case.window_start,
                    ));

                    let case = step_case(config, &point, nl_amp, true)?;
                    let recon = predicted.reconstruct(&case.input)?;
                    row.step_nonlinear_rms = Some(report::relative_rms_from(
                        &recon,
                        &case.oracle,
                        case.window_start,
                    ));

                    let case = sinusoid_case(config, &point, lin_amp, false)?;
                    let recon = linear_only(&predicted)?.reconstruct(&case.input)?;
                    row.sinusoid_linear_rms = Some(report::relative_rms_from(
                        &recon,
                        &case.oracle,
                        case.window_start,
                    ));
                    report::write_hysteresis_csv(
                        &hysteresis_dir.join(format!("point_{vi:03}_linear_{interpolator}.csv")),
                        &case.input,
                        &recon,
                        case.window_start,
                    )?;
                    report::write_hysteresis_csv(
                        &hysteresis_dir.join(format!("point_{vi:03}_linear_oracle.csv")),
                        &case.input,
                        &case.oracle,
                        case.window_start,
                    )?;

                    let case = sinusoid_case(config, &point, nl_amp, true)?;
                    let recon = predicted.reconstruct(&case.input)?;
                    row.sinusoid_nonlinear_rms = Some(report::relative_rms_from(
                        &recon,
                        &case.oracle,
                        case.window_start,
                    ));
                    report::write_hysteresis_csv(
                        &hysteresis_dir
                            .join(format!("point_{vi:03}_nonlinear_{interpolator}.csv")),
                        &case.input,
                        &recon,
                        case.window_start,
                    )?;
                    report::write_hysteresis_csv(
                        &hysteresis_dir.join(format!("point_{vi:03}_nonlinear_oracle.csv")),
                        &case.input,
                        &case.oracle,
                        case.window_start,
                    )?;
                }
                rows.push(row);
            }
        }

        let report = ValidationReport::summarize(rows);
        report.save(&report_dir)?;
        Ok(report)
    };
    run().map_err(stage_err("report"))
}

/// The full procedure: sample, simulate, identify, train, predict and
/// report, with all artifacts persisted under the configured output
/// directory.
pub fn run_algorithm1(config: &RunConfig) -> Result<ValidationReport> {
    generate_stage(config)?;
    identify_stage(config)?;
    train_stage(config)?;
    predict_stage(config)?;
    report_stage(config)
}

/// Input specification for parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepInput {
    Step {
        amplitude_deg: f64,
    },
    Harmonic {
        mean_deg: f64,
        amplitude_deg: f64,
        reduced_frequency: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub machs: Vec<f64>,
    pub alphas: Vec<f64>,
    pub input: SweepInput,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepCase {
    pub mach: f64,
    pub alpha0: f64,
    pub response_csv: String,
    pub hysteresis_csv: String,
    /// Point lies outside the sampled box; prediction is an extrapolation.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepOutcome {
    pub cases: Vec<SweepCase>,
}

/// Reconstructs responses on a (Mach, alpha_0) grid with one trained
/// interpolator. Steady features at unseen points come from the steady GPR
/// surrogate. Queries outside the training box proceed but are flagged.
pub fn sweep_reconstruct(
    config: &RunConfig,
    interpolator: &str,
    spec: &SweepSpec,
) -> Result<SweepOutcome> {
    let run = || -> Result<SweepOutcome> {
        let out = &config.output_dir;
        let sweep_dir = out.join("sweep");
        std::fs::create_dir_all(&sweep_dir)?;
        let steady = out.join("models").join("steady_gpr.json");
        let steady_model = steady
            .exists()
            .then(|| GprModel::load_json(&steady))
            .transpose()?;

        // memory depth, dt and amplitude bookkeeping from the first
        // identified kernel set
        let template = KernelSet::load_json(&kernels_path(out, 0))?;
        let grid = TimeGrid::new(config.grid.dt, config.grid.samples)?;

        let mut cases = Vec::new();
        for &mach in &spec.machs {
            for &alpha0 in &spec.alphas {
                let mut features = vec![mach, alpha0];
                if let Some(model) = &steady_model {
                    let (steady, _) = model.predict(&Array1::from_vec(vec![mach, alpha0]))?;
                    features.extend(steady.iter());
                }
                let features = Array1::from_vec(features);
                let predicted = predict_kernels_at(out, interpolator, &features, &template)?;

                let (input, window_start) = match spec.input {
                    SweepInput::Step { amplitude_deg } => (
                        excitation_signal(config.excitation.kind, grid, amplitude_deg)?,
                        0.0,
                    ),
                    SweepInput::Harmonic {
                        mean_deg,
                        amplitude_deg,
                        reduced_frequency,
                    } => {
                        let period = std::f64::consts::TAU / reduced_frequency;
                        (
                            TimeSignal::sinusoid(grid, mean_deg, amplitude_deg, reduced_frequency)?,
                            (grid.total_time() - config.validation.settled_periods * period)
                                .max(0.0),
                        )
                    }
                };
                let response = predicted.reconstruct(&input)?;

                let tag = format!("m{mach}_a{alpha0}");
                let response_rel = format!("sweep/case_{tag}.csv");
                let hysteresis_rel = format!("sweep/hysteresis_{tag}.csv");
                let mut text = String::from("tau,input,output\n");
                for i in 0..grid.len() {
                    use std::fmt::Write as _;
                    let _ = writeln!(
                        text,
                        "{},{},{}",
                        grid.tau(i),
                        input.values()[i],
                        response.values()[i]
                    );
                }
                std::fs::write(out.join(&response_rel), text)?;
                report::write_hysteresis_csv(
                    &out.join(&hysteresis_rel),
                    &input,
                    &response,
                    window_start,
                )?;

                let inside = mach > 0.0
                    && mach < 1.0
                    && ParameterPoint::new(mach, alpha0)
                        .map(|p| config.parameter_box.contains(&p))
                        .unwrap_or(false);
                cases.push(SweepCase {
                    mach,
                    alpha0,
                    response_csv: response_rel,
                    hysteresis_csv: hysteresis_rel,
                    extrapolated: !inside,
                });
            }
        }
        let outcome = SweepOutcome { cases };
        let mut text = serde_json::to_string_pretty(&outcome)?;
        text.push('\n');
        std::fs::write(sweep_dir.join("metadata.json"), text)?;
        Ok(outcome)
    };
    run().map_err(stage_err("sweep"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small but complete configuration used by the pipeline tests.
    pub(crate) fn tiny_config(out: &Path) -> RunConfig {
        RunConfig {
            samples: 8,
            split: SplitFractions {
                train: 0.5,
                test: 0.25,
                validation: 0.25,
            },
            grid: GridConfig {
                dt: 0.25,
                samples: 64,
            },
            memory_depth: None,
            laguerre: LaguerreConfig {
                enabled: true,
                order: 8,
                time_scale: None,
            },
            interpolator: InterpolatorChoice::Gpr,
            search: SearchConfig {
                trials: 2,
                trial_epochs: 60,
                final_epochs: 120,
                patience: 60,
            },
            seed: 11,
            output_dir: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn tiny_end_to_end_run_produces_report() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let report = run_algorithm1(&config).unwrap();
        assert_eq!(report.rows.len(), 2); // 2 validation points x 1 interpolator
        assert!(dir.path().join("samples.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("kernels/point_000.json").exists());
        assert!(dir.path().join("models/gpr_linear.json").exists());
        assert!(dir.path().join("report/report.csv").exists());
        for row in &report.rows {
            assert!(row.h1_error_l2.is_finite());
            assert!(row.sinusoid_linear_rms.unwrap().is_finite());
        }
    }

    #[test]
    fn identity_interpolation_has_zero_kernel_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());
        config.interpolator = InterpolatorChoice::None;
        config.plant.noise_sigma = Some(0.0);
        let report = run_algorithm1(&config).unwrap();
        for row in &report.rows {
            assert_eq!(row.h1_error_l2, 0.0);
            assert_eq!(row.h2_error_l2, Some(0.0));
            // reconstruction error bounded by series truncation only
            assert!(row.sinusoid_linear_rms.unwrap() < 0.05);
        }
    }

    #[test]
    fn rerunning_report_stage_reproduces_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let first = run_algorithm1(&config).unwrap();
        let second = report_stage(&config).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn sweep_writes_flagged_cases() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        run_algorithm1(&config).unwrap();
        let outcome = sweep_reconstruct(
            &config,
            "gpr",
            &SweepSpec {
                machs: vec![0.6, 0.95],
                alphas: vec![1.0],
                input: SweepInput::Harmonic {
                    mean_deg: 0.0,
                    amplitude_deg: 2.0,
                    reduced_frequency: 0.3,
                },
            },
        )
        .unwrap();
        assert_eq!(outcome.cases.len(), 2);
        assert!(!outcome.cases[0].extrapolated);
        assert!(outcome.cases[1].extrapolated);
        for case in &outcome.cases {
            assert!(dir.path().join(&case.response_csv).exists());
            assert!(dir.path().join(&case.hysteresis_csv).exists());
        }
        assert!(dir.path().join("sweep/metadata.json").exists());
    }

    #[test]
    fn exported_dataset_reingests_to_identical_kernels() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path().join("a").as_path());
        std::fs::create_dir_all(&config.output_dir).unwrap();
        generate_stage(&config).unwrap();
        identify_stage(&config).unwrap();

        // re-ingest the generated dataset into a fresh directory
        let b_out = dir.path().join("b");
        ingest_external(&config.output_dir, &b_out).unwrap();
        let config_b = RunConfig {
            output_dir: b_out.clone(),
            ..config.clone()
        };
        identify_stage(&config_b).unwrap();

        for i in 0..config.samples {
            let a = std::fs::read(kernels_path(&config.output_dir, i)).unwrap();
            let b = std::fs::read(kernels_path(&b_out, i)).unwrap();
            assert_eq!(a, b, "kernel files differ at point {i}");
        }
    }
}
