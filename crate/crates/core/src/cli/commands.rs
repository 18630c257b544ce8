use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{output_path, Outcome, RunConfig};
use crate::data::{generate_orthosep, random_hypercube_direction, BernoulliModel, LabeledDataset};
use crate::error::{Error, Result};
use crate::flow::{
    balanced_live_init, convergence_report, train, weights_to_text, ConvergenceReport, LossKind, TrainerConfig,
    TrajectoryReport,
};
use crate::maxmargin::max_margin_vector;
use crate::network::{format_row, TwoLayerNet};
use crate::numerics::{SeededRng, Sign};
use crate::reprogram::{
    construct_program, optimize_program, reprogrammed_accuracy, scheme1_combine, scheme2_combine, AccuracyEstimate,
    OptimizeConfig, ProgramImage,
};
use crate::verify::{
    appendix_a_suite, corollary1_sweep, corollary2_suite, proposition_suite, report_json, theorem1_montecarlo,
    theorem2_suite, AppendixAConfig, Corollary1Config, Corollary2Config, DatasetSource, ProgramSource,
    PropositionConfig, SuiteVerdict, Theorem1Config, Theorem2Config,
};

type Keys = &'static [(&'static str, Option<&'static str>)];

pub struct CommandSpec {
    pub name: &'static str,
    pub summary: &'static str,
    /// Accepted keys besides `seed` and `output_dir`; `None` marks a required key.
    pub keys: Keys,
    pub(super) run: fn(&RunConfig) -> Result<Outcome>,
}

pub static COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "verify-theorem1",
        summary: "Monte-Carlo check of the analytic program's margin bound on random networks",
        keys: &[
            ("d", Some("4096")),
            ("k", Some("256")),
            ("rho", Some("4096^0.3")),
            ("tau", Some("4096^-0.2")),
            ("gamma", Some("0.01")),
            ("gamma_dag", Some("0.01")),
            ("trials", Some("2000")),
            ("workers", Some("1")),
        ],
        run: verify_theorem1,
    },
    CommandSpec {
        name: "sweep-corollary1",
        summary: "reprogrammed accuracy along a polynomial scaling of width, separation and noise",
        keys: &[
            ("eta_k", Some("0.6666666666666666")),
            ("eta_rho", Some("0.3")),
            ("eta_tau", Some("0.2")),
            ("d_list", Some("256,1024,4096")),
            ("trials", Some("2000")),
            ("workers", Some("1")),
        ],
        run: sweep_corollary1,
    },
    CommandSpec {
        name: "verify-theorem2",
        summary: "gradient descent from a balanced live start crosses below the zero-output loss",
        keys: &[
            ("n_datasets", Some("50")),
            ("d", Some("2")),
            ("k", Some("4")),
            ("n_pos", Some("2")),
            ("n_neg", Some("2")),
            ("step_size", Some("0.001")),
            ("max_steps", Some("1000000")),
            ("init_scale", Some("0.5")),
            ("workers", Some("1")),
        ],
        run: verify_theorem2,
    },
    CommandSpec {
        name: "verify-corollary2",
        summary: "trained neurons align with the per-class maximum-margin directions",
        keys: &[
            ("dataset", Some("four_point")),
            ("d", Some("64")),
            ("n_pos", Some("8")),
            ("n_neg", Some("8")),
            ("k", Some("8")),
            ("loss", Some("exponential")),
            ("step_size", Some("0.01")),
            ("max_steps", Some("10000000")),
            ("stop_loss", Some("1e-6")),
            ("init_scale", Some("0.001")),
            ("min_cosine", Some("0.99")),
            ("balance_tol", Some("0.001")),
            ("kappa_tol", Some("0.02")),
            ("min_growth", Some("10")),
            ("shape_tol", Some("0.05")),
        ],
        run: verify_corollary2,
    },
    CommandSpec {
        name: "verify-proposition",
        summary: "programs on trained networks stay below the failure bound",
        keys: &[
            ("dataset", Some("orthosep")),
            ("d", Some("64")),
            ("n_pos", Some("8")),
            ("n_neg", Some("8")),
            ("k", Some("8")),
            ("loss", Some("exponential")),
            ("step_size", Some("0.05")),
            ("max_steps", Some("10000000")),
            ("stop_loss", Some("1e-6")),
            ("init_scale", Some("0.001")),
            ("rho", Some("64^0.5")),
            ("tau", Some("0.2")),
            ("trials", Some("10000")),
            ("sources", Some("zero,analytic,optimized")),
            ("opt_steps", Some("2000")),
            ("opt_lr", Some("0.01")),
            ("opt_batch", Some("32")),
            ("opt_init_scale", Some("0.1")),
            ("workers", Some("1")),
        ],
        run: verify_proposition,
    },
    CommandSpec {
        name: "verify-appendix-a",
        summary: "sanity checks of the random-feature probabilities and singular-value bounds",
        keys: &[
            ("d", Some("64")),
            ("k_list", Some("1,4,8")),
            ("trials", Some("10000")),
            ("sv_d", Some("1024")),
            ("sv_k", Some("32")),
            ("gamma", Some("0.01")),
            ("sv_trials", Some("1000")),
            ("workers", Some("1")),
        ],
        run: verify_appendix_a,
    },
    CommandSpec {
        name: "construct-program",
        summary: "build the analytic program for a network and a random class direction",
        keys: &[
            ("network", Some("random")),
            ("d", Some("1024")),
            ("k", Some("64")),
            ("rho", Some("1024^0.3")),
            ("tau", Some("1024^-0.2")),
            ("trials", Some("10000")),
        ],
        run: construct_program_cmd,
    },
    CommandSpec {
        name: "optimize-program",
        summary: "learn a program by minibatch gradient descent on the logistic loss",
        keys: &[
            ("network", Some("random")),
            ("d", Some("256")),
            ("k", Some("32")),
            ("rho", Some("256^0.3")),
            ("tau", Some("256^-0.2")),
            ("label_map", Some("1")),
            ("steps", Some("2000")),
            ("lr", Some("0.01")),
            ("batch", Some("32")),
            ("init_scale", Some("0.1")),
            ("trials", Some("10000")),
        ],
        run: optimize_program_cmd,
    },
    CommandSpec {
        name: "train-flow",
        summary: "train a two-layer network by full-batch gradient descent and record the trajectory",
        keys: &[
            ("dataset", Some("four_point")),
            ("d", Some("64")),
            ("n_pos", Some("8")),
            ("n_neg", Some("8")),
            ("k", Some("8")),
            ("loss", Some("exponential")),
            ("step_size", Some("0.01")),
            ("max_steps", Some("100000")),
            ("stop_loss", Some("0")),
            ("init_scale", Some("0.1")),
            ("record_every", Some("1000")),
        ],
        run: train_flow_cmd,
    },
    CommandSpec {
        name: "combine-image",
        summary: "embed an input image into a program image",
        keys: &[
            ("program", Some("random")),
            ("program_size", Some("224")),
            ("input", Some("random")),
            ("input_size", Some("28")),
            ("channels", Some("3")),
            ("scheme", Some("1")),
            ("r", Some("2^-2.2222222222222223")),
            ("v", Some("2^-4.444444444444445")),
            ("output", Some("combined.ppm")),
        ],
        run: combine_image_cmd,
    },
];

fn write(cfg: &RunConfig, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(output_path(cfg, name)?, contents)?;
    Ok(())
}

fn commented(cfg: &RunConfig) -> String {
    cfg.echo().lines().map(|l| format!("# {l}\n")).collect()
}

fn verdict_outcome(cfg: &RunConfig, v: &SuiteVerdict) -> Result<Outcome> {
    write(cfg, "verdict.json", report_json(&cfg.echo_map(), v)?)?;
    Ok(if v.passed { Outcome::Passed } else { Outcome::Failed })
}

fn loss_kind(cfg: &RunConfig) -> Result<LossKind> {
    cfg.text("loss")
        .parse()
        .map_err(|_| Error::Config(format!("`loss` must be exponential or logistic, got `{}`", cfg.text("loss"))))
}

fn dataset_source(cfg: &RunConfig) -> Result<DatasetSource> {
    match cfg.text("dataset") {
        "four_point" => Ok(DatasetSource::FourPoint),
        "orthosep" => Ok(DatasetSource::Orthosep {
            d: cfg.usize("d")?,
            n_pos: cfg.usize("n_pos")?,
            n_neg: cfg.usize("n_neg")?,
        }),
        other => Err(Error::Config(format!("`dataset` must be four_point or orthosep, got `{other}`"))),
    }
}

fn verify_theorem1(cfg: &RunConfig) -> Result<Outcome> {
    let c = Theorem1Config {
        d: cfg.usize("d")?,
        k: cfg.usize("k")?,
        rho: cfg.real("rho")?,
        tau: cfg.real("tau")?,
        gamma: cfg.real("gamma")?,
        gamma_dag: cfg.real("gamma_dag")?,
        trials: cfg.usize("trials")?,
        seed: cfg.seed,
        workers: cfg.usize("workers")?,
    };
    verdict_outcome(cfg, &theorem1_montecarlo(&c)?)
}

fn sweep_corollary1(cfg: &RunConfig) -> Result<Outcome> {
    let c = Corollary1Config {
        eta_k: cfg.real("eta_k")?,
        eta_rho: cfg.real("eta_rho")?,
        eta_tau: cfg.real("eta_tau")?,
        d_list: cfg.usize_list("d_list")?,
        trials: cfg.usize("trials")?,
        seed: cfg.seed,
        workers: cfg.usize("workers")?,
    };
    let sweep = corollary1_sweep(&c)?;
    write(cfg, "sweep.csv", sweep.to_csv(&cfg.echo()))?;
    verdict_outcome(cfg, &sweep.verdict)
}

fn verify_theorem2(cfg: &RunConfig) -> Result<Outcome> {
    let c = Theorem2Config {
        n_datasets: cfg.usize("n_datasets")?,
        d: cfg.usize("d")?,
        k: cfg.usize("k")?,
        n_pos: cfg.usize("n_pos")?,
        n_neg: cfg.usize("n_neg")?,
        step_size: cfg.real("step_size")?,
        max_steps: cfg.usize("max_steps")?,
        init_scale: cfg.real("init_scale")?,
        seed: cfg.seed,
        workers: cfg.usize("workers")?,
    };
    verdict_outcome(cfg, &theorem2_suite(&c)?)
}

fn verify_corollary2(cfg: &RunConfig) -> Result<Outcome> {
    let c = Corollary2Config {
        dataset: dataset_source(cfg)?,
        k: cfg.usize("k")?,
        loss_kind: loss_kind(cfg)?,
        step_size: cfg.real("step_size")?,
        max_steps: cfg.usize("max_steps")?,
        stop_loss: cfg.real("stop_loss")?,
        init_scale: cfg.real("init_scale")?,
        min_cosine: cfg.real("min_cosine")?,
        balance_tol: cfg.real("balance_tol")?,
        kappa_tol: cfg.real("kappa_tol")?,
        min_growth: cfg.real("min_growth")?,
        shape_tol: cfg.real("shape_tol")?,
        seed: cfg.seed,
    };
    verdict_outcome(cfg, &corollary2_suite(&c)?)
}

fn verify_proposition(cfg: &RunConfig) -> Result<Outcome> {
    let sources = cfg
        .text("sources")
        .split(',')
        .map(|s| {
            ProgramSource::ALL
                .into_iter()
                .find(|p| p.name() == s.trim())
                .ok_or_else(|| Error::Config(format!("`sources` entries must be zero, analytic or optimized, got `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = PropositionConfig {
        dataset: dataset_source(cfg)?,
        k: cfg.usize("k")?,
        loss_kind: loss_kind(cfg)?,
        step_size: cfg.real("step_size")?,
        max_steps: cfg.usize("max_steps")?,
        stop_loss: cfg.real("stop_loss")?,
        init_scale: cfg.real("init_scale")?,
        rho: cfg.real("rho")?,
        tau: cfg.real("tau")?,
        trials: cfg.usize("trials")?,
        sources,
        optimize: OptimizeConfig {
            steps: cfg.usize("opt_steps")?,
            lr: cfg.real("opt_lr")?,
            batch: cfg.usize("opt_batch")?,
            init_scale: cfg.real("opt_init_scale")?,
        },
        seed: cfg.seed,
        workers: cfg.usize("workers")?,
    };
    verdict_outcome(cfg, &proposition_suite(&c)?)
}

fn verify_appendix_a(cfg: &RunConfig) -> Result<Outcome> {
    let c = AppendixAConfig {
        d: cfg.usize("d")?,
        k_list: cfg.usize_list("k_list")?,
        trials: cfg.usize("trials")?,
        sv_d: cfg.usize("sv_d")?,
        sv_k: cfg.usize("sv_k")?,
        gamma: cfg.real("gamma")?,
        sv_trials: cfg.usize("sv_trials")?,
        seed: cfg.seed,
        workers: cfg.usize("workers")?,
    };
    verdict_outcome(cfg, &appendix_a_suite(&c)?)
}

fn read_text(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read `{path}`: {e}")))
}

/// The `network` key: `random` draws `N(0, 1/d)` weights, anything else is a path.
fn network(cfg: &RunConfig, rng: &mut SeededRng) -> Result<TwoLayerNet> {
    match cfg.text("network") {
        "random" => TwoLayerNet::random_init(cfg.usize("d")?, cfg.usize("k")?, rng),
        path => TwoLayerNet::from_text(&read_text(path)?),
    }
}

/// Header `d`, then one row of `d` values.
fn vector_text(preamble: &str, v: &[f64]) -> String {
    let mut s = preamble.to_string();
    writeln!(s, "{}", v.len()).unwrap();
    s.push_str(&format_row(v));
    s
}

#[derive(Serialize)]
struct ProgramSummary {
    input_dim: usize,
    width: usize,
    helpful: usize,
    unhelpful: usize,
    p_norm: f64,
    target_bias_norm: f64,
    residual: f64,
    accuracy: AccuracyEstimate,
}

fn construct_program_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let rng = SeededRng::new(cfg.seed, 0);
    let net = network(cfg, &mut rng.fork(0))?;
    let phi = random_hypercube_direction(net.input_dim(), &mut rng.fork(1));
    let model = BernoulliModel::new(phi, cfg.real("rho")?, cfg.real("tau")?)?;
    let program = construct_program(&net, model.phi())?;
    let accuracy = reprogrammed_accuracy(&net, &program.p, &model, Sign::Pos, cfg.usize("trials")?, &mut rng.fork(2))?;
    let preamble = commented(cfg);
    write(cfg, "network.txt", format!("{preamble}{}", net.to_text()))?;
    write(cfg, "phi.txt", vector_text(&preamble, model.phi()))?;
    write(cfg, "program.txt", vector_text(&preamble, &program.p))?;
    let summary = ProgramSummary {
        input_dim: net.input_dim(),
        width: net.width(),
        helpful: program.partition.helpful.len(),
        unhelpful: program.partition.unhelpful.len(),
        p_norm: program.p_norm,
        target_bias_norm: program.target_bias_norm,
        residual: program.residual,
        accuracy,
    };
    write(cfg, "report.json", report_json(&cfg.echo_map(), &summary)?)?;
    Ok(Outcome::Passed)
}

#[derive(Serialize)]
struct OptimizeSummary {
    accuracy_initial: AccuracyEstimate,
    accuracy_final: AccuracyEstimate,
    final_batch_loss: f64,
}

fn optimize_program_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let rng = SeededRng::new(cfg.seed, 0);
    let net = network(cfg, &mut rng.fork(0))?;
    let phi = random_hypercube_direction(net.input_dim(), &mut rng.fork(1));
    let model = BernoulliModel::new(phi, cfg.real("rho")?, cfg.real("tau")?)?;
    let m = match cfg.text("label_map") {
        "1" | "+1" => Sign::Pos,
        "-1" => Sign::Neg,
        other => return Err(Error::Config(format!("`label_map` must be 1 or -1, got `{other}`"))),
    };
    let oc = OptimizeConfig {
        steps: cfg.usize("steps")?,
        lr: cfg.real("lr")?,
        batch: cfg.usize("batch")?,
        init_scale: cfg.real("init_scale")?,
    };
    let opt = optimize_program(&net, &model, m, &oc, &mut rng.fork(2))?;
    let trials = cfg.usize("trials")?;
    let eval = rng.fork(3);
    let accuracy_initial = reprogrammed_accuracy(&net, &opt.initial_p, &model, m, trials, &mut eval.clone())?;
    let accuracy_final = reprogrammed_accuracy(&net, &opt.p, &model, m, trials, &mut eval.clone())?;
    let preamble = commented(cfg);
    write(cfg, "network.txt", format!("{preamble}{}", net.to_text()))?;
    write(cfg, "phi.txt", vector_text(&preamble, model.phi()))?;
    write(cfg, "program.txt", vector_text(&preamble, &opt.p))?;
    let mut csv = preamble.clone();
    csv.push_str("step,batch_loss\n");
    for (i, l) in opt.loss_curve.iter().enumerate() {
        writeln!(csv, "{i},{l:e}").unwrap();
    }
    write(cfg, "loss.csv", csv)?;
    let summary = OptimizeSummary {
        accuracy_initial,
        accuracy_final,
        final_batch_loss: opt.loss_curve.last().copied().unwrap_or(f64::NAN),
    };
    write(cfg, "report.json", report_json(&cfg.echo_map(), &summary)?)?;
    Ok(Outcome::Passed)
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    trajectory: &'a TrajectoryReport,
    convergence: Option<ConvergenceReport>,
}

fn train_flow_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let rng = SeededRng::new(cfg.seed, 0);
    let data = match cfg.text("dataset") {
        "four_point" => LabeledDataset::four_point(),
        "orthosep" => generate_orthosep(cfg.usize("d")?, cfg.usize("n_pos")?, cfg.usize("n_neg")?, &mut rng.fork(0))?,
        path => LabeledDataset::from_text(&read_text(path)?)?,
    };
    let theta0 = balanced_live_init(&data, cfg.usize("k")?, cfg.real("init_scale")?, &mut rng.fork(1))?;
    let tc = TrainerConfig {
        loss_kind: loss_kind(cfg)?,
        step_size: cfg.real("step_size")?,
        max_steps: cfg.usize("max_steps")?,
        stop_loss: cfg.real("stop_loss")?,
        record_every: cfg.usize("record_every")?,
        stop_on_crossing: false,
    };
    let report = train(&theta0, &data, &tc)?;
    let convergence = match (
        max_margin_vector(&data.class_points(Sign::Pos)),
        max_margin_vector(&data.class_points(Sign::Neg)),
    ) {
        (Ok(vp), Ok(vn)) => Some(convergence_report(&report.final_theta, &vp.v, &vn.v)?),
        _ => None,
    };
    let preamble = commented(cfg);
    write(cfg, "dataset.txt", format!("{preamble}{}", data.to_text()))?;
    write(cfg, "weights.txt", format!("{preamble}{}", weights_to_text(&report.final_theta)))?;
    write(cfg, "trajectory.csv", report.to_csv(&cfg.echo()))?;
    let summary = FlowSummary {
        trajectory: &report,
        convergence,
    };
    write(cfg, "report.json", report_json(&cfg.echo_map(), &summary)?)?;
    Ok(Outcome::Passed)
}

/// `random` draws uniform pixels; otherwise a `.ppm` or plain-text image path.
fn image(cfg: &RunConfig, key: &str, size_key: &str, rng: &mut SeededRng) -> Result<ProgramImage> {
    match cfg.text(key) {
        "random" => {
            let side = cfg.usize(size_key)?;
            ProgramImage::from_fn(side, side, cfg.usize("channels")?, |_, _, _| rng.uniform_range(-1.0, 1.0))
        }
        path if Path::new(path).extension().is_some_and(|e| e == "ppm") => {
            let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read `{path}`: {e}")))?;
            ProgramImage::from_ppm(&bytes)
        }
        path => ProgramImage::from_text(&read_text(path)?),
    }
}

fn combine_image_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let rng = SeededRng::new(cfg.seed, 0);
    let program = image(cfg, "program", "program_size", &mut rng.fork(0))?;
    let input = image(cfg, "input", "input_size", &mut rng.fork(1))?;
    let combined = match cfg.text("scheme") {
        "1" => scheme1_combine(&program, &input, cfg.real("r")?)?,
        "2" => scheme2_combine(&program, &input, cfg.real("v")?)?,
        other => return Err(Error::Config(format!("`scheme` must be 1 or 2, got `{other}`"))),
    };
    let name = cfg.text("output");
    if name.ends_with(".ppm") {
        write(cfg, name, combined.to_ppm(&cfg.echo())?)?;
    } else {
        write(cfg, name, format!("{}{}", commented(cfg), combined.to_text()))?;
    }
    Ok(Outcome::Passed)
}
