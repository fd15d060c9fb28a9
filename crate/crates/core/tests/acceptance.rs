//! End-to-end acceptance checks. Runs as a plain binary so the per-criterion
//! lines are always printed; exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use adapshare::agents::{self, AgentConfig};
use adapshare::harness::{emit_results, run_cell};
use adapshare::ingest::{filter_data_transmissions, parse_dci_csv, resample_windows, DATA_FORMAT};
use adapshare::metrics::{jain_fairness, surplus_deficit, EvalReport};
use adapshare::nn::{Activation, Mlp};
use adapshare::oracle::{grid_solve, solve_opt};
use adapshare::synthgen::{fit, generate, ks_distance, synthesize_pair, DEFAULT_SEED};
use adapshare::{AgentKind, Allocation, DemandSeries, EnvConfig, ExperimentConfig, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D_MIN: f64 = 0.1;
const DATASET_LEN: usize = 860;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn reference() -> DemandSeries {
    DemandSeries::load(&fixture("demand_hourly.csv")).expect("fixture loads")
}

fn dataset(symmetric: bool) -> DemandSeries {
    synthesize_pair(&reference(), DATASET_LEN, DEFAULT_SEED, symmetric).expect("synthesis")
}

fn experiment(kind: AgentKind, n_r: f64, zeta: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::default().with_pool(n_r, zeta),
        agent_kind: kind,
        agent: AgentConfig::default(),
        seed,
        train_steps: 20_000,
        eval_split: 0.2,
    }
}

struct Trained {
    allocs: Vec<Allocation>,
    demands: Vec<(f64, f64)>,
    report: EvalReport,
}

fn train_and_eval(series: &DemandSeries, cfg: &ExperimentConfig) -> Trained {
    let (policy, _) = agents::train(series, cfg).expect("training");
    let allocs = agents::greedy_policy(&policy, series, cfg).expect("evaluation");
    let (_, eval_idx) = agents::split_ranges(series, cfg).unwrap();
    let ts: Vec<usize> = eval_idx.collect();
    let demands: Vec<(f64, f64)> = ts.iter().map(|&t| series.demand(t)).collect();
    let report = EvalReport::evaluate(&ts, &allocs, &demands, cfg.env.zeta, cfg.env.d_min, false).unwrap();
    Trained { allocs, demands, report }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_alloc, mut worst_j): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let d = (rng.random_range(0.5..=50.0), rng.random_range(0.5..=50.0));
        let zeta = rng.random_range(0.0..=1.0);
        let n_r = [20.0, 60.0, 100.0][rng.random_range(0..3)];
        let exact = solve_opt(d, zeta, n_r, D_MIN);
        let grid = grid_solve(d, zeta, n_r, D_MIN, 0.01);
        worst_alloc = worst_alloc
            .max((exact.allocation.n_a - grid.allocation.n_a).abs())
            .max((exact.allocation.n_b - grid.allocation.n_b).abs());
        worst_j = worst_j.max((exact.j_value - grid.j_value).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_alloc <= 0.05 && worst_j <= 1e-4 && secs < 10.0,
        format!("max |dn| = {worst_alloc:.4}, max |dJ| = {worst_j:.2e}, {secs:.2} s"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let acts = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Identity];
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let hidden_layers = rng.random_range(0..=2);
        let mut dims = vec![rng.random_range(1..=8)];
        for _ in 0..hidden_layers {
            dims.push(rng.random_range(1..=16));
        }
        dims.push(rng.random_range(1..=3));
        let activations: Vec<Activation> = (0..dims.len() - 1).map(|_| acts[rng.random_range(0..4)]).collect();
        let mut net = Mlp::random(&dims, &activations, &mut rng).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..*dims.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss = |net: &Mlp| net.forward(&x).unwrap().iter().zip(&w).map(|(o, w)| o * w).sum::<f64>();

        let cache = net.forward_cached(&x).unwrap();
        let (grads, _) = net.backward(&cache, &w).unwrap();
        for i in 0..net.num_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net);
            net.params_mut()[i] = orig - h;
            let down = loss(&net);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = grads[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((grads[i] - numeric).abs() / scale);
        }
    }
    check(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn rl_vs_oracle_gap(series: &DemandSeries) -> Outcome {
    let oracle = train_and_eval(series, &experiment(AgentKind::OptOracle, 60.0, 0.5, 3)).report.mean_j;
    let mut lines = vec![format!("oracle J = {oracle:.4}")];
    let mut ok = true;
    for kind in [AgentKind::Ddpg, AgentKind::Td3] {
        let start = Instant::now();
        let j = train_and_eval(series, &experiment(kind, 60.0, 0.5, 3)).report.mean_j;
        let secs = start.elapsed().as_secs_f64();
        ok &= j - oracle <= 0.05 && secs < 300.0;
        lines.push(format!("{kind} J = {j:.4} ({secs:.1} s)"));
    }
    check(ok, lines.join(", "))
}

fn starvation_avoidance(series: &DemandSeries) -> Outcome {
    let mut ok = true;
    let mut mins = Vec::new();
    for i in 1..=9 {
        let zeta = i as f64 / 10.0;
        let run = train_and_eval(series, &experiment(AgentKind::Td3, 20.0, zeta, 4));
        let min = run.allocs.iter().map(|a| a.n_a.min(a.n_b)).fold(f64::INFINITY, f64::min);
        let oracle_min = run
            .demands
            .iter()
            .map(|&d| {
                let a = solve_opt(d, zeta, 20.0, D_MIN).allocation;
                a.n_a.min(a.n_b)
            })
            .fold(f64::INFINITY, f64::min);
        ok &= min > 0.5;
        mins.push(format!("{zeta}:{min:.2}/{oracle_min:.2}"));
    }
    check(ok, format!("min grant per zeta, td3/oracle {}", mins.join(" ")))
}

fn baseline_over_provisioning(series: &DemandSeries) -> Outcome {
    let mean_total = series.pairs().iter().map(|(a, b)| a + b).sum::<f64>() / series.len() as f64;
    let base = train_and_eval(series, &experiment(AgentKind::OptBase, 100.0, 0.5, 5)).report;
    let td3 = train_and_eval(series, &experiment(AgentKind::Td3, 100.0, 0.5, 5)).report;
    check(
        base.s_a > 0.0 && base.s_b > 0.0 && td3.s_a.abs() < base.s_a && td3.s_b.abs() < base.s_b,
        format!(
            "mean total demand {mean_total:.1}; base S = ({:.4}, {:.4}); td3 S = ({:.4}, {:.4})",
            base.s_a, base.s_b, td3.s_a, td3.s_b
        ),
    )
}

/// Splits the pool in proportion to demand whenever demand exceeds it.
fn proportional_allocation((a, b): (f64, f64), n_r: f64) -> Allocation {
    if a + b <= n_r {
        Allocation::new(a, b)
    } else {
        Allocation::new(n_r * a / (a + b), n_r * b / (a + b))
    }
}

fn fairness_dominance(series: &DemandSeries, symmetric: &DemandSeries) -> Outcome {
    let run = train_and_eval(series, &experiment(AgentKind::Td3, 20.0, 0.5, 6));
    let proportional: Vec<Allocation> = run.demands.iter().map(|&d| proportional_allocation(d, 20.0)).collect();
    let reference = jain_fairness(&proportional).unwrap();
    let sym = train_and_eval(symmetric, &experiment(AgentKind::Td3, 20.0, 0.5, 6)).report.fairness;
    check(
        run.report.fairness >= reference - 0.05 && sym >= 0.9,
        format!("td3 {:.4} vs proportional {reference:.4}; symmetric td3 {sym:.4}", run.report.fairness),
    )
}

fn metric_exactness() -> Outcome {
    let demands = [(10.0, 20.0), (3.0, 40.0), (7.5, 0.5)];
    let zeros = [Allocation::new(0.0, 0.0); 3];
    let (sa, sb) = surplus_deficit(&zeros, &demands, D_MIN).unwrap();
    let equal = jain_fairness(&[Allocation::new(10.0, 10.0), Allocation::new(3.5, 3.5)]).unwrap();
    let one_sided = jain_fairness(&[Allocation::new(20.0, 0.0), Allocation::new(0.0, 7.0)]).unwrap();
    let ok = (sa + 1.0).abs() <= 1e-12 && (sb + 1.0).abs() <= 1e-12 && (equal - 1.0).abs() <= 1e-12 && (one_sided - 0.5).abs() <= 1e-12;
    check(ok, format!("S(0) = ({sa}, {sb}), Jain equal = {equal}, one-sided = {one_sided}"))
}

fn ingestion_fidelity() -> Outcome {
    let records = parse_dci_csv(&fixture("dci_small.csv")).map_err(|e| e.to_string())?;
    let kept = filter_data_transmissions(&records, DATA_FORMAT);
    let only_2b = kept.iter().all(|r| r.dci_format == DATA_FORMAT) && kept.len() < records.len();
    let windows = resample_windows(&kept, 3600).map_err(|e| e.to_string())?;
    let means: Vec<f64> = windows.iter().map(|w| w.mean).collect();
    check(only_2b && means == [18.75, 21.0], format!("{} of {} rows kept, hourly means {means:?}", kept.len(), records.len()))
}

fn synthetic_fidelity() -> Outcome {
    let reference = reference();
    let mut parts = Vec::new();
    let mut ok = true;
    for side in [Side::A, Side::B] {
        let trace = reference.trace(side);
        let generated = generate(&fit(&trace).unwrap(), DATASET_LEN, DEFAULT_SEED);
        let ks = ks_distance(&generated, &trace).unwrap();
        ok &= ks <= 0.1;
        parts.push(format!("KS_{side:?} = {ks:.4}"));
    }
    check(ok, parts.join(", "))
}

fn determinism(series: &DemandSeries) -> Outcome {
    let mut cfg = experiment(AgentKind::Td3, 60.0, 0.3, 7);
    cfg.train_steps = 3_000;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let cells = [run_cell(series, &cfg).unwrap(), run_cell(series, &ExperimentConfig { agent_kind: AgentKind::OptBase, ..cfg.clone() }).unwrap()];
        emit_results(&cells, dir.path()).unwrap();
    }
    let mut csvs: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    csvs.sort();
    let same = csvs
        .iter()
        .all(|n| std::fs::read(dirs[0].path().join(n)).unwrap() == std::fs::read(dirs[1].path().join(n)).unwrap());
    check(same && !csvs.is_empty(), format!("{} CSV files compared", csvs.len()))
}

fn main() -> ExitCode {
    let series = dataset(false);
    let symmetric = dataset(true);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 oracle equivalence", Box::new(oracle_equivalence)),
        ("2 gradient correctness", Box::new(gradient_correctness)),
        ("3 rl-vs-oracle gap", Box::new(|| rl_vs_oracle_gap(&series))),
        ("4 starvation avoidance", Box::new(|| starvation_avoidance(&series))),
        ("5 baseline over-provisioning", Box::new(|| baseline_over_provisioning(&series))),
        ("6 fairness dominance", Box::new(|| fairness_dominance(&series, &symmetric))),
        ("7 metric exactness", Box::new(metric_exactness)),
        ("8 ingestion fidelity", Box::new(ingestion_fidelity)),
        ("9 synthetic fidelity", Box::new(synthetic_fidelity)),
        ("10 determinism", Box::new(|| determinism(&series))),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
