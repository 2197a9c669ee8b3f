use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dissicert::certifier::{certify, check_certificate_on_model, storage_to_state, CertifyOptions, PriorKnowledge, VerifyOptions};
use dissicert::datamat::estimate_complexity;
use dissicert::io::{
    matrix_to_rows, parse_trajectory_csv, report_to_json, supply_from_json, system_from_json, system_to_json,
    trajectory_to_csv,
};
use dissicert::linalg::RankTol;
use dissicert::lti::{random_controllable_system, random_inputs, random_vector, StateSpace};
use dissicert::qdf::SupplyRate;
use dissicert::sdp::{FeasStatus, SolverOptions};
use nalgebra::DVector;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{AnalyzeArgs, CertifyArgs, Cli, Command, SimulateArgs, SupplyArgs, SupplyChoice, VerifyArgs};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dissicert::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, RunError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    emit(out, &text)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(RunError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn load_supply(args: &SupplyArgs, m: usize, p: usize) -> Result<SupplyRate> {
    let kind = match (args.supply, &args.phi) {
        (Some(SupplyChoice::Custom), None) => {
            return Err(RunError::Usage("--supply custom requires --phi".into()));
        }
        (Some(SupplyChoice::Passivity | SupplyChoice::L2Gain), Some(_)) => {
            return Err(RunError::Usage("--phi conflicts with a built-in --supply kind".into()));
        }
        (None, None) => return Err(RunError::Usage("specify --supply or --phi".into())),
        (Some(k), _) => k,
        (None, Some(_)) => SupplyChoice::Custom,
    };
    if kind != SupplyChoice::L2Gain && args.gamma.is_some() {
        return Err(RunError::Usage("--gamma only applies to --supply l2gain".into()));
    }
    let supply = match kind {
        SupplyChoice::Passivity => {
            if m != p {
                return Err(RunError::Usage(format!("passivity needs m = p, got m={m}, p={p}")));
            }
            SupplyRate::passivity(m)?
        }
        SupplyChoice::L2Gain => {
            let gamma = args
                .gamma
                .ok_or_else(|| RunError::Usage("--supply l2gain requires --gamma".into()))?;
            SupplyRate::l2_gain(m, p, gamma)?
        }
        SupplyChoice::Custom => {
            let path = args.phi.as_ref().expect("checked above");
            supply_from_json(&read(path)?)?
        }
    };
    if supply.m() != m || supply.p() != p {
        return Err(RunError::Usage(format!(
            "supply rate is for m={}, p={} but the data have m={m}, p={p}",
            supply.m(),
            supply.p()
        )));
    }
    Ok(supply)
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Certify(args) => run_certify(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Verify(args) => run_verify(args),
    }
}

fn run_certify(args: CertifyArgs) -> Result<u8> {
    let started = Instant::now();
    let d = &args.data;
    let rank_tol = RankTol::new(positive("--rank-tol", d.rank_tol)?);
    let feas_tol = positive("--feas-tol", args.feas_tol)?;
    let supply = load_supply(&args.supply, d.m, d.p)?;
    let w = parse_trajectory_csv(&d.data, d.m, d.p).map_err(|e| match e {
        dissicert::Error::Io(source) => RunError::Io {
            path: d.data.display().to_string(),
            source,
        },
        other => other.into(),
    })?;
    let system = match &args.system {
        Some(path) => Some(system_from_json(&read(path)?)?),
        None => None,
    };

    let mut prior = PriorKnowledge::new(d.m, d.p, d.lag_bound)?;
    if let Some(n) = args.nmin {
        prior = prior.with_n_min(n);
    }
    let opts = CertifyOptions {
        rank_tol,
        solver: SolverOptions {
            feas_tol,
            ..SolverOptions::default()
        },
        facial_reduction: true,
    };
    let mut report = certify(&w, &prior, &supply, &opts)?;
    log::info!("verdict {}", report.verdict);

    let mut model_check = None;
    if let (Some(sys), Some(cert)) = (&system, report.certificate.as_mut()) {
        let p_mat = storage_to_state(&cert.psi, sys, report.d)?;
        if supply.is_static() {
            model_check = Some(check_certificate_on_model(sys, &supply, &p_mat, &VerifyOptions::default())?);
        }
        cert.p = Some(p_mat);
    }

    let mut value = report_to_json(&report, None);
    let map = value.as_object_mut().expect("report is an object");
    map.insert("samples".into(), json!(w.len()));
    if let Some(chk) = model_check {
        map.insert("model_check".into(), serde_json::to_value(chk).expect("model check serializes"));
    }
    if !args.no_timestamp {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |t| t.as_secs());
        map.insert(
            "timing".into(),
            json!({ "timestamp_unix": unix, "elapsed_ms": started.elapsed().as_secs_f64() * 1e3 }),
        );
    }
    emit_json(args.out.as_deref(), &value)?;
    Ok(report.verdict.exit_code() as u8)
}

fn run_analyze(args: AnalyzeArgs) -> Result<u8> {
    let d = &args.data;
    let rank_tol = RankTol::new(positive("--rank-tol", d.rank_tol)?);
    let w = parse_trajectory_csv(&d.data, d.m, d.p)?;
    let est = estimate_complexity(&w, d.m, d.lag_bound, rank_tol)?;
    let value = json!({
        "samples": w.len(),
        "m": d.m,
        "p": d.p,
        "lag_bound": d.lag_bound,
        "rank_profile": est.rank_profile,
        "n_min_hat": est.n_min_hat,
        "lag_hat": est.lag_hat,
        "trusted": est.trusted,
        "n_min_lower_bound": est.n_min_lower_bound,
    });
    emit_json(args.out.as_deref(), &value)?;
    Ok(0)
}

fn run_simulate(args: SimulateArgs) -> Result<u8> {
    let sys = match &args.system {
        Some(path) => {
            if args.n.is_some() || args.m.is_some() || args.p.is_some() {
                return Err(RunError::Usage("--n/--m/--p apply only to random systems".into()));
            }
            system_from_json(&read(path)?)?
        }
        None => {
            let (Some(n), Some(m), Some(p)) = (args.n, args.m, args.p) else {
                return Err(RunError::Usage("give --system or all of --n, --m, --p".into()));
            };
            random_controllable_system(n, m, p, args.seed)?
        }
    };
    if args.samples == 0 {
        return Err(RunError::Usage("--samples must be positive".into()));
    }
    let x0 = if args.zero_initial {
        DVector::zeros(sys.n())
    } else {
        random_vector(sys.n(), args.seed.wrapping_add(1))
    };
    let inputs = random_inputs(sys.m(), args.samples, args.seed.wrapping_add(2));
    let sim = sys.simulate(&x0, &inputs)?;
    if let Some(path) = &args.system_out {
        emit(Some(path), &system_to_json(&sys))?;
    }
    emit(args.out.as_deref(), &trajectory_to_csv(&sim.trajectory))?;
    Ok(0)
}

fn run_verify(args: VerifyArgs) -> Result<u8> {
    let sys: StateSpace = system_from_json(&read(&args.system)?)?;
    let supply = load_supply(&args.supply, sys.m(), sys.p())?;
    let opts = SolverOptions {
        feas_tol: positive("--feas-tol", args.feas_tol)?,
        ..SolverOptions::default()
    };
    let res = sys.model_dissipativity_solve(&supply, &opts)?;
    let (verdict, code) = match res.status {
        FeasStatus::Feasible => ("DISSIPATIVE", 0),
        FeasStatus::InfeasibleAtTolerance => ("NOT_DISSIPATIVE", 3),
        FeasStatus::Inconclusive => ("UNDECIDED", 4),
    };
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let value = json!({
        "verdict": verdict,
        "status": serde_json::to_value(res.status).expect("status serializes"),
        "iterations": res.iterations,
        "P": res.x.as_ref().filter(|_| res.is_feasible()).map(matrix_to_rows),
        "variable_margin": finite(res.margins.variable),
        "lmi_margin": finite(res.margins.lmi),
        "tolerance": res.tolerance,
    });
    emit_json(args.out.as_deref(), &value)?;
    Ok(code)
}
