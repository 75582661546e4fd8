use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use applam::dpp::{
    pair_correlation, repulsiveness_p0, sample_prior, DppSpec, Family, HyperRectangle, SpectralTable,
};
use applam::gibbs::{chain_rng, run_chain, ChainTrace, SamplerConfig};
use applam::model::{elicit_region, standardize, Hyperparams, LoadingsInit, Mode};
use applam::postproc::{binary_deltas, summarize, Summary};
use applam::simdata::{gen_sim, Scenario, SimScenario};

use crate::args::{DiagnoseArgs, DppArgs, FamilyArg, FitArgs, InitArg, ModeArg, ScenarioArg, ScoreArgs, SimulateArgs};
use crate::io::{
    format_labels, format_loglik, format_matrix, format_trace, read_labels, read_loglik, read_matrix, read_trace,
    write_text, CliResult,
};

/// Stream of the run generator reserved for setup draws (region elicitation);
/// chains use streams `0..n_chains`.
const SETUP_STREAM: u64 = u64::MAX;

fn err(e: applam::Error) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| e.to_string())
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let scenario = match a.scenario {
        ScenarioArg::A => Scenario::A,
        ScenarioArg::B => Scenario::B,
    };
    let sc = SimScenario { n_per_cluster: a.n_per_cluster, ..SimScenario::new(scenario, a.p, a.d) };
    let (data, labels) = gen_sim(&sc, &mut chain_rng(a.seed, 0)).map_err(err)?;
    write_text(&a.out_data, &format_matrix(&data))?;
    write_text(&a.out_labels, &format_labels(&labels))?;
    eprintln!("wrote {} x {} data to {}", data.nrows(), data.ncols(), a.out_data.display());
    Ok(())
}

fn dpp_spec(a: &DppArgs, region: HyperRectangle) -> CliResult<DppSpec> {
    match a.family {
        FamilyArg::Gaussian => match a.c {
            Some(c) => DppSpec::new(Family::GaussianLike { c }, a.rho, a.trunc_n, region),
            None => DppSpec::gaussian_half_max(a.rho, a.trunc_n, region),
        },
        FamilyArg::WhittleMatern => {
            DppSpec::new(Family::WhittleMatern { alpha: a.wm_alpha, nu: a.wm_nu }, a.rho, a.trunc_n, region)
        }
    }
    .map_err(err)
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(format!("level must lie in (0, 1), got {level}"))
    }
}

fn check_truth(truth: &Option<Vec<usize>>, n: usize) -> CliResult<()> {
    match truth {
        Some(t) if t.len() != n => Err(format!("truth has {} labels for {n} observations", t.len())),
        _ => Ok(()),
    }
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    if a.n_chains == 0 {
        return Err("n_chains must be at least 1".into());
    }
    check_level(a.level)?;
    let raw = read_matrix(&a.data)?;
    let truth = a.truth.as_deref().map(read_labels).transpose()?;
    check_truth(&truth, raw.nrows())?;
    let mode = match a.mode {
        ModeArg::Continuous => Mode::Continuous,
        ModeArg::Binary => Mode::Binary,
    };
    if mode == Mode::Binary && raw.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(format!("{}: binary mode needs 0/1 data", a.data.display()));
    }
    let data = if mode == Mode::Continuous && a.standardize { standardize(&raw).map_err(err)?.0 } else { raw.clone() };

    let region = match a.gamma {
        Some(g) => HyperRectangle::cube(g, a.d).map_err(err)?,
        None => {
            // Binary data are elicited on the ±1 scale of the latent signs.
            let basis = if mode == Mode::Binary { data.map(|v| 2.0 * v - 1.0) } else { data.clone() };
            elicit_region(&basis, a.d, a.a_dl, a.elicit_draws, &mut chain_rng(a.seed, SETUP_STREAM)).map_err(err)?
        }
    };
    let d = a.d;
    let hyper = Hyperparams {
        alpha: a.alpha,
        nu0: a.nu0.unwrap_or(d as f64 + 50.0),
        psi0: DMatrix::identity(d, d) * a.psi0,
        a_sigma: a.a_sigma,
        b_sigma: a.b_sigma,
        a_dl: a.a_dl,
        dpp: dpp_spec(&a.dpp, region)?,
    };
    hyper.validate().map_err(err)?;
    let config = SamplerConfig {
        n_burn: a.n_burn,
        n_save: a.n_save,
        thin: a.thin,
        mala_step: a.mala_step,
        tune_mala: a.tune_mala,
        tune_mu: a.tune_mu,
        mala_precondition: a.mala_precondition,
        init_loadings: match a.init_loadings {
            InitArg::Pca => LoadingsInit::Pca,
            InitArg::Prior => LoadingsInit::Prior,
        },
        bd_steps_per_sweep: a.bd_steps,
        mu_step_frac: a.mu_step_frac,
        seed: a.seed,
    };
    config.validate().map_err(err)?;

    let traces: Vec<Result<ChainTrace, applam::Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..a.n_chains)
            .map(|c| {
                let (data, hyper, config) = (&data, &hyper, &config);
                scope.spawn(move || run_chain(data, hyper, config, mode, &mut chain_rng(config.seed, c as u64)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain worker panicked")).collect()
    });
    let traces = traces
        .into_iter()
        .enumerate()
        .map(|(c, t)| t.map_err(|e| format!("chain {}: {e}", c + 1)))
        .collect::<CliResult<Vec<_>>>()?;

    let out = &a.out_dir;
    if traces.len() > 1 {
        for (c, t) in traces.iter().enumerate() {
            write_text(&out.join(format!("trace_chain{}.csv", c + 1)), &format_trace(&t.records))?;
            write_text(&out.join(format!("loglik_chain{}.csv", c + 1)), &format_loglik(&t.records))?;
        }
    }
    let records: Vec<_> = traces.iter().flat_map(|t| t.records.iter()).collect();
    write_text(&out.join("trace.csv"), &format_trace(records.iter().copied()))?;
    write_text(&out.join("loglik.csv"), &format_loglik(records.iter().copied()))?;

    let parts: Vec<Vec<usize>> = records.iter().map(|r| r.labels.clone()).collect();
    let loglik: Vec<Vec<f64>> = records.iter().map(|r| r.loglik.clone()).collect();
    let (summary, best) = summarize(&parts, truth.as_deref(), (!loglik.is_empty()).then_some(&loglik[..]), a.level)
        .map_err(err)?;
    write_text(&out.join("summary.json"), &to_json(&summary)?)?;
    if let Some(best) = &best {
        write_text(&out.join("binder_labels.csv"), &format_labels(best))?;
        if mode == Mode::Binary {
            let mut s = String::from("cluster,feature,delta\n");
            for (c, j, delta) in binary_deltas(&raw, best).map_err(err)? {
                let _ = writeln!(s, "{},{},{}", c + 1, j + 1, delta);
            }
            write_text(&out.join("deltas.csv"), &s)?;
        }
    }
    let chains: Vec<ChainInfo> = traces
        .iter()
        .enumerate()
        .map(|(c, t)| ChainInfo {
            chain: c + 1,
            records: t.len(),
            mala_step: t.mala_step,
            mu_step_frac: t.mu_step_frac,
            accept_mala: t.acceptance.mala.rate(),
            accept_mu: t.acceptance.mu.rate(),
            accept_birth_death: t.acceptance.birth_death.rate(),
        })
        .collect();
    let region = &hyper.dpp.region;
    let info = RunInfo { region_lower: region.lower().as_slice().to_vec(), region_upper: region.upper().as_slice().to_vec(), chains };
    write_text(&out.join("run.json"), &to_json(&info)?)?;
    report(&summary);
    Ok(())
}

#[derive(Serialize)]
struct ChainInfo {
    chain: usize,
    records: usize,
    mala_step: f64,
    mu_step_frac: f64,
    accept_mala: f64,
    accept_mu: f64,
    accept_birth_death: f64,
}

#[derive(Serialize)]
struct RunInfo {
    region_lower: Vec<f64>,
    region_upper: Vec<f64>,
    chains: Vec<ChainInfo>,
}

fn report(s: &Summary) {
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    eprintln!(
        "mode_nclus {} mean_nclus {} ari_best {} waic {}",
        s.mode_nclus.map_or("-".to_string(), |m| m.to_string()),
        show(s.mean_nclus),
        show(s.ari_best),
        show(s.waic)
    );
}

fn parse_lambda(text: &str) -> CliResult<DMatrix<f64>> {
    let rows = text
        .split(';')
        .map(|r| r.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad loadings entry {v:?}"))).collect())
        .collect::<CliResult<Vec<Vec<f64>>>>()?;
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err("loadings rows differ in length".into());
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

#[derive(Serialize)]
struct DiagnoseInfo {
    rho_max: f64,
    p0: Option<f64>,
    expected_count: f64,
}

pub fn diagnose(a: &DiagnoseArgs) -> CliResult<()> {
    let lambda = parse_lambda(&a.lambda)?;
    let d = lambda.ncols();
    if d > 2 {
        return Err("pair correlation grids need d <= 2".into());
    }
    if a.grid_n == 0 || a.grid_hi.partial_cmp(&a.grid_lo).is_none_or(|o| o.is_lt()) {
        return Err("grid needs grid_n >= 1 and grid_hi >= grid_lo".into());
    }
    let spec = dpp_spec(&a.dpp, HyperRectangle::cube(a.gamma, d).map_err(err)?)?;
    let axis: Vec<f64> = (0..a.grid_n)
        .map(|i| if a.grid_n == 1 { a.grid_lo } else { a.grid_lo + (a.grid_hi - a.grid_lo) * i as f64 / (a.grid_n - 1) as f64 })
        .collect();
    let g = |x: Vec<f64>| pair_correlation(&spec, &lambda, &DVector::from_vec(x)).map_err(err);
    let mut pcf = String::new();
    if d == 1 {
        pcf.push_str("x1,g\n");
        for &x in &axis {
            let _ = writeln!(pcf, "{x},{}", g(vec![x])?);
        }
    } else {
        pcf.push_str("x1,x2,g\n");
        for &x1 in &axis {
            for &x2 in &axis {
                let _ = writeln!(pcf, "{x1},{x2},{}", g(vec![x1, x2])?);
            }
        }
    }
    write_text(&a.out_dir.join("pcf.csv"), &pcf)?;

    if a.prior_draws > 0 {
        let mut rng = chain_rng(a.seed, 0);
        let header: Vec<String> = (1..=d).map(|h| format!("x{h}")).collect();
        let mut s = format!("draw,{}\n", header.join(","));
        for draw in 1..=a.prior_draws {
            for x in sample_prior(&spec, &lambda, &mut rng).map_err(err)?.points() {
                let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(s, "{draw},{}", coords.join(","));
            }
        }
        write_text(&a.out_dir.join("prior_draws.csv"), &s)?;
    }
    let info = DiagnoseInfo {
        rho_max: spec.rho_max(&lambda).map_err(err)?,
        p0: repulsiveness_p0(&spec, &lambda).ok(),
        expected_count: SpectralTable::build(&spec, &lambda).map_err(err)?.expected_count(),
    };
    write_text(&a.out_dir.join("diagnostics.json"), &to_json(&info)?)?;
    Ok(())
}

pub fn score(a: &ScoreArgs) -> CliResult<()> {
    check_level(a.level)?;
    let rows = read_trace(&a.trace)?;
    let parts: Vec<Vec<usize>> = rows.iter().map(|r| r.labels.clone()).collect();
    let truth = a.truth.as_deref().map(read_labels).transpose()?;
    if let Some(first) = parts.first() {
        check_truth(&truth, first.len())?;
    }
    let loglik = a.loglik.as_deref().map(read_loglik).transpose()?;
    if let Some(ll) = &loglik {
        if ll.len() != parts.len() {
            return Err(format!("log-likelihood has {} rows for {} trace rows", ll.len(), parts.len()));
        }
    }
    let (summary, _) = summarize(&parts, truth.as_deref(), loglik.as_deref(), a.level).map_err(err)?;
    write_text(&a.out, &to_json(&summary)?)?;
    report(&summary);
    Ok(())
}
