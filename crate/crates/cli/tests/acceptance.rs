//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass substrings of criterion names as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- gradient lowrank`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::thread;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use applam::dpp::{kernel_k0, log_density, pair_correlation, repulsiveness_p0, DppSpec, Family, HyperRectangle, PointConfiguration, SpectralTable};
use applam::gibbs::dist::{sample_gamma, sample_gig, sample_inv_gamma, sample_inv_wishart, sample_truncated_unit_normal};
use applam::gibbs::geweke::geweke_test;
use applam::gibbs::steps::{eta_posterior, sigma_posterior, update_eta, update_sigma};
use applam::gibbs::{Sampler, SamplerConfig};
use applam::model::{Hyperparams, Mode};
use common::oracle::*;
use common::*;

const BIN: &str = env!("CARGO_BIN_EXE_applam");

type Check = Result<String, String>;

struct Criterion {
    name: &'static str,
    /// Wall-clock budget; exceeding it fails the criterion.
    budget: Duration,
    run: fn() -> Check,
}

fn criteria() -> Vec<Criterion> {
    let mins = |m: u64| Duration::from_secs(60 * m);
    vec![
        Criterion { name: "gradient", budget: mins(1), run: gradient },
        Criterion { name: "dpp_existence_density", budget: mins(1), run: dpp_existence_density },
        Criterion { name: "lowrank", budget: mins(1), run: lowrank },
        Criterion { name: "conjugate_moments", budget: mins(2), run: conjugate_moments },
        Criterion { name: "geweke", budget: mins(10), run: geweke },
        // Three runs in parallel, each with a 30 minute target.
        Criterion { name: "simulation_a", budget: mins(30), run: simulation_a },
        Criterion { name: "repulsiveness_diagnostics", budget: mins(1), run: diagnostics },
        Criterion { name: "determinism", budget: mins(5), run: determinism },
    ]
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria() {
        if !filters.is_empty() && !filters.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over the {}s budget", c.budget.as_secs())),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        println!("{tag} {} ({:.1}s): {detail}", c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient() -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (whittle, seed) in [(false, 21), (true, 22)] {
        let mut g = rng(seed);
        for _ in 0..24 {
            worst = worst.max(gradient_error(&instance(whittle, &mut g)));
            count += 1;
        }
    }
    ensure(worst <= 1e-4, format!("{count} instances, max relative error {worst:.2e} (limit 1e-4)"))
}

fn dpp_existence_density() -> Check {
    let mut g = rng(12);
    for trial in 0..400 {
        let whittle = trial % 2 == 1;
        let d = 1 + trial % 3;
        let spec = random_spec(whittle, d, 3, &mut g);
        let lambda = random_lambda(d + 1 + trial % 5, d, &mut g) * (0.05 + 20.0 * g.gen::<f64>());
        let table = SpectralTable::build(&spec, &lambda).map_err(|e| e.to_string())?;
        if let Some(p) = table.phi().iter().find(|&&p| !(0.0..1.0).contains(&p)) {
            return Err(format!("spec {trial}: phi = {p} with rho < rho_max"));
        }
    }
    let mut g = rng(11);
    let (mut worst, mut checked) = (0.0f64, 0);
    for whittle in [false, true] {
        for d in 1..=2 {
            for n in 1..=2usize {
                for m in 1..=4usize.min((2 * n + 1).pow(d as u32)) {
                    let spec = random_spec(whittle, d, n, &mut g);
                    let lambda = random_lambda(d + 2, d, &mut g);
                    let pts = spread_points(&spec.region, m, &mut g);
                    let (want, _) = oracle_log_density(&pts, &spec, &lambda);
                    let cfg = PointConfiguration::new(pts, &spec.region).map_err(|e| e.to_string())?;
                    let got = log_density(&cfg, &spec, &lambda).map_err(|e| e.to_string())?;
                    if !want.is_finite() {
                        continue;
                    }
                    worst = worst.max(rel_err(got, want, 1.0));
                    checked += 1;
                }
            }
        }
    }
    ensure(
        worst <= 1e-10 && checked >= 12,
        format!("phi < 1 on 400 specs; log density vs complex oracle on {checked} sets, max relative error {worst:.2e} (limit 1e-10)"),
    )
}

fn lowrank() -> Check {
    let mut g = rng(41);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (s, l, core, y, mean) = lowrank_instance(&mut g);
        worst = worst.max(lowrank_error(&s, &l, &core, &y, &mean));
    }
    ensure(worst <= 1e-9, format!("1000 instances with p <= 8, max relative error {worst:.2e} (limit 1e-9)"))
}

const DRAWS: usize = 100_000;

/// Collects `(label, z)` for sample means against closed forms.
struct Moments(Vec<(String, f64)>);

impl Moments {
    fn add(&mut self, label: impl Into<String>, xs: &[f64], expected: f64) {
        let (mean, se) = mean_and_se(xs);
        self.0.push((label.into(), (mean - expected) / se));
    }
}

fn conjugate_moments() -> Check {
    let mut g = rng(1);
    let mut mo = Moments(Vec::new());
    for (shape, rate) in [(0.5, 1.0), (3.0, 2.5), (200.0, 1.7)] {
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_gamma(shape, rate, &mut g)).collect();
        mo.add(format!("Gamma({shape}, {rate})"), &xs, shape / rate);
    }
    for (shape, scale) in [(3.5, 2.0), (101.0, 30.3)] {
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_inv_gamma(shape, scale, &mut g)).collect();
        mo.add(format!("InvGamma({shape}, {scale})"), &xs, scale / (shape - 1.0));
    }
    for (p, a, b) in [(-0.5, 1.0, 2.0), (0.5, 1.0, 0.3), (-0.5, 1.0, 1e-4), (-25.0, 1.0, 400.0), (2.3, 0.7, 5.0)] {
        let xs: Vec<f64> = (0..DRAWS).map(|_| sample_gig(p, a, b, &mut g)).collect();
        mo.add(format!("giG({p}, {a}, {b})"), &xs, gig_mean(p, a, b));
    }
    let xs: Vec<f64> = (0..DRAWS).map(|_| sample_truncated_unit_normal(0.0, true, &mut g)).collect();
    mo.add("truncated normal", &xs, (2.0 / PI).sqrt());

    // σ² full conditional.
    let (n, p, d) = (12, 3, 2);
    let y = random_matrix(n, p, 1.0, &mut g);
    let lambda = random_matrix(p, d, 1.0, &mut g);
    let eta = random_matrix(n, d, 1.0, &mut g);
    let resid = &y - &eta * lambda.transpose();
    let mut sigma2 = DVector::from_element(p, 1.0);
    let mut draws = vec![Vec::new(); p];
    for _ in 0..DRAWS {
        update_sigma(&y, &lambda, &eta, 1.0, 0.3, &mut sigma2, &mut g);
        for j in 0..p {
            draws[j].push(sigma2[j]);
        }
    }
    for j in 0..p {
        let (shape, scale) = sigma_posterior(resid.column(j).norm_squared(), n, 1.0, 0.3);
        mo.add(format!("sigma2[{j}]"), &draws[j], scale / (shape - 1.0));
    }

    // Gaussian full conditional of a score vector.
    let (p, d) = (5, 2);
    let lambda = random_lambda(p, d, &mut g);
    let sig = DVector::from_fn(p, |j, _| 0.5 + 0.2 * j as f64);
    let gram = lambda.transpose() * DMatrix::from_diagonal(&sig.map(|s| 1.0 / s)) * &lambda;
    let yv = DVector::from_fn(p, |j, _| (j as f64 - 2.0) * 0.7);
    let b = lambda.transpose() * yv.component_div(&sig);
    let mu = DVector::from_vec(vec![0.4, -1.1]);
    let delta = random_spd(d, &mut g);
    let (mean, cov) = eta_posterior(&gram, &b, &delta, &mu).map_err(|e| e.to_string())?;
    let b_rows = DMatrix::from_row_slice(1, d, b.as_slice());
    let mut eta = DMatrix::zeros(1, d);
    let mut xs = vec![Vec::new(); d];
    for _ in 0..DRAWS {
        update_eta(&gram, &b_rows, &[0], &[&mu], &[&delta], &mut eta, &mut g).map_err(|e| e.to_string())?;
        for h in 0..d {
            xs[h].push(eta[(0, h)]);
        }
    }
    for h in 0..d {
        mo.add(format!("eta mean[{h}]"), &xs[h], mean[h]);
        let sq: Vec<f64> = xs[h].iter().map(|x| (x - mean[h]).powi(2)).collect();
        mo.add(format!("eta var[{h}]"), &sq, cov[(h, h)]);
    }
    let cross: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(a, b)| (a - mean[0]) * (b - mean[1])).collect();
    mo.add("eta cov", &cross, cov[(0, 1)]);

    // Inverse-Wishart component covariance.
    let psi = random_spd(3, &mut g) * 5.0;
    let nu = 9.0;
    let mut diag = vec![Vec::new(); 3];
    for _ in 0..DRAWS {
        let w = sample_inv_wishart(nu, &psi, &mut g).map_err(|e| e.to_string())?;
        for h in 0..3 {
            diag[h].push(w[(h, h)]);
        }
    }
    for h in 0..3 {
        mo.add(format!("IW diag[{h}]"), &diag[h], psi[(h, h)] / (nu - 4.0));
    }

    // Gamma conditionals of the allocated weights and the auxiliary u, run
    // through the sampler's own update steps.
    let data = DMatrix::from_fn(30, 5, |i, _| if i < 15 { 2.0 } else { -2.0 } + 0.3 * normal(&mut g));
    let region = HyperRectangle::cube(10.0, 2).map_err(|e| e.to_string())?;
    let hyper = Hyperparams::with_defaults(DppSpec::gaussian_half_max(3.0, 2, region).map_err(|e| e.to_string())?);
    let mut s = Sampler::new(&data, hyper, SamplerConfig::default(), Mode::Continuous, &mut rng(2)).map_err(|e| e.to_string())?;
    let mut state = s.state().clone();
    state.u = 0.8;
    s.set_state(state).map_err(|e| e.to_string())?;
    let sizes = s.state().cluster_sizes();
    let alpha = s.hyper().alpha;
    let mut weights = vec![Vec::with_capacity(DRAWS); sizes.len()];
    for _ in 0..DRAWS {
        s.update_allocated(&mut g).map_err(|e| e.to_string())?;
        for (h, c) in s.state().allocated.iter().enumerate() {
            weights[h].push(c.s);
        }
    }
    for (h, n_h) in sizes.iter().enumerate() {
        mo.add(format!("weight[{h}]"), &weights[h], (alpha + *n_h as f64) / 1.8);
    }
    let total: f64 = s.state().allocated.iter().map(|c| c.s).sum();
    let us: Vec<f64> = (0..DRAWS)
        .map(|_| {
            s.update_u(&mut g);
            s.state().u
        })
        .collect();
    mo.add("u", &us, 30.0 / total);

    let (worst_label, worst) = mo.0.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).cloned().unwrap();
    ensure(
        worst.abs() < 3.0,
        format!("{} means at {DRAWS} draws, largest |z| = {:.2} ({worst_label}) (limit 3)", mo.0.len(), worst.abs()),
    )
}

fn geweke() -> Check {
    let region = HyperRectangle::cube(3.0, 2).map_err(|e| e.to_string())?;
    let mut hyper = Hyperparams::with_defaults(DppSpec::gaussian_half_max(3.0, 2, region).map_err(|e| e.to_string())?);
    hyper.a_sigma = 3.0;
    hyper.b_sigma = 2.0;
    let config = SamplerConfig { mala_step: 1.0, ..Default::default() };
    let report = geweke_test(10, 6, &hyper, &config, 10_000, 20, 50, &mut rng(31)).map_err(|e| e.to_string())?;
    let zs: Vec<String> = report.stats.iter().map(|s| format!("{} {:+.2}", s.name, s.z)).collect();
    let worst = report.max_abs_z();
    ensure(worst < 4.0, format!("10^4 samples (n=10, p=6, d=2, N=2), z: {} (limit |z| < 4)", zs.join(", ")))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| format!("cannot run {BIN}: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("applam {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn simulation_a() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (data, labels) = (p("data.csv"), p("labels.csv"));
    run_cli(&["simulate", "--scenario", "a", "--p", "100", "--d", "5", "--n-per-cluster", "50", "--seed", "1", "--out-data", &data, "--out-labels", &labels])?;
    let rhos = ["5", "10", "20"];
    let results: Vec<Result<(u64, f64), String>> = thread::scope(|scope| {
        let handles: Vec<_> = rhos
            .iter()
            .map(|rho| {
                let out = p(&format!("rho{rho}"));
                let (data, labels) = (&data, &labels);
                scope.spawn(move || {
                    run_cli(&[
                        "fit", "--data", data, "--truth", labels, "--d", "5", "--rho", rho, "--n-burn", "2000", "--n-save", "4000",
                        "--thin", "5", "--seed", "1", "--out-dir", &out,
                    ])?;
                    let s = read_json(&Path::new(&out).join("summary.json"))?;
                    let mode = s["mode_nclus"].as_u64().ok_or("summary has no mode_nclus")?;
                    let ari = s["ari_best"].as_f64().ok_or("summary has no ari_best")?;
                    Ok((mode, ari))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("fit thread panicked".into()))).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let modes4 = results.iter().filter(|r| r.0 == 4).count();
    let ari_ok = results.iter().all(|r| r.1 >= 0.9);
    let runs: Vec<String> = rhos.iter().zip(&results).map(|(r, (m, a))| format!("rho {r}: mode {m}, ARI {a:.3}")).collect();
    ensure(modes4 >= 2 && ari_ok, format!("{} (need mode 4 in >= 2 runs, ARI >= 0.90 in all)", runs.join("; ")))
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn diagnostics() -> Check {
    let c = 3.0;
    let mut worst = 0.0f64;
    for rho in [0.2, 0.5, 1.1] {
        let spec = DppSpec::new(Family::GaussianLike { c }, rho, 3, HyperRectangle::cube(2.0, 1).unwrap()).map_err(|e| e.to_string())?;
        for l in [1.0, 0.4, 2.5] {
            let lambda = DMatrix::from_element(1, 1, l);
            let closed = repulsiveness_p0(&spec, &lambda).map_err(|e| e.to_string())?;
            let h = 1e-4;
            let steps = (80.0 / h) as usize;
            let integral: f64 = (0..=steps)
                .map(|i| kernel_k0(&spec, &lambda, &DVector::from_element(1, -40.0 + i as f64 * h)).unwrap().powi(2) * h)
                .sum();
            worst = worst.max((closed - integral / rho).abs());
        }
    }
    if worst > 1e-4 {
        return Err(format!("p0 closed form vs quadrature differs by {worst:.2e} (limit 1e-4)"));
    }

    // Λ = U diag(1, 0.4) Uᵀ: repulsion is strongest along the first
    // eigenvector, so g is larger there at every lag.
    let cc = 30.0;
    let spec = DppSpec::new(Family::GaussianLike { c: cc }, 0.5 * cc / (2.0 * PI), 3, HyperRectangle::cube(2.0, 2).unwrap())
        .map_err(|e| e.to_string())?;
    let mut max_gap = 0.0f64;
    for theta in [0.0, PI / 4.0] {
        let u = rotation(theta);
        let lambda = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.4])) * u.transpose();
        let (strong, weak) = (u.column(0).into_owned(), u.column(1).into_owned());
        for i in 1..=300 {
            let t = i as f64 * 0.01;
            let gs = pair_correlation(&spec, &lambda, &(&strong * t)).map_err(|e| e.to_string())?;
            let gw = pair_correlation(&spec, &lambda, &(&weak * t)).map_err(|e| e.to_string())?;
            if gs < gw {
                return Err(format!("theta {theta:.3}, lag {t}: g along the first eigenvector {gs} < {gw}"));
            }
            max_gap = max_gap.max(gs - gw);
        }
    }
    ensure(
        max_gap > 1e-3,
        format!("p0 max quadrature error {worst:.2e} (limit 1e-4); PCF ordered at 600 lags, max gap {max_gap:.3}"),
    )
}

/// Every file under `dir`, relative path and bytes, sorted by path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(dir: &Path, config: &Path, seed: &str) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let cfg = config.to_string_lossy().into_owned();
    run_cli(&["simulate", "--config", &cfg, "--out-data", &p("data.csv"), "--out-labels", &p("labels.csv")])?;
    run_cli(&["fit", "--config", &cfg, "--seed", seed, "--data", &p("data.csv"), "--truth", &p("labels.csv"), "--out-dir", &p("fit")])?;
    run_cli(&["fit", "--config", &cfg, "--seed", seed, "--mode", "binary", "--data", &p("binary.csv"), "--out-dir", &p("fit_binary")])?;
    run_cli(&["diagnose", "--config", &cfg, "--seed", seed, "--out-dir", &p("diagnose")])?;
    run_cli(&[
        "score", "--config", &cfg, "--trace", &p("fit/trace.csv"), "--truth", &p("labels.csv"), "--loglik", &p("fit/loglik.csv"),
        "--out", &p("score/summary.json"),
    ])
}

fn determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = root.path().join("run.cfg");
    let text = "seed = 7\n[simulate]\np = 12\nd = 2\nn_per_cluster = 10\n[fit]\nd = 2\nn_burn = 40\nn_save = 60\nthin = 2\nn_chains = 2\nrho = 5\n[diagnose]\nprior_draws = 5\ngrid_n = 11\n";
    fs::write(&config, text).map_err(|e| e.to_string())?;
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| root.path().join(n)).collect();
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| e.to_string())?;
        // Binary data derived from a fixed pattern, identical for every run.
        let z: String = (0..20).map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5 < 2) as u8).map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n").collect();
        fs::write(d.join("binary.csv"), z).map_err(|e| e.to_string())?;
    }
    pipeline(&dirs[0], &config, "7")?;
    pipeline(&dirs[1], &config, "7")?;
    pipeline(&dirs[2], &config, "8")?;
    let (a, b, c) = (snapshot(&dirs[0]), snapshot(&dirs[1]), snapshot(&dirs[2]));
    let names_a: Vec<_> = a.iter().map(|f| &f.0).collect();
    let names_b: Vec<_> = b.iter().map(|f| &f.0).collect();
    if names_a != names_b {
        return Err(format!("runs wrote different file sets: {names_a:?} vs {names_b:?}"));
    }
    if let Some((path, _)) = a.iter().zip(&b).find(|(x, y)| x.1 != y.1).map(|(x, _)| x) {
        return Err(format!("{} differs between identical runs", path.display()));
    }
    let trace = Path::new("fit").join("trace.csv");
    let get = |s: &[(PathBuf, Vec<u8>)]| s.iter().find(|f| f.0 == trace).map(|f| f.1.clone());
    ensure(get(&a) != get(&c), format!("{} files byte-identical across two runs; a different seed changes the trace", a.len()))
}
