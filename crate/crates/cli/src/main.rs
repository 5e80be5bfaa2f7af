mod config;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use cone_forge::edge::{self, LogGrid, ModeProblem, Rhs};
use cone_forge::g2;
use cone_forge::lattice::{self, ClassQuery, DotConstraint, GramLattice, LatticeVector};
use cone_forge::special::{self, BesselEval};
use cone_forge::spectra::{self, LinkSpectrum, Real, WeightVector, Window};
use cone_forge::stenzel::{self, ConePotential, FlatPotential, Potential, StenzelPotential};

use config::{OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "cone-forge", version, about = "Verification toolkit for G2 cone geometry, edge operators and K3 lattice matching")]
struct Cli {
    /// JSON run configuration (overrides $CONE_FORGE_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// run the module invariant suite and reflect it in the exit code
    #[arg(long, global = true)]
    verify: bool,
    /// tabular output format (overrides the config)
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// G₂ 3-form algebra
    #[command(subcommand)]
    G2(G2Cmd),
    /// modified Bessel functions
    #[command(subcommand)]
    Bessel(BesselCmd),
    /// Stenzel profile and Monge–Ampère checks
    #[command(subcommand)]
    Stenzel(StenzelCmd),
    /// critical rates and index change
    #[command(subcommand)]
    Spectra(SpectraCmd),
    /// Bessel-kernel edge operator
    #[command(subcommand)]
    Edge(EdgeCmd),
    /// K3 lattice arithmetic
    #[command(subcommand)]
    Lattice(LatticeCmd),
}

#[derive(Subcommand)]
enum G2Cmd {
    /// central-difference check of the Θ linearization at φ₀
    Lincheck {
        #[arg(long)]
        forms: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum BesselCmd {
    /// I_μ(x) and K_μ(x); comma-separated lists give every pair
    Eval {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum StenzelCmd {
    /// radial profile (f′ⁿ)′ = n sinhⁿ⁻¹w as CSV w,f,fprime
    Profile {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long)]
        wmax: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monge–Ampère residuals at random points of C_ε
    MaCheck {
        /// ε as RE,IM
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum SpectraCmd {
    /// critical rates of degree p inside a window
    Rates {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        p: usize,
        /// A:B (open) or with brackets, e.g. [-3:0]
        #[arg(long, allow_hyphen_values = true)]
        window: String,
        #[arg(long, value_enum, default_value_t = Family::Harmonic)]
        family: Family,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// N(δ, δ′) with the spectrum at every cone point
    IndexChange {
        #[arg(long)]
        input: PathBuf,
        /// δ as "d1,...;dinf"
        #[arg(long, allow_hyphen_values = true)]
        weights: String,
        /// δ′ as "d1,...;dinf"; defaults to −δ
        #[arg(long, allow_hyphen_values = true)]
        weights_prime: Option<String>,
        /// cross-section modes of the cylindrical end as "mu:mult,..."
        #[arg(long, default_value = "0:1", allow_hyphen_values = true)]
        end_modes: String,
        #[arg(long, default_value_t = 0)]
        p: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Family {
    Harmonic,
    OneForm,
    Paired,
    Function,
}

#[derive(Args, Clone)]
struct ModeArgs {
    #[arg(long, allow_hyphen_values = true)]
    n: i64,
    #[arg(long)]
    mu: f64,
    /// CSV r,value samples of z
    #[arg(long, conflicts_with = "bump")]
    rhs: Option<PathBuf>,
    /// smooth bump a,b,amp supported in (a, b)
    #[arg(long, allow_hyphen_values = true)]
    bump: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EdgeCmd {
    /// Green-kernel solution of ((r d/dr)² − (n²r² + μ²))y = z on (0, 1]
    Solve(ModeArgs),
    /// y = y_≤ + y_> with the low coefficient
    Split {
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_p: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta_pp: f64,
    },
    /// obstruction modes for 0 < |n| ≤ nmax
    Kernel {
        #[arg(long)]
        nmax: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// L = 2(−E8) ⊕ 3U with its invariants
    Build,
    /// the embedding of Π̃, −K₊, −¼K₋
    Match,
    /// integer combinations of a span with prescribed square and pairings
    Search {
        #[arg(long, allow_hyphen_values = true)]
        square: i64,
        /// name=value pairs, e.g. kplus=0,kminus=2
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dots: Vec<String>,
        /// span vector names
        #[arg(long, value_delimiter = ',', default_value = "pi,kplus,kminus")]
        span: Vec<String>,
        #[arg(long)]
        bound: Option<u64>,
        /// JSON object of extra named vectors {"name": [22 integers]}
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// saturated basis of the orthogonal complement
    Complement {
        #[arg(long, value_delimiter = ',', default_value = "pi,kplus,kminus")]
        of: Vec<String>,
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// direction in T avoiding every constrained class found
    Generic {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        avoid_bound: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Verify(String),
}

fn usage<E: Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    fn finish(self, summary: &mut Value) -> Result<(), Failure> {
        let failed: Vec<String> = self.0.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        summary["checks"] = serde_json::to_value(&self.0).expect("checks serialize");
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Verify(failed.join("; ")))
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    verify: bool,
    format: OutputFormat,
}

/// Writes to stdout; a closed pipe ends output quietly.
fn out(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json")
}

/// Table to `out` (or stdout) and the summary to stdout (or stderr).
fn emit_table(ctx: &Ctx, csv: String, rows: Value, summary: &Value, dest: Option<&Path>) -> Result<(), Failure> {
    let table = match ctx.format {
        OutputFormat::Csv => csv,
        OutputFormat::Json => pretty(&rows) + "\n",
    };
    match dest {
        Some(p) => {
            std::fs::write(p, table).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            out(&(pretty(summary) + "\n"));
        }
        None => {
            out(&table);
            eprintln!("{}", pretty(summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let format = cli.format.unwrap_or(cfg.format);
    let ctx = Ctx { cfg, verify: cli.verify, format };
    let result = match cli.command {
        Command::G2(c) => run_g2(&ctx, c),
        Command::Bessel(c) => run_bessel(&ctx, c),
        Command::Stenzel(c) => run_stenzel(&ctx, c),
        Command::Spectra(c) => run_spectra(&ctx, c),
        Command::Edge(c) => run_edge(&ctx, c),
        Command::Lattice(c) => run_lattice(&ctx, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
    }
}

fn run_g2(ctx: &Ctx, cmd: G2Cmd) -> Result<(), Failure> {
    let G2Cmd::Lincheck { forms, step, seed } = cmd;
    let c = &ctx.cfg.g2;
    let forms = forms.unwrap_or(c.forms);
    let h = step.unwrap_or(c.step);
    if forms == 0 || !(h > 0.0) {
        return Err(usage("--forms must be ≥ 1 and --step positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(ctx.cfg.seed));
    let gammas: Vec<_> = (0..forms).map(|_| g2::random_unit_form(&mut rng)).collect();
    let mut max_res: f64 = 0.0;
    for g in &gammas {
        max_res = max_res.max(g2::linearization_residual(g, h).map_err(usage)?);
    }
    let steps = [100.0 * h, 10.0 * h, h];
    let orders: Vec<f64> = gammas.iter().take(5).map(|g| g2::convergence_order(g, &steps)).collect::<Result<_, _>>().map_err(usage)?;
    let worst_order = orders.iter().copied().fold(2.0, |a: f64, o| if (o - 2.0).abs() > (a - 2.0).abs() { o } else { a });
    let mut checks = Checks::default();
    checks.add("residual", max_res <= c.residual_tol, format!("max {max_res:e} vs {:e}", c.residual_tol));
    checks.add("order", (worst_order - 2.0).abs() <= c.order_tol, format!("worst order {worst_order}"));
    let mut summary = json!({ "forms": forms, "step": h, "max_residual": max_res, "orders": orders });
    if ctx.verify {
        let [p1, p7, p27] = g2::Projector::new(&g2::phi0()).and_then(|p| p.matrices()).map_err(usage)?;
        let ranks = [g2::rank(&p1, 1e-8), g2::rank(&p7, 1e-8), g2::rank(&p27, 1e-8)];
        checks.add("ranks", ranks == [1, 7, 27], format!("{ranks:?}"));
        let (with, without) = g2::convention_residuals(&gammas[0], h).map_err(usage)?;
        checks.add("pi1_factor", with < without, format!("4/3: {with:e}, 1: {without:e}"));
    }
    let r = checks.finish(&mut summary);
    out(&(pretty(&summary) + "\n"));
    r
}

fn run_bessel(ctx: &Ctx, cmd: BesselCmd) -> Result<(), Failure> {
    let BesselCmd::Eval { mu, x } = cmd;
    if mu.is_empty() || x.is_empty() {
        return Err(usage("--mu and --x are required"));
    }
    if mu.iter().any(|&m| !(m >= 0.0)) || x.iter().any(|&v| !(v > 0.0)) {
        return Err(usage("need μ ≥ 0 and x > 0"));
    }
    let c = &ctx.cfg.bessel;
    let mut rows = Vec::new();
    let mut checks = Checks::default();
    for &m in &mu {
        for &v in &x {
            let e = BesselEval::new(m, v);
            // relative to 1/x
            let w = v * special::wronskian_residual(m, v);
            let mut row = serde_json::to_value(e).expect("eval");
            row["wronskian_residual"] = json!(w);
            rows.push(row);
            if ctx.verify {
                checks.add(&format!("wronskian μ={m} x={v}"), w <= c.wronskian_tol, format!("{w:e}"));
                for (f, name) in [(special::bessel_i as fn(f64, f64) -> f64, "I"), (special::bessel_k, "K")] {
                    let r = special::bessel_ode_residual(|t| f(m, t), m, v);
                    checks.add(&format!("ode {name} μ={m} x={v}"), r <= 1e-6, format!("{r:e}"));
                }
            }
        }
    }
    if ctx.verify {
        let mut worst: f64 = 0.0;
        let mut t: f64 = 0.01;
        while t <= 10.0 {
            let k1 = special::bessel_k(1.0, t);
            worst = worst.max(((special::bessel_k_prime(0.0, t) + k1) / k1).abs());
            t *= 1.1;
        }
        checks.add("k0_prime_plus_k1", worst <= c.derivative_tol, format!("{worst:e}"));
    }
    let mut summary = json!({ "rows": rows });
    let r = checks.finish(&mut summary);
    out(&(pretty(&summary) + "\n"));
    r
}

/// f′ for n = 3; series near 0 against cancellation.
fn closed_form_fprime_n3(w: f64) -> f64 {
    let inner = if w < 1e-2 { w.powi(3) + w.powi(5) / 5.0 + 2.0 * w.powi(7) / 105.0 } else { 1.5 * (w.sinh() * w.cosh() - w) };
    inner.cbrt()
}

fn run_stenzel(ctx: &Ctx, cmd: StenzelCmd) -> Result<(), Failure> {
    let c = &ctx.cfg.stenzel;
    match cmd {
        StenzelCmd::Profile { n, wmax, steps, out } => {
            let w_max = wmax.unwrap_or(c.w_max);
            let steps = steps.unwrap_or(c.steps);
            let prof = match stenzel::solve_profile_with_tol(n, w_max, steps, c.profile_tol) {
                Ok(p) => p,
                Err(e @ stenzel::StenzelError::GridTooCoarse { .. }) => return Err(Failure::Verify(e.to_string())),
                Err(e) => return Err(usage(e)),
            };
            let mut csv = String::from("w,f,fprime\n");
            for i in 0..prof.grid.len() {
                csv.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", prof.grid[i], prof.f[i], prof.fprime[i]));
            }
            let rows = json!({ "w": prof.grid, "f": prof.f, "fprime": prof.fprime });
            let mut checks = Checks::default();
            let res = prof.max_residual();
            checks.add("ode_residual", res <= c.profile_tol, format!("{res:e}"));
            let mut summary = json!({ "n": n, "w_max": prof.w_max(), "steps": steps, "max_residual": res });
            if ctx.verify {
                checks.add("vertex", prof.f[0] == 0.0 && prof.fprime[0] == 0.0, "f(0) = f′(0) = 0");
                let monotone = prof.f.windows(2).all(|p| p[1] >= p[0]);
                checks.add("monotone", monotone, "f nondecreasing");
                if n == 3 {
                    let err = prof
                        .grid
                        .iter()
                        .zip(&prof.fprime)
                        .map(|(&w, &fp)| {
                            let e = closed_form_fprime_n3(w);
                            (fp - e).abs() / e.max(1.0)
                        })
                        .fold(0.0, f64::max);
                    checks.add("closed_form", err <= c.closed_form_tol, format!("{err:e}"));
                    summary["closed_form_error"] = json!(err);
                    if prof.w_max() >= 20.0 {
                        let coef = prof.f_at(20.0).map_err(usage)? * (-40.0f64 / 3.0).exp();
                        summary["asymptotic_coefficient_w20"] = json!(coef);
                    }
                }
            }
            let r = checks.finish(&mut summary);
            emit_table(ctx, csv, rows, &summary, out.as_deref())?;
            r
        }
        StenzelCmd::MaCheck { eps, points, seed } => {
            let (re, im) = eps.split_once(',').ok_or_else(|| usage("--eps expects RE,IM"))?;
            let eps = Complex64::new(re.trim().parse().map_err(usage)?, im.trim().parse().map_err(usage)?);
            if points == 0 {
                return Err(usage("--points must be ≥ 1"));
            }
            let seed = seed.unwrap_or(ctx.cfg.seed);
            let h = c.ma_step;
            let cone = eps.norm() == 0.0;
            let pts = stenzel::sample_chart_points(eps, points, seed, c.min_chart, if cone { 0.0 } else { c.max_w });
            let mut residuals = Vec::with_capacity(points);
            let mut control = Vec::with_capacity(points);
            let flat = FlatPotential { eps };
            let potential: Box<dyn Potential> = if cone {
                Box::new(ConePotential { n: 3 })
            } else {
                Box::new(StenzelPotential { eps, profile: stenzel::solve_profile(3, c.max_w + 2.0, c.steps).map_err(usage)? })
            };
            for p in &pts {
                let r = stenzel::monge_ampere_residual(potential.as_ref(), p, h).map_err(|e| Failure::Verify(e.to_string()))?;
                residuals.push(r);
                control.push(stenzel::monge_ampere_residual(&flat, p, h).map_err(|e| Failure::Verify(e.to_string()))?);
            }
            let tol = if cone { c.cone_tol } else { c.smoothing_tol };
            let max_r = residuals.iter().copied().fold(0.0, f64::max);
            let min_c = control.iter().copied().fold(f64::INFINITY, f64::min);
            let mut checks = Checks::default();
            checks.add("monge_ampere", max_r <= tol, format!("max {max_r:e} vs {tol:e}"));
            checks.add("negative_control", min_c > c.control_min, format!("min {min_c:e}"));
            if ctx.verify {
                let worst = pts.iter().map(|p| p.constraint_residual()).fold(0.0, f64::max);
                checks.add("on_quadric", worst <= stenzel::CONSTRAINT_TOL, format!("{worst:e}"));
            }
            let mut summary = json!({
                "eps": [eps.re, eps.im],
                "potential": if cone { "cone" } else { "stenzel" },
                "points": points,
                "seed": seed,
                "max_residual": max_r,
                "min_control_residual": min_c,
                "residuals": residuals,
            });
            let r = checks.finish(&mut summary);
            out(&(pretty(&summary) + "\n"));
            r
        }
    }
}

fn load_spectrum(path: &Path) -> Result<LinkSpectrum, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    LinkSpectrum::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn multiset(rates: &[spectra::CriticalRate]) -> Vec<(f64, u64)> {
    let mut v: Vec<(f64, u64)> = rates.iter().map(|r| (r.lambda.to_f64(), r.dimension())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

fn run_spectra(ctx: &Ctx, cmd: SpectraCmd) -> Result<(), Failure> {
    match cmd {
        SpectraCmd::Rates { input, p, window, family, out } => {
            let spec = load_spectrum(&input)?;
            let win = Window::parse(&window).map_err(usage)?;
            let mut summary = json!({ "input": input.display().to_string(), "p": p, "window": win.to_string() });
            let mut checks = Checks::default();
            let rates = match family {
                Family::Harmonic => {
                    let cat = spectra::harmonic_rate_catalog(&spec, p, &win).map_err(usage)?;
                    summary["complete"] = json!(cat.complete);
                    if ctx.verify {
                        let hat = spectra::hat_route_rates(&spec, p).map_err(usage)?;
                        let mut inside = Vec::new();
                        for r in hat {
                            if win.contains(&r.lambda).map_err(usage)? {
                                inside.push(r);
                            }
                        }
                        let (a, b) = (multiset(&cat.rates), multiset(&inside));
                        let same = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x.0 - y.0).abs() <= 1e-9 && x.1 == y.1);
                        checks.add("dual_route", same, format!("{} type-route vs {} hat-route rates", a.len(), b.len()));
                    }
                    cat.rates
                }
                Family::OneForm => spectra::one_form_catalog(&spec, &win).map_err(usage)?,
                Family::Paired => spectra::paired_catalog(&spec, &win).map_err(usage)?,
                Family::Function => {
                    let modes: Vec<(Real, u64)> = spec.modes(0).map(|m| (m.mu.clone(), m.mult)).collect();
                    let fr = spectra::function_rates(3, &modes, &win).map_err(usage)?;
                    summary["gaps"] = serde_json::to_value(&fr.gaps).expect("gaps");
                    if ctx.verify {
                        checks.add("negative_gap", fr.gaps.negative_gap, "no rate in (−2n+2, 0)");
                    }
                    fr.rates
                }
            };
            summary["count"] = json!(rates.len());
            let r = checks.finish(&mut summary);
            let rows = serde_json::to_value(&rates).expect("rates");
            emit_table(ctx, spectra::rates_csv(&rates), rows, &summary, out.as_deref())?;
            r
        }
        SpectraCmd::IndexChange { input, weights, weights_prime, end_modes, p } => {
            let spec = load_spectrum(&input)?;
            let d = WeightVector::parse(&weights).map_err(usage)?;
            let dp = match weights_prime {
                Some(w) => WeightVector::parse(&w).map_err(usage)?,
                None => WeightVector { cone_weights: d.cone_weights.iter().map(Real::neg).collect(), end_weight: d.end_weight.neg() },
            };
            let mut modes = Vec::new();
            for item in end_modes.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (mu, mult) = item.split_once(':').ok_or_else(|| usage(format!("end mode {item:?}: expected mu:mult")))?;
                modes.push((mu.parse::<Real>().map_err(usage)?, mult.parse::<u64>().map_err(usage)?));
            }
            let all: Vec<&Real> = d.cone_weights.iter().chain(&dp.cone_weights).chain([&d.end_weight, &dp.end_weight]).collect();
            let lo = all.iter().map(|r| r.to_f64()).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|r| r.to_f64()).fold(f64::NEG_INFINITY, f64::max);
            let win = Window::closed(Real::Float(lo - 1.0), Real::Float(hi + 1.0));
            let mut cone_catalogs = Vec::new();
            if !d.cone_weights.is_empty() {
                let cat = spectra::harmonic_rate_catalog(&spec, p, &win).map_err(usage)?;
                cone_catalogs = vec![cat.rates; d.cone_weights.len()];
            }
            let end = spectra::cylinder_rates(&modes, &win).map_err(usage)?;
            let n = spectra::index_change(&cone_catalogs, &end, &d, &dp).map_err(usage)?;
            let symmetric = d.cone_weights.iter().zip(&dp.cone_weights).all(|(a, b)| a.neg().eq_tol(b)) && d.end_weight.neg().eq_tol(&dp.end_weight);
            let mut summary = json!({ "N": n, "cones": d.cone_weights.len() });
            if symmetric {
                summary["index"] = json!(spectra::symmetric_index(n).to_string());
            }
            let mut checks = Checks::default();
            if ctx.verify {
                let back = spectra::index_change(&cone_catalogs, &end, &d, &d).map_err(usage)?;
                checks.add("zero_window", back == 0, format!("N(δ, δ) = {back}"));
            }
            let r = checks.finish(&mut summary);
            out(&(pretty(&summary) + "\n"));
            r
        }
    }
}

fn mode_problem(ctx: &Ctx, a: &ModeArgs) -> Result<ModeProblem, Failure> {
    let z = match (&a.rhs, &a.bump) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let (mut r, mut v) = (Vec::new(), Vec::new());
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || (i == 0 && line.starts_with('r')) {
                    continue;
                }
                let (a, b) = line.split_once(',').ok_or_else(|| usage(format!("{}:{}: expected r,value", path.display(), i + 1)))?;
                r.push(a.trim().parse::<f64>().map_err(usage)?);
                v.push(b.trim().parse::<f64>().map_err(usage)?);
            }
            Rhs::from_samples(r, v).map_err(usage)?
        }
        (None, Some(b)) => {
            let p: Vec<f64> = b.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(usage)?;
            if p.len() != 3 {
                return Err(usage("--bump expects a,b,amp"));
            }
            Rhs::bump(p[0], p[1], p[2]).map_err(usage)?
        }
        _ => return Err(usage("give exactly one of --rhs FILE or --bump a,b,amp")),
    };
    let grid = LogGrid::new(ctx.cfg.edge.r_min, 1.0, ctx.cfg.edge.points).map_err(usage)?;
    ModeProblem::new(a.n, a.mu, z, grid).map_err(usage)
}

fn run_edge(ctx: &Ctx, cmd: EdgeCmd) -> Result<(), Failure> {
    let c = &ctx.cfg.edge;
    match cmd {
        EdgeCmd::Solve(a) => {
            let problem = mode_problem(ctx, &a)?;
            let sol = edge::solve_mode(&problem).map_err(usage)?;
            let res = edge::operator_residual(&problem, &sol);
            let mut checks = Checks::default();
            checks.add("operator_residual", res <= c.residual_tol, format!("{res:e}"));
            let mut summary = json!({ "n": a.n, "mu": a.mu, "points": problem.grid.len(), "sup_norm": sol.y.sup_norm(), "residual": res, "full_moment": sol.full_moment });
            if ctx.verify {
                let mirrored = ModeProblem::new(-a.n, a.mu, problem.rhs.clone(), problem.grid.clone()).map_err(usage)?;
                let same = edge::solve_mode(&mirrored).map_err(usage)?.y.values == sol.y.values;
                checks.add("mode_symmetry", same, "y(−n) = y(n)");
                let off: f64 = problem.grid.r.windows(2).map(|w| {
                    let m = (w[0] * w[1]).sqrt();
                    (sol.eval(m) - 0.5 * (sol.eval(w[0]) + sol.eval(w[1]))).abs()
                }).fold(0.0, f64::max);
                checks.add("off_grid_continuity", off.is_finite() && off <= 1e-2 * (1.0 + sol.y.sup_norm()), format!("{off:e}"));
            }
            let r = checks.finish(&mut summary);
            emit_table(ctx, sol.y.to_csv(), serde_json::to_value(&sol.y).expect("y"), &summary, a.out.as_deref())?;
            r
        }
        EdgeCmd::Split { mode, delta_p, delta_pp } => {
            let problem = mode_problem(ctx, &mode)?;
            let s = edge::split_solution(&problem, delta_p, delta_pp).map_err(usage)?;
            let mut checks = Checks::default();
            checks.add("high_part_in_weighted_space", s.high_norm_finite, format!("δ″ = {delta_pp}"));
            let mut summary = json!({
                "n": mode.n, "mu": mode.mu, "delta_p": delta_p, "delta_pp": delta_pp,
                "c_low": s.c_low, "c_reg": s.c_reg, "high_norm_finite": s.high_norm_finite, "shell_norms": s.shell_norms,
            });
            if ctx.verify && mode.n != 0 {
                match edge::coefficient_bound_check(&problem, delta_pp) {
                    Ok(b) => {
                        checks.add("coefficient_bound", b.holds, format!("{:e} ≤ {:e}", b.lhs, b.rhs));
                        summary["coefficient_bound"] = serde_json::to_value(b).expect("bound");
                    }
                    Err(e) => checks.add("coefficient_bound", false, e.to_string()),
                }
            }
            let r = checks.finish(&mut summary);
            let mut csv = String::from("r,y,y_low,y_high\n");
            for i in 0..s.y.r.len() {
                csv.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", s.y.r[i], s.y.values[i], s.y_low.values[i], s.y_high.values[i]));
            }
            let rows = json!({ "r": s.y.r, "y": s.y.values, "y_low": s.y_low.values, "y_high": s.y_high.values });
            emit_table(ctx, csv, rows, &summary, mode.out.as_deref())?;
            r
        }
        EdgeCmd::Kernel { nmax, out } => {
            let grid = LogGrid::new(c.r_min, 1.0, c.points).map_err(usage)?;
            let mut report = edge::kernel_modes(nmax, &grid).map_err(usage)?;
            report.tolerance = c.kernel_tol;
            let mut csv = String::from("n,derivative_residual,ode_residual_order0,ode_residual_order1,log_ratio,inverse_ratio\n");
            let mut rows = Vec::new();
            for m in &report.modes {
                csv.push_str(&format!(
                    "{},{:e},{:e},{:e},{:.12},{:.12}\n",
                    m.n, m.derivative_residual, m.ode_residual_order0, m.ode_residual_order1, m.log_ratio, m.inverse_ratio
                ));
                rows.push(json!({
                    "n": m.n, "derivative_residual": m.derivative_residual, "ode_residual_order0": m.ode_residual_order0,
                    "ode_residual_order1": m.ode_residual_order1, "log_ratio": m.log_ratio, "inverse_ratio": m.inverse_ratio,
                }));
            }
            let mut checks = Checks::default();
            let count = report.modes.len();
            checks.add("count", count == 2 * nmax as usize, format!("{count} modes for n_max = {nmax}"));
            checks.add("residuals", report.verified(), format!("max {:e}", report.max_residual()));
            let mut summary = json!({ "nmax": nmax, "count": count, "max_residual": report.max_residual(), "normal_form": report.normal_form });
            if ctx.verify {
                let nf = &report.normal_form;
                checks.add("normal_form", (nf.leading_sin_coefficient - 1.0).abs() <= 1e-12 && nf.leading_power == -1, format!("{nf:?}"));
            }
            let r = checks.finish(&mut summary);
            emit_table(ctx, csv, Value::Array(rows), &summary, out.as_deref())?;
            r
        }
    }
}

fn named_vectors(l: &GramLattice, extra: Option<&Path>) -> Result<BTreeMap<String, LatticeVector>, Failure> {
    let emb = lattice::matching_embedding(l);
    let mut map: BTreeMap<String, LatticeVector> = emb.labels.iter().cloned().zip(emb.images.iter().cloned()).collect();
    if let Some(p) = extra {
        let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let raw: BTreeMap<String, Vec<i64>> = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        for (name, coords) in raw {
            if coords.len() != l.rank {
                return Err(usage(format!("vector {name:?} has {} coordinates, expected {}", coords.len(), l.rank)));
            }
            map.insert(name, LatticeVector::from_i64(&coords));
        }
    }
    Ok(map)
}

fn lookup(map: &BTreeMap<String, LatticeVector>, name: &str) -> Result<LatticeVector, Failure> {
    map.get(name).cloned().ok_or_else(|| usage(format!("unknown vector {name:?}; known: {}", map.keys().cloned().collect::<Vec<_>>().join(", "))))
}

fn run_lattice(ctx: &Ctx, cmd: LatticeCmd) -> Result<(), Failure> {
    let l = lattice::build_k3_lattice();
    let mut checks = Checks::default();
    let mut summary = match cmd {
        LatticeCmd::Build => {
            let det = l.determinant();
            let sig = l.signature();
            checks.add("unimodular", det.abs().is_one(), det.to_string());
            checks.add("signature", (sig.positive, sig.negative, sig.null) == (3, 19, 0), sig.to_string());
            checks.add("even", l.is_even(), "diagonal even");
            json!({ "rank": l.rank, "determinant": det.to_string(), "signature": [sig.positive, sig.negative], "even": l.is_even(), "gram": l })
        }
        LatticeCmd::Match => {
            let emb = lattice::matching_embedding(&l);
            checks.add("gram", emb.verified, "images reproduce the source Gram");
            serde_json::to_value(&emb).expect("embedding")
        }
        LatticeCmd::Search { square, dots, span, bound, vectors } => {
            let map = named_vectors(&l, vectors.as_deref())?;
            let span = span.iter().map(|n| lookup(&map, n)).collect::<Result<Vec<_>, _>>()?;
            let mut constraints = Vec::new();
            for d in dots.iter().filter(|s| !s.is_empty()) {
                let (name, value) = d.split_once('=').ok_or_else(|| usage(format!("dot {d:?}: expected name=value")))?;
                constraints.push(DotConstraint { vector: lookup(&map, name.trim())?, value: BigInt::from(value.trim().parse::<i64>().map_err(usage)?) });
            }
            let q = ClassQuery { span, square: BigInt::from(square), dots: constraints, bound: bound.unwrap_or(ctx.cfg.lattice.bound) };
            let r = lattice::constrained_class_search(&l, &q).map_err(usage)?;
            if ctx.verify {
                checks.add("certificate_consistent", !r.unsat || r.solutions.is_empty(), format!("{} solutions", r.solutions.len()));
                let mut ok = true;
                for x in &r.solutions {
                    let v = LatticeVector::combination(&q.span, &x.coords);
                    ok &= l.pairing(&v, &v).map_err(usage)? == q.square;
                    for d in &q.dots {
                        ok &= l.pairing(&v, &d.vector).map_err(usage)? == d.value;
                    }
                }
                checks.add("solutions_verified", ok, "direct pairing");
            }
            serde_json::to_value(&r).expect("search")
        }
        LatticeCmd::Complement { of, vectors } => {
            let map = named_vectors(&l, vectors.as_deref())?;
            let vs = of.iter().filter(|s| !s.is_empty()).map(|n| lookup(&map, n)).collect::<Result<Vec<_>, _>>()?;
            let basis = lattice::orthogonal_complement(&l, &vs).map_err(usage)?;
            let g = GramLattice::new(l.gram_of(&basis).map_err(usage)?).map_err(usage)?;
            let sig = g.signature();
            if ctx.verify {
                let mut zero = true;
                for b in &basis {
                    for v in &vs {
                        zero &= l.pairing(b, v).map_err(usage)?.is_zero();
                    }
                }
                checks.add("orthogonal", zero, "every basis vector pairs to 0");
                let m: Vec<Vec<BigInt>> = basis.iter().map(|b| b.coords.clone()).collect();
                let f = lattice::invariant_factors(&m, l.rank);
                checks.add("saturated", f.len() == basis.len() && f.iter().all(One::is_one), "invariant factors all 1");
            }
            json!({ "rank": basis.len(), "determinant": g.determinant().to_string(), "signature": [sig.positive, sig.negative, sig.null], "basis": basis })
        }
        LatticeCmd::Generic { seed, avoid_bound } => {
            let emb = lattice::matching_embedding(&l);
            let t = lattice::orthogonal_complement(&l, &emb.images).map_err(usage)?;
            let bound = avoid_bound.unwrap_or(ctx.cfg.lattice.avoid_bound);
            let mut avoid = Vec::new();
            for q in lattice::matching_queries(&emb, bound) {
                let r = lattice::constrained_class_search(&l, &q).map_err(usage)?;
                avoid.extend(r.solutions.iter().map(|x| LatticeVector::combination(&q.span, &x.coords)));
            }
            let k = lattice::generic_direction(&l, &t, &avoid, seed.unwrap_or(ctx.cfg.seed)).map_err(usage)?;
            checks.add("positive", k.square.is_positive(), k.square.to_string());
            checks.add("avoids", k.avoid_pairings.iter().all(|p| !p.is_zero()), format!("{} classes avoided{}", avoid.len(), if k.vacuous { " (vacuous)" } else { "" }));
            if ctx.verify {
                let mut inside = true;
                for v in &emb.images {
                    inside &= l.pairing_rational(&k.k, &v.to_rational()).map_err(usage)?.is_zero();
                }
                checks.add("in_complement", inside, "k ⟂ N₊, N₋");
            }
            let mut v = serde_json::to_value(&k).expect("direction");
            v["avoid_bound"] = json!(bound);
            v
        }
    };
    let r = checks.finish(&mut summary);
    out(&(pretty(&summary) + "\n"));
    r
}
