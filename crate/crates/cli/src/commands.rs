use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rsgbm_core::hedging::{HedgeOutput, ALTERNATIVE_NAMES};
use rsgbm_core::pricing::{FourierPricer, OptionPricer};
use rsgbm_core::reference;
use rsgbm_core::rng::{self, std_normal};
use rsgbm_core::simulate::{covariance_factor, log_drift, ChainSampler};
use rsgbm_core::{
    bs_delta, bs_price, hedging_error_decomposition, mc_evaluate, simulate_hedge, AuxFunctions, Error,
    GeneratorKind, GeneratorPolicy, HedgeConfig, Measure, OptionKind, Payoff, PricerChoice, RegimeModel,
};
use serde_json::{json, Value};

use crate::output::{self, object, Output, Table};
use crate::{
    AuxfnCmd, Cli, Command, GeneratorArg, HedgeArgs, MeasureArg, MethodArg, ModelCmd, PayoffArg, PriceArgs,
    PricerArg, ReproduceArgs, SimulateCmd, TableArg,
};

/// Stream key for `simulate dump`.
const DOMAIN_DUMP: u64 = 0x4455_4d50;
const DEFAULT_PAIRS: usize = 100_000;
const FULL_PAIRS: usize = 500_000;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(String),
}

impl CliError {
    /// 1 for invalid input, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidArgument(msg.into()))
}

fn policy(cli: &Cli) -> GeneratorPolicy {
    if cli.approx_generator {
        GeneratorPolicy::LinearApprox
    } else {
        GeneratorPolicy::Exact
    }
}

fn load(path: &Path, cli: &Cli) -> Result<RegimeModel> {
    Ok(RegimeModel::from_file(path, policy(cli))?)
}

/// 1-based regime from the command line to 0-based.
fn regime_index(regime: usize, l: usize) -> Result<usize> {
    if regime == 0 || regime > l {
        return Err(invalid(format!("regime {regime} outside 1..={l}")));
    }
    Ok(regime - 1)
}

fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().copied().collect::<Vec<_>>())).collect())
}

fn vector(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn emit(cli: &Cli, out: Output) -> Result<()> {
    output::write(&out, cli.json, cli.out.as_deref()).map_err(|e| CliError::Io(format!("writing output: {e}")))
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = match &cli.command {
        Command::Model { cmd: ModelCmd::Check { config } } => model_check(cli, config)?,
        Command::Auxfn { cmd: AuxfnCmd::Dump { config, maturity, points } } => auxfn_dump(cli, config, *maturity, *points)?,
        Command::Auxfn { cmd: AuxfnCmd::Bound { config, maturity, generator } } => {
            auxfn_bound(cli, config, *maturity, *generator)?
        }
        Command::Simulate { cmd: SimulateCmd::Dump { config, maturity, paths, measure, regime, s0 } } => {
            simulate_dump(cli, config, *maturity, *paths, *measure, *regime, s0)?
        }
        Command::Price(args) => price(cli, args)?,
        Command::Hedge(args) => hedge(cli, args)?,
        Command::Reproduce(args) => reproduce(cli, args)?,
    };
    emit(cli, out)
}

fn model_check(cli: &Cli, config: &Path) -> Result<Output> {
    let m = load(config, cli)?;
    let risk = m.risk_quantities();
    let regimes: Vec<Value> = (0..m.regimes())
        .map(|i| {
            object([
                ("regime", json!(i + 1)),
                ("mu", vector(m.mu(i))),
                ("cov", matrix(m.cov(i))),
                ("r", json!(m.rate(i))),
                ("rho", vector(&risk.rho[i])),
                ("ell", json!(risk.ell[i])),
            ])
        })
        .collect();
    Ok(Output::Document(object([
        ("valid", json!(true)),
        ("regimes", json!(m.regimes())),
        ("assets", json!(m.assets())),
        ("generator", matrix(m.generator())),
        ("regime", Value::Array(regimes)),
    ])))
}

fn auxfn_dump(cli: &Cli, config: &Path, maturity: f64, points: usize) -> Result<Output> {
    if points < 2 || !(maturity > 0.0) {
        return Err(invalid("need --points >= 2 and --T > 0"));
    }
    let aux = AuxFunctions::new(&load(config, cli)?);
    let l = aux.regimes();
    let mut headers = vec!["t".to_string()];
    for name in ["gamma", "delta", "beta", "tilde_exit", "arrow_exit"] {
        headers.extend((1..=l).map(|i| format!("{name}_{i}")));
    }
    let mut table = Table::new(headers);
    for k in 0..points {
        let t = if k + 1 == points { maturity } else { maturity * k as f64 / (points - 1) as f64 };
        let mut row = vec![json!(t)];
        for v in [aux.gamma(t)?, aux.delta(t)?, aux.beta(t)?] {
            row.extend(v.iter().map(|x| json!(x)));
        }
        for g in [aux.tilde_generator(t)?, aux.arrow_generator(t)?] {
            row.extend((0..l).map(|i| json!(-g[(i, i)])));
        }
        table.push(row);
    }
    Ok(Output::Table(table))
}

fn generator_kind(g: GeneratorArg) -> GeneratorKind {
    match g {
        GeneratorArg::Constant => GeneratorKind::Constant,
        GeneratorArg::Tilde => GeneratorKind::Tilde,
        GeneratorArg::Arrow => GeneratorKind::Arrow,
    }
}

fn auxfn_bound(cli: &Cli, config: &Path, maturity: f64, generator: GeneratorArg) -> Result<Output> {
    let aux = AuxFunctions::new(&load(config, cli)?);
    let b = aux.uniformization_bound(generator_kind(generator), maturity)?;
    Ok(Output::Document(object([
        ("generator", json!(b.kind.name())),
        ("horizon", json!(b.horizon)),
        ("lambda", json!(b.lambda)),
        ("sup_rate", json!(b.sup_rate)),
        ("grid_points", json!(b.grid_points)),
    ])))
}

fn measure(m: MeasureArg) -> Measure {
    match m {
        MeasureArg::Physical => Measure::Physical,
        MeasureArg::Forward => Measure::Forward,
        MeasureArg::Check => Measure::Check,
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_dump(
    cli: &Cli,
    config: &Path,
    maturity: f64,
    paths: usize,
    measure_arg: MeasureArg,
    regime: usize,
    s0: &[f64],
) -> Result<Output> {
    let aux = AuxFunctions::new(&load(config, cli)?);
    let model = aux.model();
    let d = model.assets();
    let i0 = regime_index(regime, model.regimes())?;
    if s0.len() != d || s0.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid(format!("--s0 needs {d} positive values")));
    }
    let m = measure(measure_arg);
    let chain = ChainSampler::new(&aux, m.generator_kind(), maturity)?;
    let drift = (0..model.regimes()).map(|i| log_drift(&aux, m, i)).collect::<rsgbm_core::Result<Vec<_>>>()?;
    let factors = (0..model.regimes()).map(|i| covariance_factor(model.cov(i))).collect::<rsgbm_core::Result<Vec<_>>>()?;

    let mut headers = vec!["path".to_string(), "t".into(), "regime".into()];
    headers.extend((1..=d).map(|j| if d == 1 { "S".to_string() } else { format!("S_{j}") }));
    let mut table = Table::new(headers);
    for p in 0..paths {
        let mut r = rng::stream(cli.seed, &[DOMAIN_DUMP, i0 as u64], p as u64);
        let path = chain.sample(i0, &mut r)?;
        let mut events: Vec<(f64, usize)> = vec![(0.0, i0)];
        events.extend(path.jumps().map(|(t, _, to)| (t, to)));
        events.push((maturity, path.final_state()));
        let mut log_s: Vec<f64> = s0.iter().map(|x| x.ln()).collect();
        let mut prev = 0.0;
        let mut state = i0;
        for (t, next) in events {
            let dt = t - prev;
            if dt > 0.0 {
                let z: Vec<f64> = (0..d).map(|_| std_normal(&mut r)).collect();
                for j in 0..d {
                    let shock: f64 = (0..=j).map(|k| factors[state][(j, k)] * z[k]).sum();
                    log_s[j] += drift[state][j] * dt + shock * dt.sqrt();
                }
            }
            prev = t;
            state = next;
            let mut row = vec![json!(p), json!(t), json!(state + 1)];
            row.extend(log_s.iter().map(|x| json!(x.exp())));
            table.push(row);
        }
    }
    Ok(Output::Table(table))
}

fn payoff(kind: PayoffArg, strike: f64, asset: usize) -> Payoff {
    match kind {
        PayoffArg::Call => Payoff::Call { strike, asset },
        PayoffArg::Put => Payoff::Put { strike, asset },
    }
}

fn pairs(explicit: Option<usize>, full: bool) -> usize {
    explicit.unwrap_or(if full { FULL_PAIRS } else { DEFAULT_PAIRS })
}

fn price(cli: &Cli, args: &PriceArgs) -> Result<Output> {
    let model = load(&args.config, cli)?;
    let aux = AuxFunctions::new(&model);
    let d = model.assets();
    if args.asset == 0 || args.asset > d {
        return Err(invalid(format!("asset {} outside 1..={d}", args.asset)));
    }
    if args.s0.len() != d {
        return Err(invalid(format!("--s0 needs {d} values")));
    }
    if args.strike.iter().any(|&k| !(k > 0.0)) {
        return Err(invalid("strikes must be positive"));
    }
    let regimes: Vec<usize> = if args.regime.is_empty() {
        (0..model.regimes()).collect()
    } else {
        args.regime.iter().map(|&r| regime_index(r, model.regimes())).collect::<Result<_>>()?
    };
    let payoffs: Vec<Payoff> = args.strike.iter().map(|&k| payoff(args.payoff, k, args.asset - 1)).collect();
    let kind = match args.payoff {
        PayoffArg::Call => OptionKind::Call,
        PayoffArg::Put => OptionKind::Put,
    };
    let mut table = Table::new(["strike", "regime", "method", "value", "half_width", "phi0", "phi0_half_width", "n"]);
    let method = match args.method {
        MethodArg::Mc => "mc",
        MethodArg::Fourier => "fourier",
        MethodArg::BlackScholes => "black_scholes",
    };
    for &i in &regimes {
        match args.method {
            MethodArg::Mc => {
                let n = pairs(args.pairs, args.full);
                let out = mc_evaluate(&aux, &payoffs, &args.s0, i, args.maturity, n, cli.seed, true)?;
                for (p, &k) in args.strike.iter().enumerate() {
                    let v = out.values[p];
                    let g = out.deltas[p][args.asset - 1];
                    table.push(vec![
                        json!(k),
                        json!(i + 1),
                        json!(method),
                        json!(v.value),
                        json!(v.half_width),
                        json!(g.value),
                        json!(g.half_width),
                        json!(v.n),
                    ]);
                }
            }
            MethodArg::Fourier => {
                for (p, &k) in args.strike.iter().enumerate() {
                    let pricer = FourierPricer::new(&aux, &payoffs[p], (k / args.s0[0]).ln().abs())?;
                    let (v, g) = pricer.value_and_gradient(args.maturity, &args.s0, i, (0, 0))?;
                    table.push(vec![json!(k), json!(i + 1), json!(method), json!(v), json!(0.0), json!(g[0]), json!(0.0), Value::Null]);
                }
            }
            MethodArg::BlackScholes => {
                if d != 1 {
                    return Err(Error::MultiAssetUnsupported(d).into());
                }
                let (sigma, r) = (model.cov(i)[(0, 0)].sqrt(), model.rate(i));
                for &k in &args.strike {
                    let v = bs_price(args.s0[0], k, sigma, r, args.maturity, kind).value;
                    let g = bs_delta(args.s0[0], k, sigma, r, args.maturity, kind);
                    table.push(vec![json!(k), json!(i + 1), json!(method), json!(v), json!(0.0), json!(g), json!(0.0), Value::Null]);
                }
            }
        }
    }
    Ok(Output::Table(table))
}

fn summary(v: &rsgbm_core::hedging::Summary) -> Value {
    object([("mean", json!(v.mean)), ("half_width", json!(v.half_width))])
}

fn hedge(cli: &Cli, args: &HedgeArgs) -> Result<Output> {
    let model = load(&args.config, cli)?;
    let aux = AuxFunctions::new(&model);
    let i0 = regime_index(args.regime, model.regimes())?;
    let pricer = match args.pricer {
        PricerArg::Auto => PricerChoice::Auto,
        PricerArg::Fourier => PricerChoice::Fourier { k_max: 4.0 },
        PricerArg::NestedMc => PricerChoice::NestedMc { inner_pairs: args.inner_pairs },
        PricerArg::Grid => PricerChoice::Grid { points: 801, width_sd: 6.0 },
    };
    let config = HedgeConfig {
        n_steps: args.steps,
        n_paths: args.paths,
        pricer,
        seed: cli.seed,
        checkpoints: (!args.checkpoints.is_empty()).then(|| args.checkpoints.clone()),
        increment_pairs: None,
        keep_paths: args.dump.is_some(),
        decomposition: args.decomposition,
    };
    let pay = payoff(args.payoff, args.strike, 0);
    let out = simulate_hedge(&aux, &pay, &[args.s0], i0, args.maturity, &config)?;
    if let Some(path) = &args.dump {
        write_dump(&out, path)?;
    }
    let s = &out.stats;
    let mut doc = vec![
        ("initial_price", json!(s.initial_price)),
        ("mean_G_T", json!(s.mean_g_t)),
        ("sd_G_T", json!(s.sd_g_t)),
        ("ci", json!(s.ci)),
        ("mean_abs_G_T", json!(s.mean_abs_g_t)),
        ("rms_he", json!(s.rms_he)),
        ("n_paths", json!(s.n_paths)),
        ("n_steps", json!(s.n_steps)),
        ("coarse_fraction", json!(s.coarse_fraction)),
        ("grid_too_coarse", json!(s.grid_too_coarse)),
        (
            "checkpoints",
            Value::Array(
                s.martingale
                    .checkpoints
                    .iter()
                    .map(|c| {
                        object([
                            ("t", json!(c.t)),
                            ("gamma_G", summary(&c.gamma_g)),
                            ("gamma_X_G", Value::Array(c.gamma_x_g.iter().map(summary).collect())),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "increments",
            Value::Array(
                s.martingale
                    .increments
                    .iter()
                    .map(|c| {
                        object([
                            ("U", json!(c.u)),
                            ("V", json!(c.v)),
                            ("G_T_dX", Value::Array(c.stat.iter().map(summary).collect())),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "alternatives",
            Value::Array(
                s.alternatives
                    .iter()
                    .map(|a| {
                        object([
                            ("name", json!(a.name)),
                            ("he", json!(a.he)),
                            ("excess", json!(a.excess)),
                            ("excess_se", json!(a.excess_se)),
                        ])
                    })
                    .collect(),
            ),
        ),
    ];
    debug_assert_eq!(s.alternatives.len(), ALTERNATIVE_NAMES.len());
    if args.decomposition {
        let r = hedging_error_decomposition(&out.paths)?;
        doc.push((
            "decomposition",
            object([
                ("rms_terminal", json!(r.rms_terminal)),
                ("rms_path", json!(r.rms_path)),
                ("max_terminal", json!(r.max_terminal)),
            ]),
        ));
    }
    Ok(Output::Document(object(doc)))
}

fn write_dump(out: &HedgeOutput, path: &Path) -> Result<()> {
    let mut table = Table::new(["path", "t", "S", "tau", "C", "V", "phi", "G"]);
    for p in &out.paths {
        for r in &p.records {
            table.push(vec![
                json!(p.path),
                json!(r.t),
                json!(r.s[0]),
                json!(r.regime + 1),
                json!(r.price),
                json!(r.value),
                json!(r.phi[0]),
                json!(r.error),
            ]);
        }
    }
    output::write(&Output::Table(table), false, Some(path)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn reproduce(cli: &Cli, args: &ReproduceArgs) -> Result<Output> {
    let model = |builtin: fn(GeneratorPolicy) -> rsgbm_core::Result<RegimeModel>| -> Result<RegimeModel> {
        match &args.config {
            Some(p) => load(p, cli),
            None => Ok(builtin(policy(cli))?),
        }
    };
    let n = pairs(args.pairs, args.full);
    let cells = match args.table {
        TableArg::ShenTable2 => {
            let aux = AuxFunctions::new(&model(|_| Ok(reference::shen_model()))?);
            reference::reproduce_table(&aux, reference::SHEN_S0, reference::SHEN_MATURITY, &reference::SHEN_TABLE2, n, cli.seed)?
        }
        TableArg::AppleTable8 => {
            let aux = AuxFunctions::new(&model(reference::apple_model)?);
            reference::reproduce_table(&aux, reference::APPLE_S0, reference::APPLE_MATURITY, &reference::APPLE_TABLE8, n, cli.seed)?
        }
        TableArg::AppleTable6 => {
            let mut table = Table::new(["strike", "price", "delta", "published_price", "published_delta"]);
            for (k, p, d) in reference::APPLE_TABLE6 {
                let args = (reference::APPLE_S0, k, reference::APPLE_BS_SIGMA, reference::APPLE_RATE, reference::APPLE_MATURITY);
                table.push(vec![
                    json!(k),
                    json!(bs_price(args.0, args.1, args.2, args.3, args.4, OptionKind::Call).value),
                    json!(bs_delta(args.0, args.1, args.2, args.3, args.4, OptionKind::Call)),
                    json!(p),
                    json!(d),
                ]);
            }
            return Ok(Output::Table(table));
        }
    };
    let mut table = Table::new([
        "strike",
        "regime",
        "value",
        "half_width",
        "phi0",
        "phi0_half_width",
        "published_value",
        "published_half_width",
        "published_phi0",
        "published_phi0_half_width",
        "value_overlap",
        "phi0_overlap",
    ]);
    for c in cells {
        table.push(vec![
            json!(c.strike),
            json!(c.regime + 1),
            json!(c.value.value),
            json!(c.value.half_width),
            json!(c.phi0.value),
            json!(c.phi0.half_width),
            json!(c.published_value.0),
            json!(c.published_value.1),
            json!(c.published_phi0.0),
            json!(c.published_phi0.1),
            json!(c.value_overlaps()),
            json!(c.phi0_overlaps()),
        ]);
    }
    Ok(Output::Table(table))
}
