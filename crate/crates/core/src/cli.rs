//! Command-line front end.
//!
//! Exit status: 0 on success, 2 when the input is rejected, 3 on numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::convergence::{convergence_report, weakstar_distance};
use crate::error::{Error, Result};
use crate::fixtures::{random_string, uniform_density};
use crate::inverse::{invert_measure_mp, invert_measure_with, truncation_ladder, InverseConfig, Inversion, PrecisionPolicy};
use crate::io::{read_json, write_atomic, FamilySpec, MeasureFile, StringFile, TripleFile};
use crate::model::{Interval, SpectralMeasure, StieltjesString};
use crate::scalar::{Bits, Field, Mpf, DEFAULT_BITS};
use crate::singular::{eigenvalues_below, truncated_spectral_measure};
use crate::stieltjes::{dirichlet_spectrum, spectral_data, spectral_data_mp, spectral_measure, three_spectra_of};
use crate::three_spectra::{invert_triple_with, validate_triple};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "krein", version, about = "Forward and inverse spectral problems for Krein strings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Args, Debug, Clone)]
pub struct Opts {
    /// String or mass distribution (JSON).
    #[arg(long, global = true)]
    pub string: Option<PathBuf>,
    /// Spectral measure (JSON).
    #[arg(long, global = true)]
    pub measure: Option<PathBuf>,
    /// Three-spectra triple (JSON).
    #[arg(long, global = true)]
    pub triple: Option<PathBuf>,
    /// Overrides the interval of the input file.
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub interval: Option<Vec<f64>>,
    /// Interior split point c.
    #[arg(long, global = true)]
    pub split: Option<f64>,
    /// Spectral cutoff for singular strings.
    #[arg(long = "max-lambda", global = true)]
    pub max_lambda: Option<f64>,
    /// Comma-separated truncation levels.
    #[arg(long, global = true, value_delimiter = ',')]
    pub cutoffs: Option<Vec<f64>>,
    /// Accuracy target; roundtrip fails above it.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Working precision; defaults to KREIN_PRECISION_BITS when set.
    #[arg(long = "precision-bits", global = true)]
    pub precision_bits: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub output: Format,
    /// Seed for a random test string.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Destination file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Spectral data of a string, and its three spectra when --split is given.
    Forward,
    /// Eigenvalues below --max-lambda.
    Spectrum,
    /// String from a spectral measure.
    InverseMeasure,
    /// String from a three-spectra triple.
    InverseThree,
    /// Class membership of a triple.
    ValidateTriple,
    /// Inversions of the truncations of a measure at --cutoffs.
    Ladder,
    /// Forward solve, inversion and comparison.
    Roundtrip,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Spectrum => "spectrum",
            Command::InverseMeasure => "inverse-measure",
            Command::InverseThree => "inverse-three",
            Command::ValidateTriple => "validate-triple",
            Command::Ladder => "ladder",
            Command::Roundtrip => "roundtrip",
        }
    }
}

/// Result of a subcommand before serialization.
struct Outcome {
    result: Value,
    csv: Vec<Vec<String>>,
    csv_header: Vec<&'static str>,
    status: i32,
    message: Option<String>,
}

impl Outcome {
    fn ok(result: Value, csv_header: Vec<&'static str>, csv: Vec<Vec<String>>) -> Self {
        Outcome { result, csv, csv_header, status: EXIT_OK, message: None }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        EXIT_REJECTED
    } else {
        EXIT_NUMERICAL
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn precision_bits(o: &Opts) -> Option<usize> {
    o.precision_bits.or_else(|| std::env::var("KREIN_PRECISION_BITS").ok().and_then(|v| v.parse().ok()))
}

fn inverse_config(o: &Opts) -> InverseConfig {
    let mut cfg = InverseConfig::default();
    if let Some(b) = precision_bits(o) {
        cfg.precision = PrecisionPolicy::Bits(b);
    }
    cfg
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, cmd: Command) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::invalid(format!("{} requires --{flag}", cmd.name())))
}

fn check_opts(o: &Opts) -> Result<()> {
    let positive = |name: &str, v: Option<f64>| match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(Error::invalid(format!("--{name} must be positive"))),
        _ => Ok(()),
    };
    positive("max-lambda", o.max_lambda)?;
    positive("tol", o.tol)?;
    if let Some(cs) = &o.cutoffs {
        for &c in cs {
            positive("cutoffs", Some(c))?;
        }
    }
    if o.precision_bits == Some(0) {
        return Err(Error::invalid("--precision-bits must be positive"));
    }
    if let Some(iv) = &o.interval {
        Interval::new(iv[0], iv[1])?;
    }
    Ok(())
}

fn load_string(o: &Opts, cmd: Command) -> Result<StringFile> {
    let mut f: StringFile = read_json(require(&o.string, "string", cmd)?)?;
    if let Some(iv) = &o.interval {
        f.interval = [iv[0], iv[1]];
    }
    Ok(f)
}

fn load_measure(o: &Opts, cmd: Command) -> Result<MeasureFile> {
    let mut f: MeasureFile = read_json(require(&o.measure, "measure", cmd)?)?;
    if let Some(iv) = &o.interval {
        f.interval = [iv[0], iv[1]];
    }
    Ok(f)
}

fn load_triple(o: &Opts, cmd: Command) -> Result<TripleFile> {
    let mut f: TripleFile = read_json(require(&o.triple, "triple", cmd)?)?;
    if let Some(iv) = &o.interval {
        f.interval = [iv[0], iv[1]];
    }
    if let Some(c) = o.split {
        f.split = c;
    }
    Ok(f)
}

fn string_json(s: &StieltjesString<f64>) -> Value {
    let iv = s.interval();
    json!({ "interval": [iv.a, iv.b], "positions": s.positions(), "masses": s.masses(), "lengths": s.lengths() })
}

fn inversion_json(inv: &Inversion) -> Value {
    let dec = |v: &[Mpf]| v.iter().map(Mpf::to_decimal_string).collect::<Vec<_>>();
    json!({
        "string": string_json(&inv.string),
        "precise": { "positions": dec(inv.precise.positions()), "masses": dec(inv.precise.masses()) },
        "bits": inv.bits,
        "eigen_residual": inv.eigen_residual,
        "weight_residual": inv.weight_residual,
    })
}

fn string_rows(s: &StieltjesString<f64>) -> Vec<Vec<String>> {
    s.positions().iter().zip(s.masses()).enumerate().map(|(k, (x, m))| vec![k.to_string(), num(*x), num(*m)]).collect()
}

fn forward(o: &Opts) -> Result<Outcome> {
    let f = load_string(o, Command::Forward)?;
    let header = vec!["index", "lambda", "gamma_sq", "coupling", "theta"];
    if !f.is_finite_string() {
        if o.split.is_some() {
            return Err(Error::invalid("--split needs a finite string (no density part)"));
        }
        let cap = *require(&o.max_lambda, "max-lambda", Command::Forward)?;
        let w = f.to_mass_distribution()?;
        let rho = truncated_spectral_measure(&w, cap, o.tol.unwrap_or(1e-10))?;
        let sigma: Vec<f64> = rho.atoms().iter().map(|a| a.lambda).collect();
        let gamma_sq: Vec<f64> = rho.atoms().iter().map(|a| 1.0 / a.weight).collect();
        let rows = sigma
            .iter()
            .zip(&gamma_sq)
            .enumerate()
            .map(|(k, (l, g))| vec![k.to_string(), num(*l), num(*g), String::new(), String::new()])
            .collect();
        return Ok(Outcome::ok(json!({ "sigma": sigma, "gamma_sq": gamma_sq, "max_lambda": cap }), header, rows));
    }
    let s = f.to_string_f64()?;
    let mut result = if let Some(bits) = precision_bits(o) {
        let data = spectral_data_mp(&f.to_string_mp(bits)?);
        let dec = |g: &dyn Fn(&crate::model::SpectralTriplet<Mpf>) -> String| data.iter().map(g).collect::<Vec<_>>();
        json!({
            "sigma": dec(&|t| t.lambda.to_decimal_string()),
            "gamma_sq": dec(&|t| t.gamma_sq.to_decimal_string()),
            "coupling": dec(&|t| t.coupling.to_decimal_string()),
            "theta": data.iter().map(|t| t.theta).collect::<Vec<_>>(),
        })
    } else {
        let data = spectral_data(&s);
        if data.iter().any(|t| !(t.gamma_sq.is_finite() && t.gamma_sq > 0.0)) {
            return Err(Error::ToleranceUnreachable {
                requested: f64::MIN_POSITIVE,
                achieved: f64::INFINITY,
                detail: "norming constants leave double range; rerun with --precision-bits".into(),
            });
        }
        json!({
            "sigma": data.iter().map(|t| t.lambda).collect::<Vec<_>>(),
            "gamma_sq": data.iter().map(|t| t.gamma_sq).collect::<Vec<_>>(),
            "coupling": data.iter().map(|t| t.coupling).collect::<Vec<_>>(),
            "theta": data.iter().map(|t| t.theta).collect::<Vec<_>>(),
        })
    };
    let rows = (0..result["sigma"].as_array().map_or(0, Vec::len))
        .map(|k| {
            let cell = |key: &str| match &result[key][k] {
                Value::String(s) => s.clone(),
                Value::Number(n) if n.is_f64() => n.as_f64().map(num).unwrap_or_default(),
                v => v.to_string(),
            };
            vec![k.to_string(), cell("sigma"), cell("gamma_sq"), cell("coupling"), cell("theta")]
        })
        .collect();
    if let Some(c) = o.split {
        let t = three_spectra_of(&s, c)?;
        result["split"] = json!(c);
        result["sigma_a"] = json!(t.sigma_a);
        result["sigma_b"] = json!(t.sigma_b);
        result["common_couplings"] = json!(t.couplings);
    }
    Ok(Outcome::ok(result, header, rows))
}

fn spectrum(o: &Opts) -> Result<Outcome> {
    let f = load_string(o, Command::Spectrum)?;
    let cap = *require(&o.max_lambda, "max-lambda", Command::Spectrum)?;
    let eig = if f.is_finite_string() {
        dirichlet_spectrum(&f.to_string_f64()?).into_iter().filter(|&l| l <= cap).collect()
    } else {
        eigenvalues_below(&f.to_mass_distribution()?, cap, o.tol.unwrap_or(1e-10))?
    };
    let rows = eig.iter().enumerate().map(|(k, l)| vec![k.to_string(), num(*l)]).collect();
    Ok(Outcome::ok(json!({ "max_lambda": cap, "eigenvalues": eig }), vec!["index", "lambda"], rows))
}

fn finite_measure(f: &MeasureFile, o: &Opts, cmd: Command) -> Result<SpectralMeasure<f64>> {
    let rho = f.to_measure()?;
    if rho.is_finite() {
        Ok(rho)
    } else {
        Ok(rho.truncate(*require(&o.max_lambda, "max-lambda", cmd)?))
    }
}

fn inverse_measure(o: &Opts) -> Result<Outcome> {
    let f = load_measure(o, Command::InverseMeasure)?;
    let cfg = inverse_config(o);
    let inv = match (precision_bits(o), &f.family) {
        (Some(bits), None) => {
            let rho = f.to_measure_mp(bits)?;
            invert_measure_mp(&rho, rho.interval(), &cfg)?
        }
        _ => {
            let rho = finite_measure(&f, o, Command::InverseMeasure)?;
            invert_measure_with(&rho, rho.interval(), &cfg)?
        }
    };
    Ok(Outcome::ok(inversion_json(&inv), vec!["index", "position", "mass"], string_rows(&inv.string)))
}

fn inverse_three(o: &Opts) -> Result<Outcome> {
    let t = load_triple(o, Command::InverseThree)?.to_triple()?;
    let r = invert_triple_with(&t, &inverse_config(o))?;
    let mut result = inversion_json(&r.inversion);
    result["triple_residual"] = serde_json::to_value(r.residual)?;
    Ok(Outcome::ok(result, vec!["index", "position", "mass"], string_rows(r.string())))
}

fn validate(o: &Opts) -> Result<Outcome> {
    let t = load_triple(o, Command::ValidateTriple)?.to_triple()?;
    let v = validate_triple(&t)?;
    let rows = v
        .violations
        .iter()
        .map(|x| {
            let j = serde_json::to_value(x).unwrap_or(Value::Null);
            let value = j.get("value").or_else(|| j.get("re")).and_then(Value::as_f64).map(num).unwrap_or_default();
            vec![j["kind"].as_str().unwrap_or("").to_string(), value]
        })
        .collect();
    let mut out = Outcome::ok(serde_json::to_value(&v)?, vec!["kind", "value"], rows);
    if !v.member {
        out.status = EXIT_REJECTED;
        out.message = Some(format!("triple rejected: {} violation(s)", v.violations.len()));
    }
    Ok(out)
}

fn ladder(o: &Opts) -> Result<Outcome> {
    let f = load_measure(o, Command::Ladder)?;
    let cutoffs = require(&o.cutoffs, "cutoffs", Command::Ladder)?;
    let rho = f.to_measure()?;
    let iv = rho.interval();
    let report = truncation_ladder(&rho, iv, cutoffs, &inverse_config(o))?;
    let reference = matches!(f.family, Some(FamilySpec::UniformString)).then(|| uniform_density(iv));
    let mut rows = Vec::new();
    let mut rungs = Vec::new();
    let mut failed = 0;
    for r in &report.rungs {
        let (ok, err) = match &r.result {
            Ok(inv) => (Some(inv), None),
            Err(e) => (None, Some(e.clone())),
        };
        failed += usize::from(ok.is_none());
        let weakstar = match (ok, &reference) {
            (Some(inv), Some(w)) => Some(weakstar_distance(&inv.string.to_mass_distribution(), w)?),
            _ => None,
        };
        rows.push(vec![
            num(r.cutoff),
            r.atoms.to_string(),
            ok.map(|i| num(i.eigen_residual)).unwrap_or_default(),
            ok.map(|i| num(i.weight_residual)).unwrap_or_default(),
            r.weighted_total.map(num).unwrap_or_default(),
            weakstar.map(num).unwrap_or_default(),
        ]);
        rungs.push(json!({
            "cutoff": r.cutoff,
            "atoms": r.atoms,
            "inversion": ok.map(inversion_json),
            "error": err,
            "weighted_total": r.weighted_total,
            "weakstar_to_reference": weakstar,
        }));
    }
    let mut result = json!({
        "rungs": rungs,
        "uniform_bound": report.uniform_bound,
        "bound_respected": report.bound_respected(),
        "consecutive_distances": report.consecutive_distances,
    });
    if let (Some(w), Some(c)) = (&reference, o.split) {
        let seq: Vec<StieltjesString<f64>> =
            report.rungs.iter().filter_map(|r| r.result.as_ref().ok().map(|i| i.string.clone())).collect();
        let cap = o.max_lambda.unwrap_or_else(|| cutoffs.iter().copied().fold(0.0, f64::max));
        result["convergence"] = serde_json::to_value(convergence_report(&seq, w, c, cap)?)?;
    }
    let mut out = Outcome::ok(
        result,
        vec!["cutoff", "atoms", "eigen_residual", "weight_residual", "weighted_total", "weakstar"],
        rows,
    );
    if failed > 0 {
        out.status = EXIT_NUMERICAL;
        out.message = Some(format!("{failed} rung(s) failed"));
    }
    Ok(out)
}

/// Maximum relative difference of lengths and masses.
pub fn string_residual(p: &StieltjesString<f64>, q: &StieltjesString<f64>) -> f64 {
    if p.len() != q.len() {
        return f64::INFINITY;
    }
    let rel = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs() / a.abs()).fold(0.0, f64::max);
    rel(p.lengths(), q.lengths()).max(rel(p.masses(), q.masses()))
}

/// Forward solve at `bits`, inversion, and comparison with the input.
pub fn roundtrip_string(s: &StieltjesString<Mpf>, cfg: &InverseConfig) -> Result<(Inversion, f64)> {
    let data = spectral_data_mp(s);
    let rho = spectral_measure(s, &data)?;
    let inv = invert_measure_mp(&rho, s.interval(), cfg)?;
    let res = string_residual(&s.to_f64(), &inv.string);
    Ok((inv, res))
}

fn roundtrip(o: &Opts) -> Result<Outcome> {
    let bits = precision_bits(o).unwrap_or(DEFAULT_BITS);
    let tol = o.tol.unwrap_or(1e-7);
    let (s, source) = match (&o.string, o.seed) {
        (Some(_), _) => (load_string(o, Command::Roundtrip)?.to_string_mp(bits)?, json!("file")),
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_string(&mut rng, 30);
            if let Some(iv) = &o.interval {
                let iv = Interval::new(iv[0], iv[1])?;
                let xs = s.positions().iter().map(|x| iv.a + x * iv.len()).collect();
                s = StieltjesString::from_positions(iv, xs, s.masses().to_vec())?;
            }
            (s.map(|x| Mpf::from_f64(*x, Bits(bits))), json!({ "seed": seed }))
        }
        (None, None) => return Err(Error::invalid("roundtrip requires --string or --seed")),
    };
    let mut cfg = inverse_config(o);
    cfg.precision = PrecisionPolicy::Bits(bits);
    let (inv, residual) = roundtrip_string(&s, &cfg)?;
    let input = s.to_f64();
    let mut out = Outcome::ok(
        json!({
            "source": source,
            "input": string_json(&input),
            "reconstruction": inversion_json(&inv),
            "residual": residual,
            "tol": tol,
        }),
        vec!["index", "position", "mass", "position_reconstructed", "mass_reconstructed"],
        input
            .positions()
            .iter()
            .zip(input.masses())
            .zip(inv.string.positions().iter().zip(inv.string.masses()))
            .enumerate()
            .map(|(k, ((x, m), (y, n)))| vec![k.to_string(), num(*x), num(*m), num(*y), num(*n)])
            .collect(),
    );
    if !(residual <= tol) {
        out.status = EXIT_NUMERICAL;
        out.message = Some(format!("round-trip residual {residual:e} exceeds {tol:e}"));
    }
    Ok(out)
}

fn render(cli: &Cli, out: &Outcome) -> Result<Vec<u8>> {
    match cli.opts.output {
        Format::Json => {
            let doc = json!({
                "command": cli.command.name(),
                "version": env!("CARGO_PKG_VERSION"),
                "precision_bits": precision_bits(&cli.opts),
                "tol": cli.opts.tol,
                "status": out.status,
                "result": out.result,
            });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&out.csv_header).map_err(csv_err)?;
            for r in &out.csv {
                w.write_record(r).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    check_opts(&cli.opts)?;
    match cli.command {
        Command::Forward => forward(&cli.opts),
        Command::Spectrum => spectrum(&cli.opts),
        Command::InverseMeasure => inverse_measure(&cli.opts),
        Command::InverseThree => inverse_three(&cli.opts),
        Command::ValidateTriple => validate(&cli.opts),
        Command::Ladder => ladder(&cli.opts),
        Command::Roundtrip => roundtrip(&cli.opts),
    }
}

/// Runs one invocation, writing the artifact to `--out` or `stdout`; returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_REJECTED } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(&e);
        }
    };
    let bytes = match render(&cli, &outcome) {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let written = match &cli.opts.out {
        Some(p) => write_atomic(p, &bytes),
        None => stdout.write_all(&bytes).map_err(Error::from),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_REJECTED;
    }
    if let Some(m) = &outcome.message {
        let _ = writeln!(stderr, "{m}");
    }
    outcome.status
}
