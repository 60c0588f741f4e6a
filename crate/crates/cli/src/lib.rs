//! Command dispatch and report rendering for the `linflow` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use linflow::conjugacy::{build_group_conjugacy, verify_conjugacy, VerifyOptions};
use linflow::flow::{contraction_constants, expansion_constants, LinearFlow};
use linflow::spectral::{grading_check, leibniz_residual, spectral_decompose, Part, SpectralDecomposition};
use linflow::stability::{classify_identity_stability, lyapunov_estimate};
use linflow::system::{System, SystemSpec};
use linflow::{AlgebraVector, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "linflow", version, about = "Analyze linear flows on Lie groups")]
pub struct Cli {
    /// Render the report as indented text instead of JSON.
    #[arg(long, global = true)]
    pub text: bool,
    /// Print the elapsed wall-clock time on stderr.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the Jacobi identity and the Leibniz rule.
    Check { system: PathBuf },
    /// Split the algebra into unstable, central and stable layers.
    Decompose { system: PathBuf },
    /// Classify the stability of the identity.
    Classify { system: PathBuf },
    /// Exact and sampled Lyapunov exponent of a vector.
    Lyapunov {
        system: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        vector: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        times: Vec<f64>,
    },
    /// Apply the flow to a point given in exponential coordinates.
    Flow {
        system: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        time: f64,
    },
    /// Build or verify a conjugacy between two hyperbolic systems.
    #[command(subcommand)]
    Conjugacy(ConjugacyCommand),
}

#[derive(Debug, Subcommand)]
pub enum ConjugacyCommand {
    Build {
        source: PathBuf,
        target: PathBuf,
    },
    Verify {
        source: PathBuf,
        target: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true, default_values_t = [-5.0, 5.0])]
        trange: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Everything a run writes, so it can be tested without a process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

struct Failure {
    code: i32,
    error: Value,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Io { .. } => EXIT_USAGE,
            _ => EXIT_FAILURE,
        };
        Failure { code, error: error_value(&e) }
    }
}

/// Errors while turning a parsed file into a system: axiom violations are
/// mathematical failures, anything else means the file itself is malformed.
fn input_error(e: Error) -> Failure {
    let code = match e {
        Error::JacobiViolation { .. } | Error::AntisymmetryViolation { .. } | Error::LeibnizViolation { .. } => {
            EXIT_FAILURE
        }
        _ => EXIT_USAGE,
    };
    Failure { code, error: error_value(&e) }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, error: json!({"kind": "UsageError", "message": message.into()}) }
}

/// Structured form of a core error: kind, message and the variant's fields.
pub fn error_value(e: &Error) -> Value {
    let details = match e {
        Error::DimensionMismatch { expected, found } => json!({"expected": expected, "found": found}),
        Error::Parse { line, column, .. } => json!({"line": line, "column": column}),
        Error::Io { path, .. } => json!({"path": path}),
        Error::JacobiViolation { i, j, k, residual } => json!({"i": i, "j": j, "k": k, "residual": residual}),
        Error::AntisymmetryViolation { i, j, k, defect } => json!({"i": i, "j": j, "k": k, "defect": defect}),
        Error::LeibnizViolation { i, j, residual } => json!({"i": i, "j": j, "residual": residual}),
        Error::ClusterAmbiguity { left, right } => json!({"left": left, "right": right}),
        Error::InvariantSubspaceViolation { residual } => json!({"residual": residual}),
        Error::NotContracting { abscissa } => json!({"abscissa": abscissa}),
        Error::NotHyperbolic { center_dim } => json!({"center_dim": center_dim}),
        Error::StepTooLarge { step, max } => json!({"step": step, "max": max}),
        Error::SignatureMismatch { src_plus, src_minus, dst_plus, dst_minus } => json!({
            "source": {"d_plus": src_plus, "d_minus": src_minus},
            "target": {"d_plus": dst_plus, "d_minus": dst_minus},
        }),
        Error::NonConvergence { what, residual } => json!({"what": what, "residual": residual}),
        _ => Value::Null,
    };
    let mut m = Map::new();
    m.insert("kind".into(), e.kind().into());
    m.insert("message".into(), e.to_string().into());
    if !details.is_null() {
        m.insert("details".into(), details);
    }
    Value::Object(m)
}

struct Input {
    path: PathBuf,
    digest: String,
    spec: SystemSpec,
}

fn read_input(path: &Path) -> Result<Input, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        message: format!("input is not UTF-8: {e}"),
        line: 0,
        column: 0,
    })?;
    Ok(Input { path: path.to_path_buf(), digest, spec: SystemSpec::from_json(&text)? })
}

fn vector(values: &[f64], dim: usize, what: &str) -> Result<AlgebraVector, Failure> {
    if values.len() != dim {
        return Err(usage(format!("{what} has {} entries, the system has dimension {dim}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("{what} has non-finite entries")));
    }
    Ok(AlgebraVector::from_column_slice(values))
}

fn columns(m: &linflow::linalg::Matrix) -> Value {
    Value::Array(m.column_iter().map(|c| json!(c.iter().cloned().collect::<Vec<f64>>())).collect())
}

fn rows(m: &linflow::linalg::Matrix) -> Value {
    Value::Array(m.row_iter().map(|r| json!(r.iter().cloned().collect::<Vec<f64>>())).collect())
}

fn signature(sd: &SpectralDecomposition) -> Value {
    let (p, z, m) = sd.signature();
    json!({"d_plus": p, "d_zero": z, "d_minus": m})
}

struct Success {
    pass: bool,
    result: Value,
}

fn check(input: &Input) -> Result<Success, Failure> {
    let spec = &input.spec;
    let tol = spec.tolerances();
    tol.check().map_err(input_error)?;
    let alg = spec.algebra().map_err(input_error)?;
    let matrix = spec.derivation_matrix().map_err(input_error)?;
    let jacobi = alg.validate_jacobi(tol.jacobi);
    let leibniz = leibniz_residual(&matrix, &alg)?;
    let leibniz_pass = leibniz.residual <= tol.leibniz;
    let series = alg.lower_central_series(tol.rank);
    let mut result = json!({
        "jacobi": serde_json::to_value(&jacobi).unwrap(),
        "leibniz": {
            "max_residual": leibniz.residual,
            "worst_pair": [leibniz.i, leibniz.j],
            "tol": tol.leibniz,
            "pass": leibniz_pass,
        },
        "lower_central_series": series.dims(),
        "nilpotency_step": series.step,
    });
    let pass = jacobi.pass && leibniz_pass;
    if !pass {
        let err = jacobi.to_error().unwrap_or(Error::LeibnizViolation {
            i: leibniz.i,
            j: leibniz.j,
            residual: leibniz.residual,
        });
        result["violation"] = error_value(&err);
    }
    Ok(Success { pass, result })
}

fn decompose(sys: &System) -> Result<Success, Failure> {
    let sd = spectral_decompose(&sys.derivation, sys.tolerances.realpart)?;
    let grading = grading_check(&sd, &sys.algebra, sys.tolerances.grading)?;
    let lf = LinearFlow::new(&sys.derivation);
    let layers: Vec<Value> = sd
        .layers
        .iter()
        .map(|l| json!({"real_part": l.real_part, "dim": l.dim(), "basis": columns(&l.basis)}))
        .collect();
    let mut result = json!({
        "eigenvalues": serde_json::to_value(&sd.eigenvalues).unwrap(),
        "signature": signature(&sd),
        "hyperbolic": sd.is_hyperbolic(),
        "nilpotent": sys.algebra.is_nilpotent(),
        "layers": layers,
        "projections": {"plus": rows(&sd.p_plus), "zero": rows(&sd.p_zero), "minus": rows(&sd.p_minus)},
        "grading": serde_json::to_value(&grading).unwrap(),
    });
    if sd.minus_basis.ncols() > 0 {
        result["contraction"] = serde_json::to_value(contraction_constants(&lf, &sd.minus_basis)?).unwrap();
    }
    if sd.plus_basis.ncols() > 0 {
        result["expansion"] = serde_json::to_value(expansion_constants(&lf, &sd.plus_basis)?).unwrap();
    }
    Ok(Success { pass: grading.pass, result })
}

fn classify(sys: &System) -> Result<Success, Failure> {
    let sd = spectral_decompose(&sys.derivation, sys.tolerances.realpart)?;
    let cert = classify_identity_stability(&sys.algebra, &sys.derivation, &sd)?;
    let mut result = serde_json::to_value(&cert).unwrap();
    result["consistent"] = cert.is_consistent().into();
    Ok(Success { pass: cert.is_consistent(), result })
}

fn lyapunov(sys: &System, v: &[f64], times: &[f64]) -> Result<Success, Failure> {
    let v = vector(v, sys.algebra.dim(), "--vector")?;
    let lf = LinearFlow::new(&sys.derivation);
    let r = lyapunov_estimate(&lf, &v, times)?;
    Ok(Success { pass: true, result: serde_json::to_value(&r).unwrap() })
}

fn flow(sys: &System, point: &[f64], t: f64) -> Result<Success, Failure> {
    let x = vector(point, sys.algebra.dim(), "--point")?;
    if !t.is_finite() {
        return Err(usage("--time must be finite"));
    }
    let lf = LinearFlow::new(&sys.derivation);
    let y = lf.apply(t, &x)?;
    Ok(Success {
        pass: true,
        result: json!({
            "point": x.iter().cloned().collect::<Vec<f64>>(),
            "time": t,
            "image": y.iter().cloned().collect::<Vec<f64>>(),
            "gauge": linflow::gauge(&linflow::GroupElement(y)),
        }),
    })
}

fn conjugacy_build(a: &System, b: &System) -> Result<Success, Failure> {
    let gc = build_group_conjugacy(&a.derivation, &b.derivation, a.tolerances.realpart)?;
    let mut layers = Map::new();
    for (part, name) in [(Part::Plus, "plus"), (Part::Minus, "minus")] {
        if let Some(xi) = gc.xi(part) {
            layers.insert(
                name.into(),
                json!({
                    "dim": xi.dim(),
                    "source_generator": rows(xi.source()),
                    "target_generator": rows(xi.target()),
                    "source_form": rows(&xi.source_form().p),
                    "target_form": rows(&xi.target_form().p),
                }),
            );
        }
    }
    let fixed = gc.evaluate_pi(&gc.source().group.identity())?;
    Ok(Success {
        pass: true,
        result: json!({
            "source_signature": signature(&gc.source().decomposition),
            "target_signature": signature(&gc.target().decomposition),
            "layers": Value::Object(layers),
            "identity_image": fixed.coords().iter().cloned().collect::<Vec<f64>>(),
        }),
    })
}

fn conjugacy_verify(a: &System, b: &System, opts: &VerifyOptions) -> Result<Success, Failure> {
    let gc = build_group_conjugacy(&a.derivation, &b.derivation, a.tolerances.realpart)?;
    let rep = verify_conjugacy(&gc, opts)?;
    Ok(Success { pass: rep.pass, result: serde_json::to_value(&rep).unwrap() })
}

fn dispatch(cmd: &Command) -> (String, Value, Vec<Input>, Result<Success, Failure>) {
    let mut inputs = Vec::new();
    let mut load = |p: &Path| -> Result<System, Failure> {
        let input = read_input(p)?;
        let sys = input.spec.validate();
        inputs.push(input);
        sys.map_err(input_error)
    };
    let (name, args, outcome) = match cmd {
        Command::Check { system } => {
            let r = read_input(system).and_then(|input| {
                let r = check(&input);
                inputs.push(input);
                r
            });
            ("check", json!({}), r)
        }
        Command::Decompose { system } => ("decompose", json!({}), load(system).and_then(|s| decompose(&s))),
        Command::Classify { system } => ("classify", json!({}), load(system).and_then(|s| classify(&s))),
        Command::Lyapunov { system, vector, times } => (
            "lyapunov",
            json!({"vector": vector, "times": times}),
            load(system).and_then(|s| lyapunov(&s, vector, times)),
        ),
        Command::Flow { system, point, time } => (
            "flow",
            json!({"point": point, "time": time}),
            load(system).and_then(|s| flow(&s, point, *time)),
        ),
        Command::Conjugacy(ConjugacyCommand::Build { source, target }) => (
            "conjugacy build",
            json!({}),
            load(source).and_then(|a| Ok((a, load(target)?))).and_then(|(a, b)| conjugacy_build(&a, &b)),
        ),
        Command::Conjugacy(ConjugacyCommand::Verify { source, target, samples, trange, tol, seed }) => {
            let opts = VerifyOptions {
                samples: *samples,
                t_range: (trange[0], trange[1]),
                tol: *tol,
                seed: *seed,
                ..Default::default()
            };
            let r = if !(trange[0] <= trange[1]) {
                Err(usage("--trange needs A <= B"))
            } else {
                load(source).and_then(|a| Ok((a, load(target)?))).and_then(|(a, b)| conjugacy_verify(&a, &b, &opts))
            };
            (
                "conjugacy verify",
                json!({"samples": samples, "trange": trange, "tol": tol, "seed": seed}),
                r,
            )
        }
    };
    (name.to_string(), args, inputs, outcome)
}

/// Runs the CLI on `args` (program name first).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let started = std::time::Instant::now();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { stdout: e.to_string(), stderr: String::new(), code: EXIT_OK };
            }
            let report = json!({
                "tool": tool(),
                "status": "error",
                "error": {"kind": "UsageError", "message": e.kind().to_string()},
            });
            return Outcome { stdout: render_json(&report), stderr: e.to_string(), code: EXIT_USAGE };
        }
    };
    let (name, args, inputs, outcome) = dispatch(&cli.command);
    let mut report = Map::new();
    report.insert("tool".into(), tool());
    report.insert("command".into(), name.into());
    report.insert("args".into(), args);
    report.insert(
        "inputs".into(),
        Value::Array(
            inputs
                .iter()
                .map(|i| json!({"path": i.path.display().to_string(), "sha256": i.digest}))
                .collect(),
        ),
    );
    let code = match outcome {
        Ok(s) => {
            report.insert("status".into(), if s.pass { "pass" } else { "fail" }.into());
            report.insert("result".into(), s.result);
            if s.pass { EXIT_OK } else { EXIT_FAILURE }
        }
        Err(f) => {
            report.insert("status".into(), "error".into());
            report.insert("error".into(), f.error);
            f.code
        }
    };
    let report = Value::Object(report);
    let stdout = if cli.text { render_text(&report) } else { render_json(&report) };
    let mut stderr = String::new();
    if cli.timing {
        let _ = writeln!(stderr, "elapsed: {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
    }
    Outcome { stdout, stderr, code }
}

fn tool() -> Value {
    json!({"name": "linflow", "version": env!("CARGO_PKG_VERSION")})
}

fn number(n: &serde_json::Number) -> String {
    if n.is_i64() || n.is_u64() {
        n.to_string()
    } else {
        let x = n.as_f64().unwrap();
        format!("{x:.16e}")
    }
}

fn write_json(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number(n)),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_json(out, x, indent);
            }
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 2);
                write_json(out, x, indent + 2);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            out.push_str("{\n");
            // serde_json's default map is ordered by key
            for (i, (k, x)) in m.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(out, x, indent + 2);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// JSON with sorted keys and every float at 17 significant digits.
pub fn render_json(v: &Value) -> String {
    let mut out = String::new();
    write_json(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_text(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.extend(std::iter::repeat_n(' ', indent));
                out.push_str(k);
                out.push(':');
                if x.is_object() || (x.is_array() && !inline(x)) {
                    out.push('\n');
                    write_text(out, x, indent + 2);
                } else {
                    out.push(' ');
                    out.push_str(&scalar_text(x));
                    out.push('\n');
                }
            }
        }
        Value::Array(a) if !inline(v) => {
            for x in a {
                out.extend(std::iter::repeat_n(' ', indent));
                out.push('-');
                if x.is_object() || (x.is_array() && !inline(x)) {
                    out.push('\n');
                    write_text(out, x, indent + 2);
                } else {
                    out.push(' ');
                    out.push_str(&scalar_text(x));
                    out.push('\n');
                }
            }
        }
        other => {
            out.extend(std::iter::repeat_n(' ', indent));
            out.push_str(&scalar_text(other));
            out.push('\n');
        }
    }
}

fn inline(v: &Value) -> bool {
    v.as_array().is_some_and(|a| a.iter().all(|x| !x.is_array() && !x.is_object()))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => number(n),
        Value::Array(a) => {
            let parts: Vec<String> = a.iter().map(scalar_text).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

/// Indented `key: value` rendering of the same report.
pub fn render_text(v: &Value) -> String {
    let mut out = String::new();
    write_text(&mut out, v, 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let v = json!({"b": 0.1, "a": 3, "c": [1.0, -2.5e-300]});
        let s = render_json(&v);
        assert_eq!(
            s,
            "{\n  \"a\": 3,\n  \"b\": 1.0000000000000001e-1,\n  \"c\": [1.0000000000000000e0, -2.5000000000000000e-300]\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn text_rendering_carries_the_same_values() {
        let v = json!({"status": "pass", "result": {"x": [1.0, 2.0], "n": 3}});
        let t = render_text(&v);
        assert!(t.contains("status: pass"));
        assert!(t.contains("  x: [1.0000000000000000e0, 2.0000000000000000e0]"));
        assert!(t.contains("  n: 3"));
    }

    #[test]
    fn signature_mismatch_details() {
        let e = Error::SignatureMismatch { src_plus: 1, src_minus: 2, dst_plus: 2, dst_minus: 1 };
        let v = error_value(&e);
        assert_eq!(v["kind"], "DimensionMismatch");
        assert_eq!(v["details"]["target"]["d_plus"], 2);
    }
}
