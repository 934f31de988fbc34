//! Command-line front end. JSON goes to stdout (or `--out`), wall time to
//! stderr, so identical invocations produce identical output bytes.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure (fit or
//! capacity), 64 usage error.

use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::algebra::{product, recoupling_matrix, AlgebraError, ProductExpansion};
use crate::coupling::{all_ids, enumerate_labels, total_spins, CouplingTree, QuasicharId};
use crate::exactnum::{halfint_parse, HalfInt, SqrtRational};
use crate::hamiltonian::{
    assemble, spectrum, HamiltonianError, HamiltonianParams, KineticNormalization, LatticeSpec,
};
use crate::quasichar::{
    fit_trace_polynomial, haar_gram, quasichar_eval, rng_for, sample_tuple, BasisMode, Convention,
    Evaluator, FitOptions, QuasicharError, Route,
};
use crate::rep::{GroupElement, C64};
use crate::wigner::{bracket_9j, clebsch_gordan, wigner_6j, wigner_9j};

pub const SCHEMA: &str = "su2qc/1";

#[derive(Parser, Debug)]
#[command(
    name = "su2qc",
    version,
    about = "Exact SU(2) recoupling and quasicharacter toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo or verification sample count.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub samples: usize,
    /// Pass/fail tolerance for verification commands.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Human-readable text instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clebsch-Gordan coefficients and 6j / 9j symbols.
    #[command(subcommand)]
    Wigner(WignerCmd),
    /// Enumerate internal labels of a coupling tree.
    Labels(LabelsArgs),
    /// Evaluate or expand quasicharacters.
    #[command(subcommand)]
    Quasichar(QuasicharCmd),
    /// Pointwise products of quasicharacters.
    #[command(subcommand)]
    Product(ProductCmd),
    /// Recoupling matrix between two coupling trees.
    Recouple(RecoupleArgs),
    /// Assemble and diagonalize the lattice Hamiltonian.
    Hamiltonian(HamiltonianArgs),
    /// Statistical and structural self-checks.
    #[command(subcommand)]
    Verify(VerifyCmd),
}

#[derive(Subcommand, Debug)]
pub enum WignerCmd {
    /// <j1 m1 j2 m2 | j m>
    Cg {
        j1: String,
        #[arg(allow_hyphen_values = true)]
        m1: String,
        j2: String,
        #[arg(allow_hyphen_values = true)]
        m2: String,
        j: String,
        #[arg(allow_hyphen_values = true)]
        m: String,
    },
    /// {j1 j2 j3; j4 j5 j6}
    #[command(name = "6j")]
    SixJ { labels: Vec<String> },
    /// 9j symbol in row order.
    #[command(name = "9j")]
    NineJ {
        labels: Vec<String>,
        /// Multiply by sqrt(d3 d6 d7 d8).
        #[arg(long)]
        bracket: bool,
    },
}

#[derive(Args, Debug)]
pub struct LabelsArgs {
    /// Coupling tree such as "(((1 2) 3) 4)" or "caterpillar:4"; defaults to the caterpillar.
    #[arg(long)]
    pub tree: Option<String>,
    /// Comma-separated leaf spins.
    #[arg(long)]
    pub spins: String,
    /// Restrict to one total spin.
    #[arg(long)]
    pub total: Option<String>,
}

/// Quasicharacter given as `SPINS:K:K':TOTAL`, e.g. `1/2,1/2,1/2:1:1:3/2`.
#[derive(Args, Debug, Clone)]
pub struct IdArgs {
    pub id: String,
    #[arg(long)]
    pub tree: Option<String>,
    #[arg(long, default_value = "trace")]
    pub convention: String,
}

#[derive(Subcommand, Debug)]
pub enum QuasicharCmd {
    /// Value at a tuple of group elements.
    Eval {
        #[command(flatten)]
        id: IdArgs,
        /// JSON list of unit quaternions [w,x,y,z] or 2x2 complex matrices [[[re,im],..],..].
        #[arg(long, conflicts_with = "euler")]
        elements: Option<String>,
        /// Euler angles "a,b,g;a,b,g;..." one triple per leaf.
        #[arg(long)]
        euler: Option<String>,
    },
    /// Exact expansion in trace monomials.
    Fit {
        #[command(flatten)]
        id: IdArgs,
        #[arg(long, default_value = "generator")]
        mode: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum ProductCmd {
    /// Exact expansion coefficients of chi_a chi_b.
    Expand {
        a: String,
        b: String,
        #[arg(long)]
        tree: Option<String>,
        #[arg(long, default_value = "trace")]
        convention: String,
    },
    /// Largest pointwise residual of the expansion at random tuples.
    Verify {
        a: String,
        b: String,
        #[arg(long)]
        tree: Option<String>,
        #[arg(long, default_value = "trace")]
        convention: String,
    },
}

#[derive(Args, Debug)]
pub struct RecoupleArgs {
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long)]
    pub spins: String,
    #[arg(long)]
    pub total: String,
}

#[derive(Args, Debug)]
pub struct HamiltonianArgs {
    /// Generator name (single-plaquette, 2x2) or path to a lattice JSON file.
    #[arg(long, default_value = "single-plaquette")]
    pub lattice: String,
    /// JSON config with any of: lattice, g, delta, jmax, k, seed, casimir_cap, kinetic.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub jmax: Option<String>,
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub casimir_cap: Option<u64>,
    #[arg(long)]
    pub kinetic_normalization: Option<String>,
    /// Drop the Wilson term.
    #[arg(long)]
    pub no_wilson: bool,
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// CSV sweep of the lowest eigenvalues over g: "start:stop:steps".
    #[arg(long)]
    pub sweep_g: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// Haar inner products of all orthonormal-convention quasicharacters.
    Orthonormality {
        #[arg(long = "N", alias = "n")]
        n: usize,
        #[arg(long)]
        jmax: String,
        /// Acceptance band in standard errors.
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
    },
    /// Projector and Clebsch-Gordan evaluation routes agree.
    PathIndependence {
        #[arg(long = "N", alias = "n")]
        n: usize,
        #[arg(long)]
        jmax: String,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::Numeric(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

impl From<QuasicharError> for CliError {
    fn from(e: QuasicharError) -> Self {
        match e {
            QuasicharError::Fit(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<HamiltonianError> for CliError {
    fn from(e: HamiltonianError) -> Self {
        match e {
            HamiltonianError::Capacity { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::Exact(_) => CliError::Numeric(e.to_string()),
            AlgebraError::Label(_) => CliError::Invalid(e.to_string()),
        }
    }
}

/// `s*sqrt(p/q)` with `s` in {-1, 0, 1}.
pub fn canonical(x: &SqrtRational) -> String {
    if x.is_zero() {
        return "0*sqrt(0/1)".into();
    }
    let sq = x.square();
    format!("{}*sqrt({}/{})", x.sign(), sq.numer(), sq.denom())
}

fn exact_json(x: &SqrtRational) -> Value {
    json!({ "exact": x.to_string(), "canonical": canonical(x), "pretty": x.pretty(), "approx": x.to_f64() })
}

fn spin_json(s: HalfInt) -> Value {
    json!({ "spin": s.to_string(), "dynkin": s.twice() })
}

fn spins_json(v: &[HalfInt]) -> Value {
    Value::Array(v.iter().map(|&s| spin_json(s)).collect())
}

fn id_json(id: &QuasicharId) -> Value {
    json!({
        "tree": id.tree.to_string(),
        "leaf_spins": spins_json(&id.leaf_spins),
        "k": spins_json(&id.k),
        "k_prime": spins_json(&id.k_prime),
        "total": spin_json(id.total),
        "label": id.label(),
    })
}

fn parse_spin(s: &str) -> Result<HalfInt, CliError> {
    let h = halfint_parse(s).map_err(invalid)?;
    if h.twice() < 0 {
        return Err(CliError::Invalid(format!("spin {s} is negative")));
    }
    Ok(h)
}

fn parse_label(s: &str) -> Result<HalfInt, CliError> {
    halfint_parse(s).map_err(invalid)
}

fn parse_spins(s: &str) -> Result<Vec<HalfInt>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_spin(t.trim())).collect()
}

fn parse_tree(s: Option<&str>, n: usize) -> Result<CouplingTree, CliError> {
    match s {
        None => Ok(CouplingTree::caterpillar(n.max(1))),
        Some(t) => {
            let tree: CouplingTree = t.parse().map_err(invalid)?;
            if tree.leaf_count() != n {
                return Err(CliError::Invalid(format!(
                    "tree has {} leaves, {} spins given",
                    tree.leaf_count(),
                    n
                )));
            }
            Ok(tree)
        }
    }
}

/// Parse `SPINS:K:K':TOTAL`.
pub fn parse_id(text: &str, tree: Option<&str>) -> Result<QuasicharId, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [spins, k, kp, total] = parts[..] else {
        return Err(CliError::Invalid(format!(
            "quasicharacter {text:?} is not SPINS:K:K':TOTAL"
        )));
    };
    let spins = parse_spins(spins)?;
    let tree = parse_tree(tree, spins.len())?;
    QuasicharId::new(
        tree,
        spins,
        parse_spins(k)?,
        parse_spins(kp)?,
        parse_spin(total)?,
    )
    .map_err(invalid)
}

fn parse_convention(s: &str) -> Result<Convention, CliError> {
    s.parse().map_err(CliError::Invalid)
}

fn parse_elements(text: &str) -> Result<Vec<GroupElement>, CliError> {
    let v: Value = serde_json::from_str(text).map_err(invalid)?;
    let list = v
        .as_array()
        .ok_or_else(|| CliError::Invalid("elements must be a JSON list".into()))?;
    let num = |x: &Value| {
        x.as_f64()
            .ok_or_else(|| CliError::Invalid(format!("{x} is not a number")))
    };
    list.iter()
        .map(|e| {
            let items = e
                .as_array()
                .ok_or_else(|| CliError::Invalid(format!("{e} is not a list")))?;
            if items.len() == 4 && items.iter().all(Value::is_number) {
                let q = [
                    num(&items[0])?,
                    num(&items[1])?,
                    num(&items[2])?,
                    num(&items[3])?,
                ];
                if q.iter().all(|x| *x == 0.0) {
                    return Err(CliError::Invalid("zero quaternion".into()));
                }
                return Ok(GroupElement::from_quaternion(q));
            }
            let entry = |r: usize, c: usize| -> Result<C64, CliError> {
                let z = e
                    .get(r)
                    .and_then(|row| row.get(c))
                    .and_then(Value::as_array);
                match z.map(|z| z.as_slice()) {
                    Some([re, im]) => Ok(C64::new(num(re)?, num(im)?)),
                    _ => Err(CliError::Invalid(format!(
                        "{e} is neither a quaternion nor a 2x2 complex matrix"
                    ))),
                }
            };
            let m = nalgebra::Matrix2::new(entry(0, 0)?, entry(0, 1)?, entry(1, 0)?, entry(1, 1)?);
            GroupElement::new(m).map_err(invalid)
        })
        .collect()
}

fn parse_euler(text: &str) -> Result<Vec<GroupElement>, CliError> {
    text.split(';')
        .map(|t| {
            let a: Vec<f64> = t
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(invalid))
                .collect::<Result<_, _>>()?;
            match a[..] {
                [x, y, z] => Ok(GroupElement::from_euler(x, y, z)),
                _ => Err(CliError::Invalid(format!(
                    "euler triple {t:?} needs three angles"
                ))),
            }
        })
        .collect()
}

struct Output {
    json: Value,
    text: String,
}

fn manifest(argv: &[String], g: &Global, conventions: Value) -> Value {
    json!({
        "command": argv.join(" "),
        "seed": g.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "conventions": conventions,
    })
}

fn expansion_json(e: &ProductExpansion) -> Value {
    Value::Array(
        e.terms
            .iter()
            .map(|(id, c)| json!({ "quasichar": id_json(id), "coefficient": exact_json(c) }))
            .collect(),
    )
}

fn expansion_text(e: &ProductExpansion) -> String {
    e.terms
        .iter()
        .map(|(id, c)| format!("{:>16}  {}\n", c.pretty(), id.label()))
        .collect()
}

fn run_wigner(cmd: &WignerCmd) -> Result<Output, CliError> {
    let (kind, labels, value) = match cmd {
        WignerCmd::Cg {
            j1,
            m1,
            j2,
            m2,
            j,
            m,
        } => {
            let l = [
                parse_spin(j1)?,
                parse_label(m1)?,
                parse_spin(j2)?,
                parse_label(m2)?,
                parse_spin(j)?,
                parse_label(m)?,
            ];
            let v = clebsch_gordan(l[0], l[1], l[2], l[3], l[4], l[5]).map_err(invalid)?;
            ("cg", l.to_vec(), v)
        }
        WignerCmd::SixJ { labels } => {
            let l: [HalfInt; 6] = fixed(labels)?;
            ("6j", l.to_vec(), wigner_6j(l))
        }
        WignerCmd::NineJ { labels, bracket } => {
            let l: [HalfInt; 9] = fixed(labels)?;
            let v = if *bracket {
                bracket_9j(l)
            } else {
                wigner_9j(l)
            };
            (if *bracket { "bracket9j" } else { "9j" }, l.to_vec(), v)
        }
    };
    let mut json = exact_json(&value);
    json["symbol"] = json!(kind);
    json["labels"] = spins_json(&labels);
    let text = format!(
        "{kind} {} = {} ~ {}\n",
        labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        value.pretty(),
        value.to_f64()
    );
    Ok(Output { json, text })
}

fn fixed<const N: usize>(labels: &[String]) -> Result<[HalfInt; N], CliError> {
    if labels.len() != N {
        return Err(CliError::Invalid(format!(
            "expected {N} spins, got {}",
            labels.len()
        )));
    }
    let v: Vec<HalfInt> = labels
        .iter()
        .map(|s| parse_spin(s))
        .collect::<Result<_, _>>()?;
    Ok(v.try_into().expect("length checked"))
}

fn run_labels(a: &LabelsArgs) -> Result<Output, CliError> {
    let spins = parse_spins(&a.spins)?;
    if spins.is_empty() {
        return Err(CliError::Invalid("at least one leaf spin is needed".into()));
    }
    let tree = parse_tree(a.tree.as_deref(), spins.len())?;
    let totals = match &a.total {
        Some(t) => vec![parse_spin(t)?],
        None => total_spins(&spins),
    };
    let mut blocks = Vec::new();
    let mut text = format!("tree {tree}\n");
    for j in totals {
        let labels = enumerate_labels(&tree, &spins, j).map_err(invalid)?;
        text.push_str(&format!("j = {j}: {} label sets\n", labels.len()));
        for l in &labels {
            text.push_str(&format!(
                "  ({})\n",
                l.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        blocks.push(json!({
            "total": spin_json(j),
            "multiplicity": labels.len(),
            "labels": labels.iter().map(|l| spins_json(l)).collect::<Vec<_>>(),
        }));
    }
    Ok(Output {
        json: json!({ "tree": tree.to_string(), "leaf_spins": spins_json(&spins), "totals": blocks }),
        text,
    })
}

fn run_quasichar(cmd: &QuasicharCmd, g: &Global) -> Result<Output, CliError> {
    match cmd {
        QuasicharCmd::Eval {
            id,
            elements,
            euler,
        } => {
            let conv = parse_convention(&id.convention)?;
            let q = parse_id(&id.id, id.tree.as_deref())?;
            let us = match (elements, euler) {
                (Some(e), _) => parse_elements(e)?,
                (None, Some(e)) => parse_euler(e)?,
                (None, None) => sample_tuple(&mut rng_for(g.seed, 0), q.n()),
            };
            let v = quasichar_eval(&q, &us, conv)?;
            let json = json!({ "quasichar": id_json(&q), "convention": conv, "value": { "re": v.re, "im": v.im } });
            Ok(Output {
                json,
                text: format!("{} = {:.15} {:+.3e}i\n", q.label(), v.re, v.im),
            })
        }
        QuasicharCmd::Fit { id, mode } => {
            let conv = parse_convention(&id.convention)?;
            let q = parse_id(&id.id, id.tree.as_deref())?;
            let mode = match mode.as_str() {
                "generator" => BasisMode::Generator,
                "table" => BasisMode::Table,
                m => return Err(CliError::Invalid(format!("unknown basis mode {m:?}"))),
            };
            let opts = FitOptions {
                mode,
                seed: g.seed,
                ..FitOptions::default()
            };
            let r = fit_trace_polynomial(&q, conv, &opts)?;
            let json = json!({
                "quasichar": id_json(&q),
                "convention": conv,
                "mode": mode,
                "coefficients": r.polynomial.to_json(),
                "polynomial": r.polynomial.to_string(),
                "basis_size": r.basis_size,
                "rank": r.rank,
                "samples": r.samples,
                "fit_residual": r.fit_residual,
                "heldout_residual": r.heldout_residual,
            });
            Ok(Output {
                json,
                text: format!("{} = {}\n", q.label(), r.polynomial),
            })
        }
    }
}

fn run_product(cmd: &ProductCmd, g: &Global) -> Result<Output, CliError> {
    let (a, b, tree, conv) = match cmd {
        ProductCmd::Expand {
            a,
            b,
            tree,
            convention,
        }
        | ProductCmd::Verify {
            a,
            b,
            tree,
            convention,
        } => (a, b, tree, convention),
    };
    let conv = parse_convention(conv)?;
    let ia = parse_id(a, tree.as_deref())?;
    let ib = parse_id(b, tree.as_deref())?;
    if ia.n() != ib.n() {
        return Err(CliError::Invalid(
            "both factors need the same number of leaves".into(),
        ));
    }
    let e = product(&ia, &ib, conv)?;
    let mut json = json!({ "a": id_json(&ia), "b": id_json(&ib), "convention": conv, "terms": expansion_json(&e) });
    let mut text = expansion_text(&e);
    if let ProductCmd::Verify { .. } = cmd {
        let mut rng = rng_for(g.seed, 0);
        let ea = Evaluator::new(&ia)?;
        let eb = Evaluator::new(&ib)?;
        let terms: Vec<(Evaluator, f64, f64)> = e
            .terms
            .iter()
            .map(|(id, c)| Ok((Evaluator::new(id)?, c.to_f64(), conv.scale(id))))
            .collect::<Result<_, QuasicharError>>()?;
        let mut worst: f64 = 0.0;
        for _ in 0..g.samples {
            let us = sample_tuple(&mut rng, ia.n());
            let lhs = ea.eval(&us) * conv.scale(&ia) * eb.eval(&us) * conv.scale(&ib);
            let rhs: C64 = terms.iter().map(|(ev, c, s)| ev.eval(&us) * (c * s)).sum();
            worst = worst.max((lhs - rhs).norm());
        }
        let pass = worst < g.tolerance;
        json["verify"] = json!({ "samples": g.samples, "max_residual": worst, "tolerance": g.tolerance, "pass": pass });
        text.push_str(&format!(
            "max residual {worst:.3e} over {} tuples: {}\n",
            g.samples,
            if pass { "PASS" } else { "FAIL" }
        ));
    }
    Ok(Output { json, text })
}

fn run_recouple(a: &RecoupleArgs) -> Result<Output, CliError> {
    let spins = parse_spins(&a.spins)?;
    let from = parse_tree(Some(&a.from), spins.len())?;
    let to = parse_tree(Some(&a.to), spins.len())?;
    let r = recoupling_matrix(&from, &to, &spins, parse_spin(&a.total)?)?;
    let orthogonal = r.is_orthogonal()?;
    let labels = |v: &[Vec<HalfInt>]| v.iter().map(|l| spins_json(l)).collect::<Vec<_>>();
    let json = json!({
        "from": from.to_string(),
        "to": to.to_string(),
        "leaf_spins": spins_json(&spins),
        "total": spin_json(r.total),
        "rows": labels(&r.rows),
        "cols": labels(&r.cols),
        "entries": r.entries.iter().map(|row| row.iter().map(exact_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "orthogonal": orthogonal,
    });
    let mut text = format!("<{to} | {from}>, j = {}\n", r.total);
    for row in &r.entries {
        text.push_str(
            &row.iter()
                .map(|e| format!("{:>14}", e.pretty()))
                .collect::<Vec<_>>()
                .join(" "),
        );
        text.push('\n');
    }
    Ok(Output { json, text })
}

fn load_lattice(name: &str) -> Result<LatticeSpec, CliError> {
    match LatticeSpec::named(name) {
        Ok(l) => Ok(l),
        Err(_) => {
            let text = std::fs::read_to_string(name)
                .map_err(|e| CliError::Invalid(format!("lattice {name:?}: {e}")))?;
            serde_json::from_str(&text).map_err(invalid)
        }
    }
}

fn run_hamiltonian(a: &HamiltonianArgs) -> Result<Output, CliError> {
    let config: Value = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Invalid(format!("config {p:?}: {e}")))?;
            serde_json::from_str(&text).map_err(invalid)?
        }
        None => json!({}),
    };
    let lattice = match config.get("lattice") {
        Some(Value::String(name)) => load_lattice(name)?,
        Some(obj @ Value::Object(_)) => serde_json::from_value(obj.clone()).map_err(invalid)?,
        _ => load_lattice(&a.lattice)?,
    };
    let cfg_f = |k: &str| config.get(k).and_then(Value::as_f64);
    let jmax = match (&a.jmax, config.get("jmax")) {
        (Some(j), _) => parse_spin(j)?,
        (None, Some(v)) => serde_json::from_value(v.clone()).map_err(invalid)?,
        (None, None) => HalfInt::ONE,
    };
    let kinetic: KineticNormalization = match a
        .kinetic_normalization
        .as_deref()
        .or(config.get("kinetic").and_then(Value::as_str))
    {
        Some(k) => k.parse().map_err(CliError::Invalid)?,
        None => KineticNormalization::default(),
    };
    let params = HamiltonianParams {
        g: a.g.or(cfg_f("g")).unwrap_or(1.0),
        delta: a.delta.or(cfg_f("delta")).unwrap_or(1.0),
        jmax,
        casimir_cap: a
            .casimir_cap
            .or(config.get("casimir_cap").and_then(Value::as_u64)),
        kinetic,
        wilson: !a.no_wilson,
        max_dim: a.max_dim.unwrap_or(2000),
    };
    let k =
        a.k.or(config.get("k").and_then(Value::as_u64).map(|k| k as usize))
            .unwrap_or(5);
    if let Some(sweep) = &a.sweep_g {
        return sweep_g(&lattice, &params, k, sweep);
    }
    let asm = assemble(&lattice, &params)?;
    let s = spectrum(&asm.matrix, k);
    let json = json!({
        "lattice": lattice,
        "off_tree_links": lattice.off_tree(),
        "params": { "g": params.g, "delta": params.delta, "jmax": spin_json(params.jmax) },
        "truncation": { "jmax": spin_json(params.jmax), "casimir_cap": params.casimir_cap, "max_dim": params.max_dim },
        "kinetic_normalization": params.kinetic,
        "wilson_term": params.wilson,
        "basis_size": asm.basis.len(),
        "eigenvalues": s.eigenvalues,
        "residuals": s.residuals,
        "eigenvector_orthogonality": s.orthogonality,
    });
    let mut text = format!("basis size {}\n", asm.basis.len());
    for (e, r) in s.eigenvalues.iter().zip(&s.residuals) {
        text.push_str(&format!("{e:>22.12}   residual {r:.1e}\n"));
    }
    Ok(Output { json, text })
}

fn sweep_g(
    lattice: &LatticeSpec,
    params: &HamiltonianParams,
    k: usize,
    spec: &str,
) -> Result<Output, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(CliError::Invalid("sweep must be start:stop:steps".into()));
    };
    let (a, b): (f64, f64) = (a.parse().map_err(invalid)?, b.parse().map_err(invalid)?);
    let n: usize = n.parse().map_err(invalid)?;
    if n < 1 {
        return Err(CliError::Invalid("sweep needs at least one step".into()));
    }
    let mut csv = String::from("g");
    for i in 0..k {
        csv.push_str(&format!(",e{i}"));
    }
    csv.push('\n');
    let mut rows = Vec::new();
    for i in 0..n {
        let g = if n == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        };
        let p = HamiltonianParams {
            g,
            ..params.clone()
        };
        let s = spectrum(&assemble(lattice, &p)?.matrix, k);
        csv.push_str(&format!("{g}"));
        for e in &s.eigenvalues {
            csv.push_str(&format!(",{e}"));
        }
        csv.push('\n');
        rows.push(json!({ "g": g, "eigenvalues": s.eigenvalues }));
    }
    Ok(Output {
        json: json!({ "sweep": rows, "csv": csv }),
        text: csv,
    })
}

fn run_verify(cmd: &VerifyCmd, g: &Global) -> Result<Output, CliError> {
    match cmd {
        VerifyCmd::Orthonormality { n, jmax, sigma } => {
            let ids = ids_up_to(*n, parse_spin(jmax)?)?;
            let gram = haar_gram(&ids, Convention::Orthonormal, g.samples, g.seed)?;
            let mut worst: f64 = 0.0;
            let mut failures = Vec::new();
            let mut pairs = 0;
            for a in 0..ids.len() {
                for b in a..ids.len() {
                    pairs += 1;
                    let e = gram[a][b];
                    let target = if a == b { 1.0 } else { 0.0 };
                    let dev = (e.re - target).abs();
                    let z = if e.stderr > 0.0 {
                        dev / e.stderr
                    } else if dev < 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    worst = worst.max(z);
                    if z > *sigma {
                        failures.push(json!({ "a": ids[a].label(), "b": ids[b].label(), "mean": e.re, "stderr": e.stderr }));
                    }
                }
            }
            let pass = failures.is_empty();
            let text = format!(
                "{} quasicharacters, {pairs} pairs, worst deviation {worst:.2} sigma: {}\n",
                ids.len(),
                if pass { "PASS" } else { "FAIL" }
            );
            let json = json!({
                "basis": ids.iter().map(QuasicharId::label).collect::<Vec<_>>(),
                "pairs": pairs,
                "samples": g.samples,
                "worst_sigma": worst,
                "sigma_band": sigma,
                "failures": failures,
                "pass": pass,
            });
            Ok(Output { json, text })
        }
        VerifyCmd::PathIndependence { n, jmax } => {
            let ids = ids_up_to(*n, parse_spin(jmax)?)?;
            let mut rng = rng_for(g.seed, 0);
            let mut worst: f64 = 0.0;
            for id in &ids {
                let a = Evaluator::with_route(id, Route::Projector)?;
                let b = Evaluator::with_route(id, Route::CgSum)?;
                let us = sample_tuple(&mut rng, *n);
                worst = worst.max((a.eval(&us) - b.eval(&us)).norm());
            }
            let pass = worst < g.tolerance;
            let json = json!({ "quasichars": ids.len(), "max_difference": worst, "tolerance": g.tolerance, "pass": pass });
            Ok(Output {
                json,
                text: format!(
                    "{} quasicharacters, max difference {worst:.2e}\n",
                    ids.len()
                ),
            })
        }
    }
}

/// All caterpillar quasicharacters on `n` leaves with leaf spins `<= jmax`.
pub fn ids_up_to(n: usize, jmax: HalfInt) -> Result<Vec<QuasicharId>, CliError> {
    if n == 0 {
        return Err(CliError::Invalid("N must be positive".into()));
    }
    let tree = CouplingTree::caterpillar(n);
    let mut out = Vec::new();
    let steps = jmax.twice() as usize + 1;
    for idx in 0..steps.pow(n as u32) {
        let spins: Vec<HalfInt> = (0..n)
            .map(|i| HalfInt::from_twice(((idx / steps.pow(i as u32)) % steps) as i32))
            .collect();
        out.extend(all_ids(&tree, &spins));
    }
    Ok(out)
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<Output, CliError> {
    let g = &cli.global;
    let mut out = match &cli.command {
        Command::Wigner(w) => run_wigner(w)?,
        Command::Labels(a) => run_labels(a)?,
        Command::Quasichar(q) => run_quasichar(q, g)?,
        Command::Product(p) => run_product(p, g)?,
        Command::Recouple(r) => run_recouple(r)?,
        Command::Hamiltonian(h) => run_hamiltonian(h)?,
        Command::Verify(v) => run_verify(v, g)?,
    };
    let conventions = json!({
        "spins": "spin and Dynkin (2j) forms",
        "phase": "Condon-Shortley",
        "quasichar": out.json.get("convention").cloned().unwrap_or(json!("trace")),
        "kinetic_normalization": out.json.get("kinetic_normalization").cloned().unwrap_or(Value::Null),
        "exact_format": "s*sqrt(p/q)",
    });
    let body = std::mem::take(&mut out.json);
    out.json =
        json!({ "schema": SCHEMA, "manifest": manifest(argv, g, conventions), "result": body });
    Ok(out)
}

/// Run with explicit arguments and sinks; returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{e}");
                    return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        64
                    } else {
                        0
                    };
                }
                _ => 64,
            };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    let start = Instant::now();
    let result = dispatch(&cli, &argv[1..]);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => {
            let rendered = if cli.global.pretty {
                out.text
            } else {
                let mut s = serde_json::to_string_pretty(&out.json).expect("json values serialize");
                s.push('\n');
                s
            };
            let written = match &cli.global.out {
                Some(path) => std::fs::write(path, rendered).map_err(|e| e.to_string()),
                None => stdout
                    .write_all(rendered.as_bytes())
                    .map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: cannot write output: {e}");
                return 2;
            }
            let _ = writeln!(stderr, "wall time {elapsed:.3} s");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    run(
        std::env::args(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
