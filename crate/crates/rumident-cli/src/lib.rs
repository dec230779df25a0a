//! Command-line front end for the `rumident` toolkit.
//!
//! Every subcommand reads JSON documents (from files, or from stdin via
//! `-`), writes exactly one JSON document to stdout, and exits with
//!
//! * `0` — success,
//! * `1` — a domain rejection on well-formed input (a rule that is not
//!   rationalizable, a support that admits no representation, a size guard
//!   tripping), or
//! * `2` — malformed input (bad JSON, bad documents, bad arguments).
//!
//! Rejections and malformed input produce an error document with a
//! machine-readable `reason` slug and a human-readable `detail`. The
//! `rationalize` family is the one deliberate exception: a negative verdict
//! still prints the full report (the verdict, the offending edges, no
//! witness) and signals the rejection through the exit code alone.
//!
//! Output is byte-deterministic: object keys are sorted, probabilities and
//! masses are canonical rational strings, and the only floating-point
//! values appear in `param-check` reports, which carry their tolerances
//! explicitly. Every emitted document re-parses to an equal value under the
//! schema printed by `--schema <name>`.
//!
//! All binary logic lives here so integration tests can drive [`run`]
//! through the compiled executable and unit tests can poke the helpers
//! directly.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Read;

use clap::{Parser, Subcommand, ValueEnum};
use rumident::choicecore::{
    self, ChoiceError, ChoiceRule, Distribution, Universe, DEFAULT_UNIVERSE_CAP,
};
use rumident::dagcore::{decompose_greedy, DagError};
use rumident::extmodels::{
    build_ddc_graph, build_rc_graph, ddc_flow, ddc_phi, fd_phi, fd_rationalize,
    rational_functions, rc_mass_bounds, rc_phi, rc_swap_progressive, ChoiceFunction, DdcData,
    ExtError, FdRule, FunctionMeasure, HistoryMeasure, MenuCollection, TruncatedMeasure,
    TruncatedPreference,
};
use rumident::idset::{
    self, bounds_with_route, extreme_points, is_extreme, is_identifying_support, BoundsQuery,
    BoundsRoute, IdsetError, SupportRestriction,
};
use rumident::linalg::Rational;
use rumident::ordered::{swap_progressive_rationalization, AltOrder, OrderedError};
use rumident::param::{
    builtin_from_json, check_local, collision_search, coordinate_rays, properness_probe,
    CollisionOptions, GridSpec, ParamError, ProbeOptions, ProbeReport, DEFAULT_LOCAL_TOL,
};
use rumident::rumgraph::{bm_flow, build_rum_graph, is_rationalizable, RumError};
use rumident::ryser::{ryser_basis_with, RyserError};
use serde_json::{json, Value};

mod schemas;

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses `argv` (program name included), executes the selected command,
/// prints one JSON document to stdout, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            return emit_failure(&Failure::arguments(e.to_string()));
        }
    };
    let caps = Caps::resolve(cli.cap);
    if let Some(name) = cli.schema.as_deref() {
        return match schemas::schema(name) {
            Some(doc) => emit(&doc, 0),
            None => emit_failure(&Failure::arguments(format!(
                "unknown schema {:?}; available: {}",
                name,
                schemas::names().join(", ")
            ))),
        };
    }
    let Some(command) = cli.command else {
        return emit_failure(&Failure::arguments(
            "a subcommand (or --schema <NAME>) is required; see --help".to_owned(),
        ));
    };
    match dispatch(command, &caps) {
        Ok(outcome) => emit(&outcome.doc, outcome.code),
        Err(failure) => emit_failure(&failure),
    }
}

/// Prints a document and passes the exit code through.
fn emit(doc: &Value, code: i32) -> i32 {
    println!(
        "{}",
        serde_json::to_string_pretty(doc).expect("output documents always serialize")
    );
    code
}

/// Prints an error document (`reason` slug plus `detail`) and returns the
/// failure's exit code.
fn emit_failure(failure: &Failure) -> i32 {
    emit(
        &json!({"reason": failure.reason, "detail": failure.detail}),
        failure.code,
    )
}

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

/// Exact identification analysis for stochastic choice data.
#[derive(Parser)]
#[command(
    name = "rumident",
    version,
    about = "Exact identification analysis for stochastic choice data",
    long_about = "Exact identification analysis for stochastic choice data: \
                  rationalizability tests, lattice flows, equivalence checks, \
                  identified-set bounds and extreme points, ordered \
                  selections, and the restricted-collection, dynamic, and \
                  frame-dependent variants. FILE arguments take a path or - \
                  for stdin; every command prints one JSON document."
)]
struct Cli {
    /// Print the named document schema and exit (see `names` in the error
    /// message for the catalog).
    #[arg(long, value_name = "NAME", global = true)]
    schema: Option<String>,
    /// Override every size guard with N (universe caps, enumeration caps,
    /// basis gates). Logged to stderr.
    #[arg(long, value_name = "N", global = true)]
    cap: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

/// Which linear program answers a `bounds` query.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    /// Optimize over swap coefficients around the base distribution.
    Ryser,
    /// Optimize over the full simplex of supported distributions.
    Simplex,
}

#[derive(Subcommand)]
enum Command {
    /// Test a complete rule for consistency with random utility (exits 1
    /// with a full report when it is not).
    Rationalize {
        /// Rule document.
        file: String,
    },
    /// Push a preference distribution forward to its choice rule.
    Phi {
        /// Distribution document.
        file: String,
    },
    /// Compute the lattice flow of a complete rule, with an edge legend.
    Bm {
        /// Rule document.
        file: String,
    },
    /// Decide observational equivalence of two preference distributions.
    Equiv {
        /// Left distribution document.
        left: String,
        /// Right distribution document.
        right: String,
    },
    /// Print a basis of the swap span for a universe.
    RyserBasis {
        /// Universe as a label string, e.g. `abcd`.
        universe: String,
    },
    /// Bound a linear functional over an identified set.
    Bounds {
        /// Bounds-query document.
        file: String,
        /// LP formulation to use.
        #[arg(long, value_enum, default_value = "ryser")]
        route: Route,
    },
    /// Test a distribution for extremeness in its identified set.
    Extreme {
        /// Distribution document.
        file: String,
        /// Support restriction as comma-separated preference keys
        /// (default: all preferences).
        #[arg(long, value_delimiter = ',', value_name = "KEYS")]
        support: Vec<String>,
    },
    /// Enumerate the extreme points of a rule's identified set.
    ExtremePoints {
        /// Rule document.
        file: String,
        /// Support restriction as comma-separated preference keys
        /// (default: all preferences).
        #[arg(long, value_delimiter = ',', value_name = "KEYS")]
        support: Vec<String>,
    },
    /// Test whether a declared support identifies its distributions.
    SupportId {
        /// Support document.
        file: String,
    },
    /// Rationalize a complete rule by the swap-progressive selection under
    /// an alternative order.
    SwapProgressive {
        /// Rule document.
        file: String,
        /// Alternative order as a descending key, e.g. `abdc`.
        order: String,
    },
    /// Probe a parametric model for identification failures.
    ParamCheck {
        /// Param-config document.
        file: String,
    },
    /// Push a measure over collection-indexed choice functions forward to
    /// its restricted rule.
    RcPhi {
        /// Rc-measure document.
        file: String,
    },
    /// Decide observational equivalence of two measures over a shared menu
    /// collection.
    RcEquiv {
        /// Left rc-measure document.
        left: String,
        /// Right rc-measure document.
        right: String,
    },
    /// Bound a functional over the function-measure representations of a
    /// restricted rule.
    RcBounds {
        /// Rc-bounds-query document.
        file: String,
    },
    /// Represent a restricted rule by the swap-progressive selection under
    /// an alternative order.
    RcSwapProgressive {
        /// Rc-rule document.
        file: String,
        /// Alternative order as a descending key, e.g. `abdc`.
        order: String,
    },
    /// Push a measure over choice histories forward to its conditional
    /// choice system.
    DdcPhi {
        /// Ddc-measure document.
        file: String,
    },
    /// Decide observational equivalence of two history measures.
    DdcEquiv {
        /// Left ddc-measure document.
        left: String,
        /// Right ddc-measure document.
        right: String,
    },
    /// Represent a conditional choice system by a measure over histories.
    DdcRationalize {
        /// Ddc-data document.
        file: String,
    },
    /// Push a measure over truncated preferences forward to its
    /// frame-dependent rule.
    FdPhi {
        /// Fd-measure document.
        file: String,
    },
    /// Decide observational equivalence of two truncated-preference
    /// measures.
    FdEquiv {
        /// Left fd-measure document.
        left: String,
        /// Right fd-measure document.
        right: String,
    },
    /// Test a frame-dependent rule for rationalizability and represent it
    /// (exits 1 when it is not rationalizable).
    FdRationalize {
        /// Fd-rule document.
        file: String,
    },
}

// ---------------------------------------------------------------------------
// Size guards
// ---------------------------------------------------------------------------

/// The resolved size guards for one invocation. `--cap N` replaces every
/// guard with `N` and lifts the basis enumeration gate; scripts that need a
/// six-alternative basis or a restricted enumeration choose their own `N`.
struct Caps {
    /// Universe cap for document parsing.
    document: usize,
    /// Enumeration cap for extreme-point listings.
    enumeration: usize,
    /// Whether gated basis enumerations may proceed.
    allow_large: bool,
}

impl Caps {
    fn resolve(cap: Option<usize>) -> Caps {
        match cap {
            Some(n) => {
                eprintln!("warning: size guards overridden, every cap is now {n}");
                Caps {
                    document: n,
                    enumeration: n,
                    allow_large: true,
                }
            }
            None => Caps {
                document: DEFAULT_UNIVERSE_CAP,
                enumeration: idset::DEFAULT_ENUMERATION_CAP,
                allow_large: false,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Failures
// ---------------------------------------------------------------------------

/// A classified failure: the exit code, a stable machine-readable slug, and
/// the human-readable detail.
struct Failure {
    code: i32,
    reason: &'static str,
    detail: String,
}

impl Failure {
    /// Malformed or inconsistent input documents (exit 2).
    fn document(detail: impl ToString) -> Failure {
        Failure {
            code: 2,
            reason: "bad-document",
            detail: detail.to_string(),
        }
    }

    /// Unusable command lines (exit 2).
    fn arguments(detail: impl ToString) -> Failure {
        Failure {
            code: 2,
            reason: "bad-arguments",
            detail: detail.to_string(),
        }
    }

    /// Unreadable files (exit 2).
    fn io(path: &str, e: std::io::Error) -> Failure {
        Failure {
            code: 2,
            reason: "io-error",
            detail: format!("cannot read {path:?}: {e}"),
        }
    }

    /// A domain rejection on well-formed input (exit 1).
    fn refused(reason: &'static str, detail: impl ToString) -> Failure {
        Failure {
            code: 1,
            reason,
            detail: detail.to_string(),
        }
    }
}

impl From<ChoiceError> for Failure {
    fn from(e: ChoiceError) -> Failure {
        match e {
            e @ ChoiceError::UniverseTooLarge { .. } => Failure::refused("cap-exceeded", e),
            e => Failure::document(e),
        }
    }
}

impl From<DagError> for Failure {
    fn from(e: DagError) -> Failure {
        match e {
            e @ DagError::PathCapExceeded { .. } => Failure::refused("cap-exceeded", e),
            e => Failure::document(e),
        }
    }
}

impl From<RumError> for Failure {
    fn from(e: RumError) -> Failure {
        match e {
            RumError::Choice(inner) => inner.into(),
            RumError::Dag(inner) => inner.into(),
        }
    }
}

impl From<RyserError> for Failure {
    fn from(e: RyserError) -> Failure {
        match e {
            RyserError::Choice(inner) => inner.into(),
            RyserError::Dag(inner) => inner.into(),
            e @ (RyserError::EnumerationGated { .. } | RyserError::EnumerationTooLarge { .. }) => {
                Failure::refused("cap-exceeded", e)
            }
            e => Failure::document(e),
        }
    }
}

impl From<OrderedError> for Failure {
    fn from(e: OrderedError) -> Failure {
        match e {
            OrderedError::Choice(inner) => inner.into(),
            OrderedError::Dag(inner) => inner.into(),
            OrderedError::Rum(inner) => inner.into(),
            e @ OrderedError::NotRationalizable { .. } => {
                Failure::refused("not-rationalizable", e)
            }
            e => Failure::document(e),
        }
    }
}

impl From<IdsetError> for Failure {
    fn from(e: IdsetError) -> Failure {
        match e {
            IdsetError::Choice(inner) => inner.into(),
            IdsetError::Ryser(inner) => inner.into(),
            IdsetError::Rum(inner) => inner.into(),
            e @ IdsetError::NotRationalizable => Failure::refused("not-rationalizable", e),
            e @ IdsetError::Infeasible => Failure::refused("no-representation", e),
            e @ IdsetError::CapExceeded { .. } => Failure::refused("cap-exceeded", e),
            e => Failure::document(e),
        }
    }
}

impl From<ExtError> for Failure {
    fn from(e: ExtError) -> Failure {
        match e {
            ExtError::Choice(inner) => inner.into(),
            ExtError::Dag(inner) => inner.into(),
            ExtError::Ordered(inner) => inner.into(),
            e @ ExtError::NotRationalizable { .. } => Failure::refused("not-rationalizable", e),
            e @ ExtError::NoRepresentation => Failure::refused("no-representation", e),
            e @ ExtError::CapExceeded { .. } => Failure::refused("cap-exceeded", e),
            e => Failure::document(e),
        }
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Failure {
        match e {
            e @ ParamError::GridTooLarge { .. } => Failure::refused("cap-exceeded", e),
            e => Failure::document(e),
        }
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// A successful command: the document to print and the exit code (0, or 1
/// for negative rationalizability verdicts).
struct Outcome {
    doc: Value,
    code: i32,
}

impl Outcome {
    fn ok(doc: Value) -> Outcome {
        Outcome { doc, code: 0 }
    }
}

fn dispatch(command: Command, caps: &Caps) -> Result<Outcome, Failure> {
    match command {
        Command::Rationalize { file } => cmd_rationalize(&read_doc(&file)?, caps),
        Command::Phi { file } => cmd_phi(&read_doc(&file)?, caps),
        Command::Bm { file } => cmd_bm(&read_doc(&file)?, caps),
        Command::Equiv { left, right } => cmd_equiv(&read_doc(&left)?, &read_doc(&right)?, caps),
        Command::RyserBasis { universe } => cmd_ryser_basis(&universe, caps),
        Command::Bounds { file, route } => cmd_bounds(&read_doc(&file)?, route, caps),
        Command::Extreme { file, support } => cmd_extreme(&read_doc(&file)?, &support, caps),
        Command::ExtremePoints { file, support } => {
            cmd_extreme_points(&read_doc(&file)?, &support, caps)
        }
        Command::SupportId { file } => cmd_support_id(&read_doc(&file)?, caps),
        Command::SwapProgressive { file, order } => {
            cmd_swap_progressive(&read_doc(&file)?, &order, caps)
        }
        Command::ParamCheck { file } => cmd_param_check(&read_doc(&file)?),
        Command::RcPhi { file } => cmd_rc_phi(&read_doc(&file)?, caps),
        Command::RcEquiv { left, right } => {
            cmd_rc_equiv(&read_doc(&left)?, &read_doc(&right)?, caps)
        }
        Command::RcBounds { file } => cmd_rc_bounds(&read_doc(&file)?, caps),
        Command::RcSwapProgressive { file, order } => {
            cmd_rc_swap_progressive(&read_doc(&file)?, &order, caps)
        }
        Command::DdcPhi { file } => cmd_ddc_phi(&read_doc(&file)?, caps),
        Command::DdcEquiv { left, right } => {
            cmd_ddc_equiv(&read_doc(&left)?, &read_doc(&right)?, caps)
        }
        Command::DdcRationalize { file } => cmd_ddc_rationalize(&read_doc(&file)?, caps),
        Command::FdPhi { file } => cmd_fd_phi(&read_doc(&file)?, caps),
        Command::FdEquiv { left, right } => {
            cmd_fd_equiv(&read_doc(&left)?, &read_doc(&right)?, caps)
        }
        Command::FdRationalize { file } => cmd_fd_rationalize(&read_doc(&file)?, caps),
    }
}

// ---------------------------------------------------------------------------
// Core commands
// ---------------------------------------------------------------------------

fn cmd_rationalize(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let rho = ChoiceRule::from_json(doc, caps.document)?;
    let g = build_rum_graph(rho.universe());
    let report = is_rationalizable(&g, &rho)?;
    let negative: Vec<Value> = report
        .negative_edges
        .iter()
        .map(|(id, mass)| {
            let (menu, alt) = g
                .menu_alt(id)
                .expect("negative edges always carry a menu and alternative");
            json!({
                "edge": id,
                "menu": menu.key(),
                "alternative": alt.to_string(),
                "mass": rat(mass),
            })
        })
        .collect();
    let code = i32::from(!report.rationalizable);
    Ok(Outcome {
        doc: json!({
            "rationalizable": report.rationalizable,
            "negative_edges": negative,
            "witness": report.witness.as_ref().map(Distribution::to_json),
        }),
        code,
    })
}

fn cmd_phi(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let mu = Distribution::from_json(doc, caps.document)?;
    Ok(Outcome::ok(choicecore::phi(&mu).to_json()))
}

fn cmd_bm(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let rho = ChoiceRule::from_json(doc, caps.document)?;
    let g = build_rum_graph(rho.universe());
    let flow = bm_flow(&g, &rho)?.to_json();
    let mut edges = BTreeMap::new();
    if let Some(map) = flow.as_object() {
        for id in map.keys() {
            if let Some((menu, alt)) = g.menu_alt(id) {
                edges.insert(
                    id.clone(),
                    json!({"menu": menu.key(), "alternative": alt.to_string()}),
                );
            }
        }
    }
    Ok(Outcome::ok(json!({"flow": flow, "edges": edges})))
}

fn cmd_equiv(left: &Value, right: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let mu = Distribution::from_json(left, caps.document)?;
    let nu = Distribution::from_json(right, caps.document)?;
    Ok(Outcome::ok(
        json!({"equivalent": choicecore::obs_equiv(&mu, &nu)}),
    ))
}

fn cmd_ryser_basis(universe: &str, caps: &Caps) -> Result<Outcome, Failure> {
    let labels: Vec<String> = universe.chars().map(String::from).collect();
    let u = Universe::from_labels(&labels, caps.document)?;
    let basis = ryser_basis_with(&u, caps.allow_large)?;
    let elements: Vec<Value> = basis.elements().iter().map(|m| m.to_json()).collect();
    Ok(Outcome::ok(
        json!({"dimension": basis.dim(), "basis": elements}),
    ))
}

fn cmd_bounds(doc: &Value, route: Route, caps: &Caps) -> Result<Outcome, Failure> {
    let q = BoundsQuery::from_json(doc, caps.document)?;
    let route = match route {
        Route::Ryser => BoundsRoute::RyserCoefficients,
        Route::Simplex => BoundsRoute::FullSimplex,
    };
    let report = bounds_with_route(&q, route)?;
    Ok(Outcome::ok(json!({
        "min": rat(&report.min),
        "argmin": report.argmin.to_json(),
        "max": rat(&report.max),
        "argmax": report.argmax.to_json(),
    })))
}

/// Builds a support restriction from `--support` keys (empty means full).
fn restriction(
    universe: &Universe,
    keys: &[String],
) -> Result<SupportRestriction, Failure> {
    if keys.is_empty() {
        Ok(SupportRestriction::full(universe))
    } else {
        Ok(SupportRestriction::from_keys(universe, keys)?)
    }
}

fn cmd_extreme(doc: &Value, support: &[String], caps: &Caps) -> Result<Outcome, Failure> {
    let mu = Distribution::from_json(doc, caps.document)?;
    let s = restriction(mu.universe(), support)?;
    Ok(Outcome::ok(json!({"extreme": is_extreme(&mu, &s)?})))
}

fn cmd_extreme_points(doc: &Value, support: &[String], caps: &Caps) -> Result<Outcome, Failure> {
    let rho = ChoiceRule::from_json(doc, caps.document)?;
    let s = restriction(rho.universe(), support)?;
    let points = extreme_points(&rho, &s, caps.enumeration)?;
    let docs: Vec<Value> = points.iter().map(Distribution::to_json).collect();
    Ok(Outcome::ok(json!({"points": docs})))
}

fn cmd_support_id(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let obj = require_object(doc)?;
    let labels: Vec<String> = field(obj, "alternatives")?;
    let keys: Vec<String> = field(obj, "preferences")?;
    let u = Universe::from_labels(&labels, caps.document)?;
    let s = SupportRestriction::from_keys(&u, &keys)?;
    Ok(Outcome::ok(
        json!({"identifying": is_identifying_support(&s)?}),
    ))
}

fn cmd_swap_progressive(doc: &Value, order: &str, caps: &Caps) -> Result<Outcome, Failure> {
    let rho = ChoiceRule::from_json(doc, caps.document)?;
    let o = AltOrder::from_key(rho.universe(), order)?;
    let mu = swap_progressive_rationalization(&rho, &o)?;
    Ok(Outcome::ok(mu.to_json()))
}

// ---------------------------------------------------------------------------
// Parametric probes
// ---------------------------------------------------------------------------

/// The `local` section of a param-config document.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalConfig {
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default = "default_points_per_axis")]
    points_per_axis: usize,
    #[serde(default = "default_local_tol")]
    tol: f64,
}

/// The `rays` section of a param-config document.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RaysConfig {
    base: Vec<f64>,
    #[serde(default = "default_steps")]
    steps: usize,
    seed: Option<u64>,
    starts: Option<usize>,
    tol: Option<f64>,
    interior_margin: Option<f64>,
}

/// The `collision` section of a param-config document.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CollisionConfig {
    #[serde(default = "default_attempts")]
    attempts: usize,
    #[serde(default = "default_collision_tol")]
    tol: f64,
    seed: Option<u64>,
    separation_floor: Option<f64>,
}

fn default_points_per_axis() -> usize {
    5
}
fn default_local_tol() -> f64 {
    DEFAULT_LOCAL_TOL
}
fn default_steps() -> usize {
    40
}
fn default_attempts() -> usize {
    60
}
fn default_collision_tol() -> f64 {
    1e-9
}

fn cmd_param_check(doc: &Value) -> Result<Outcome, Failure> {
    let model = builtin_from_json(doc)?;
    let obj = require_object(doc)?;
    if !["local", "rays", "collision"]
        .iter()
        .any(|k| obj.contains_key(*k))
    {
        return Err(Failure::document(
            "at least one probe section (\"local\", \"rays\", \"collision\") is required",
        ));
    }
    let local = match obj.get("local") {
        Some(v) => {
            let cfg: LocalConfig =
                serde_json::from_value(v.clone()).map_err(Failure::document)?;
            let grid = GridSpec {
                lower: cfg.lower,
                upper: cfg.upper,
                points_per_axis: cfg.points_per_axis,
            };
            Some(check_local(&model, &grid, cfg.tol)?)
        }
        None => None,
    };
    let rays = match obj.get("rays") {
        Some(v) => {
            let cfg: RaysConfig = serde_json::from_value(v.clone()).map_err(Failure::document)?;
            let rays = coordinate_rays(&model, &cfg.base, cfg.steps)?;
            let mut opts = ProbeOptions::default();
            if let Some(seed) = cfg.seed {
                opts.seed = seed;
            }
            if let Some(starts) = cfg.starts {
                opts.starts = starts;
            }
            if let Some(tol) = cfg.tol {
                opts.tol = tol;
            }
            if let Some(margin) = cfg.interior_margin {
                opts.interior_margin = margin;
            }
            Some(properness_probe(&model, &rays, &opts)?)
        }
        None => None,
    };
    let mut report = serde_json::to_value(ProbeReport::assemble(model.name(), local, rays))
        .expect("probe reports always serialize");
    if let Some(v) = obj.get("collision") {
        let cfg: CollisionConfig =
            serde_json::from_value(v.clone()).map_err(Failure::document)?;
        let mut opts = CollisionOptions::default();
        if let Some(seed) = cfg.seed {
            opts.seed = seed;
        }
        if let Some(floor) = cfg.separation_floor {
            opts.separation_floor = floor;
        }
        let found = collision_search(&model, cfg.attempts, cfg.tol, &opts);
        let map = report
            .as_object_mut()
            .expect("probe reports serialize to objects");
        map.insert(
            "collision".to_owned(),
            serde_json::to_value(found).expect("collisions always serialize"),
        );
        map.insert(
            "collision_options".to_owned(),
            json!({
                "attempts": cfg.attempts,
                "tol": cfg.tol,
                "seed": opts.seed,
                "separation_floor": opts.separation_floor,
            }),
        );
    }
    Ok(Outcome::ok(report))
}

// ---------------------------------------------------------------------------
// Restricted collections
// ---------------------------------------------------------------------------

fn cmd_rc_phi(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (sigma, mu) = parse_rc_measure(doc, caps)?;
    let rho = rc_phi(&sigma, &mu)?;
    Ok(Outcome::ok(rc_rule_doc(&sigma, &rho)))
}

fn cmd_rc_equiv(left: &Value, right: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (sigma_l, mu) = parse_rc_measure(left, caps)?;
    let (sigma_r, nu) = parse_rc_measure(right, caps)?;
    if sigma_l != sigma_r {
        return Err(Failure::document(
            "the two documents must declare the same menu collection",
        ));
    }
    let equivalent = rc_phi(&sigma_l, &mu)?.to_json() == rc_phi(&sigma_r, &nu)?.to_json();
    Ok(Outcome::ok(json!({"equivalent": equivalent})))
}

fn cmd_rc_bounds(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let obj = require_object(doc)?;
    let rule_doc = obj
        .get("rule")
        .ok_or_else(|| Failure::document("missing \"rule\""))?;
    let (sigma, rho) = parse_rc_rule(rule_doc, caps)?;
    let support = match obj.get("support") {
        Some(Value::String(s)) if s == "rational" => {
            let mut seen = std::collections::BTreeSet::new();
            rational_functions(&sigma)
                .into_iter()
                .map(|(_, c)| c)
                .filter(|c| seen.insert(c.key()))
                .collect()
        }
        Some(Value::Array(keys)) => {
            let mut support = Vec::with_capacity(keys.len());
            for key in keys {
                let key = key
                    .as_str()
                    .ok_or_else(|| Failure::document("support keys are strings"))?;
                support.push(ChoiceFunction::new(key, &sigma)?);
            }
            support
        }
        _ => {
            return Err(Failure::document(
                "\"support\" must be \"rational\" or an array of pick strings",
            ))
        }
    };
    let objective = parse_function_measure(
        obj.get("objective")
            .ok_or_else(|| Failure::document("missing \"objective\""))?,
        &sigma,
    )?;
    let report = rc_mass_bounds(&sigma, &rho, &support, &objective)?;
    Ok(Outcome::ok(json!({
        "min": rat(&report.min),
        "argmin": rc_measure_doc(&sigma, &report.argmin),
        "max": rat(&report.max),
        "argmax": rc_measure_doc(&sigma, &report.argmax),
    })))
}

fn cmd_rc_swap_progressive(doc: &Value, order: &str, caps: &Caps) -> Result<Outcome, Failure> {
    let (sigma, rho) = parse_rc_rule(doc, caps)?;
    let o = AltOrder::from_key(sigma.universe(), order)?;
    let g = build_rc_graph(&sigma);
    let mu = rc_swap_progressive(&g, &rho, &o)?;
    Ok(Outcome::ok(rc_measure_doc(&sigma, &mu)))
}

/// Parses an rc-measure document into its collection and function measure.
fn parse_rc_measure(doc: &Value, caps: &Caps) -> Result<(MenuCollection, FunctionMeasure), Failure> {
    let sigma = MenuCollection::from_json(doc, caps.document)?;
    let obj = require_object(doc)?;
    let mu = parse_function_measure(
        obj.get("mass")
            .ok_or_else(|| Failure::document("missing \"mass\""))?,
        &sigma,
    )?;
    Ok((sigma, mu))
}

/// Parses an rc-rule document: the same JSON carries the collection (via
/// its `menus` list) and the probability rows.
fn parse_rc_rule(doc: &Value, caps: &Caps) -> Result<(MenuCollection, ChoiceRule), Failure> {
    let sigma = MenuCollection::from_json(doc, caps.document)?;
    let rho = ChoiceRule::from_json(doc, caps.document)?;
    Ok((sigma, rho))
}

/// Parses `{pick string: rational}` against a collection.
fn parse_function_measure(
    value: &Value,
    sigma: &MenuCollection,
) -> Result<FunctionMeasure, Failure> {
    let raw: BTreeMap<String, Rational> =
        serde_json::from_value(value.clone()).map_err(Failure::document)?;
    let mut mu = FunctionMeasure::new();
    for (key, mass) in raw {
        mu.insert(ChoiceFunction::new(&key, sigma)?, mass);
    }
    Ok(mu)
}

/// Serializes a restricted rule with its collection's menu list so the
/// document round-trips as rc input.
fn rc_rule_doc(sigma: &MenuCollection, rho: &ChoiceRule) -> Value {
    let mut doc = rho.to_json();
    let menus: Vec<String> = sigma.menus().iter().map(|m| m.key().to_owned()).collect();
    doc.as_object_mut()
        .expect("rule docs serialize to objects")
        .insert("menus".to_owned(), json!(menus));
    doc
}

/// Serializes a function measure with its collection.
fn rc_measure_doc(sigma: &MenuCollection, mu: &FunctionMeasure) -> Value {
    let menus: Vec<String> = sigma.menus().iter().map(|m| m.key().to_owned()).collect();
    let mass: BTreeMap<String, Value> = mu.iter().map(|(c, v)| (c.key(), rat(v))).collect();
    json!({
        "alternatives": sigma.universe().labels(),
        "menus": menus,
        "mass": mass,
    })
}

// ---------------------------------------------------------------------------
// Dynamic discrete choice
// ---------------------------------------------------------------------------

fn cmd_ddc_phi(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (u, horizon, mu) = parse_ddc_measure(doc, caps)?;
    let data = ddc_phi(&u, horizon, &mu)?;
    Ok(Outcome::ok(data.to_json()))
}

fn cmd_ddc_equiv(left: &Value, right: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (u_l, t_l, mu) = parse_ddc_measure(left, caps)?;
    let (u_r, t_r, nu) = parse_ddc_measure(right, caps)?;
    if u_l != u_r || t_l != t_r {
        return Err(Failure::document(
            "the two documents must share the universe and the horizon",
        ));
    }
    let equivalent = ddc_phi(&u_l, t_l, &mu)?.to_json() == ddc_phi(&u_r, t_r, &nu)?.to_json();
    Ok(Outcome::ok(json!({"equivalent": equivalent})))
}

fn cmd_ddc_rationalize(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let data = DdcData::from_json(doc, caps.document)?;
    let g = build_ddc_graph(&data)?;
    let flow = ddc_flow(&g, &data)?;
    let pi = decompose_greedy(g.dag(), &flow)?;
    let mu = g.paths_to_measure(&pi)?;
    Ok(Outcome::ok(ddc_measure_doc(
        data.universe(),
        data.horizon(),
        &mu,
    )))
}

/// Parses a ddc-measure document into universe, horizon, and measure.
fn parse_ddc_measure(
    doc: &Value,
    caps: &Caps,
) -> Result<(Universe, usize, HistoryMeasure), Failure> {
    let obj = require_object(doc)?;
    let labels: Vec<String> = field(obj, "alternatives")?;
    let horizon: usize = field(obj, "T")?;
    let mu: HistoryMeasure = field(obj, "mass")?;
    let u = Universe::from_labels(&labels, caps.document)?;
    Ok((u, horizon, mu))
}

/// Serializes a history measure.
fn ddc_measure_doc(u: &Universe, horizon: usize, mu: &HistoryMeasure) -> Value {
    let mass: BTreeMap<&str, Value> = mu.iter().map(|(h, v)| (h.as_str(), rat(v))).collect();
    json!({
        "alternatives": u.labels(),
        "T": horizon,
        "mass": mass,
    })
}

// ---------------------------------------------------------------------------
// Frame-dependent data
// ---------------------------------------------------------------------------

fn cmd_fd_phi(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (u, mu) = parse_fd_measure(doc, caps)?;
    let rule = fd_phi(&u, &mu)?;
    Ok(Outcome::ok(rule.to_json()))
}

fn cmd_fd_equiv(left: &Value, right: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let (u_l, mu) = parse_fd_measure(left, caps)?;
    let (u_r, nu) = parse_fd_measure(right, caps)?;
    if u_l != u_r {
        return Err(Failure::document(
            "the two documents must share the universe",
        ));
    }
    let equivalent = fd_phi(&u_l, &mu)?.to_json() == fd_phi(&u_r, &nu)?.to_json();
    Ok(Outcome::ok(json!({"equivalent": equivalent})))
}

fn cmd_fd_rationalize(doc: &Value, caps: &Caps) -> Result<Outcome, Failure> {
    let rule = FdRule::from_json(doc, caps.document)?;
    let mu = fd_rationalize(rule.universe(), &rule)?;
    Ok(Outcome::ok(fd_measure_doc(rule.universe(), &mu)))
}

/// Parses an fd-measure document into universe and truncated measure.
fn parse_fd_measure(doc: &Value, caps: &Caps) -> Result<(Universe, TruncatedMeasure), Failure> {
    let obj = require_object(doc)?;
    let labels: Vec<String> = field(obj, "alternatives")?;
    let raw: BTreeMap<String, Rational> = field(obj, "mass")?;
    let u = Universe::from_labels(&labels, caps.document)?;
    let mut mu = TruncatedMeasure::new();
    for (key, mass) in raw {
        mu.insert(TruncatedPreference::from_key(&key, &u)?, mass);
    }
    Ok((u, mu))
}

/// Serializes a truncated-preference measure.
fn fd_measure_doc(u: &Universe, mu: &TruncatedMeasure) -> Value {
    let mass: BTreeMap<String, Value> = mu.iter().map(|(p, v)| (p.key(), rat(v))).collect();
    json!({
        "alternatives": u.labels(),
        "mass": mass,
    })
}

// ---------------------------------------------------------------------------
// Document plumbing
// ---------------------------------------------------------------------------

/// Reads and parses one JSON document from a path or `-` (stdin).
fn read_doc(path: &str) -> Result<Value, Failure> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::io(path, e))?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?
    };
    serde_json::from_str(&text)
        .map_err(|e| Failure::document(format!("{path:?} is not JSON: {e}")))
}

fn require_object(doc: &Value) -> Result<&serde_json::Map<String, Value>, Failure> {
    doc.as_object()
        .ok_or_else(|| Failure::document("expected an object"))
}

/// Extracts and deserializes a required field.
fn field<T: serde::de::DeserializeOwned>(
    obj: &serde_json::Map<String, Value>,
    key: &str,
) -> Result<T, Failure> {
    let value = obj
        .get(key)
        .ok_or_else(|| Failure::document(format!("missing {key:?}")))?;
    serde_json::from_value(value.clone())
        .map_err(|e| Failure::document(format!("bad {key:?}: {e}")))
}

/// A rational as its canonical JSON value (a string).
fn rat(r: &Rational) -> Value {
    serde_json::to_value(r).expect("rationals always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_classify_by_exit_code() {
        let f: Failure = ChoiceError::BadDocument("x".into()).into();
        assert_eq!((f.code, f.reason), (2, "bad-document"));
        let f: Failure = IdsetError::NotRationalizable.into();
        assert_eq!((f.code, f.reason), (1, "not-rationalizable"));
        let f: Failure = IdsetError::Infeasible.into();
        assert_eq!((f.code, f.reason), (1, "no-representation"));
        let f: Failure = IdsetError::CapExceeded { size: 24, cap: 2 }.into();
        assert_eq!((f.code, f.reason), (1, "cap-exceeded"));
        let f: Failure = ExtError::NoRepresentation.into();
        assert_eq!((f.code, f.reason), (1, "no-representation"));
        let f: Failure = ExtError::Choice(ChoiceError::BadLabel("xy".into())).into();
        assert_eq!((f.code, f.reason), (2, "bad-document"));
    }

    #[test]
    fn caps_resolve_to_module_defaults_without_an_override() {
        let caps = Caps::resolve(None);
        assert_eq!(caps.document, DEFAULT_UNIVERSE_CAP);
        assert_eq!(caps.enumeration, idset::DEFAULT_ENUMERATION_CAP);
        assert!(!caps.allow_large);
    }
}
