use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use koenigs::generate::{
    lightcone_net, moutard_net, rng_from_seed, three_leg_net, LightconeParams, MoutardParams, ThreeLegParams,
};
use koenigs::isothermic::{christoffel, lightcone_lift, IsothermicNet};
use koenigs::koenigs::{dualize_net, integrate_nu, moutard_lift, BaseValue};
use koenigs::{QNet, Tolerances};
use serde::Deserialize;
use serde_json::json;

use crate::document::{DocError, NetDocument};
use crate::obj::obj_string;
use crate::report::{self, CheckReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "koenigs", version, about = "Construct, verify and transform discrete Koenigs and isothermic nets")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Tolerance for incidence predicates (planarity, rank), relative to scale.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_incidence: f64,
    /// Tolerance for multiplicative cycle residuals |product - 1|.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_product: f64,
    /// Value of nu at a black vertex, as `u1,u2,..=value`.
    #[arg(long, global = true, value_parser = parse_base)]
    base_black: Option<BaseValue>,
    /// Value of nu at a white vertex, as `u1,u2,..=value`.
    #[arg(long, global = true, value_parser = parse_base)]
    base_white: Option<BaseValue>,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Format of check reports and error messages.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random net and write it as a document.
    Generate {
        #[arg(value_enum)]
        kind: GenerateKind,
        #[command(flatten)]
        args: GenerateArgs,
    },
    /// Run one check; exit 0 iff it passes.
    Check {
        #[arg(value_enum)]
        what: CheckKind,
        /// Input document (standard input if omitted or `-`).
        input: Option<PathBuf>,
    },
    /// The Koenigs dual net, with nu from the base values.
    Dualize { input: Option<PathBuf> },
    /// The Christoffel transform of an isothermic net.
    Christoffel {
        input: Option<PathBuf>,
        /// Store `s > 0` and the second axis labels negated (m = 2).
        #[arg(long)]
        limit_signs: bool,
    },
    /// Lift a Koenigs net to a Moutard net.
    Lift {
        #[arg(value_enum)]
        kind: LiftTarget,
        input: Option<PathBuf>,
    },
    /// Every applicable check as one JSON report.
    Report { input: Option<PathBuf> },
    /// Export a two-dimensional net as a Wavefront OBJ mesh.
    Export { input: Option<PathBuf> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenerateKind {
    Moutard,
    ThreeLeg,
    Lightcone,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Koenigs,
    Circular,
    Isothermic,
    Qnet,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LiftTarget {
    Homogeneous,
    Lightcone,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Number of vertices along each axis.
    #[arg(long, num_args = 1..)]
    extents: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ambient_dim: Option<usize>,
    /// Amplitude of the random bends of the axis curves.
    #[arg(long)]
    wiggle: Option<f64>,
    /// Range of the Moutard coefficients, as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    coefficient_range: Option<(f64, f64)>,
    /// Multiplicative noise range of 1/nu, as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    nu_range: Option<(f64, f64)>,
    /// Label range, once per axis, as `lo,hi`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    label_range: Vec<(f64, f64)>,
    /// JSON file with any of the fields above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Generator settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    extents: Option<Vec<usize>>,
    seed: Option<u64>,
    ambient_dim: Option<usize>,
    wiggle: Option<f64>,
    coefficient_range: Option<(f64, f64)>,
    nu_range: Option<(f64, f64)>,
    label_ranges: Option<Vec<(f64, f64)>>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err("need finite lo < hi".into());
    }
    Ok((lo, hi))
}

fn parse_base(s: &str) -> Result<BaseValue, String> {
    let (u, v) = s.split_once('=').ok_or("expected `u1,u2,..=value`")?;
    let u = u
        .split(',')
        .map(|a| a.trim().parse::<usize>().map_err(|e| format!("{e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let value: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(BaseValue::new(u, value))
}

/// Everything that ends a command early.
#[derive(Debug)]
enum Failure {
    Doc(DocError),
    Core(koenigs::Error),
    Usage(String),
    Io(std::io::Error),
}

impl Failure {
    fn category(&self) -> &'static str {
        match self {
            Failure::Doc(e) => e.category(),
            Failure::Core(e) => e.category(),
            Failure::Usage(_) => "Usage",
            Failure::Io(_) => "Io",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) if e.is_degeneracy() => EXIT_DEGENERATE,
            Failure::Core(e) => match e.root() {
                koenigs::Error::InvalidInput(_)
                | koenigs::Error::DimensionMismatch { .. }
                | koenigs::Error::DimensionTooLow { .. } => EXIT_INPUT,
                _ => EXIT_FAIL,
            },
            Failure::Doc(_) | Failure::Usage(_) | Failure::Io(_) => EXIT_INPUT,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Doc(e) => e.to_string(),
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) => m.clone(),
            Failure::Io(e) => e.to_string(),
        }
    }
}

impl From<DocError> for Failure {
    fn from(e: DocError) -> Self {
        Failure::Doc(e)
    }
}

impl From<koenigs::Error> for Failure {
    fn from(e: koenigs::Error) -> Self {
        Failure::Core(e)
    }
}

/// What a successful command hands back: text to emit and the exit code.
struct Output {
    text: String,
    code: i32,
}

impl Output {
    fn document(doc: &NetDocument) -> Result<Self, Failure> {
        Ok(Output {
            text: doc.to_canonical_string()?,
            code: EXIT_PASS,
        })
    }
}

struct Context<'a> {
    global: &'a GlobalOpts,
    tol: Tolerances,
    stdin: &'a mut dyn Read,
}

impl Context<'_> {
    fn load(&mut self, input: &Option<PathBuf>) -> Result<NetDocument, Failure> {
        match input.as_deref() {
            Some(p) if p != Path::new("-") => Ok(NetDocument::load(p)?),
            _ => {
                let mut text = String::new();
                self.stdin.read_to_string(&mut text).map_err(Failure::Io)?;
                Ok(NetDocument::parse(&text)?)
            }
        }
    }

    fn bases(&self, m: usize) -> (BaseValue, BaseValue) {
        let (b, w) = BaseValue::default_pair(m);
        (
            self.global.base_black.clone().unwrap_or(b),
            self.global.base_white.clone().unwrap_or(w),
        )
    }

    fn check_output(&self, rep: &CheckReport) -> Output {
        let text = match self.global.format {
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&rep.to_json()).expect("serializable")),
            Format::Text => rep.to_text(),
        };
        let code = if rep.pass {
            EXIT_PASS
        } else if rep.degenerate {
            EXIT_DEGENERATE
        } else {
            EXIT_FAIL
        };
        Output { text, code }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let Ok(tol) = Tolerances::new(cli.global.tol_incidence, cli.global.tol_product) else {
        let _ = writeln!(stderr, "error[Usage]: tolerances must be positive and finite");
        return EXIT_INPUT;
    };
    let mut ctx = Context {
        global: &cli.global,
        tol,
        stdin,
    };
    let result = execute(&cli.command, &mut ctx).and_then(|out| {
        match &cli.global.output {
            Some(path) => std::fs::write(path, &out.text).map_err(|source| {
                Failure::Doc(DocError::Io {
                    path: path.clone(),
                    source,
                })
            })?,
            None => stdout.write_all(out.text.as_bytes()).map_err(Failure::Io)?,
        }
        Ok(out.code)
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = match cli.global.format {
                Format::Json => writeln!(
                    stderr,
                    "{}",
                    json!({ "status": "error", "category": f.category(), "message": f.message() })
                ),
                Format::Text => writeln!(stderr, "error[{}]: {}", f.category(), f.message()),
            };
            f.exit_code()
        }
    }
}

fn execute(cmd: &Command, ctx: &mut Context) -> Result<Output, Failure> {
    match cmd {
        Command::Generate { kind, args } => generate(*kind, args, &ctx.tol).and_then(|d| Output::document(&d)),
        Command::Check { what, input } => {
            let net = ctx.load(input)?.net()?;
            let rep = match what {
                CheckKind::Koenigs => report::koenigs(&net, &ctx.tol)?,
                CheckKind::Circular => report::circular(&net, &ctx.tol),
                CheckKind::Isothermic => report::isothermic(&net, &ctx.tol)?,
                CheckKind::Qnet => report::qnet(&net, &ctx.tol),
                CheckKind::Geometric => report::geometric(&net, &ctx.tol)?,
            };
            Ok(ctx.check_output(&rep))
        }
        Command::Dualize { input } => {
            let net = ctx.load(input)?.net()?;
            let (b, w) = ctx.bases(net.m());
            let kd = integrate_nu(&net, &b, &w, &ctx.tol)?;
            let origin = vec![0; net.m()];
            let dual = dualize_net(&net, &kd, (&origin, net.point(0).clone()), &ctx.tol)?;
            Output::document(&NetDocument::from_net(&dual.net).with_nu(&dual.nu))
        }
        Command::Christoffel { input, limit_signs } => {
            let net = ctx.load(input)?.net()?;
            let base = net.point(0).clone();
            let iso = IsothermicNet::from_net(net, &ctx.tol)?;
            let origin = vec![0; iso.net.m()];
            let dual = christoffel(&iso, (&origin, base), *limit_signs, &ctx.tol)?;
            let (s, labels) = dual.displayed()?;
            Output::document(&NetDocument::from_net(&dual.net).with_s(&s).with_labels(&labels))
        }
        Command::Lift { kind, input } => {
            let net = ctx.load(input)?.net()?;
            let doc = match kind {
                LiftTarget::Homogeneous => {
                    let (b, w) = ctx.bases(net.m());
                    let kd = integrate_nu(&net, &b, &w, &ctx.tol)?;
                    let y = moutard_lift(&net, &kd, &ctx.tol)?;
                    NetDocument::from_net(&net).with_nu(&kd.nu).with_moutard(&y)
                }
                LiftTarget::Lightcone => {
                    let iso = IsothermicNet::from_net(net, &ctx.tol)?;
                    let lift = lightcone_lift(&iso, &ctx.tol)?;
                    NetDocument::from_net(&iso.net)
                        .with_s(&iso.metric)
                        .with_labels(&iso.labels)
                        .with_moutard(&lift.y)
                }
            };
            Output::document(&doc)
        }
        Command::Report { input } => {
            let net = ctx.load(input)?.net()?;
            let value = report::full_report(&net, &ctx.tol);
            Ok(Output {
                text: format!("{}\n", serde_json::to_string_pretty(&value).expect("serializable")),
                code: EXIT_PASS,
            })
        }
        Command::Export { input } => {
            let doc = ctx.load(input)?;
            Ok(Output {
                text: obj_string(&doc)?,
                code: EXIT_PASS,
            })
        }
    }
}

fn generate(kind: GenerateKind, args: &GenerateArgs, tol: &Tolerances) -> Result<NetDocument, Failure> {
    let cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| DocError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str::<GenerateConfig>(&text).map_err(|e| DocError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => GenerateConfig::default(),
    };
    let extents = args
        .extents
        .clone()
        .or(cfg.extents)
        .ok_or_else(|| Failure::Usage("--extents is required (flag or config)".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let ambient_dim = args.ambient_dim.or(cfg.ambient_dim);
    let wiggle = args.wiggle.or(cfg.wiggle);
    let label_ranges = if args.label_range.is_empty() { cfg.label_ranges } else { Some(args.label_range.clone()) };
    let mut rng = rng_from_seed(seed);
    match kind {
        GenerateKind::Grid => {
            let dim = ambient_dim.unwrap_or(extents.len().max(3));
            Ok(NetDocument::from_net(&QNet::grid(extents, dim)?))
        }
        GenerateKind::Moutard => {
            let mut p = MoutardParams::new(extents);
            p.ambient_dim = ambient_dim.unwrap_or(p.ambient_dim);
            p.wiggle = wiggle.unwrap_or(p.wiggle);
            p.nu_range = args.nu_range.or(cfg.nu_range).unwrap_or(p.nu_range);
            p.coefficient_range = args.coefficient_range.or(cfg.coefficient_range);
            let g = moutard_net(&mut rng, &p, tol)?;
            Ok(NetDocument::from_net(&g.net).with_nu(&g.nu).with_moutard(&g.moutard))
        }
        GenerateKind::ThreeLeg => {
            let mut p = ThreeLegParams::new(extents);
            p.ambient_dim = ambient_dim.unwrap_or(p.ambient_dim);
            p.wiggle = wiggle.unwrap_or(p.wiggle);
            if let Some(r) = label_ranges {
                p.label_ranges = r
                    .try_into()
                    .map_err(|_| Failure::Usage("three-leg nets take exactly two label ranges".into()))?;
            }
            let iso = three_leg_net(&mut rng, &p, tol)?;
            Ok(NetDocument::from_net(&iso.net).with_s(&iso.metric).with_labels(&iso.labels))
        }
        GenerateKind::Lightcone => {
            let mut p = LightconeParams::new(extents);
            p.ambient_dim = ambient_dim.unwrap_or(p.ambient_dim);
            if let Some(w) = wiggle {
                p.wiggle = w;
                p.m3_wiggle = w;
            }
            if let Some(r) = label_ranges {
                p.label_ranges = r;
            }
            let ev = lightcone_net(&mut rng, &p, tol)?;
            Ok(NetDocument::from_net(&ev.iso.net)
                .with_s(&ev.iso.metric)
                .with_labels(&ev.iso.labels)
                .with_moutard(&ev.y))
        }
    }
}
