//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a file cannot be read or written or a
//! computation fails, 2 for usage errors (bad flags or parameter values).

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::applications::{
    clipart_cleanup, clipart_defaults, detail_enhance, flash_no_flash, texture_removal, texture_removal_defaults,
    tonemap_hdr, EnhanceParams, TonemapParams,
};
use crate::bench::{run_bench, BenchMethod, BenchReport};
use crate::domain_transform::DtParams;
use crate::error::{Error, Result};
use crate::io::{load, save};
use crate::pipelines::{smooth, RollingParams, SmootherSpec};
use crate::solver::{SolveParams, WlsParams};

pub const THREADS_ENV: &str = "EPSLS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "epsls", version, about = "Edge-preserving image smoothing")]
pub struct CliConfig {
    /// Worker threads; falls back to EPSLS_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smooth an image.
    Smooth {
        #[command(flatten)]
        smoother: SmootherArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Boost the detail layer of an image.
    Enhance {
        #[arg(long, default_value_t = 5.0)]
        boost: f64,
        #[command(flatten)]
        smoother: SmootherArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Tone-map a PFM or Radiance HDR image.
    Tonemap {
        /// Decades of range kept in the base layer.
        #[arg(long, default_value_t = 1.0)]
        contrast: f64,
        #[arg(long, default_value_t = 0.6)]
        saturation: f64,
        #[command(flatten)]
        smoother: SmootherArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Smooth the input with edges taken from a guide (e.g. a flash photo).
    Joint {
        #[arg(long)]
        guide: PathBuf,
        #[command(flatten)]
        smoother: SmootherArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Remove small-scale texture with rolling NC-LS.
    Texture {
        #[command(flatten)]
        rolling: RollingArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Suppress compression ringing around clip-art edges.
    Clipart {
        #[command(flatten)]
        rolling: RollingArgs,
        #[command(flatten)]
        files: Files,
    },
    /// Time the smoothers and print a CSV table.
    Bench {
        /// Square image sides.
        #[arg(long, value_delimiter = ',', default_value = "1024")]
        sizes: Vec<usize>,
        /// Methods among ls, ls-nopad, wls, blf, nc, blf-ls, nc-ls.
        #[arg(long, value_delimiter = ',', default_value = "ls,ls-nopad,wls,blf,nc,blf-ls,nc-ls")]
        methods: Vec<String>,
        /// Timed runs per method and size.
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ls,
    Wls,
    BlfLs,
    NcLs,
}

#[derive(Debug, Args)]
pub struct SmootherArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::BlfLs)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 12.0)]
    pub sigma_s: f64,
    #[arg(long, default_value_t = 0.04)]
    pub sigma_r: f64,
    /// Data weight of the LS solves; smoothness weight of WLS.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Reflective padding in pixels.
    #[arg(long, default_value_t = 16)]
    pub pad: usize,
    /// WLS gradient exponent.
    #[arg(long, default_value_t = 1.2)]
    pub alpha: f64,
}

impl SmootherArgs {
    pub fn spec(&self) -> Result<SmootherSpec> {
        let solve = SolveParams::new(self.lambda.unwrap_or(SolveParams::default().lambda), self.pad)?;
        let spec = match self.method {
            MethodArg::Ls => SmootherSpec::ls(solve.lambda),
            MethodArg::Wls => SmootherSpec::wls(WlsParams {
                lambda: self.lambda.unwrap_or(WlsParams::default().lambda),
                alpha: self.alpha,
                ..WlsParams::default()
            }),
            MethodArg::BlfLs => SmootherSpec::blf_ls(self.sigma_s, self.sigma_r).with_lambda(solve.lambda),
            MethodArg::NcLs => {
                SmootherSpec::nc_ls(DtParams::new(self.sigma_s, self.sigma_r)?).with_lambda(solve.lambda)
            }
        };
        let spec = spec.with_pad(solve.pad);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct RollingArgs {
    #[arg(long)]
    pub sigma_s: Option<f64>,
    #[arg(long)]
    pub sigma_r: Option<f64>,
    /// Rolling iterations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian sigma of the initial guide.
    #[arg(long)]
    pub init_sigma: Option<f64>,
}

impl RollingArgs {
    fn resolve(&self, (dt, rp): (DtParams, RollingParams)) -> Result<(DtParams, RollingParams)> {
        let dt = DtParams {
            sigma_s: self.sigma_s.unwrap_or(dt.sigma_s),
            sigma_r: self.sigma_r.unwrap_or(dt.sigma_r),
            ..dt
        };
        dt.validate()?;
        let rp = RollingParams::new(self.n.unwrap_or(rp.n), self.init_sigma.unwrap_or(rp.init_sigma))?;
        Ok((dt, rp))
    }
}

#[derive(Debug, Args)]
pub struct Files {
    pub input: PathBuf,
    pub output: PathBuf,
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?,
            ),
            _ => None,
        },
    };
    match n {
        Some(0) => Err("thread count must be positive".into()),
        n => Ok(n),
    }
}

/// Parameter checks that must pass before any file is touched.
enum Prepared {
    Smooth(SmootherSpec),
    Enhance(EnhanceParams),
    Tonemap(TonemapParams),
    Joint(SmootherSpec, PathBuf),
    Texture(DtParams, RollingParams),
    Clipart(DtParams, RollingParams),
    Bench(Vec<BenchMethod>),
}

fn prepare(cmd: &Command) -> Result<Prepared> {
    Ok(match cmd {
        Command::Smooth { smoother, .. } => Prepared::Smooth(smoother.spec()?),
        Command::Enhance { boost, smoother, .. } => Prepared::Enhance(EnhanceParams::new(*boost, smoother.spec()?)?),
        Command::Tonemap {
            contrast,
            saturation,
            smoother,
            ..
        } => {
            let mut p = TonemapParams::new(smoother.spec()?);
            p.target_contrast = *contrast;
            p.saturation = *saturation;
            p.validate()?;
            Prepared::Tonemap(p)
        }
        Command::Joint { guide, smoother, .. } => Prepared::Joint(smoother.spec()?, guide.clone()),
        Command::Texture { rolling, .. } => {
            let (dt, rp) = rolling.resolve(texture_removal_defaults())?;
            Prepared::Texture(dt, rp)
        }
        Command::Clipart { rolling, .. } => {
            let (dt, rp) = rolling.resolve(clipart_defaults())?;
            Prepared::Clipart(dt, rp)
        }
        Command::Bench { sizes, methods, k, .. } => {
            if *k < 3 {
                return Err(Error::Parameter(format!("-k must be at least 3, got {k}")));
            }
            if let Some(s) = sizes.iter().find(|&&s| s < 2) {
                return Err(Error::Parameter(format!("benchmark size must be at least 2, got {s}")));
            }
            Prepared::Bench(methods.iter().map(|m| m.parse()).collect::<Result<_>>()?)
        }
    })
}

fn files(cmd: &Command) -> Option<&Files> {
    match cmd {
        Command::Smooth { files, .. }
        | Command::Enhance { files, .. }
        | Command::Tonemap { files, .. }
        | Command::Joint { files, .. }
        | Command::Texture { files, .. }
        | Command::Clipart { files, .. } => Some(files),
        Command::Bench { .. } => None,
    }
}

fn write_csv(report: &BenchReport, csv: Option<&Path>) -> Result<()> {
    match csv {
        Some(path) => {
            let io = |source| Error::Io {
                path: path.to_path_buf(),
                source,
            };
            let mut file = File::create(path).map_err(io)?;
            report.write_csv(&mut file).map_err(io)?;
            file.flush().map_err(io)
        }
        None => report.write_csv(std::io::stdout().lock()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn execute(cmd: &Command, prepared: Prepared) -> Result<()> {
    if let (Prepared::Bench(methods), Command::Bench { sizes, k, csv, .. }) = (&prepared, cmd) {
        let report = run_bench(sizes, methods, *k)?;
        return write_csv(&report, csv.as_deref());
    }
    let files = files(cmd).expect("file-based subcommand");
    let input = load(&files.input)?;
    let output = match prepared {
        Prepared::Smooth(spec) => smooth(&input, &spec)?,
        Prepared::Enhance(p) => detail_enhance(&input, &p)?,
        Prepared::Tonemap(p) => tonemap_hdr(&input, &p)?,
        Prepared::Joint(spec, guide) => flash_no_flash(&input, &load(&guide)?, &spec)?,
        Prepared::Texture(dt, rp) => texture_removal(&input, &dt, &rp)?,
        Prepared::Clipart(dt, rp) => clipart_cleanup(&input, &dt, &rp)?,
        Prepared::Bench(_) => unreachable!("handled above"),
    };
    save(&output, &files.output)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Messages go to standard error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match CliConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count(config.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let prepared = match prepare(&config.command) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&config.command, prepared)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliConfig {
        CliConfig::try_parse_from(std::iter::once("epsls").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn smoother_flags_build_specs() {
        let c = parse(&[
            "smooth",
            "--method",
            "nc-ls",
            "--sigma-s",
            "8",
            "--lambda",
            "32",
            "a.png",
            "b.png",
        ]);
        let Command::Smooth { smoother, files } = &c.command else {
            panic!()
        };
        let spec = smoother.spec().unwrap();
        assert_eq!(spec.solve.lambda, 32.0);
        assert_eq!(spec.solve.pad, 16);
        assert_eq!(files.output, PathBuf::from("b.png"));
    }

    #[test]
    fn invalid_parameters_are_usage_errors() {
        assert_eq!(run_cli(["epsls", "smooth", "--sigma-s", "-1", "a.png", "b.png"]), 2);
        assert_eq!(run_cli(["epsls", "bench", "--methods", "gf"]), 2);
        assert_eq!(run_cli(["epsls", "bench", "-k", "1"]), 2);
        assert_eq!(run_cli(["epsls", "texture", "--n", "0", "a.png", "b.png"]), 2);
        assert_eq!(run_cli(["epsls", "frobnicate"]), 2);
        assert_eq!(run_cli(["epsls", "--threads", "0", "smooth", "a.png", "b.png"]), 2);
    }

    #[test]
    fn rolling_defaults_fill_missing_flags() {
        let c = parse(&["texture", "--n", "5", "a.png", "b.png"]);
        let Command::Texture { rolling, .. } = &c.command else {
            panic!()
        };
        let (dt, rp) = rolling.resolve(texture_removal_defaults()).unwrap();
        assert_eq!(rp.n, 5);
        assert_eq!(dt.sigma_s, texture_removal_defaults().0.sigma_s);
    }
}
