//! Runtime and artifact comparison of the implemented smoothers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::bilateral::{blf_grid, GridParams, RangeSpatialParams};
use crate::corpus::{natural, NATURAL_SEED};
use crate::domain_transform::{nc_filter, DtParams};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::metrics::{gradient_reversal_count, max_grad_ratio, DEFAULT_REVERSAL_TAU};
use crate::pipelines::{smooth, SmootherSpec};
use crate::solver::{SolveParams, WlsParams};

pub const CSV_HEADER: &str = "method,width,height,seconds,reversals,max_grad_ratio";

/// Side of the square image the artifact metrics are measured on.
pub const METRIC_SIZE: usize = 256;

/// Detail boost used for the reversal count.
pub const METRIC_BOOST: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMethod {
    Ls,
    /// LS without reflective padding.
    LsNoPad,
    Wls,
    /// Bilateral grid applied directly to the image.
    Blf,
    /// Domain transform applied directly to the image.
    Nc,
    BlfLs,
    NcLs,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 7] = [
        BenchMethod::Ls,
        BenchMethod::LsNoPad,
        BenchMethod::Wls,
        BenchMethod::Blf,
        BenchMethod::Nc,
        BenchMethod::BlfLs,
        BenchMethod::NcLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Ls => "ls",
            BenchMethod::LsNoPad => "ls-nopad",
            BenchMethod::Wls => "wls",
            BenchMethod::Blf => "blf",
            BenchMethod::Nc => "nc",
            BenchMethod::BlfLs => "blf-ls",
            BenchMethod::NcLs => "nc-ls",
        }
    }

    /// Smooths `g` with this method's benchmark parameters.
    pub fn run(self, g: &PlanarImage) -> Result<PlanarImage> {
        let blf = RangeSpatialParams::new(12.0, 0.08)?;
        let dt = DtParams::new(12.0, 0.05)?;
        match self {
            BenchMethod::Ls => smooth(g, &SmootherSpec::ls(SolveParams::default().lambda)),
            BenchMethod::LsNoPad => smooth(g, &SmootherSpec::ls(SolveParams::default().lambda).with_pad(0)),
            BenchMethod::Wls => smooth(g, &SmootherSpec::wls(WlsParams::default())),
            BenchMethod::Blf => {
                let gp = GridParams::canonical(&blf);
                let planes = (0..g.channels())
                    .map(|c| {
                        let ch = g.channel_image(c);
                        Ok(blf_grid(&ch, &ch, &blf, &gp)?.into_data())
                    })
                    .collect::<Result<Vec<_>>>()?;
                PlanarImage::from_planes(g.width(), g.height(), planes)
            }
            BenchMethod::Nc => nc_filter(g, g, &dt),
            BenchMethod::BlfLs => smooth(g, &SmootherSpec::blf_ls(12.0, 0.04)),
            BenchMethod::NcLs => smooth(g, &SmootherSpec::nc_ls(dt)),
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = BenchMethod::ALL.iter().map(|m| m.name()).collect();
            Error::Parameter(format!("unknown method {s:?}, expected one of {}", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub width: usize,
    pub height: usize,
    /// Median wall-clock time over the timed runs.
    pub seconds: f64,
    pub reversals: usize,
    pub max_grad_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{},{:.6}",
                r.method, r.width, r.height, r.seconds, r.reversals, r.max_grad_ratio
            )?;
        }
        Ok(())
    }

    pub fn row(&self, method: BenchMethod, size: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.width == size && r.height == size)
    }
}

/// Median of `k` timed runs of `f` after one untimed warm-up.
pub fn median_seconds(k: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(k);
    for _ in 0..k {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
    }
    times.sort_by(f64::total_cmp);
    Ok(times[k / 2])
}

/// Reversal count of `METRIC_BOOST` detail enhancement and the max-gradient
/// ratio of the smoothed result, both on the fixed metric image.
pub fn artifact_metrics(method: BenchMethod) -> Result<(usize, f64)> {
    let g = natural(METRIC_SIZE, METRIC_SIZE, NATURAL_SEED);
    let base = method.run(&g)?;
    let enhanced = g.zip_map(&base, |a, b| (a + METRIC_BOOST * (a - b)).clamp(0.0, 1.0))?;
    let reversals = gradient_reversal_count(&g, &enhanced, DEFAULT_REVERSAL_TAU)?;
    Ok((reversals, max_grad_ratio(&g, &base)?))
}

/// Times every method on square 3-channel natural images of each size.
pub fn run_bench(sizes: &[usize], methods: &[BenchMethod], k: usize) -> Result<BenchReport> {
    if k < 3 {
        return Err(Error::Parameter(format!("need at least 3 timed runs, got {k}")));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::Parameter(format!("benchmark size must be at least 2, got {s}")));
    }
    let mut report = BenchReport::default();
    for &method in methods {
        let (reversals, ratio) = artifact_metrics(method)?;
        for &size in sizes {
            let g = natural(size, size, NATURAL_SEED);
            let seconds = median_seconds(k, || method.run(&g).map(drop))?;
            report.rows.push(BenchRow {
                method,
                width: size,
                height: size,
                seconds,
                reversals,
                max_grad_ratio: ratio,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in BenchMethod::ALL {
            assert_eq!(m.name().parse::<BenchMethod>().unwrap(), m);
        }
        assert!("gf".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn report_rows_and_csv() {
        let report = run_bench(&[24], &[BenchMethod::Ls, BenchMethod::Nc], 3).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.seconds > 0.0));
        let ls = report.row(BenchMethod::Ls, 24).unwrap();
        assert!(ls.max_grad_ratio.is_finite());
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("ls,24,24,"));
        assert_eq!(lines[2].split(',').count(), 6);
    }

    #[test]
    fn rejects_too_few_runs() {
        assert!(run_bench(&[16], &[BenchMethod::Ls], 2).is_err());
        assert!(run_bench(&[1], &[BenchMethod::Ls], 3).is_err());
    }
}
