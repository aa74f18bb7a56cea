//! Plot-ready series extracted from a results table.
//!
//! Each figure needs a fixed set of sweep points; a table that lacks any
//! of them is rejected with the full list of missing points.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use relaysim_core::Architecture;

use crate::error::{CliError, Result};

/// Device counts on the x axis of the throughput-versus-N figures.
pub const N_AXIS: [usize; 4] = [50, 100, 200, 500];
/// Relay counts on the x axis of the throughput-versus-R figure.
pub const R_AXIS: [usize; 5] = [1, 2, 5, 8, 16];
/// One curve per device count in the throughput-versus-R figure.
pub const R_FIGURE_N: [usize; 3] = [50, 200, 500];
/// Device counts of the energy table.
pub const ENERGY_N: [usize; 2] = [50, 500];
const ENERGY_R: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    /// Throughput versus N, 1 km area.
    ThroughputSmallArea,
    /// Throughput versus N, 5 km area.
    ThroughputLargeArea,
    /// Throughput versus R, 5 km area.
    ThroughputVsRelays,
    /// Mean ED energy, 5 km area, R = 5.
    EnergyTable,
}

impl FromStr for FigureId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig3" | "3" => Ok(FigureId::ThroughputSmallArea),
            "fig4" | "4" => Ok(FigureId::ThroughputLargeArea),
            "fig5" | "5" => Ok(FigureId::ThroughputVsRelays),
            "table3" => Ok(FigureId::EnergyTable),
            other => Err(CliError::Config(format!(
                "unknown figure '{other}' (expected fig3, fig4, fig5 or table3)"
            ))),
        }
    }
}

/// The subset of a results row the figures use.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub architecture: Architecture,
    pub n_eds: usize,
    pub n_relays: usize,
    pub area_side: f64,
    pub s_mean: f64,
    pub s_ci95: f64,
    pub energy_mean: f64,
    pub energy_ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub ci: f64,
}

/// Reads a results table written by the experiment runner.
pub fn read_table(input: impl Read) -> Result<Vec<TableRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("results table has no '{name}' column")))
    };
    let cols = [
        column("architecture")?,
        column("N")?,
        column("R")?,
        column("A_L")?,
        column("S_mean")?,
        column("S_ci95")?,
        column("ed_energy_mean_mJ")?,
        column("ed_energy_ci95")?,
    ];
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |c: usize| record.get(c).unwrap_or("");
        let num = |c: usize| {
            field(c).parse::<f64>().map_err(|_| {
                CliError::Config(format!("line {line}: '{}' is not a number", field(c)))
            })
        };
        let architecture: Architecture = field(cols[0])
            .parse()
            .map_err(|e| CliError::Config(format!("line {line}: {e}")))?;
        rows.push(TableRow {
            architecture,
            n_eds: num(cols[1])? as usize,
            n_relays: num(cols[2])? as usize,
            area_side: num(cols[3])?,
            s_mean: num(cols[4])?,
            s_ci95: num(cols[5])?,
            energy_mean: num(cols[6])?,
            energy_ci95: num(cols[7])?,
        });
    }
    Ok(rows)
}

struct Need<'a> {
    rows: &'a [TableRow],
    missing: Vec<String>,
}

impl<'a> Need<'a> {
    fn find(&mut self, arch: Architecture, n: usize, r: usize, area: f64) -> Option<&'a TableRow> {
        let hit = self.rows.iter().find(|row| {
            row.architecture == arch && row.n_eds == n && row.n_relays == r && row.area_side == area
        });
        if hit.is_none() {
            self.missing
                .push(format!("architecture={arch} N={n} R={r} A_L={area}"));
        }
        hit
    }
}

impl fmt::Display for SeriesPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{:.6},{:.6}", self.series, self.x, self.y, self.ci)
    }
}

fn throughput_vs_n(need: &mut Need, area: f64) -> Vec<SeriesPoint> {
    let mut relay_counts: Vec<usize> = need
        .rows
        .iter()
        .filter(|r| r.architecture == Architecture::Proposal && r.area_side == area)
        .map(|r| r.n_relays)
        .collect();
    relay_counts.sort_unstable();
    relay_counts.dedup();
    if relay_counts.is_empty() {
        need.missing
            .push(format!("architecture=proposal with any R at A_L={area}"));
    }
    let mut curves: Vec<(String, Architecture, usize)> = vec![
        ("subghz".into(), Architecture::SubGhzOnly, 0),
        ("24ghz".into(), Architecture::TwoPointFourOnly, 0),
    ];
    curves.extend(
        relay_counts
            .iter()
            .map(|&r| (format!("proposal_R{r}"), Architecture::Proposal, r)),
    );

    let mut points = Vec::new();
    for (series, arch, r) in curves {
        for n in N_AXIS {
            if let Some(row) = need.find(arch, n, r, area) {
                points.push(SeriesPoint {
                    series: series.clone(),
                    x: n as f64,
                    y: row.s_mean,
                    ci: row.s_ci95,
                });
            }
        }
    }
    points
}

/// Extracts the series of one figure.
pub fn emit_figure_data(rows: &[TableRow], figure: FigureId) -> Result<Vec<SeriesPoint>> {
    let mut need = Need {
        rows,
        missing: Vec::new(),
    };
    let points = match figure {
        FigureId::ThroughputSmallArea => throughput_vs_n(&mut need, 1000.0),
        FigureId::ThroughputLargeArea => throughput_vs_n(&mut need, 5000.0),
        FigureId::ThroughputVsRelays => {
            let mut points = Vec::new();
            for n in R_FIGURE_N {
                for r in R_AXIS {
                    if let Some(row) = need.find(Architecture::Proposal, n, r, 5000.0) {
                        points.push(SeriesPoint {
                            series: format!("N{n}"),
                            x: r as f64,
                            y: row.s_mean,
                            ci: row.s_ci95,
                        });
                    }
                }
            }
            points
        }
        FigureId::EnergyTable => {
            let mut points = Vec::new();
            for arch in Architecture::ALL {
                let r = if arch == Architecture::Proposal {
                    ENERGY_R
                } else {
                    0
                };
                for n in ENERGY_N {
                    if let Some(row) = need.find(arch, n, r, 5000.0) {
                        points.push(SeriesPoint {
                            series: arch.name().into(),
                            x: n as f64,
                            y: row.energy_mean,
                            ci: row.energy_ci95,
                        });
                    }
                }
            }
            points
        }
    };
    if need.missing.is_empty() {
        Ok(points)
    } else {
        Err(CliError::Config(format!(
            "results table is missing sweep points:\n  {}",
            need.missing.join("\n  ")
        )))
    }
}

pub fn write_series(points: &[SeriesPoint], mut out: impl Write) -> Result<()> {
    let io = |e: std::io::Error| CliError::Runtime(format!("cannot write figure data: {e}"));
    writeln!(out, "series,x,y,ci").map_err(io)?;
    for p in points {
        writeln!(out, "{p}").map_err(io)?;
    }
    out.flush().map_err(io)
}
