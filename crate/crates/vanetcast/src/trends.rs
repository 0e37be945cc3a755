//! Pass/fail evaluation of the comparison trends over a metrics CSV.
//!
//! The input is the full reference matrix: both protocols for every
//! (listeners, sessions) cell, possibly at several seeds per cell. Rules
//! that compare the protocols head to head pair rows seed by seed and
//! take the majority; level and shape rules use the per-cell mean across
//! seeds. Adjacent-step monotonicity rules allow 10% slack for noise.

use std::collections::BTreeMap;
use std::fmt;

use vanetcast_core::scenario::ProtocolKind;

use crate::report::ReportRow;

pub const LISTENER_STEPS: [u32; 4] = [10, 20, 40, 60];
pub const SESSION_STEPS: [u32; 3] = [5, 10, 20];

#[derive(Debug, Clone)]
pub struct TrendResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct TrendReport {
    pub trends: Vec<TrendResult>,
}

impl TrendReport {
    pub fn all_passed(&self) -> bool {
        self.trends.iter().all(|t| t.passed)
    }
}

impl fmt::Display for TrendReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.trends {
            writeln!(
                f,
                "{} {:<55} {}",
                if t.passed { "PASS" } else { "FAIL" },
                t.name,
                t.detail
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrendError {
    /// Cells with no usable data (or no seed shared by both protocols).
    IncompleteMatrix { missing: Vec<String> },
}

impl fmt::Display for TrendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrendError::IncompleteMatrix { missing } => {
                write!(f, "incomplete matrix: missing {}", missing.join(", "))
            }
        }
    }
}

impl std::error::Error for TrendError {}

/// Per-cell data: rows keyed by seed (falling back to arrival order so
/// hand-written CSVs without seed-bearing ids still work).
struct Cell {
    maodv: BTreeMap<u64, ReportRow>,
    puma: BTreeMap<u64, ReportRow>,
}

impl Cell {
    fn rows(&self, p: ProtocolKind) -> &BTreeMap<u64, ReportRow> {
        match p {
            ProtocolKind::Maodv => &self.maodv,
            ProtocolKind::Puma => &self.puma,
        }
    }

    fn mean(&self, p: ProtocolKind, f: impl Fn(&ReportRow) -> f64) -> f64 {
        let rows = self.rows(p);
        rows.values().map(f).sum::<f64>() / rows.len() as f64
    }

    /// Seed-paired comparison; true when `pred(maodv, puma)` holds for
    /// the majority of shared seeds.
    fn majority(&self, pred: impl Fn(&ReportRow, &ReportRow) -> bool) -> bool {
        let mut pairs = 0u32;
        let mut hits = 0u32;
        for (seed, m) in &self.maodv {
            if let Some(p) = self.puma.get(seed) {
                pairs += 1;
                if pred(m, p) {
                    hits += 1;
                }
            }
        }
        hits * 2 > pairs
    }

    fn shared_seeds(&self) -> usize {
        self.maodv.keys().filter(|s| self.puma.contains_key(s)).count()
    }
}

struct Grid {
    cells: BTreeMap<(u32, u32), Cell>,
}

impl Grid {
    fn build(rows: &[ReportRow]) -> Result<Grid, TrendError> {
        let mut cells: BTreeMap<(u32, u32), Cell> = BTreeMap::new();
        for &l in &LISTENER_STEPS {
            for &s in &SESSION_STEPS {
                cells.insert(
                    (l, s),
                    Cell {
                        maodv: BTreeMap::new(),
                        puma: BTreeMap::new(),
                    },
                );
            }
        }
        for (idx, row) in rows.iter().enumerate() {
            let Some(cell) = cells.get_mut(&(row.listeners, row.sessions)) else {
                // Rows outside the reference matrix carry no trend
                // information.
                continue;
            };
            let side = match row.protocol {
                ProtocolKind::Maodv => &mut cell.maodv,
                ProtocolKind::Puma => &mut cell.puma,
            };
            side.insert(row.seed().unwrap_or(u64::MAX - idx as u64), row.clone());
        }
        let mut missing = Vec::new();
        for (&(l, s), cell) in &cells {
            if cell.maodv.is_empty() {
                missing.push(format!("maodv l{l} s{s}"));
            }
            if cell.puma.is_empty() {
                missing.push(format!("puma l{l} s{s}"));
            }
            if !cell.maodv.is_empty() && !cell.puma.is_empty() && cell.shared_seeds() == 0 {
                missing.push(format!("l{l} s{s} (no seed present for both protocols)"));
            }
        }
        if missing.is_empty() {
            Ok(Grid { cells })
        } else {
            Err(TrendError::IncompleteMatrix { missing })
        }
    }

    fn cell(&self, l: u32, s: u32) -> &Cell {
        &self.cells[&(l, s)]
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn evaluate(rows: &[ReportRow]) -> Result<TrendReport, TrendError> {
    let grid = Grid::build(rows)?;
    let mut trends = Vec::new();

    // Throughput head to head at twenty listeners and above.
    {
        let mut failing = Vec::new();
        let mut worst: Option<(f64, u32, u32)> = None;
        for &l in &LISTENER_STEPS[1..] {
            for &s in &SESSION_STEPS {
                let cell = grid.cell(l, s);
                if !cell.majority(|m, p| p.throughput_kbps > m.throughput_kbps) {
                    failing.push(format!("l{l} s{s}"));
                }
                let ratio = cell.mean(ProtocolKind::Puma, |r| r.throughput_kbps)
                    / cell.mean(ProtocolKind::Maodv, |r| r.throughput_kbps);
                if worst.is_none_or(|(w, _, _)| ratio < w) {
                    worst = Some((ratio, l, s));
                }
            }
        }
        let (ratio, l, s) = worst.expect("matrix has cells");
        trends.push(TrendResult {
            name: "throughput: puma above maodv for 20+ listeners",
            passed: failing.is_empty(),
            detail: if failing.is_empty() {
                format!("slimmest mean ratio {ratio:.2}x at l{l} s{s}")
            } else {
                format!("maodv won in {}", failing.join(", "))
            },
        });
    }

    // Throughput growth from 10 to 60 listeners.
    {
        let mut ok = true;
        let mut parts = Vec::new();
        for &s in &SESSION_STEPS {
            let growth = |p: ProtocolKind| {
                grid.cell(60, s).mean(p, |r| r.throughput_kbps)
                    / grid.cell(10, s).mean(p, |r| r.throughput_kbps)
            };
            let gp = growth(ProtocolKind::Puma);
            let gm = growth(ProtocolKind::Maodv);
            if gp < 2.5 || gm >= gp {
                ok = false;
            }
            parts.push(format!("s{s}: puma {gp:.2}x vs maodv {gm:.2}x"));
        }
        trends.push(TrendResult {
            name: "throughput: puma scales at least 2.5x, faster than maodv",
            passed: ok,
            detail: parts.join("; "),
        });
    }

    // Routing load shed as the mesh densifies.
    {
        let mut ok = true;
        let mut worst_step = f64::NEG_INFINITY;
        let mut halves = Vec::new();
        for &s in &SESSION_STEPS {
            let series: Vec<f64> = LISTENER_STEPS
                .iter()
                .map(|&l| grid.cell(l, s).mean(ProtocolKind::Puma, |r| r.nrl))
                .collect();
            for pair in series.windows(2) {
                let step = pair[1] / pair[0];
                worst_step = worst_step.max(step);
                if step > 1.10 {
                    ok = false;
                }
            }
            let ratio = series[3] / series[0];
            if ratio >= 0.5 {
                ok = false;
            }
            halves.push(format!("s{s}: l60/l10 {ratio:.2}"));
        }
        trends.push(TrendResult {
            name: "nrl: puma non-increasing in listeners, l60 under half l10",
            passed: ok,
            detail: format!("worst adjacent step {worst_step:.2}; {}", halves.join("; ")),
        });
    }

    // Tree maintenance grows with churn.
    {
        let mut ok = true;
        let mut worst_step = f64::INFINITY;
        for &l in &LISTENER_STEPS {
            let series: Vec<f64> = SESSION_STEPS
                .iter()
                .map(|&s| grid.cell(l, s).mean(ProtocolKind::Maodv, |r| r.nrl))
                .collect();
            for pair in series.windows(2) {
                let step = pair[1] / pair[0];
                worst_step = worst_step.min(step);
                if step < 0.90 {
                    ok = false;
                }
            }
        }
        trends.push(TrendResult {
            name: "nrl: maodv non-decreasing in sessions at every listener count",
            passed: ok,
            detail: format!("worst adjacent step {worst_step:.2}"),
        });
    }

    // Delivery ratio head to head, and sane bounds.
    {
        let mut failing = Vec::new();
        for &l in &LISTENER_STEPS {
            for &s in &SESSION_STEPS {
                if !grid.cell(l, s).majority(|m, p| p.pdr > m.pdr) {
                    failing.push(format!("l{l} s{s}"));
                }
            }
        }
        let out_of_range = rows
            .iter()
            .filter(|r| !(r.pdr > 0.0 && r.pdr <= 1.0))
            .count();
        trends.push(TrendResult {
            name: "pdr: puma above maodv in every cell, all values in (0, 1]",
            passed: failing.is_empty() && out_of_range == 0,
            detail: if failing.is_empty() && out_of_range == 0 {
                String::from("all 12 cells")
            } else if out_of_range > 0 {
                format!("{out_of_range} rows out of (0, 1]")
            } else {
                format!("maodv won in {}", failing.join(", "))
            },
        });
    }

    // Delay: similar performance inside a plausible band.
    {
        let band = |r: &ReportRow| (0.020..=0.120).contains(&r.avg_eed_s);
        let outside = rows.iter().filter(|r| !band(r)).count();
        let gaps: Vec<f64> = grid
            .cells
            .values()
            .map(|cell| {
                (cell.mean(ProtocolKind::Puma, |r| r.avg_eed_s)
                    - cell.mean(ProtocolKind::Maodv, |r| r.avg_eed_s))
                .abs()
            })
            .collect();
        let med = median(gaps);
        trends.push(TrendResult {
            name: "delay: both within 20-120 ms, median gap under 15 ms",
            passed: outside == 0 && med < 0.015,
            detail: format!("{outside} rows out of band; median gap {:.1} ms", med * 1e3),
        });
    }

    Ok(TrendReport { trends })
}
