//! Dice evaluation over the clinical tumor regions.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask, TissueClass};

/// Clinically reported tumor regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionKind {
    /// Every tumor label.
    Whole,
    /// Every tumor label except edema.
    Core,
    /// Enhancing tumor only.
    Active,
}

impl RegionKind {
    pub const ALL: [RegionKind; 3] = [RegionKind::Whole, RegionKind::Core, RegionKind::Active];

    pub fn classes(self) -> &'static [TissueClass] {
        use TissueClass::*;
        match self {
            RegionKind::Whole => &[Necrosis, Edema, NonEnhancing, Enhancing],
            RegionKind::Core => &[Necrosis, NonEnhancing, Enhancing],
            RegionKind::Active => &[Enhancing],
        }
    }

    pub fn contains(self, label: u8) -> bool {
        self.classes().iter().any(|c| c.label() == label)
    }

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Whole => "whole",
            RegionKind::Core => "core",
            RegionKind::Active => "active",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionKind::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown region '{s}'")))
    }
}

pub fn region_mask(labels: &LabelVolume, region: RegionKind) -> Mask {
    let bits = labels.labels().iter().map(|&l| region.contains(l)).collect();
    Mask::new(labels.dims(), bits).expect("one bit per voxel")
}

/// Set sizes entering the Dice ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct DiceCounts {
    pub intersection: usize,
    pub pred: usize,
    pub reference: usize,
}

impl DiceCounts {
    /// `2 |P n R| / (|P| + |R|)`, or `None` when both sets are empty.
    pub fn score(&self) -> Option<f64> {
        let denom = self.pred + self.reference;
        (denom > 0).then(|| (2 * self.intersection) as f64 / denom as f64)
    }
}

pub fn dice_counts(pred: &Mask, reference: &Mask) -> Result<DiceCounts> {
    if pred.dims() != reference.dims() {
        return Err(Error::invalid(format!(
            "mask dims differ: prediction {} vs reference {}",
            pred.dims(),
            reference.dims()
        )));
    }
    let mut c = DiceCounts::default();
    for (&p, &r) in pred.bits().iter().zip(reference.bits()) {
        c.pred += p as usize;
        c.reference += r as usize;
        c.intersection += (p && r) as usize;
    }
    Ok(c)
}

/// Dice coefficient; `None` (undefined) iff both masks are empty.
pub fn dice(pred: &Mask, reference: &Mask) -> Result<Option<f64>> {
    dice_counts(pred, reference).map(|c| c.score())
}

/// Dice per region for one case, indexed by [`RegionKind`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CaseDice {
    scores: [Option<f64>; 3],
}

impl CaseDice {
    pub fn new(whole: Option<f64>, core: Option<f64>, active: Option<f64>) -> Self {
        CaseDice {
            scores: [whole, core, active],
        }
    }

    pub fn get(&self, region: RegionKind) -> Option<f64> {
        self.scores[region.index()]
    }

    pub fn set(&mut self, region: RegionKind, score: Option<f64>) {
        self.scores[region.index()] = score;
    }
}

pub fn evaluate_case(pred: &LabelVolume, reference: &LabelVolume) -> Result<CaseDice> {
    if pred.dims() != reference.dims() {
        return Err(Error::invalid(format!(
            "label dims differ: prediction {} vs reference {}",
            pred.dims(),
            reference.dims()
        )));
    }
    let mut out = CaseDice::default();
    for region in RegionKind::ALL {
        let c = dice_counts(&region_mask(pred, region), &region_mask(reference, region))?;
        out.set(region, c.score());
    }
    Ok(out)
}

/// Distribution summary for one region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSummary {
    pub region: RegionKind,
    /// `None` when no case has a defined score.
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub defined: usize,
    pub undefined: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiceReport {
    pub cases: Vec<(String, CaseDice)>,
    pub summary: Vec<RegionSummary>,
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Per-region median and quartiles over defined scores; undefined scores
/// are excluded and counted.
pub fn aggregate(cases: Vec<(String, CaseDice)>) -> Result<DiceReport> {
    if cases.is_empty() {
        return Err(Error::invalid("aggregate needs at least one case"));
    }
    let summary = RegionKind::ALL
        .into_iter()
        .map(|region| {
            let mut vals: Vec<f64> = cases.iter().filter_map(|(_, c)| c.get(region)).collect();
            vals.sort_by(f64::total_cmp);
            RegionSummary {
                region,
                median: quantile_sorted(&vals, 0.5),
                q1: quantile_sorted(&vals, 0.25),
                q3: quantile_sorted(&vals, 0.75),
                defined: vals.len(),
                undefined: cases.len() - vals.len(),
            }
        })
        .collect();
    Ok(DiceReport { cases, summary })
}

/// One `case_id,region,dice` row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub case_id: String,
    pub region: RegionKind,
    pub dice: Option<f64>,
}

pub const REPORT_HEADER: &str = "case_id,region,dice";
pub const SUMMARY_HEADER: &str = "region,median,q1,q3,undefined_count";
pub const HIST_HEADER: &str = "region,bin_lo,bin_hi,count";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn check_case_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', '\n', '\r', '"']) {
        return Err(Error::invalid(format!(
            "case id {id:?} must be non-empty without commas, quotes or newlines"
        )));
    }
    Ok(())
}

pub fn report_rows(cases: &[(String, CaseDice)]) -> Vec<ReportRow> {
    cases
        .iter()
        .flat_map(|(id, c)| {
            RegionKind::ALL.into_iter().map(move |region| ReportRow {
                case_id: id.clone(),
                region,
                dice: c.get(region),
            })
        })
        .collect()
}

pub fn write_report_csv(mut w: impl Write, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.case_id, r.region, fmt_opt(r.dice))?;
    }
    Ok(())
}

/// Checks case ids, then writes the per-case report.
pub fn write_case_report(w: impl Write, cases: &[(String, CaseDice)]) -> Result<()> {
    for (id, _) in cases {
        check_case_id(id)?;
    }
    write_report_csv(w, &report_rows(cases)).map_err(|e| Error::io("report", e))
}

pub fn write_summary_csv(mut w: impl Write, summary: &[RegionSummary]) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in summary {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.region,
            fmt_opt(s.median),
            fmt_opt(s.q1),
            fmt_opt(s.q3),
            s.undefined
        )?;
    }
    Ok(())
}

/// Parses a report written by [`write_report_csv`].
pub fn read_report_csv(r: impl BufRead) -> Result<Vec<ReportRow>> {
    let mut lines = r.lines();
    let mut offset = 0u64;
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io("report", e))?,
        None => return Err(Error::format(0, "empty report, expected header")),
    };
    if header.trim_end_matches('\r') != REPORT_HEADER {
        return Err(Error::format(0, format!("report header must be '{REPORT_HEADER}'")));
    }
    offset += header.len() as u64 + 1;
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("report", e))?;
        let text = line.trim_end_matches('\r');
        if text.is_empty() {
            offset += line.len() as u64 + 1;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                offset,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        check_case_id(fields[0]).map_err(|e| Error::format(offset, e.to_string()))?;
        let region = fields[1]
            .parse::<RegionKind>()
            .map_err(|e| Error::format(offset, e.to_string()))?;
        let dice = match fields[2] {
            "NA" => None,
            s => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::format(offset, format!("bad dice value '{s}'")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::format(offset, format!("dice {v} outside [0, 1]")));
                }
                Some(v)
            }
        };
        rows.push(ReportRow {
            case_id: fields[0].to_string(),
            region,
            dice,
        });
        offset += line.len() as u64 + 1;
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistBin {
    pub region: RegionKind,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of defined scores on `[0, 1]` per region; the last
/// bin is closed on the right.
pub fn histogram(rows: &[ReportRow], bins: usize) -> Result<Vec<HistBin>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let mut out = Vec::with_capacity(3 * bins);
    for region in RegionKind::ALL {
        let mut counts = vec![0usize; bins];
        for r in rows.iter().filter(|r| r.region == region) {
            if let Some(d) = r.dice {
                let b = ((d * bins as f64).floor() as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        for (b, count) in counts.into_iter().enumerate() {
            out.push(HistBin {
                region,
                lo: b as f64 / bins as f64,
                hi: (b + 1) as f64 / bins as f64,
                count,
            });
        }
    }
    Ok(out)
}

pub fn write_hist_csv(mut w: impl Write, bins: &[HistBin]) -> std::io::Result<()> {
    writeln!(w, "{HIST_HEADER}")?;
    for b in bins {
        writeln!(w, "{},{},{},{}", b.region, b.lo, b.hi, b.count)?;
    }
    Ok(())
}
