use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ExperimentReport;
use crate::datamodel::CmcResult;
use crate::error::Result;

/// Ranks shown in the summary tables.
pub const REPORT_RANKS: [usize; 5] = [1, 5, 10, 15, 20];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn pct(cmc: &CmcResult, rank: usize) -> String {
    cmc.rate_at(rank)
        .map(|v| format!("{:.2}%", 100.0 * v))
        .unwrap_or_else(|| "-".into())
}

impl ExperimentReport {
    pub fn arms(&self) -> [(&'static str, &CmcResult); 2] {
        [("without", &self.without), ("with", &self.with)]
    }

    /// Fixed-width table: one row per arm, one column per reported rank.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let mean_r = self.folds.iter().map(|f| f.r as f64).sum::<f64>() / self.folds.len() as f64;
        let _ = writeln!(s, "Dataset: {}", self.dataset);
        let _ = writeln!(
            s,
            "Probe view: {}  Gallery view: {}  Distractors: {}",
            self.probe_view, self.gallery_view, self.distractors
        );
        let _ = writeln!(
            s,
            "Folds: {}  Seed: {}  Ridge: {}  r policy: {}  Mean r: {:.2}",
            c.k, c.seed, c.ridge, c.r_policy, mean_r
        );
        let _ = writeln!(s, "Normalization axis: {}", c.normalization_axis);
        let _ = writeln!(s);
        let _ = write!(s, "{:<15}", "Normalization");
        for r in REPORT_RANKS {
            let _ = write!(s, "{:>10}", format!("Rank-{r}"));
        }
        let _ = writeln!(s);
        for (name, cmc) in [("Without", &self.without), ("With", &self.with)] {
            let _ = write!(s, "{name:<15}");
            for r in REPORT_RANKS {
                let _ = write!(s, "{:>10}", pct(cmc, r));
            }
            let _ = writeln!(s);
        }
        s
    }

    /// Mean and standard deviation per arm at the reported ranks, as
    /// fractions with 17 significant digits. Ranks beyond the curve are empty.
    pub fn render_csv(&self) -> String {
        let mut s = String::from("normalization,statistic");
        for r in REPORT_RANKS {
            let _ = write!(s, ",rank_{r}");
        }
        s.push('\n');
        for (name, cmc) in self.arms() {
            for (stat, values) in [("mean", cmc.ranks()), ("std", cmc.std())] {
                let _ = write!(s, "{name},{stat}");
                for r in REPORT_RANKS {
                    let cell = values.get(r - 1).map(|&v| sci(v)).unwrap_or_default();
                    let _ = write!(s, ",{cell}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn render_folds_csv(&self) -> String {
        let mut s = String::from("fold,normalization,r,train_ids,test_ids,probes,gallery");
        for r in REPORT_RANKS {
            let _ = write!(s, ",rank_{r}");
        }
        s.push('\n');
        for f in &self.folds {
            for (name, curve) in [("without", &f.without), ("with", &f.with)] {
                let _ = write!(
                    s,
                    "{},{name},{},{},{},{},{}",
                    f.fold, f.r, f.train_ids, f.test_ids, f.probes, f.gallery
                );
                for r in REPORT_RANKS {
                    let cell = curve.get(r - 1).map(|&v| sci(v)).unwrap_or_default();
                    let _ = write!(s, ",{cell}");
                }
                s.push('\n');
            }
        }
        s
    }

    /// Every point of both mean curves, for external plotting.
    pub fn render_curve_csv(&self) -> String {
        let mut s = String::from("normalization,rank,rate\n");
        for (name, cmc) in self.arms() {
            for (i, v) in cmc.ranks().iter().enumerate() {
                let _ = writeln!(s, "{name},{},{}", i + 1, sci(*v));
            }
        }
        s
    }
}

/// Write `report.txt`, `report.csv`, `folds.csv` and `cmc_curve.csv` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report.render_text())?;
    fs::write(dir.join("report.csv"), report.render_csv())?;
    fs::write(dir.join("folds.csv"), report.render_folds_csv())?;
    fs::write(dir.join("cmc_curve.csv"), report.render_curve_csv())?;
    Ok(())
}
