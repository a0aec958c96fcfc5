//! Per-epoch training records, one tab-separated line per epoch:
//! `epoch task_loss domain_loss adversarial_loss heldout_accuracy heldout_loss best_heldout_loss`.
//! Phases without a domain objective write 0 for the domain columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const HISTORY_HEADER: &str = "# epoch\ttask_loss\tdomain_loss\tadversarial_loss\theldout_accuracy\theldout_loss\tbest_heldout_loss";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub domain_loss: f64,
    pub adversarial_loss: f64,
    pub heldout_accuracy: f64,
    pub heldout_loss: f64,
    /// Lowest held-out loss seen up to and including this epoch.
    pub best_heldout_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(HISTORY_HEADER);
        s.push('\n');
        for r in &self.records {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.epoch, r.task_loss, r.domain_loss, r.adversarial_loss, r.heldout_accuracy, r.heldout_loss, r.best_heldout_loss
            )
            .unwrap();
        }
        if let Some(b) = self.best_epoch {
            writeln!(s, "# best_epoch={}", b).unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut h = History::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(rest) = line.strip_prefix("# best_epoch=") {
                h.best_epoch = Some(rest.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad best epoch '{}'", rest),
                })?);
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 7 fields, found {}", f.len()),
                });
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad number '{}'", s),
                })
            };
            h.records.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad epoch '{}'", f[0]),
                })?,
                task_loss: num(f[1])?,
                domain_loss: num(f[2])?,
                adversarial_loss: num(f[3])?,
                heldout_accuracy: num(f[4])?,
                heldout_loss: num(f[5])?,
                best_heldout_loss: num(f[6])?,
            });
        }
        Ok(h)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
