use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, RigidTransform};

/// Which pipeline stage produced a correspondence set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Loose,
    Key,
    Refined,
    DenseLoose,
    DenseGroup,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Loose => "loose",
            Stage::Key => "key",
            Stage::Refined => "refined",
            Stage::DenseLoose => "dense-loose",
            Stage::DenseGroup => "dense-group",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A putative point pair `(p, q)` between source and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src_index: usize,
    pub dst_index: usize,
    pub src_point: Point3,
    pub dst_point: Point3,
    pub score: f64,
}

impl Correspondence {
    pub fn new(
        src_index: usize,
        dst_index: usize,
        src_point: Point3,
        dst_point: Point3,
        score: f64,
    ) -> Self {
        Self {
            src_index,
            dst_index,
            src_point,
            dst_point,
            score,
        }
    }

    /// `|| R p + t - q ||`.
    pub fn residual(&self, t: &RigidTransform) -> f64 {
        (t.apply(&self.src_point) - self.dst_point).norm()
    }

    pub fn key(&self) -> (usize, usize) {
        (self.src_index, self.dst_index)
    }
}

/// Correspondences without duplicate `(src_index, dst_index)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
    stage: Stage,
}

impl CorrespondenceSet {
    pub fn new(items: Vec<Correspondence>, stage: Stage) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for c in &items {
            if !seen.insert(c.key()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate correspondence ({}, {})",
                    c.src_index, c.dst_index
                )));
            }
        }
        Ok(Self { items, stage })
    }

    pub(crate) fn from_unique(items: Vec<Correspondence>, stage: Stage) -> Self {
        debug_assert!({
            let mut seen = HashSet::new();
            items.iter().all(|c| seen.insert(c.key()))
        });
        Self { items, stage }
    }

    pub fn empty(stage: Stage) -> Self {
        Self {
            items: Vec::new(),
            stage,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    /// Subset at the given positions, relabelled with `stage`.
    pub fn subset(&self, positions: &[usize], stage: Stage) -> Self {
        Self::from_unique(positions.iter().map(|&i| self.items[i]).collect(), stage)
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    /// Append rows `src_index,dst_index,score,stage`.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.items {
            writeln!(
                w,
                "{},{},{},{}",
                c.src_index, c.dst_index, c.score, self.stage
            )?;
        }
        Ok(())
    }

    /// Full CSV dump including the header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        self.write_csv_rows(w)
    }
}

pub const CSV_HEADER: &str = "src_index,dst_index,score,stage";

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = std::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
