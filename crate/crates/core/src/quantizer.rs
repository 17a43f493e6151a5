//! Scalar quantizers: regular, binned (non-regular) and uniform modulo.
//!
//! A quantizer is a fine regular partition of the line, given by its
//! thresholds, followed by a binning map from fine cells to coarse labels.
//! Cells are half-open, `[b_{i-1}, b_i)`. Labels are 1-indexed.
//!
//! The modulo quantizer `floor(s/Δ) mod N` has infinitely many cells, so its
//! cell sets are only materialized inside a window, normally
//! `mean ± MODULO_WINDOW_RADIUS · sd` of the Gaussian the cells will be
//! integrated against.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::channels::interval_moments;
use crate::error::{Error, Result};
use crate::special::sqrt_pos;

/// Half-width, in standard deviations, of the window used to enumerate
/// modulo cells.
pub const MODULO_WINDOW_RADIUS: f64 = 8.0;

/// Upper bound on the number of intervals a single cell set may hold.
pub const MAX_CELL_INTERVALS: usize = 1 << 20;

/// Half-open interval `[lo, hi)` on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || !(lo < hi) {
            return Err(Error::InvalidInput(format!("interval [{lo}, {hi}) is empty")));
        }
        Ok(Interval { lo, hi })
    }

    pub const fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn contains(&self, s: f64) -> bool {
        self.lo <= s && s < self.hi
    }

    #[inline]
    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Non-empty union of pairwise disjoint intervals, sorted by left endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    intervals: Vec<Interval>,
}

impl CellSet {
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidInput("empty cell set".into()));
        }
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if intervals.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(Error::InvalidInput("overlapping intervals in cell set".into()));
        }
        Ok(CellSet { intervals })
    }

    pub fn single(interval: Interval) -> Self {
        CellSet {
            intervals: vec![interval],
        }
    }

    pub fn real_line() -> Self {
        Self::single(Interval::real_line())
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, s: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(s))
    }

    /// The finite endpoint closest to `x`, if any.
    pub fn nearest_endpoint(&self, x: f64) -> Option<f64> {
        self.intervals
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|e| e.is_finite())
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
    }
}

/// Coarse quantizer label, `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u32);

impl Label {
    /// Returns `None` for zero.
    pub const fn new(value: u32) -> Option<Self> {
        if value == 0 {
            None
        } else {
            Some(Label(value))
        }
    }

    #[inline]
    pub const fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub(crate) const fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantizerKind {
    Regular,
    Binned,
    Modulo { step: f64, labels: u32 },
}

/// Gaussian distribution of a quantizer input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSource {
    mean: f64,
    variance: f64,
}

impl GaussianSource {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "gaussian source needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(GaussianSource { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        sqrt_pos(self.variance)
    }

    /// `mean ± radius · sd`
    pub fn window(&self, radius: f64) -> (f64, f64) {
        let half = radius * self.std_dev();
        (self.mean - half, self.mean + half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    kind: QuantizerKind,
    thresholds: Vec<f64>,
    levels: Option<Vec<f64>>,
    binning: Vec<u32>,
    num_labels: u32,
}

impl ScalarQuantizer {
    /// Regular quantizer with `thresholds.len() + 1` cells.
    pub fn regular(thresholds: Vec<f64>, levels: Option<Vec<f64>>) -> Result<Self> {
        let k = thresholds.len() + 1;
        let binning = (1..=k as u32).collect();
        Self::build(QuantizerKind::Regular, thresholds, binning, levels)
    }

    /// Binned quantizer: `binning[i]` is the coarse label of fine cell `i`.
    pub fn binned(thresholds: Vec<f64>, binning: Vec<u32>, levels: Option<Vec<f64>>) -> Result<Self> {
        Self::build(QuantizerKind::Binned, thresholds, binning, levels)
    }

    /// `Q(s) = floor(s/Δ) mod N`, reported as labels `1..=N`.
    pub fn modulo(step: f64, labels: u32) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::Config(format!("modulo step must be positive, got {step}")));
        }
        if labels == 0 {
            return Err(Error::Config("modulo quantizer needs at least one label".into()));
        }
        Ok(ScalarQuantizer {
            kind: QuantizerKind::Modulo { step, labels },
            thresholds: Vec::new(),
            levels: None,
            binning: Vec::new(),
            num_labels: labels,
        })
    }

    /// `levels` uniform cells on `[lo, hi]`, outer cells unbounded, decoder at
    /// the midpoint of each granular cell.
    pub fn uniform(levels: u32, lo: f64, hi: f64) -> Result<Self> {
        if levels == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "uniform quantizer needs levels ≥ 1 and lo < hi, got {levels} on [{lo}, {hi}]"
            )));
        }
        let k = levels as usize;
        let width = (hi - lo) / k as f64;
        let thresholds = (1..k).map(|i| lo + width * i as f64).collect();
        let outputs = (0..k).map(|i| lo + width * (i as f64 + 0.5)).collect();
        Self::regular(thresholds, Some(outputs))
    }

    fn build(kind: QuantizerKind, thresholds: Vec<f64>, binning: Vec<u32>, levels: Option<Vec<f64>>) -> Result<Self> {
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("thresholds must be strictly increasing".into()));
        }
        let fine = thresholds.len() + 1;
        if binning.len() != fine {
            return Err(Error::Config(format!(
                "binning has {} entries for {fine} fine cells",
                binning.len()
            )));
        }
        let num_labels = binning.iter().copied().max().unwrap_or(0);
        if binning.contains(&0) {
            return Err(Error::Config("binning labels are 1-indexed".into()));
        }
        let mut seen = vec![false; num_labels as usize];
        for &b in &binning {
            seen[b as usize - 1] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("binning must be onto 1..=K".into()));
        }
        let q = ScalarQuantizer {
            kind,
            thresholds,
            levels: None,
            binning,
            num_labels,
        };
        match levels {
            Some(l) => q.with_levels(l),
            None => Ok(q),
        }
    }

    /// Attach decoder outputs, one per fine cell.
    pub fn with_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        if matches!(self.kind, QuantizerKind::Modulo { .. }) {
            return Err(Error::Config("modulo quantizers carry no decoder levels".into()));
        }
        if levels.len() != self.thresholds.len() + 1 || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config(format!(
                "expected {} finite decoder levels, got {}",
                self.thresholds.len() + 1,
                levels.len()
            )));
        }
        self.levels = Some(levels);
        Ok(self)
    }

    /// Same cells, no decoder.
    pub fn without_levels(mut self) -> Self {
        self.levels = None;
        self
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn num_labels(&self) -> u32 {
        self.num_labels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn levels(&self) -> Option<&[f64]> {
        self.levels.as_deref()
    }

    pub fn binning(&self) -> &[u32] {
        &self.binning
    }

    /// Number of fine cells, `None` for modulo quantizers.
    pub fn num_fine_cells(&self) -> Option<usize> {
        match self.kind {
            QuantizerKind::Modulo { .. } => None,
            _ => Some(self.thresholds.len() + 1),
        }
    }

    /// Fine cell `i` (0-based) of a threshold quantizer.
    pub fn fine_cell(&self, i: usize) -> Interval {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[i - 1]
        };
        let hi = self.thresholds.get(i).copied().unwrap_or(f64::INFINITY);
        Interval { lo, hi }
    }

    #[inline]
    fn fine_index(&self, s: f64) -> usize {
        self.thresholds.partition_point(|&b| b <= s)
    }

    #[inline]
    fn label_of_fine(&self, i: usize) -> Label {
        Label(self.binning[i])
    }

    pub fn label(&self, value: u32) -> Result<Label> {
        if value == 0 || value > self.num_labels {
            return Err(Error::InvalidLabel {
                label: value,
                num_labels: self.num_labels,
            });
        }
        Ok(Label(value))
    }

    pub fn encode(&self, s: f64) -> Result<Label> {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("cannot quantize {s}")));
        }
        Ok(match self.kind {
            QuantizerKind::Modulo { step, labels } => {
                let k = libm::floor(s / step) as i64;
                Label(k.rem_euclid(labels as i64) as u32 + 1)
            }
            _ => self.label_of_fine(self.fine_index(s)),
        })
    }

    /// Decoder output of the fine cell containing `s`.
    pub fn reproduce(&self, s: f64) -> Result<f64> {
        let levels = self
            .levels
            .as_ref()
            .ok_or_else(|| Error::Config("quantizer has no decoder levels".into()))?;
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("cannot quantize {s}")));
        }
        Ok(levels[self.fine_index(s)])
    }

    /// Decoder output for a coarse label; only defined when every label owns a
    /// single fine cell.
    pub fn decode(&self, label: Label) -> Result<f64> {
        let levels = self
            .levels
            .as_ref()
            .ok_or_else(|| Error::Config("quantizer has no decoder levels".into()))?;
        self.check_label(label)?;
        let mut fine = self.binning.iter().enumerate().filter(|(_, &b)| b == label.0);
        match (fine.next(), fine.next()) {
            (Some((i, _)), None) => Ok(levels[i]),
            _ => Err(Error::Config(format!("label {label} has no unique decoder level"))),
        }
    }

    fn check_label(&self, label: Label) -> Result<()> {
        if label.0 > self.num_labels {
            return Err(Error::InvalidLabel {
                label: label.0,
                num_labels: self.num_labels,
            });
        }
        Ok(())
    }

    /// Inverse image of `label`. Modulo cells are enumerated over the window
    /// `ctx.mean ± MODULO_WINDOW_RADIUS · sd`.
    pub fn cell_set(&self, label: Label, ctx: &GaussianSource) -> Result<CellSet> {
        let (lo, hi) = ctx.window(MODULO_WINDOW_RADIUS);
        self.cell_set_in(label, lo, hi)
    }

    /// Inverse image of `label`; the window `[lo, hi]` only matters for modulo
    /// quantizers, where every cell meeting the window is returned whole. If no
    /// cell of that label meets the window, the nearest one on each side is
    /// returned instead.
    pub fn cell_set_in(&self, label: Label, lo: f64, hi: f64) -> Result<CellSet> {
        self.check_label(label)?;
        match self.kind {
            QuantizerKind::Modulo { step, labels } => {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidInput(format!("bad window [{lo}, {hi}]")));
                }
                let n = labels as i64;
                let r = label.0 as i64 - 1;
                let k_lo = libm::floor(lo / step) as i64;
                let k_hi = (libm::ceil(hi / step) as i64 - 1).max(k_lo);
                let first = k_lo + (r - k_lo).rem_euclid(n);
                let cell = |k: i64| Interval {
                    lo: k as f64 * step,
                    hi: (k + 1) as f64 * step,
                };
                if first > k_hi {
                    return Ok(CellSet {
                        intervals: vec![cell(first - n), cell(first)],
                    });
                }
                let count = ((k_hi - first) / n + 1) as usize;
                if count > MAX_CELL_INTERVALS {
                    return Err(Error::Config(format!(
                        "modulo window spans {count} cells; step too small for the window"
                    )));
                }
                let mut intervals: Vec<Interval> = (0..count as i64).map(|j| cell(first + j * n)).collect();
                if n == 1 {
                    merge_adjacent(&mut intervals);
                }
                Ok(CellSet { intervals })
            }
            _ => {
                let mut intervals = Vec::new();
                for (i, &b) in self.binning.iter().enumerate() {
                    if b == label.0 {
                        intervals.push(self.fine_cell(i));
                    }
                }
                merge_adjacent(&mut intervals);
                Ok(CellSet { intervals })
            }
        }
    }

    /// Calls `f(label, interval)` for every fine cell that meets `[lo, hi]`,
    /// in increasing order.
    pub fn for_each_cell_in(&self, lo: f64, hi: f64, mut f: impl FnMut(Label, Interval)) {
        match self.kind {
            QuantizerKind::Modulo { step, labels } => {
                let k_lo = libm::floor(lo / step) as i64;
                let k_hi = (libm::ceil(hi / step) as i64 - 1).max(k_lo);
                for k in k_lo..=k_hi {
                    let label = Label(k.rem_euclid(labels as i64) as u32 + 1);
                    f(
                        label,
                        Interval {
                            lo: k as f64 * step,
                            hi: (k + 1) as f64 * step,
                        },
                    );
                }
            }
            _ => {
                let first = self.fine_index(lo);
                let last = self.fine_index(hi);
                for i in first..=last {
                    f(self.label_of_fine(i), self.fine_cell(i));
                }
            }
        }
    }

    /// Finite cell boundaries inside `[lo, hi]`, in increasing order.
    pub fn boundaries_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self.kind {
            QuantizerKind::Modulo { step, .. } => {
                let k_lo = libm::ceil(lo / step) as i64;
                let k_hi = libm::floor(hi / step) as i64;
                (k_lo..=k_hi).map(|k| k as f64 * step).collect()
            }
            _ => self
                .thresholds
                .iter()
                .copied()
                .filter(|&b| lo <= b && b <= hi)
                .collect(),
        }
    }

    /// `E[(s - q(s))²]` for `s ~ src`, where `q` applies the decoder levels.
    pub fn measurement_distortion(&self, src: &GaussianSource) -> Result<f64> {
        let levels = self
            .levels
            .as_ref()
            .ok_or_else(|| Error::Config("distortion needs decoder levels".into()))?;
        let mut total = 0.0;
        for (i, &level) in levels.iter().enumerate() {
            let m = interval_moments(self.fine_cell(i), src.mean(), src.variance());
            let mass = libm::exp(m.log_mass);
            if mass > 0.0 {
                let bias = m.mean - level;
                total += mass * (m.variance + bias * bias);
            }
        }
        Ok(total.max(0.0))
    }
}

fn merge_adjacent(intervals: &mut Vec<Interval>) {
    let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals.drain(..) {
        match out.last_mut() {
            Some(prev) if prev.hi == iv.lo => prev.hi = iv.hi,
            _ => out.push(iv),
        }
    }
    *intervals = out;
}
