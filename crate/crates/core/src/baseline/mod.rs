//! V-disparity ground detection: per-row disparity histograms, a robust
//! line fit of the ground locus, and per-pixel classification against it.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{DisparityMap, Mask};

/// Number of slope hypotheses over `[0, 1]` px/row.
pub const SLOPE_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub bin_width: f64,
    /// Classification tolerance in pixels.
    pub tolerance: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            bin_width: 1.0,
            tolerance: 1.0,
        }
    }
}

/// `counts[row * bins + bin]` = valid pixels in `row` whose disparity falls
/// in `bin`.
#[derive(Debug, Clone, PartialEq)]
pub struct VDisparityHistogram {
    pub rows: usize,
    pub bins: usize,
    pub bin_width: f64,
    pub counts: Vec<u32>,
}

impl VDisparityHistogram {
    pub fn count(&self, row: usize, bin: usize) -> u32 {
        self.counts[row * self.bins + bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    fn bin_center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width
    }

    /// Binary PGM, linearly scaled so the fullest cell is 255.
    /// Rows are image rows, columns are disparity bins.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let mut out = format!("P5\n{} {}\n255\n", self.bins, self.rows).into_bytes();
        out.extend(self.counts.iter().map(|&c| (255.0 * c as f64 / max).round() as u8));
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }
}

/// Fitted ground locus `d = alpha * row + beta`, valid on
/// `first_row..=last_row`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundProfile {
    pub alpha: f64,
    pub beta: f64,
    pub first_row: usize,
    pub last_row: usize,
}

impl GroundProfile {
    /// Expected ground disparity, `None` outside the fit support.
    pub fn expected(&self, row: usize) -> Option<f64> {
        (self.first_row..=self.last_row)
            .contains(&row)
            .then_some(self.alpha * row as f64 + self.beta)
    }
}

/// Values beyond the last bin are clamped into it.
pub fn v_disparity(d: &DisparityMap, bins: usize, bin_width: f64) -> Result<VDisparityHistogram> {
    if bins == 0 || !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need bins > 0 and a positive bin width, got {bins} x {bin_width}"
        )));
    }
    let (w, h) = d.dims();
    let mut counts = vec![0u32; h * bins];
    for (row, line) in d.data().chunks_exact(w).enumerate() {
        for &v in line.iter().filter(|v| !v.is_nan()) {
            let bin = ((v as f64 / bin_width).floor() as usize).min(bins - 1);
            counts[row * bins + bin] += 1;
        }
    }
    Ok(VDisparityHistogram {
        rows: h,
        bins,
        bin_width,
        counts,
    })
}

/// Bin count covering the map's largest disparity.
pub fn bins_for(d: &DisparityMap, bin_width: f64) -> usize {
    let max = d.max_valid().unwrap_or(0.0) as f64;
    (max / bin_width).floor() as usize + 1
}

/// Hough vote over `(alpha, beta)` weighted by cell counts, then weighted
/// least squares over the cells within one bin of the winning line.
pub fn fit_ground_line(h: &VDisparityHistogram) -> Result<GroundProfile> {
    if h.total() == 0 {
        return Err(Error::Empty("v-disparity histogram has no counts".into()));
    }
    let cells: Vec<(f64, f64, f64)> = (0..h.rows)
        .flat_map(|r| (0..h.bins).map(move |b| (r, b)))
        .filter(|&(r, b)| h.count(r, b) > 0)
        .map(|(r, b)| (r as f64, h.bin_center(b), h.count(r, b) as f64))
        .collect();
    let mut rows: Vec<f64> = cells.iter().map(|c| c.0).collect();
    rows.dedup();
    if rows.len() < 2 {
        return Err(Error::DegenerateFit(
            "a line needs support on at least two rows".into(),
        ));
    }

    let bw = h.bin_width;
    let beta_min = -(h.rows as f64);
    let beta_cells = ((h.bins as f64 * bw - beta_min) / bw).ceil() as usize + 1;
    let mut best = (0.0f64, 0usize, 0usize);
    let mut acc = vec![0.0f64; beta_cells];
    for a in 0..=SLOPE_STEPS {
        let alpha = a as f64 / SLOPE_STEPS as f64;
        acc.fill(0.0);
        for &(v, d, c) in &cells {
            let k = ((d - alpha * v - beta_min) / bw).round();
            if k >= 0.0 && (k as usize) < beta_cells {
                acc[k as usize] += c;
            }
        }
        for (k, &votes) in acc.iter().enumerate() {
            if votes > best.0 {
                best = (votes, a, k);
            }
        }
    }
    let mut alpha = best.1 as f64 / SLOPE_STEPS as f64;
    let mut beta = beta_min + best.2 as f64 * bw;

    // Two refinement passes: the first recentres the inlier band on the
    // continuous fit, the second settles it.
    let mut support = (0.0, 0.0);
    for _ in 0..2 {
        let inliers: Vec<&(f64, f64, f64)> = cells
            .iter()
            .filter(|(v, d, _)| (d - (alpha * v + beta)).abs() <= bw)
            .collect();
        let (sw, sv, sd, svv, svd) = inliers.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |a, &&(v, d, c)| {
            (a.0 + c, a.1 + c * v, a.2 + c * d, a.3 + c * v * v, a.4 + c * v * d)
        });
        let denom = sw * svv - sv * sv;
        let first = inliers.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let last = inliers.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        if inliers.is_empty() || first == last || denom.abs() < 1e-12 {
            return Err(Error::DegenerateFit("inliers span fewer than two rows".into()));
        }
        alpha = (sw * svd - sv * sd) / denom;
        beta = (sd - alpha * sv) / sw;
        support = (first, last);
    }
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::DegenerateFit("non-finite line parameters".into()));
    }
    Ok(GroundProfile {
        alpha,
        beta,
        first_row: support.0 as usize,
        last_row: support.1 as usize,
    })
}

/// Ground iff valid, inside the profile support and within `tol` of the
/// expected disparity.
pub fn classify_by_profile(d: &DisparityMap, g: &GroundProfile, tol: f64) -> Mask {
    Mask::from_fn(d.width(), d.height(), |row, col| {
        match (d.get(row, col), g.expected(row)) {
            (Some(v), Some(e)) => (v as f64 - e).abs() <= tol,
            _ => false,
        }
    })
}

/// Histogram, fit and classify with the given parameters.
pub fn detect_ground_vdisparity(d: &DisparityMap, p: &BaselineParams) -> Result<(Mask, GroundProfile)> {
    let h = v_disparity(d, bins_for(d, p.bin_width), p.bin_width)?;
    let g = fit_ground_line(&h)?;
    Ok((classify_by_profile(d, &g, p.tolerance), g))
}

#[cfg(test)]
mod tests;
