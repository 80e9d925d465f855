//! Simple linear iterative clustering in CIELAB + image-plane coordinates.

use image::RgbImage;

use super::labeling::SuperpixelLabeling;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    /// Requested number of superpixels `k`.
    pub region_count: usize,
    /// Weight `m` of spatial proximity against color similarity.
    pub compactness: f64,
    pub iterations: usize,
    /// Components smaller than this fraction of `S²` are merged away.
    pub connectivity_min_fraction: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            region_count: 600,
            compactness: 10.0,
            iterations: 10,
            connectivity_min_fraction: 0.25,
        }
    }
}

impl SlicParams {
    pub fn with_region_count(region_count: usize) -> Self {
        Self {
            region_count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.region_count == 0 {
            return Err(Error::InvalidParameter("region count must be >= 1".into()));
        }
        if !(self.compactness.is_finite() && self.compactness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.connectivity_min_fraction) {
            return Err(Error::InvalidParameter(format!(
                "connectivity_min_fraction must lie in [0, 1], got {}",
                self.connectivity_min_fraction
            )));
        }
        Ok(())
    }
}

/// sRGB (8-bit) to CIELAB under the D65 white point.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        const DELTA: f64 = 6.0 / 29.0;
        if t > DELTA * DELTA * DELTA {
            t.cbrt()
        } else {
            t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
        }
    }
    let (r, g, b) = (linear(rgb[0]), linear(rgb[1]), linear(rgb[2]));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    const XN: f64 = 0.950_47;
    const YN: f64 = 1.0;
    const ZN: f64 = 1.088_83;
    let (fx, fy, fz) = (f(x / XN), f(y / YN), f(z / ZN));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    row: f64,
    col: f64,
}

/// Segments `img` into approximately `p.region_count` superpixels.
///
/// Seeds lie on a regular grid of step `S = sqrt(N / k)` and move to the
/// lowest-gradient pixel of their 3x3 neighbourhood. Each iteration assigns
/// pixels within a `2S x 2S` window of a center by
/// `D = sqrt(d_lab² + (m / S)² d_xy²)` and moves centers to their members'
/// mean. Connectivity is then enforced by merging small 4-connected
/// fragments into their largest neighbour. The result is deterministic.
pub fn slic_segment(img: &RgbImage, p: &SlicParams) -> Result<SuperpixelLabeling> {
    p.validate()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = w * h;
    if n == 0 {
        return Err(Error::Empty("image has no pixels".into()));
    }
    if p.region_count > n {
        return Err(Error::InvalidParameter(format!(
            "region count {} exceeds pixel count {n}",
            p.region_count
        )));
    }

    let lab: Vec<[f64; 3]> = img.pixels().map(|px| rgb_to_lab(px.0)).collect();
    let step = (n as f64 / p.region_count as f64).sqrt();
    let mut centers = seed_centers(&lab, w, h, p.region_count);

    let spatial_weight = (p.compactness / step).powi(2);
    let radius = step.ceil() as i64;
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];

    for _ in 0..p.iterations {
        labels.fill(u32::MAX);
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let (cr, cc) = (c.row.round() as i64, c.col.round() as i64);
            let r0 = (cr - radius).max(0) as usize;
            let r1 = ((cr + radius).min(h as i64 - 1)) as usize;
            let c0 = (cc - radius).max(0) as usize;
            let c1 = ((cc + radius).min(w as i64 - 1)) as usize;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let i = row * w + col;
                    let d = distance(&lab[i], row, col, c, spatial_weight);
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = k as u32;
                    }
                }
            }
        }
        // Pixels outside every window fall back to the globally nearest center.
        for i in 0..n {
            if labels[i] == u32::MAX {
                let (row, col) = (i / w, i % w);
                let (k, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (k, distance(&lab[i], row, col, c, spatial_weight)))
                    .fold((0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
                labels[i] = k as u32;
            }
        }
        update_centers(&mut centers, &labels, &lab, w);
    }

    let min_size = ((p.connectivity_min_fraction * step * step).floor() as usize).max(1);
    let labels = enforce_connectivity(&labels, w, h, min_size);
    SuperpixelLabeling::from_labels(img, labels)
}

fn distance(lab: &[f64; 3], row: usize, col: usize, c: &Center, spatial_weight: f64) -> f64 {
    let dl = lab[0] - c.lab[0];
    let da = lab[1] - c.lab[1];
    let db = lab[2] - c.lab[2];
    let dr = row as f64 - c.row;
    let dc = col as f64 - c.col;
    // squared distance preserves the ordering of D
    dl * dl + da * da + db * db + spatial_weight * (dr * dr + dc * dc)
}

/// Grid seeds: `cols x rows ≈ k` with the grid aspect following the image.
fn seed_centers(lab: &[[f64; 3]], w: usize, h: usize, k: usize) -> Vec<Center> {
    let grid_cols = ((k as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w);
    let grid_rows = ((k as f64 / grid_cols as f64).round() as usize).clamp(1, h);
    let (step_r, step_c) = (h as f64 / grid_rows as f64, w as f64 / grid_cols as f64);

    let gradient = |row: usize, col: usize| -> f64 {
        let at = |r: usize, c: usize| &lab[r * w + c];
        let (up, down) = (at(row.saturating_sub(1), col), at((row + 1).min(h - 1), col));
        let (left, right) = (at(row, col.saturating_sub(1)), at(row, (col + 1).min(w - 1)));
        let sq = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
        sq(up, down) + sq(left, right)
    };

    let mut centers = Vec::with_capacity(grid_rows * grid_cols);
    for gr in 0..grid_rows {
        for gc in 0..grid_cols {
            let row = (((gr as f64 + 0.5) * step_r) as usize).min(h - 1);
            let col = (((gc as f64 + 0.5) * step_c) as usize).min(w - 1);
            let (mut best, mut best_g) = ((row, col), gradient(row, col));
            for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    let g = gradient(r, c);
                    if g < best_g {
                        best_g = g;
                        best = (r, c);
                    }
                }
            }
            centers.push(Center {
                lab: lab[best.0 * w + best.1],
                row: best.0 as f64,
                col: best.1 as f64,
            });
        }
    }
    centers
}

fn update_centers(centers: &mut [Center], labels: &[u32], lab: &[[f64; 3]], w: usize) {
    let mut sums = vec![[0.0f64; 6]; centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        let s = &mut sums[l as usize];
        s[0] += lab[i][0];
        s[1] += lab[i][1];
        s[2] += lab[i][2];
        s[3] += (i / w) as f64;
        s[4] += (i % w) as f64;
        s[5] += 1.0;
    }
    for (c, s) in centers.iter_mut().zip(&sums) {
        if s[5] > 0.0 {
            c.lab = [s[0] / s[5], s[1] / s[5], s[2] / s[5]];
            c.row = s[3] / s[5];
            c.col = s[4] / s[5];
        }
    }
}

/// Splits labels into 4-connected components, merges components below
/// `min_size` into their largest adjacent component (ties to the earliest
/// component in raster order), and relabels densely in raster order.
fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let label = labels[start];
        comp[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (row, col) = (i / w, i % w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == label {
                    comp[j] = id;
                    stack.push(j);
                }
            };
            if col > 0 {
                visit(i - 1);
            }
            if col + 1 < w {
                visit(i + 1);
            }
            if row > 0 {
                visit(i - w);
            }
            if row + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }

    let count = sizes.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); count];
    for i in 0..n {
        let (row, col) = (i / w, i % w);
        let a = comp[i];
        for j in [
            (col + 1 < w).then(|| i + 1),
            (row + 1 < h).then(|| i + w),
        ]
        .into_iter()
        .flatten()
        {
            let b = comp[j];
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }

    // union-find over components; merged sets stay connected because only
    // adjacent components are joined
    let mut parent: Vec<usize> = (0..count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut size = sizes.clone();
    let mut members: Vec<Vec<usize>> = (0..count).map(|c| vec![c]).collect();
    loop {
        let mut merged_any = false;
        for c in 0..count {
            let root = find(&mut parent, c);
            if root != c || size[root] >= min_size {
                continue;
            }
            let mut best: Option<usize> = None;
            for &m in &members[root] {
                for &nb in &adjacency[m] {
                    let r = find(&mut parent, nb);
                    if r == root {
                        continue;
                    }
                    best = match best {
                        Some(b) if size[b] > size[r] || (size[b] == size[r] && b < r) => Some(b),
                        _ => Some(r),
                    };
                }
            }
            if let Some(target) = best {
                parent[root] = target;
                size[target] += size[root];
                let moved = std::mem::take(&mut members[root]);
                members[target].extend(moved);
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }

    let mut dense = vec![u32::MAX; count];
    let mut next = 0u32;
    let mut out = vec![0u32; n];
    for i in 0..n {
        let root = find(&mut parent, comp[i]);
        if dense[root] == u32::MAX {
            dense[root] = next;
            next += 1;
        }
        out[i] = dense[root];
    }
    out
}
