//! Batch self-organizing map with multigrid coarse initialization.
//!
//! Each epoch assigns every sample to its best-matching unit, then rebuilds
//! every codebook as the Gaussian-neighborhood-weighted mean of the
//! per-cell sums. The neighborhood width decays exponentially from σ₀ to
//! σ_end across epochs. Batch mode makes training order-independent: the
//! BMU search parallelizes over samples and the codebook update over
//! cells, while every reduction walks cells in fixed row-major order, so
//! results are bit-identical for any worker count.
//!
//! The coarse-rebalanced initializer trains a small grid first (a quarter
//! of the epoch budget), bilinearly interpolates the codebooks onto the
//! next finer grid, and repeats until the requested size is reached —
//! a multigrid warm start that seeds the full-resolution training with an
//! already-organized layout.

use rayon::prelude::*;
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::semspace::{DocVector, SemanticSpace};

#[derive(Debug, Error)]
pub enum SomError {
    #[error("no data vectors")]
    EmptyData,
    #[error("grid {rows}x{cols} is smaller than 2x2")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("dimension mismatch: grid {grid}, vector {vector}")]
    DimensionMismatch { grid: usize, vector: usize },
    #[error("data vector {0} contains a non-finite value")]
    NonFiniteInput(usize),
    #[error("codebook line {line}: {reason}")]
    CodebookParse { line: usize, reason: String },
}

/// A rectangular SOM: `rows`×`cols` codebook vectors of dimension `dim`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SomGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    codebook: Vec<Vec<f64>>,
}

impl SomGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        &self.codebook[row * self.cols + col]
    }

    pub fn codebook(&self) -> &[Vec<f64>] {
        &self.codebook
    }

    /// One TSV row per cell: row, col, then the codebook components in
    /// shortest round-trip float form.
    pub fn to_codebook_tsv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut fields = vec![r.to_string(), c.to_string()];
                fields.extend(self.cell(r, c).iter().map(|x| x.to_string()));
                out.push_str(&fields.join("\t"));
                out.push('\n');
            }
        }
        out
    }

    /// Rebuilds a grid from its codebook TSV.
    pub fn from_codebook_tsv(text: &str) -> Result<Self, SomError> {
        let mut entries: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| SomError::CodebookParse {
                line: line_no,
                reason,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(parse_err("expected row, col, and components".to_string()));
            }
            let r: usize = cols[0]
                .parse()
                .map_err(|e| parse_err(format!("bad row: {e}")))?;
            let c: usize = cols[1]
                .parse()
                .map_err(|e| parse_err(format!("bad col: {e}")))?;
            let mut vec = Vec::with_capacity(cols.len() - 2);
            for field in &cols[2..] {
                let v: f64 = field
                    .parse()
                    .map_err(|e| parse_err(format!("bad component: {e}")))?;
                vec.push(v);
            }
            entries.push((r, c, vec));
        }
        let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let dim = entries.first().map(|e| e.2.len()).unwrap_or(0);
        if rows < 2 || cols < 2 {
            return Err(SomError::GridTooSmall { rows, cols });
        }
        let mut codebook = vec![Vec::new(); rows * cols];
        let mut filled = vec![false; rows * cols];
        for (line_idx, (r, c, vec)) in entries.into_iter().enumerate() {
            if vec.len() != dim {
                return Err(SomError::CodebookParse {
                    line: line_idx + 1,
                    reason: format!("dimension {} differs from {dim}", vec.len()),
                });
            }
            let i = r * cols + c;
            filled[i] = true;
            codebook[i] = vec;
        }
        if let Some(missing) = filled.iter().position(|&f| !f) {
            return Err(SomError::CodebookParse {
                line: 0,
                reason: format!(
                    "cell ({}, {}) missing from codebook",
                    missing / cols,
                    missing % cols
                ),
            });
        }
        Ok(Self {
            rows,
            cols,
            dim,
            codebook,
        })
    }
}

/// Training schedule. σ decays exponentially from `sigma0` to `sigma_end`
/// over `epochs` batch passes.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub sigma0: f64,
    pub sigma_end: f64,
    pub coarse_levels: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// The default schedule for a grid: σ₀ = max(rows, cols)/2, σ_end 1.0.
    /// Annealing down to one cell spacing keeps neighboring codebooks
    /// coupled at the end, which preserves the map's topographic order.
    pub fn for_grid(
        rows: usize,
        cols: usize,
        epochs: usize,
        coarse_levels: usize,
        seed: u64,
    ) -> Self {
        Self {
            epochs,
            sigma0: rows.max(cols) as f64 / 2.0,
            sigma_end: 1.0,
            coarse_levels,
            seed,
        }
    }

    /// Neighborhood width at a given epoch (0-based).
    fn sigma_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.sigma0;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.sigma0 * (self.sigma_end / self.sigma0).powf(t)
    }
}

fn validate_data(data: &[Vec<f64>], dim: usize) -> Result<(), SomError> {
    for (i, v) in data.iter().enumerate() {
        if v.len() != dim {
            return Err(SomError::DimensionMismatch {
                grid: dim,
                vector: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SomError::NonFiniteInput(i));
        }
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major index of the best-matching unit; the scan order itself
/// implements the smallest-(row, col) tie-break.
fn bmu_index(grid: &SomGrid, v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, code) in grid.codebook.iter().enumerate() {
        let d = squared_distance(code, v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Best and second-best matching units, same tie discipline.
fn bmu2_index(grid: &SomGrid, v: &[f64]) -> (usize, usize) {
    let (mut best, mut second) = (0, 0);
    let (mut best_d, mut second_d) = (f64::INFINITY, f64::INFINITY);
    for (i, code) in grid.codebook.iter().enumerate() {
        let d = squared_distance(code, v);
        if d < best_d {
            second = best;
            second_d = best_d;
            best = i;
            best_d = d;
        } else if d < second_d {
            second = i;
            second_d = d;
        }
    }
    (best, second)
}

/// Best-matching unit as a (row, col) pair; ties resolve to the smallest
/// pair in lexicographic order.
pub fn bmu(grid: &SomGrid, v: &[f64]) -> Result<(usize, usize), SomError> {
    if v.len() != grid.dim {
        return Err(SomError::DimensionMismatch {
            grid: grid.dim,
            vector: v.len(),
        });
    }
    let i = bmu_index(grid, v);
    Ok((i / grid.cols, i % grid.cols))
}

/// Samples `rows`×`cols` codebook vectors from the data (seeded).
fn sample_codebook(data: &[Vec<f64>], rows: usize, cols: usize, seed: u64) -> SomGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = data[0].len();
    let codebook = (0..rows * cols)
        .map(|_| data[rng.gen_range(0..data.len())].clone())
        .collect();
    SomGrid {
        rows,
        cols,
        dim,
        codebook,
    }
}

/// Bilinearly interpolates a coarse codebook onto a finer grid. Every
/// fine cell is a convex combination of (at most) four coarse codebooks,
/// so interpolated vectors stay inside their convex hull.
pub fn interpolate_codebook(coarse: &SomGrid, rows: usize, cols: usize) -> SomGrid {
    let scale = |i: usize, fine: usize, coarse_n: usize| -> f64 {
        if fine <= 1 {
            0.0
        } else {
            i as f64 * (coarse_n - 1) as f64 / (fine - 1) as f64
        }
    };
    let mut codebook = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let u = scale(r, rows, coarse.rows);
            let v = scale(c, cols, coarse.cols);
            let (r0, c0) = (u.floor() as usize, v.floor() as usize);
            let r1 = (r0 + 1).min(coarse.rows - 1);
            let c1 = (c0 + 1).min(coarse.cols - 1);
            let (fu, fv) = (u - r0 as f64, v - c0 as f64);
            let vec: Vec<f64> = (0..coarse.dim)
                .map(|d| {
                    let top = coarse.cell(r0, c0)[d] * (1.0 - fv) + coarse.cell(r0, c1)[d] * fv;
                    let bottom = coarse.cell(r1, c0)[d] * (1.0 - fv) + coarse.cell(r1, c1)[d] * fv;
                    top * (1.0 - fu) + bottom * fu
                })
                .collect();
            codebook.push(vec);
        }
    }
    SomGrid {
        rows,
        cols,
        dim: coarse.dim,
        codebook,
    }
}

/// Builds the initial codebook.
///
/// With `levels` = 0 the codebook is sampled from the data. With
/// `levels` = L the initializer starts at a ⌈rows/2ᴸ⌉×⌈cols/2ᴸ⌉ grid
/// (clamped to 2×2), trains it for a quarter of `epochs`, interpolates to
/// the next finer grid, and repeats until full size. Deterministic given
/// the seed.
pub fn init_coarse_rebalanced(
    data: &[Vec<f64>],
    rows: usize,
    cols: usize,
    levels: usize,
    epochs: usize,
    seed: u64,
) -> Result<SomGrid, SomError> {
    if data.is_empty() {
        return Err(SomError::EmptyData);
    }
    if rows < 2 || cols < 2 {
        return Err(SomError::GridTooSmall { rows, cols });
    }
    validate_data(data, data[0].len())?;

    let size_at = |level: usize| -> (usize, usize) {
        let f = 1usize << level;
        (rows.div_ceil(f).max(2), cols.div_ceil(f).max(2))
    };

    if levels == 0 {
        return Ok(sample_codebook(data, rows, cols, seed));
    }

    let budget = (epochs / 4).max(1);
    let (r0, c0) = size_at(levels);
    let mut grid = sample_codebook(data, r0, c0, seed);
    for level in (0..levels).rev() {
        let config = TrainConfig::for_grid(grid.rows, grid.cols, budget, 0, seed);
        grid = train(&grid, data, &config)?;
        let (nr, nc) = size_at(level);
        grid = interpolate_codebook(&grid, nr, nc);
    }
    Ok(grid)
}

/// One batch epoch: BMU assignment, per-cell sums, then every codebook
/// becomes the neighborhood-weighted mean. Cells whose weighted mass is
/// (near) zero keep their old codebook.
fn batch_epoch(grid: &SomGrid, data: &[Vec<f64>], sigma: f64) -> SomGrid {
    let cells = grid.rows * grid.cols;
    let assignments: Vec<usize> = data.par_iter().map(|v| bmu_index(grid, v)).collect();

    let mut sums = vec![vec![0.0; grid.dim]; cells];
    let mut counts = vec![0usize; cells];
    for (v, &cell) in data.iter().zip(assignments.iter()) {
        counts[cell] += 1;
        let s = &mut sums[cell];
        for d in 0..grid.dim {
            s[d] += v[d];
        }
    }
    // Only occupied cells contribute to the update; collect them once in
    // row-major order so the inner reduction order is fixed.
    let occupied: Vec<usize> = (0..cells).filter(|&b| counts[b] > 0).collect();
    let two_sigma_sq = 2.0 * sigma * sigma;

    let codebook: Vec<Vec<f64>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let (cr, cc) = (c / grid.cols, c % grid.cols);
            let mut numerator = vec![0.0; grid.dim];
            let mut denominator = 0.0;
            for &b in &occupied {
                let (br, bc) = (b / grid.cols, b % grid.cols);
                let grid_d2 = (cr as f64 - br as f64).powi(2) + (cc as f64 - bc as f64).powi(2);
                let h = (-grid_d2 / two_sigma_sq).exp();
                denominator += h * counts[b] as f64;
                for d in 0..grid.dim {
                    numerator[d] += h * sums[b][d];
                }
            }
            if denominator < 1e-12 {
                grid.codebook[c].clone()
            } else {
                numerator.iter().map(|x| x / denominator).collect()
            }
        })
        .collect();

    SomGrid {
        rows: grid.rows,
        cols: grid.cols,
        dim: grid.dim,
        codebook,
    }
}

/// Runs the batch schedule and reports the quantization error measured at
/// the end of every epoch.
pub fn train_with_history(
    grid: &SomGrid,
    data: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<(SomGrid, Vec<f64>), SomError> {
    validate_data(data, grid.dim)?;
    let mut current = grid.clone();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        current = batch_epoch(&current, data, config.sigma_at(epoch));
        debug_assert!(
            current.codebook.iter().flatten().all(|x| x.is_finite()),
            "non-finite codebook after epoch {epoch}"
        );
        let (qe, _) = metrics(&current, data)?;
        history.push(qe);
    }
    Ok((current, history))
}

/// Runs the batch schedule. Zero epochs returns the grid unchanged.
pub fn train(grid: &SomGrid, data: &[Vec<f64>], config: &TrainConfig) -> Result<SomGrid, SomError> {
    validate_data(data, grid.dim)?;
    let mut current = grid.clone();
    for epoch in 0..config.epochs {
        current = batch_epoch(&current, data, config.sigma_at(epoch));
    }
    Ok(current)
}

/// Quantization error (mean distance to the BMU) and topographic error
/// (fraction of samples whose two best units are not 8-adjacent).
pub fn metrics(grid: &SomGrid, data: &[Vec<f64>]) -> Result<(f64, f64), SomError> {
    validate_data(data, grid.dim)?;
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let pairs: Vec<(f64, bool)> = data
        .par_iter()
        .map(|v| {
            let (first, second) = bmu2_index(grid, v);
            let d = squared_distance(&grid.codebook[first], v).sqrt();
            let (r1, c1) = (first / grid.cols, first % grid.cols);
            let (r2, c2) = (second / grid.cols, second % grid.cols);
            let adjacent = r1.abs_diff(r2) <= 1 && c1.abs_diff(c2) <= 1 && first != second;
            // A sample sitting exactly on one codebook with the runner-up
            // adjacent counts as ordered; only non-adjacent seconds err.
            (d, !adjacent && first != second)
        })
        .collect();
    let qe = pairs.iter().map(|(d, _)| d).sum::<f64>() / data.len() as f64;
    let te = pairs.iter().filter(|(_, e)| *e).count() as f64 / data.len() as f64;
    Ok((qe, te))
}

/// Per-cell summary of the assignment.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub count: usize,
    /// Up to five descriptor labels, strongest first.
    pub labels: Vec<String>,
    /// Mean of assigned unit vectors, re-normalized (zeros when empty).
    pub centroid: Vec<f64>,
}

/// The trained map: where every document landed, plus per-cell summaries.
#[derive(Debug, Clone)]
pub struct InformationMap {
    pub rows: usize,
    pub cols: usize,
    /// (doc_id, row, col) in input order.
    pub assignments: Vec<(String, usize, usize)>,
    /// Row-major per-cell summaries.
    pub cells: Vec<CellSummary>,
}

impl InformationMap {
    pub fn cell(&self, row: usize, col: usize) -> &CellSummary {
        &self.cells[row * self.cols + col]
    }

    /// One TSV row per cell: row, col, count, top labels joined by "|".
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("row\tcol\tcount\tlabels\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                let cell = self.cell(r, c);
                out.push_str(&format!(
                    "{r}\t{c}\t{}\t{}\n",
                    cell.count,
                    cell.labels.join("|")
                ));
            }
        }
        out
    }

    /// A deterministic SVG rendering: one square per cell, a filled dot
    /// whose radius grows with √count, and the strongest label underneath.
    pub fn to_svg(&self) -> String {
        const CELL: f64 = 56.0;
        const MARGIN: f64 = 8.0;
        let width = self.cols as f64 * CELL + 2.0 * MARGIN;
        let height = self.rows as f64 * CELL + 2.0 * MARGIN;
        let max_count = self.cells.iter().map(|c| c.count).max().unwrap_or(0).max(1);
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             viewBox=\"0 0 {width} {height}\">\n"
        ));
        svg.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
        ));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let cell = self.cell(r, c);
                let x = MARGIN + c as f64 * CELL;
                let y = MARGIN + r as f64 * CELL;
                svg.push_str(&format!(
                    "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{CELL:.2}\" height=\"{CELL:.2}\" \
                     fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n"
                ));
                if cell.count > 0 {
                    let radius = 0.38 * CELL * (cell.count as f64 / max_count as f64).sqrt();
                    svg.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius:.2}\" fill=\"#3a6ea5\"/>\n",
                        x + CELL / 2.0,
                        y + CELL / 2.0
                    ));
                }
                if let Some(label) = cell.labels.first() {
                    let shown: String = label.chars().take(12).collect();
                    svg.push_str(&format!(
                        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"7\" \
                         font-family=\"sans-serif\" text-anchor=\"middle\" \
                         fill=\"#222222\">{}</text>\n",
                        x + CELL / 2.0,
                        y + CELL - 3.0,
                        escape_xml(&shown)
                    ));
                }
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Assigns every document vector to its BMU and summarizes each cell:
/// count, the five descriptors with the highest summed weight, and the
/// centroid of assigned units.
pub fn build_map(
    grid: &SomGrid,
    vectors: &[DocVector],
    space: &SemanticSpace,
) -> Result<InformationMap, SomError> {
    if grid.dim != space.k() {
        return Err(SomError::DimensionMismatch {
            grid: grid.dim,
            vector: space.k(),
        });
    }
    let indices: Vec<usize> = vectors
        .par_iter()
        .map(|v| bmu_index(grid, &v.unit))
        .collect();
    let assignments: Vec<(String, usize, usize)> = vectors
        .iter()
        .zip(indices.iter())
        .map(|(v, &i)| (v.doc_id.clone(), i / grid.cols, i % grid.cols))
        .collect();

    let cells = grid.rows * grid.cols;
    let mut summaries = Vec::with_capacity(cells);
    for cell_idx in 0..cells {
        let members: Vec<&DocVector> = vectors
            .iter()
            .zip(indices.iter())
            .filter(|(_, &i)| i == cell_idx)
            .map(|(v, _)| v)
            .collect();
        let count = members.len();
        let mut weight_sums = vec![0.0; space.k()];
        let mut centroid = vec![0.0; space.k()];
        for m in &members {
            for d in 0..space.k() {
                weight_sums[d] += m.w[d];
                centroid[d] += m.unit[d];
            }
        }
        if count > 0 {
            let norm = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                centroid.iter_mut().for_each(|x| *x /= norm);
            }
        }
        let mut order: Vec<usize> = (0..space.k()).filter(|&d| weight_sums[d] > 0.0).collect();
        order.sort_by(|&a, &b| {
            weight_sums[b]
                .partial_cmp(&weight_sums[a])
                .expect("weights are finite")
                .then_with(|| a.cmp(&b))
        });
        let labels: Vec<String> = order
            .iter()
            .take(5)
            .map(|&d| space.dims()[d].bare_id())
            .collect();
        summaries.push(CellSummary {
            count,
            labels,
            centroid,
        });
    }
    Ok(InformationMap {
        rows: grid.rows,
        cols: grid.cols,
        assignments,
        cells: summaries,
    })
}
