//! Observed-data representation: response matrix with tooth-blocked
//! missingness, covariates, mouth geometry, and the neighbor graph that
//! drives the spatial prior.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

pub const SITES_PER_TOOTH: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Jaw {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteRow {
    Buccal,
    Lingual,
}

/// Mouth layout: teeth in arch order, six sites per tooth.
///
/// Site `6t + k` sits on tooth `t`; offsets 0..3 run along the buccal row in
/// arch direction (columns 1..3), offsets 3..6 along the lingual row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteGeometry {
    jaws: Vec<Jaw>,
}

impl SiteGeometry {
    /// Standard full-mouth layout: the first half of the teeth form the
    /// upper arch, the rest the lower arch.
    pub fn two_jaw(tooth_count: usize) -> Result<Self> {
        if tooth_count == 0 || tooth_count % 2 != 0 {
            return Err(Error::validation(format!(
                "two-jaw geometry needs an even positive tooth count, got {tooth_count}"
            )));
        }
        let half = tooth_count / 2;
        let jaws = (0..tooth_count)
            .map(|t| if t < half { Jaw::Upper } else { Jaw::Lower })
            .collect();
        Ok(SiteGeometry { jaws })
    }

    pub fn single_jaw(tooth_count: usize) -> Result<Self> {
        if tooth_count == 0 {
            return Err(Error::validation("geometry needs at least one tooth"));
        }
        Ok(SiteGeometry {
            jaws: vec![Jaw::Upper; tooth_count],
        })
    }

    /// Arbitrary jaw assignment, one entry per tooth in arch order.
    pub fn with_jaws(jaws: Vec<Jaw>) -> Result<Self> {
        if jaws.is_empty() {
            return Err(Error::validation("geometry needs at least one tooth"));
        }
        Ok(SiteGeometry { jaws })
    }

    pub fn default_for_teeth(tooth_count: usize) -> Result<Self> {
        if tooth_count % 2 == 0 {
            Self::two_jaw(tooth_count)
        } else {
            Self::single_jaw(tooth_count)
        }
    }

    #[inline]
    pub fn tooth_count(&self) -> usize {
        self.jaws.len()
    }

    #[inline]
    pub fn site_count(&self) -> usize {
        self.jaws.len() * SITES_PER_TOOTH
    }

    #[inline]
    pub fn tooth_of(&self, site: usize) -> usize {
        site / SITES_PER_TOOTH
    }

    #[inline]
    pub fn row_of(&self, site: usize) -> SiteRow {
        if site % SITES_PER_TOOTH < 3 {
            SiteRow::Buccal
        } else {
            SiteRow::Lingual
        }
    }

    /// Column within the tooth (1..=3), increasing in arch direction.
    #[inline]
    pub fn column_of(&self, site: usize) -> usize {
        site % 3 + 1
    }

    pub fn jaw_of_tooth(&self, tooth: usize) -> Jaw {
        self.jaws[tooth]
    }

    pub fn sites_of_tooth(&self, tooth: usize) -> std::ops::Range<usize> {
        tooth * SITES_PER_TOOTH..(tooth + 1) * SITES_PER_TOOTH
    }

    fn site(&self, tooth: usize, row: SiteRow, column: usize) -> usize {
        let row_offset = match row {
            SiteRow::Buccal => 0,
            SiteRow::Lingual => 3,
        };
        tooth * SITES_PER_TOOTH + row_offset + (column - 1)
    }
}

/// Symmetric neighbor structure over tooth sites. Stored as adjacency lists;
/// the CAR code wants neighbor sums, not dense rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    /// Build from undirected edges. Duplicate and mirrored pairs collapse to
    /// one edge; self-loops, out-of-range indices, and isolated sites are
    /// rejected.
    pub fn from_edges(n_sites: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n_sites];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::validation(format!("self-loop at site {}", a + 1)));
            }
            if a >= n_sites || b >= n_sites {
                return Err(Error::validation(format!(
                    "edge ({}, {}) out of range for {} sites",
                    a + 1,
                    b + 1,
                    n_sites
                )));
            }
            if !neighbors[a].contains(&b) {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for (j, nb) in neighbors.iter_mut().enumerate() {
            if nb.is_empty() {
                return Err(Error::validation(format!(
                    "isolated site {} has no neighbors",
                    j + 1
                )));
            }
            nb.sort_unstable();
        }
        Ok(AdjacencyGraph { neighbors })
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    #[inline]
    pub fn degree(&self, site: usize) -> usize {
        self.neighbors[site].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.n_sites();
        let mut w = Mat::zeros(n, n);
        for (j, nb) in self.neighbors.iter().enumerate() {
            for &k in nb {
                w[(j, k)] = 1.0;
            }
        }
        w
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (j, nb) in self.neighbors.iter().enumerate() {
            for &k in nb {
                if j < k {
                    out.push((j, k));
                }
            }
        }
        out
    }
}

/// Default neighbor rules for the periodontal grid:
/// within a tooth, same-row sites in adjacent columns are neighbors; the two
/// rows connect vertically at the gap-flanking columns (1 and 3); and
/// consecutive teeth of the same jaw connect across the gap, row to row.
/// No cross-jaw edges.
pub fn build_default_adjacency(geometry: &SiteGeometry) -> AdjacencyGraph {
    let mut edges = Vec::new();
    for t in 0..geometry.tooth_count() {
        for row in [SiteRow::Buccal, SiteRow::Lingual] {
            edges.push((geometry.site(t, row, 1), geometry.site(t, row, 2)));
            edges.push((geometry.site(t, row, 2), geometry.site(t, row, 3)));
        }
        for col in [1, 3] {
            edges.push((
                geometry.site(t, SiteRow::Buccal, col),
                geometry.site(t, SiteRow::Lingual, col),
            ));
        }
    }
    for t in 1..geometry.tooth_count() {
        if geometry.jaw_of_tooth(t - 1) == geometry.jaw_of_tooth(t) {
            for row in [SiteRow::Buccal, SiteRow::Lingual] {
                edges.push((geometry.site(t - 1, row, 3), geometry.site(t, row, 1)));
            }
        }
    }
    AdjacencyGraph::from_edges(geometry.site_count(), &edges)
        .expect("default adjacency cannot produce isolated sites")
}

/// Row-stochastic T×J operator averaging the six sites of each tooth.
pub fn tooth_average_operator(geometry: &SiteGeometry) -> Mat {
    let mut op = Mat::zeros(geometry.tooth_count(), geometry.site_count());
    for t in 0..geometry.tooth_count() {
        for j in geometry.sites_of_tooth(t) {
            op[(t, j)] = 1.0 / SITES_PER_TOOTH as f64;
        }
    }
    op
}

/// Observed data: responses with an explicit missingness mask, covariates,
/// tooth-level missingness indicators, and the mouth layout.
///
/// Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    y: Mat,
    observed: Vec<bool>,
    x: Mat,
    z: Mat,
    missing_tooth: Vec<bool>,
    geometry: SiteGeometry,
}

impl Dataset {
    /// Validate and assemble a dataset from per-cell optional responses.
    ///
    /// Enforces tooth-blocked missingness (a tooth's six sites are jointly
    /// missing or jointly present), at least one present tooth per patient,
    /// and an intercept column in `z`.
    pub fn from_cells(
        cells: &[Vec<Option<f64>>],
        x: Mat,
        z: Mat,
        geometry: SiteGeometry,
    ) -> Result<Self> {
        let n = cells.len();
        let j = geometry.site_count();
        let t_count = geometry.tooth_count();
        if n == 0 {
            return Err(Error::validation("empty response matrix"));
        }
        if cells.iter().any(|r| r.len() != j) {
            return Err(Error::dim(format!(
                "response rows must have {j} columns (6 sites x {t_count} teeth)"
            )));
        }
        if x.rows() != n {
            return Err(Error::dim(format!(
                "patient covariate rows ({}) != patients ({n})",
                x.rows()
            )));
        }
        if z.rows() != j {
            return Err(Error::dim(format!(
                "site covariate rows ({}) != sites ({j})",
                z.rows()
            )));
        }
        for s in 0..j {
            if z[(s, 0)] != 1.0 {
                return Err(Error::validation(format!(
                    "site covariates must carry a leading intercept column of 1s (site {})",
                    s + 1
                )));
            }
        }

        let mut y = Mat::zeros(n, j);
        let mut observed = vec![false; n * j];
        let mut missing_tooth = vec![false; n * t_count];
        for (i, row) in cells.iter().enumerate() {
            let mut present_teeth = 0usize;
            for t in 0..t_count {
                let sites = geometry.sites_of_tooth(t);
                let miss = row[sites.start].is_none();
                for s in sites.clone() {
                    if row[s].is_none() != miss {
                        return Err(Error::validation(format!(
                            "patient {} tooth {}: sites must be missing as a block",
                            i + 1,
                            t + 1
                        )));
                    }
                    if let Some(v) = row[s] {
                        y[(i, s)] = v;
                        observed[i * j + s] = true;
                    }
                }
                missing_tooth[i * t_count + t] = miss;
                if !miss {
                    present_teeth += 1;
                }
            }
            if present_teeth == 0 {
                return Err(Error::validation(format!(
                    "patient {} has zero present teeth",
                    i + 1
                )));
            }
        }
        Ok(Dataset {
            y,
            observed,
            x,
            z,
            missing_tooth,
            geometry,
        })
    }

    #[inline]
    pub fn n_patients(&self) -> usize {
        self.y.rows()
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.y.cols()
    }

    #[inline]
    pub fn n_teeth(&self) -> usize {
        self.geometry.tooth_count()
    }

    pub fn n_patient_covs(&self) -> usize {
        self.x.cols()
    }

    pub fn n_site_covs(&self) -> usize {
        self.z.cols()
    }

    /// Response value; only meaningful where `is_observed`.
    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.y[(i, j)]
    }

    #[inline]
    pub fn y_row(&self, i: usize) -> &[f64] {
        self.y.row(i)
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.n_sites() + j]
    }

    #[inline]
    pub fn observed_row(&self, i: usize) -> &[bool] {
        &self.observed[i * self.n_sites()..(i + 1) * self.n_sites()]
    }

    /// Tooth-level missingness indicator (true = missing).
    #[inline]
    pub fn is_tooth_missing(&self, i: usize, t: usize) -> bool {
        self.missing_tooth[i * self.n_teeth() + t]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn missing_tooth_fraction(&self) -> f64 {
        let total = self.n_patients() * self.n_teeth();
        self.missing_tooth.iter().filter(|&&m| m).count() as f64 / total as f64
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn z(&self) -> &Mat {
        &self.z
    }

    #[inline]
    pub fn z_row(&self, j: usize) -> &[f64] {
        self.z.row(j)
    }

    pub fn geometry(&self) -> &SiteGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n_patients())
            .map(|i| {
                (0..self.n_sites())
                    .map(|j| self.is_observed(i, j).then(|| self.y(i, j)))
                    .collect()
            })
            .collect()
    }
}

/// File locations for one dataset.
#[derive(Clone, Debug)]
pub struct DataPaths {
    pub response: std::path::PathBuf,
    pub patient_covariates: std::path::PathBuf,
    pub site_covariates: std::path::PathBuf,
}

impl DataPaths {
    /// Conventional triple inside a directory: response.csv,
    /// patient_covariates.csv, site_covariates.csv.
    pub fn in_dir(dir: &Path) -> Self {
        DataPaths {
            response: dir.join("response.csv"),
            patient_covariates: dir.join("patient_covariates.csv"),
            site_covariates: dir.join("site_covariates.csv"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IoConfig {
    /// Response/covariate CSVs start with a header row.
    pub has_header: bool,
    /// Prepend an intercept column of 1s to the site covariates.
    pub add_intercept: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            has_header: false,
            add_intercept: true,
        }
    }
}

fn read_numeric_csv(path: &Path, has_header: bool, allow_na: bool) -> Result<Vec<Vec<Option<f64>>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            if field == "NA" {
                if !allow_na {
                    return Err(Error::validation(format!(
                        "{}: NA not allowed at row {}, column {}",
                        path.display(),
                        r + 1,
                        c + 1
                    )));
                }
                row.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    Error::validation(format!(
                        "{}: non-numeric cell {:?} at row {}, column {}",
                        path.display(),
                        field,
                        r + 1,
                        c + 1
                    ))
                })?;
                row.push(Some(v));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation(format!("{}: empty file", path.display())));
    }
    let w = rows[0].len();
    if rows.iter().any(|r| r.len() != w) {
        return Err(Error::dim(format!("{}: ragged rows", path.display())));
    }
    Ok(rows)
}

/// Load a dataset from the CSV triple. The response uses the literal token
/// `NA` for missing cells; the tooth count is the column count divided by 6.
pub fn load_dataset(paths: &DataPaths, config: &IoConfig) -> Result<Dataset> {
    let cells = read_numeric_csv(&paths.response, config.has_header, true)?;
    let j = cells[0].len();
    if j == 0 || j % SITES_PER_TOOTH != 0 {
        return Err(Error::dim(format!(
            "response has {j} columns; expected a multiple of {SITES_PER_TOOTH}"
        )));
    }
    let geometry = SiteGeometry::default_for_teeth(j / SITES_PER_TOOTH)?;

    let x_rows = read_numeric_csv(&paths.patient_covariates, config.has_header, false)?;
    let x = Mat::from_rows(
        x_rows
            .into_iter()
            .map(|r| r.into_iter().map(Option::unwrap).collect())
            .collect(),
    );

    let z_rows = read_numeric_csv(&paths.site_covariates, config.has_header, false)?;
    let z = Mat::from_rows(
        z_rows
            .into_iter()
            .map(|r| {
                let vals = r.into_iter().map(Option::unwrap);
                if config.add_intercept {
                    std::iter::once(1.0).chain(vals).collect()
                } else {
                    vals.collect()
                }
            })
            .collect(),
    );

    Dataset::from_cells(&cells, x, z, geometry)
}

/// Write the CSV triple in the interchange layout: the site covariate file
/// carries q-1 columns, the intercept being re-added on load. Output reads
/// back exactly with the default [`IoConfig`].
pub fn save_dataset(dataset: &Dataset, paths: &DataPaths) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(&paths.response)?;
    for i in 0..dataset.n_patients() {
        let row: Vec<String> = (0..dataset.n_sites())
            .map(|j| {
                if dataset.is_observed(i, j) {
                    format_float(dataset.y(i, j))
                } else {
                    "NA".to_string()
                }
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;

    write_matrix_csv(&paths.patient_covariates, dataset.x())?;
    let mut w = csv::WriterBuilder::new().from_path(&paths.site_covariates)?;
    for j in 0..dataset.n_sites() {
        let row: Vec<String> = dataset.z_row(j)[1..]
            .iter()
            .map(|&v| format_float(v))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix_csv(path: &Path, m: &Mat) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_float(v)).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn format_float(v: f64) -> String {
    // shortest round-trip representation
    let mut buf = serde_json::to_string(&v).unwrap_or_else(|_| format!("{v}"));
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

/// Load a 1-based edge-list CSV with columns `site_a,site_b`. A header row
/// is detected and skipped.
pub fn load_adjacency(path: &Path, n_sites: usize) -> Result<AdjacencyGraph> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut edges = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::validation(format!(
                "{}: adjacency rows need exactly two columns (row {})",
                path.display(),
                r + 1
            )));
        }
        let parse = |s: &str| s.parse::<usize>().ok();
        match (parse(&record[0]), parse(&record[1])) {
            (Some(a), Some(b)) => {
                if a == 0 || b == 0 {
                    return Err(Error::validation(format!(
                        "{}: site indices are 1-based (row {})",
                        path.display(),
                        r + 1
                    )));
                }
                edges.push((a - 1, b - 1));
            }
            _ if r == 0 => continue, // header row
            _ => {
                return Err(Error::validation(format!(
                    "{}: non-integer site index at row {}",
                    path.display(),
                    r + 1
                )));
            }
        }
    }
    AdjacencyGraph::from_edges(n_sites, &edges)
}

/// Write the adjacency edge list (1-based) with a header row.
pub fn save_adjacency(graph: &AdjacencyGraph, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    w.write_record(["site_a", "site_b"])?;
    for (a, b) in graph.edges() {
        w.write_record(&[(a + 1).to_string(), (b + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_tooth_single_jaw_graph_matches_hand_enumeration() {
        let g = SiteGeometry::single_jaw(2).unwrap();
        let adj = build_default_adjacency(&g);
        // Hand enumeration from the two-teeth periodontal grid: per tooth,
        // row runs (b1-b2, b2-b3, l1-l2, l2-l3) and vertical gap columns
        // (b1-l1, b3-l3); across the gap, b3-b1' and l3-l1'.
        let mut expect = vec![
            (0, 1),
            (1, 2),
            (3, 4),
            (4, 5),
            (0, 3),
            (2, 5),
            (6, 7),
            (7, 8),
            (9, 10),
            (10, 11),
            (6, 9),
            (8, 11),
            (2, 6),
            (5, 9),
        ];
        expect.sort_unstable();
        assert_eq!(adj.edges(), expect);
        for j in 0..12 {
            assert!(adj.degree(j) >= 1 && adj.degree(j) <= 3, "site {j}");
        }
    }

    #[test]
    fn full_mouth_all_sites_connected() {
        let g = SiteGeometry::two_jaw(28).unwrap();
        let adj = build_default_adjacency(&g);
        assert_eq!(adj.n_sites(), 168);
        for j in 0..168 {
            assert!(adj.degree(j) >= 1);
        }
        // no cross-jaw edge between tooth 13 (upper end) and tooth 14
        let upper_end = g.sites_of_tooth(13);
        let lower_start = g.sites_of_tooth(14);
        for a in upper_end {
            for b in lower_start.clone() {
                assert!(!adj.neighbors(a).contains(&b));
            }
        }
    }

    #[test]
    fn isolated_teeth_have_no_gap_edges() {
        let g = SiteGeometry::with_jaws(vec![Jaw::Upper, Jaw::Lower]).unwrap();
        let adj = build_default_adjacency(&g);
        // only the six within-tooth edges per tooth
        assert_eq!(adj.edge_count(), 12);
    }

    #[test]
    fn tooth_average_rows_sum_to_one() {
        let g = SiteGeometry::two_jaw(28).unwrap();
        let op = tooth_average_operator(&g);
        for t in 0..28 {
            let s: f64 = op.row(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        // averaging the site index recovers the mean of each tooth's indices
        let idx: Vec<f64> = (0..168).map(|j| j as f64).collect();
        let means = op.matvec(&idx);
        for (t, &m) in means.iter().enumerate() {
            let want: f64 = (6 * t..6 * t + 6).map(|j| j as f64).sum::<f64>() / 6.0;
            assert!((m - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacency_relabeling_isomorphism() {
        // Reversing arch order within a single jaw relabels the graph by the
        // induced site permutation: tooth t -> T-1-t, column c -> 4-c.
        let t_count = 4;
        let g = SiteGeometry::single_jaw(t_count).unwrap();
        let adj = build_default_adjacency(&g);
        let perm = |site: usize| {
            let t = site / SITES_PER_TOOTH;
            let off = site % SITES_PER_TOOTH;
            let (row, col) = (off / 3, off % 3);
            (t_count - 1 - t) * SITES_PER_TOOTH + row * 3 + (2 - col)
        };
        let mut mapped: Vec<(usize, usize)> = adj
            .edges()
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (perm(a), perm(b));
                (pa.min(pb), pa.max(pb))
            })
            .collect();
        mapped.sort_unstable();
        assert_eq!(mapped, adj.edges());
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(AdjacencyGraph::from_edges(6, &[(0, 0)]).is_err());
        assert!(AdjacencyGraph::from_edges(6, &[(0, 9)]).is_err());
        // isolated sites 4..6
        assert!(AdjacencyGraph::from_edges(6, &[(0, 1), (1, 2)]).is_err());
        // duplicated mirrored edge counts once
        let g = AdjacencyGraph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    fn toy_cells(n: usize, g: &SiteGeometry) -> Vec<Vec<Option<f64>>> {
        (0..n)
            .map(|i| {
                (0..g.site_count())
                    .map(|j| Some((i * 100 + j) as f64 * 0.5))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn dataset_rejects_partial_tooth_block() {
        let g = SiteGeometry::single_jaw(2).unwrap();
        let mut cells = toy_cells(3, &g);
        cells[1][4] = None; // one site of tooth 0 missing, others present
        let x = Mat::zeros(3, 2);
        let z = {
            let mut z = Mat::zeros(12, 2);
            for j in 0..12 {
                z[(j, 0)] = 1.0;
            }
            z
        };
        let err = Dataset::from_cells(&cells, x, z, g).unwrap_err();
        assert!(err.to_string().contains("block"), "{err}");
    }

    #[test]
    fn dataset_rejects_all_missing_patient() {
        let g = SiteGeometry::single_jaw(2).unwrap();
        let mut cells = toy_cells(2, &g);
        for v in cells[0].iter_mut() {
            *v = None;
        }
        let x = Mat::zeros(2, 1);
        let mut z = Mat::zeros(12, 1);
        for j in 0..12 {
            z[(j, 0)] = 1.0;
        }
        let err = Dataset::from_cells(&cells, x, z, g).unwrap_err();
        assert!(err.to_string().contains("zero present teeth"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = SiteGeometry::single_jaw(2).unwrap();
        let mut cells = toy_cells(3, &g);
        for s in g.sites_of_tooth(1) {
            cells[2][s] = None;
        }
        let x = Mat::from_rows(vec![vec![0.25, 1.5], vec![-3.0, 2.0], vec![0.125, -0.5]]);
        let mut z = Mat::zeros(12, 2);
        for j in 0..12 {
            z[(j, 0)] = 1.0;
            z[(j, 1)] = j as f64 / 3.0;
        }
        let d = Dataset::from_cells(&cells, x, z, g).unwrap();
        let paths = DataPaths::in_dir(dir.path());
        save_dataset(&d, &paths).unwrap();
        let loaded = load_dataset(&paths, &IoConfig::default()).unwrap();
        assert_eq!(loaded.cells(), d.cells());
        assert_eq!(loaded.x(), d.x());
        assert_eq!(loaded.z(), d.z());
    }

    #[test]
    fn adjacency_csv_round_trip_matches_builder() {
        let dir = tempfile::tempdir().unwrap();
        let g = SiteGeometry::two_jaw(4).unwrap();
        let adj = build_default_adjacency(&g);
        let path = dir.path().join("adjacency.csv");
        save_adjacency(&adj, &path).unwrap();
        let loaded = load_adjacency(&path, g.site_count()).unwrap();
        assert_eq!(loaded, adj);
    }
}
