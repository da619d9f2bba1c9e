//! End-to-end orchestration: generate, measure, select, design, report.
//!
//! Every artifact is written through an [`ArtifactWriter`], which records a
//! SHA-256 digest per file; `summary.json` lists them so two runs can be
//! compared byte for byte. Nothing time-dependent is written.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cell2d::UnitCell2D;
use crate::dpp::{self, diversity_score, greedy_select, joint_kernel, DppError, SelectionResult, DEFAULT_JITTER};
use crate::expr::{read_catalog, CatalogEntry, CatalogError};
use crate::formats::{self, FormatError, LoadedCell, Manifest, ManifestEntry};
use crate::isogen::{generate_family, Family, FamilyConfig, IsogenError};
use crate::mech::{
    experiment_mbb, gen2d_dataset, AssemblyProblem, ExperimentReport, GaConfig, Gen2dConfig, MechError, NamedSubset,
};
use crate::metrics::{
    descriptor2d, interfamily_matrix, property_distance, rbf_kernel, reciprocal_kernel, repair_psd, DistanceMatrix,
    IndexedCloud, InterfamilyBase, KernelKind, MetricsError, Repair, SimilarityKernel, SquareMatrix, DEFAULT_ROUNDS,
};
use crate::seed;

/// How a failure maps onto the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, configuration or artifact (exit code 2).
    Validation,
    /// A computation broke down (exit code 3).
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

pub trait Classify {
    fn class(&self) -> ErrorClass;
}

impl Classify for FormatError {
    fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

impl Classify for CatalogError {
    fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

impl Classify for IsogenError {
    fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

impl Classify for MetricsError {
    fn class(&self) -> ErrorClass {
        match self {
            MetricsError::RepairFailed | MetricsError::NotSymmetric(..) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

impl Classify for DppError {
    fn class(&self) -> ErrorClass {
        match self {
            DppError::NotPsd(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}

impl Classify for MechError {
    fn class(&self) -> ErrorClass {
        match self {
            MechError::Invalid(_) => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }
}

/// A stage failure, naming the stage and, when known, the offending input.
#[derive(Debug, Error)]
#[error("{stage}{}: {message}", .id.as_ref().map(|i| format!(" [{i}]")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: &'static str,
    pub id: Option<String>,
    pub class: ErrorClass,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &'static str, id: Option<&str>, class: ErrorClass, message: impl Display) -> Self {
        Self {
            stage,
            id: id.map(str::to_string),
            class,
            message: message.to_string(),
        }
    }

    pub fn validation(stage: &'static str, message: impl Display) -> Self {
        Self::new(stage, None, ErrorClass::Validation, message)
    }
}

/// `map_err` adapter attaching a stage name and input id.
pub fn at<'a, E: Classify + Display>(stage: &'static str, id: Option<&'a str>) -> impl FnOnce(E) -> PipelineError + 'a {
    move |e| PipelineError::new(stage, id, e.class(), e)
}

/// Shape metric between families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeMetric {
    /// Hausdorff over members, member distance = point-cloud Hausdorff.
    #[serde(rename = "H-H")]
    HH,
    /// Hausdorff over members, member distance = embedding cosine distance.
    #[serde(rename = "E-H")]
    EH,
}

impl ShapeMetric {
    fn base(self) -> InterfamilyBase {
        match self {
            ShapeMetric::HH => InterfamilyBase::HausdorffPoints,
            ShapeMetric::EH => InterfamilyBase::EmbeddingCosine,
        }
    }
}

impl std::str::FromStr for ShapeMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "H-H" | "hh" | "HH" => Ok(ShapeMetric::HH),
            "E-H" | "eh" | "EH" => Ok(ShapeMetric::EH),
            _ => Err(format!("unknown shape metric {s:?} (expected H-H or E-H)")),
        }
    }
}

/// A kernel together with the distances it came from and its PSD repair.
#[derive(Debug, Clone)]
pub struct BuiltKernel {
    pub distance: Option<DistanceMatrix>,
    pub kernel: SimilarityKernel,
    pub repair: Repair,
}

fn repaired(distance: Option<DistanceMatrix>, mut kernel: SimilarityKernel) -> Result<BuiltKernel, MetricsError> {
    let repair = repair_psd(&mut kernel)?;
    Ok(BuiltKernel {
        distance,
        kernel,
        repair,
    })
}

/// Inter-family shape kernel: `1 / (1 + h)` of the family Hausdorff matrix.
pub fn family_shape_kernel(families: &[Family], metric: ShapeMetric) -> Result<BuiltKernel, MetricsError> {
    let d = interfamily_matrix(families, metric.base())?;
    let (kernel, repair) = reciprocal_kernel(&d, KernelKind::Shape)?;
    Ok(BuiltKernel {
        distance: Some(d),
        kernel,
        repair,
    })
}

/// Inter-family property kernel: Gaussian of the family Hausdorff matrix
/// over normalized property vectors.
pub fn family_property_kernel(families: &[Family]) -> Result<BuiltKernel, MetricsError> {
    let d = interfamily_matrix(families, InterfamilyBase::PropertyEuclidean)?;
    let k = rbf_kernel(&d, KernelKind::Property);
    repaired(Some(d), k)
}

/// Shape kernel of 2D cells: Gaussian of descriptor distances.
pub fn planar_shape_kernel(cells: &[UnitCell2D]) -> Result<BuiltKernel, MetricsError> {
    let desc = cells
        .iter()
        .map(|c| descriptor2d(c, DEFAULT_ROUNDS))
        .collect::<Result<Vec<_>, _>>()?;
    let d = DistanceMatrix::from_fn(desc.len(), |i, j| desc[i].distance(&desc[j]));
    let k = rbf_kernel(&d, KernelKind::Shape);
    repaired(Some(d), k)
}

/// Property kernel of 2D cells: Gaussian of normalized tensor distances.
pub fn planar_property_kernel(cells: &[UnitCell2D]) -> Result<BuiltKernel, MetricsError> {
    let props = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.properties
                .clone()
                .ok_or_else(|| MetricsError::MissingData(format!("cell {i}"), "property vector"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let d = property_distance(&props, true)?;
    let k = rbf_kernel(&d, KernelKind::Property);
    repaired(Some(d), k)
}

/// Member-level kernel spaces over a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSpace {
    Shape2d,
    Hausdorff,
    Embed,
    Property,
}

impl std::str::FromStr for KernelSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shape2d" => Ok(KernelSpace::Shape2d),
            "hausdorff" => Ok(KernelSpace::Hausdorff),
            "embed" => Ok(KernelSpace::Embed),
            "property" => Ok(KernelSpace::Property),
            _ => Err(format!("unknown space {s:?} (expected shape2d, hausdorff, embed or property)")),
        }
    }
}

/// Kernel over every entry of a manifest.
pub fn manifest_kernel(manifest: &Manifest, space: KernelSpace) -> Result<BuiltKernel, PipelineError> {
    const STAGE: &str = "metrics";
    if manifest.entries.is_empty() {
        return Err(PipelineError::validation(STAGE, "manifest has no entries"));
    }
    let built = match space {
        KernelSpace::Shape2d => {
            let cells = manifest
                .entries
                .iter()
                .map(|e| match manifest.load_cell(e).map_err(at(STAGE, Some(&e.id)))? {
                    LoadedCell::Pixel(c) => Ok(c),
                    LoadedCell::Voxel(_) => Err(PipelineError::validation(STAGE, format!("{} is not a 2D cell", e.id))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            planar_shape_kernel(&cells)
        }
        KernelSpace::Hausdorff => {
            let clouds = manifest
                .entries
                .iter()
                .map(|e| {
                    let c = manifest.load_cloud(e).map_err(at(STAGE, Some(&e.id)))?;
                    if c.is_empty() {
                        return Err(PipelineError::validation(STAGE, format!("{} has an empty cloud", e.id)));
                    }
                    Ok(IndexedCloud::new(&c))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let d = DistanceMatrix::from_fn(clouds.len(), |i, j| clouds[i].hausdorff(&clouds[j]));
            reciprocal_kernel(&d, KernelKind::Shape).map(|(kernel, repair)| BuiltKernel {
                distance: Some(d),
                kernel,
                repair,
            })
        }
        KernelSpace::Embed => {
            let v = entry_vectors(manifest, |e| e.embedding.as_ref(), "embedding")?;
            crate::metrics::cosine_kernel(&v, KernelKind::Shape).and_then(|k| repaired(None, k))
        }
        KernelSpace::Property => {
            let v = entry_vectors(manifest, |e| e.properties.as_ref(), "properties")?;
            property_distance(&v, true).and_then(|d| {
                let k = rbf_kernel(&d, KernelKind::Property);
                repaired(Some(d), k)
            })
        }
    };
    built.map_err(at(STAGE, None))
}

fn entry_vectors(
    manifest: &Manifest,
    get: impl Fn(&ManifestEntry) -> Option<&Vec<f64>>,
    what: &str,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    manifest
        .entries
        .iter()
        .map(|e| {
            get(e)
                .cloned()
                .ok_or_else(|| PipelineError::new("metrics", Some(&e.id), ErrorClass::Validation, format!("no {what}")))
        })
        .collect()
}

/// On-disk selection record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub w: f64,
    pub k: usize,
    pub indices: Vec<usize>,
    pub gains: Vec<f64>,
    /// `log det` of the joint kernel on the selection.
    pub score: f64,
    pub score_shape: f64,
    pub score_property: f64,
    pub seed: u64,
    /// Ids of the selected items, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ids: Vec<String>,
}

impl SelectionRecord {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        Ok(serde_json::from_slice(&formats::read_file(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection serializes") + "\n"
    }
}

/// Joint kernel for weight `w`, repaired when roundoff makes it indefinite.
pub fn repaired_joint(lp: &SimilarityKernel, ls: &SimilarityKernel, w: f64) -> Result<(SimilarityKernel, Repair), PipelineError> {
    let mut j = joint_kernel(lp, ls, w).map_err(at("select", None))?.kernel;
    let r = repair_psd(&mut j).map_err(at("select", None))?;
    Ok((j, r))
}

/// Greedy selection on the joint kernel for weight `w`.
pub fn select_weighted(
    lp: &SimilarityKernel,
    ls: &SimilarityKernel,
    w: f64,
    k: usize,
    seed: u64,
) -> Result<(SelectionRecord, Repair), PipelineError> {
    let (joint, repair) = repaired_joint(lp, ls, w)?;
    let sel = greedy_select(&joint.matrix, k, DEFAULT_JITTER).map_err(at("select", None))?;
    Ok((record(&sel, w, ls, lp, seed), repair))
}

fn record(sel: &SelectionResult, w: f64, ls: &SimilarityKernel, lp: &SimilarityKernel, seed: u64) -> SelectionRecord {
    SelectionRecord {
        w,
        k: sel.indices.len(),
        indices: sel.indices.clone(),
        gains: sel.gains.clone(),
        score: sel.score,
        score_shape: diversity_score(&ls.matrix, &sel.indices, DEFAULT_JITTER),
        score_property: diversity_score(&lp.matrix, &sel.indices, DEFAULT_JITTER),
        seed,
        ids: Vec::new(),
    }
}

/// One row of a score report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub name: String,
    pub k: usize,
    pub w: f64,
    pub score_shape: f64,
    pub score_property: f64,
    pub score_joint: f64,
    /// Fraction of random subsets of the same size scoring at most this
    /// selection, per kernel.
    pub quantile_shape: f64,
    pub quantile_property: f64,
    pub quantile_joint: f64,
}

/// Scores selections under the shape, property and joint kernels and ranks
/// them against `trials` random subsets of the same size. Random subsets
/// depend on `(seed, k)` only, so all kernels see the same draws.
pub fn score_report(
    selections: &[(String, f64, Vec<usize>)],
    ls: &SimilarityKernel,
    lp: &SimilarityKernel,
    trials: usize,
    seed: u64,
) -> Result<Vec<ScoreRow>, PipelineError> {
    let mut rows = Vec::new();
    for (name, w, idx) in selections {
        let k = idx.len();
        let bseed = seed::derive(seed, "baseline", k as u64);
        let joint = repaired_joint(lp, ls, *w)?.0;
        let base = |l: &SquareMatrix| dpp::random_baseline(l, k, trials, bseed, DEFAULT_JITTER).map_err(at("report", Some(name)));
        let (bs, bp, bj) = (base(&ls.matrix)?, base(&lp.matrix)?, base(&joint.matrix)?);
        let score = |l: &SquareMatrix| diversity_score(l, idx, DEFAULT_JITTER);
        let (s, p, j) = (score(&ls.matrix), score(&lp.matrix), score(&joint.matrix));
        rows.push(ScoreRow {
            name: name.clone(),
            k,
            w: *w,
            score_shape: s,
            score_property: p,
            score_joint: j,
            quantile_shape: bs.rank_of(s),
            quantile_property: bp.rank_of(p),
            quantile_joint: bj.rank_of(j),
        });
    }
    Ok(rows)
}

pub fn score_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::from("name,k,w,score_shape,score_property,score_joint,quantile_shape,quantile_property,quantile_joint\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.name, r.k, r.w, r.score_shape, r.score_property, r.score_joint, r.quantile_shape, r.quantile_property, r.quantile_joint
        );
    }
    s
}

/// Pearson correlation between the off-diagonal entries of two kernels.
pub fn kernel_correlation(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..a.n {
        for j in i + 1..a.n {
            xs.push(a.get(i, j));
            ys.push(b.get(i, j));
        }
    }
    let n = xs.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// The design-study subsets of a 2D ground set: shape-diverse `S`, jointly
/// diverse `SP` (weight `w_sp`), property-diverse `P` and uniformly random `R`.
pub fn design_subsets(
    ls: &SimilarityKernel,
    lp: &SimilarityKernel,
    k: usize,
    w_sp: f64,
    seed: u64,
) -> Result<Vec<(NamedSubset, SelectionRecord)>, PipelineError> {
    let mut out = Vec::new();
    for (name, w) in [("S", 1.0), ("SP", w_sp), ("P", 0.0)] {
        let rec = select_weighted(lp, ls, w, k, seed)?.0;
        out.push((
            NamedSubset {
                name: name.into(),
                indices: rec.indices.clone(),
            },
            rec,
        ));
    }
    if k > ls.n() {
        return Err(PipelineError::validation("select", format!("subset size {k} exceeds ground set of {}", ls.n())));
    }
    let mut rng = seed::rng(seed, "random-subset", k as u64);
    let mut idx = sample(&mut rng, ls.n(), k).into_vec();
    idx.sort_unstable();
    let joint = repaired_joint(lp, ls, w_sp)?.0;
    let rec = SelectionRecord {
        w: w_sp,
        k,
        gains: Vec::new(),
        score: diversity_score(&joint.matrix, &idx, DEFAULT_JITTER),
        score_shape: diversity_score(&ls.matrix, &idx, DEFAULT_JITTER),
        score_property: diversity_score(&lp.matrix, &idx, DEFAULT_JITTER),
        seed,
        ids: Vec::new(),
        indices: idx.clone(),
    };
    out.push((NamedSubset { name: "R".into(), indices: idx }, rec));
    Ok(out)
}

/// Writes files under a root directory and remembers their digests.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    digests: BTreeMap<String, Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            digests: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` at `rel` (forward slashes) and records its digest.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        formats::write_file(&self.root.join(rel), bytes).map_err(at("write", Some(rel)))?;
        self.digests.insert(
            rel.to_string(),
            Artifact {
                path: rel.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            },
        );
        Ok(())
    }

    /// Writes a matrix as `<stem>.kmat` plus a `<stem>.csv` mirror.
    pub fn write_matrix(&mut self, stem: &str, m: &SquareMatrix, kind: KernelKind) -> Result<(), PipelineError> {
        self.write(&format!("{stem}.kmat"), &formats::encode_kmat(m, kind))?;
        self.write(&format!("{stem}.csv"), formats::matrix_csv(m).as_bytes())
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        self.digests.values().cloned().collect()
    }
}

/// Per-family record in `families.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub family_id: String,
    pub expression: String,
    pub form: String,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub retained: bool,
    pub samples: usize,
}

/// Generates every catalog family; errors name the failing family.
pub fn generate_families(catalog: &[CatalogEntry], cfg: &FamilyConfig) -> Result<Vec<Family>, PipelineError> {
    if catalog.is_empty() {
        return Err(PipelineError::validation("isogen", "no families"));
    }
    let run = |e: &CatalogEntry| generate_family(e, cfg).map_err(at("isogen", Some(&e.family_id)));
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        catalog.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = catalog.iter().map(run).collect();
    out
}

/// Writes cells, clouds, the manifest, embeddings and the family table.
/// Returns the manifest entries of the retained families' samples.
pub fn write_dataset(families: &[Family], out: &mut ArtifactWriter) -> Result<Vec<ManifestEntry>, PipelineError> {
    let mut entries = Vec::new();
    let mut records = Vec::new();
    for f in families {
        records.push(FamilyRecord {
            family_id: f.id.clone(),
            expression: f.expr.source_text().to_string(),
            form: f.form.as_str().to_string(),
            rho_min: f.range.map(|r| r.rho_min),
            rho_max: f.range.map(|r| r.rho_max),
            retained: f.is_retained(),
            samples: f.samples.len(),
        });
        for (i, s) in f.samples.iter().enumerate() {
            let id = format!("{}/{i:03}", f.id);
            let cell_path = format!("cells/{id}.vxc");
            let cloud_path = format!("clouds/{id}.pc3d");
            out.write(&cell_path, &formats::encode_vxc(&s.cell))?;
            out.write(&cloud_path, &formats::encode_pc3d(&s.cloud))?;
            entries.push(ManifestEntry {
                id,
                family_id: f.id.clone(),
                density: s.cell.density,
                cell_path,
                cloud_path: Some(cloud_path),
                properties: Some(s.properties.clone()),
                embedding: Some(s.embedding.clone()),
            });
        }
    }
    let json = serde_json::to_string_pretty(&records).expect("family table serializes") + "\n";
    out.write("families.json", json.as_bytes())?;
    write_manifest(&entries, out)?;
    Ok(entries)
}

fn write_manifest(entries: &[ManifestEntry], out: &mut ArtifactWriter) -> Result<(), PipelineError> {
    out.write("manifest.json", Manifest::to_json(entries).map_err(at("write", None))?.as_bytes())?;
    let rows: Vec<(String, Vec<f64>)> = entries
        .iter()
        .filter_map(|e| e.embedding.clone().map(|v| (e.id.clone(), v)))
        .collect();
    if !rows.is_empty() {
        out.write("embeddings.csv", formats::embeddings_csv(&rows).as_bytes())?;
    }
    Ok(())
}

/// Writes 2D cells as PBM files with a manifest carrying their tensors.
pub fn write_planar_dataset(cells: &[UnitCell2D], out: &mut ArtifactWriter) -> Result<Vec<ManifestEntry>, PipelineError> {
    let mut entries = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let id = format!("c{i:03}");
        let cell_path = format!("cells/{id}.pbm");
        out.write(&cell_path, &formats::encode_pbm_binary(c))?;
        entries.push(ManifestEntry {
            id,
            family_id: "planar".into(),
            density: c.volume_fraction(),
            cell_path,
            cloud_path: None,
            properties: c.properties.clone(),
            embedding: None,
        });
    }
    write_manifest(&entries, out)?;
    Ok(entries)
}

/// Reads the 2D cells of a manifest, attaching stored properties.
pub fn load_planar_cells(manifest: &Manifest) -> Result<Vec<UnitCell2D>, PipelineError> {
    manifest
        .entries
        .iter()
        .map(|e| match manifest.load_cell(e).map_err(at("design", Some(&e.id)))? {
            LoadedCell::Pixel(mut c) => {
                c.properties = e.properties.clone();
                Ok(c)
            }
            LoadedCell::Voxel(_) => Err(PipelineError::new(
                "design",
                Some(&e.id),
                ErrorClass::Validation,
                "expected a 2D cell",
            )),
        })
        .collect()
}

pub fn read_problem(path: &Path) -> Result<AssemblyProblem, PipelineError> {
    let id = path.display().to_string();
    let bytes = formats::read_file(path).map_err(at("design", Some(&id)))?;
    let p: AssemblyProblem = serde_json::from_slice(&bytes)
        .map_err(|e| PipelineError::new("design", Some(&id), ErrorClass::Validation, e))?;
    p.validate().map_err(at("design", Some(&id)))?;
    Ok(p)
}

fn default_resolution() -> usize {
    32
}
fn default_samples() -> usize {
    10
}
fn default_points() -> usize {
    512
}
fn default_metric() -> ShapeMetric {
    ShapeMetric::HH
}
fn default_weights() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_sizes() -> Vec<usize> {
    vec![5]
}
fn default_trials() -> usize {
    1000
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Pipeline settings, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// 3D family catalog.
    pub catalog: PathBuf,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_metric")]
    pub metric: ShapeMetric,
    #[serde(default = "default_weights")]
    pub weights: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub subset_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub baseline_trials: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub design: Option<DesignStageConfig>,
}

fn default_count() -> usize {
    200
}
fn default_cell_res() -> usize {
    50
}
fn default_vf_min() -> f64 {
    0.70
}
fn default_vf_max() -> f64 {
    0.95
}
fn default_subset() -> usize {
    20
}
fn default_runs() -> usize {
    10
}
fn default_w_sp() -> f64 {
    0.5
}

/// Optional 2D design study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignStageConfig {
    /// 2D family catalog.
    pub catalog: PathBuf,
    /// Assembly problem JSON.
    pub problem: PathBuf,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_cell_res")]
    pub resolution: usize,
    #[serde(default = "default_vf_min")]
    pub vf_min: f64,
    #[serde(default = "default_vf_max")]
    pub vf_max: f64,
    #[serde(default = "default_subset")]
    pub subset_size: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_w_sp")]
    pub w_sp: f64,
    #[serde(default)]
    pub ga: GaConfig,
}

impl PipelineConfig {
    pub fn new(catalog: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            catalog: catalog.into(),
            resolution: default_resolution(),
            samples: default_samples(),
            points: default_points(),
            metric: default_metric(),
            weights: default_weights(),
            subset_sizes: default_sizes(),
            seed: 0,
            baseline_trials: default_trials(),
            out: out.into(),
            design: None,
        }
    }

    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let id = path.display().to_string();
        let bytes = formats::read_file(path).map_err(at("config", Some(&id)))?;
        let mut cfg: Self =
            serde_json::from_slice(&bytes).map_err(|e| PipelineError::new("config", Some(&id), ErrorClass::Validation, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.catalog);
        fix(&mut cfg.out);
        if let Some(d) = cfg.design.as_mut() {
            fix(&mut d.catalog);
            fix(&mut d.problem);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::validation("config", m));
        if !self.catalog.is_file() {
            return fail(format!("catalog {} does not exist", self.catalog.display()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return fail(format!("weight {w} is outside [0, 1]"));
        }
        if self.weights.is_empty() {
            return fail("weights list is empty".into());
        }
        if self.subset_sizes.is_empty() || self.subset_sizes.contains(&0) {
            return fail("subset sizes must be at least 1".into());
        }
        if self.samples == 0 || self.points == 0 {
            return fail("samples and points must be at least 1".into());
        }
        if let Some(d) = &self.design {
            for p in [&d.catalog, &d.problem] {
                if !p.is_file() {
                    return fail(format!("{} does not exist", p.display()));
                }
            }
            if d.subset_size == 0 || d.runs == 0 {
                return fail("design subset size and runs must be at least 1".into());
            }
            if !(0.0..=1.0).contains(&d.w_sp) {
                return fail(format!("design weight {} is outside [0, 1]", d.w_sp));
            }
        }
        Ok(())
    }

    pub fn family_config(&self) -> FamilyConfig {
        FamilyConfig {
            resolution: self.resolution,
            samples: self.samples,
            points: self.points,
            seed: self.seed,
            ..FamilyConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairInfo {
    pub repaired: bool,
    pub min_eigenvalue_before: f64,
    pub min_eigenvalue_after: f64,
}

impl From<Repair> for RepairInfo {
    fn from(r: Repair) -> Self {
        Self {
            repaired: r.repaired,
            min_eigenvalue_before: r.min_eigenvalue_before,
            min_eigenvalue_after: r.min_eigenvalue_after,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub metric: ShapeMetric,
    pub families_total: usize,
    pub families_retained: Vec<String>,
    pub shape_repair: RepairInfo,
    pub property_repair: RepairInfo,
    /// Correlation between off-diagonal shape and property similarities.
    pub shape_property_correlation: f64,
    pub selections: usize,
    pub artifacts: Vec<Artifact>,
}

/// Runs every stage and writes the artifact tree under `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Summary, PipelineError> {
    cfg.validate()?;
    let mut out = ArtifactWriter::new(&cfg.out);

    let catalog = read_catalog(&cfg.catalog, 3).map_err(at("isogen", Some(&cfg.catalog.display().to_string())))?;
    let families = generate_families(&catalog, &cfg.family_config())?;
    write_dataset(&families, &mut out)?;
    let retained: Vec<Family> = families.iter().filter(|f| f.is_retained()).cloned().collect();
    if retained.is_empty() {
        return Err(PipelineError::validation("isogen", "no families retained after feasibility screening"));
    }
    let ids: Vec<String> = retained.iter().map(|f| f.id.clone()).collect();

    let shape = family_shape_kernel(&retained, cfg.metric).map_err(at("metrics", None))?;
    let prop = family_property_kernel(&retained).map_err(at("metrics", None))?;
    for (stem, b) in [("kernels/shape", &shape), ("kernels/property", &prop)] {
        out.write_matrix(stem, &b.kernel.matrix, b.kernel.kind)?;
        if let Some(d) = &b.distance {
            out.write_matrix(&format!("{stem}_distance"), &d.0, KernelKind::Distance)?;
        }
    }

    let mut tradeoff = String::from("k,w,score,score_shape,score_property,indices\n");
    let mut scored = Vec::new();
    for &k in &cfg.subset_sizes {
        if k > retained.len() {
            return Err(PipelineError::validation(
                "select",
                format!("subset size {k} exceeds the {} retained families", retained.len()),
            ));
        }
        for &w in &cfg.weights {
            let (mut rec, _) = select_weighted(&prop.kernel, &shape.kernel, w, k, cfg.seed)?;
            rec.ids = rec.indices.iter().map(|&i| ids[i].clone()).collect();
            out.write(&format!("selections/k{k}_w{w}.json"), rec.to_json().as_bytes())?;
            let idx: Vec<String> = rec.indices.iter().map(usize::to_string).collect();
            let _ = writeln!(
                tradeoff,
                "{k},{w},{:?},{:?},{:?},{}",
                rec.score,
                rec.score_shape,
                rec.score_property,
                idx.join(" ")
            );
            scored.push((format!("k{k}_w{w}"), w, rec.indices));
        }
    }
    out.write("reports/tradeoff.csv", tradeoff.as_bytes())?;
    let rows = score_report(&scored, &shape.kernel, &prop.kernel, cfg.baseline_trials, cfg.seed)?;
    out.write("reports/scores.csv", score_csv(&rows).as_bytes())?;

    if let Some(d) = &cfg.design {
        run_design_stage(d, cfg.seed, &mut out)?;
    }

    let summary = Summary {
        seed: cfg.seed,
        metric: cfg.metric,
        families_total: families.len(),
        families_retained: ids,
        shape_repair: shape.repair.into(),
        property_repair: prop.repair.into(),
        shape_property_correlation: kernel_correlation(&shape.kernel.matrix, &prop.kernel.matrix),
        selections: scored.len(),
        artifacts: out.artifacts(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    formats::write_file(&cfg.out.join("summary.json"), json.as_bytes()).map_err(at("write", Some("summary.json")))?;
    Ok(summary)
}

/// Builds the 2D ground set, selects the design subsets and runs the GA
/// study, writing everything under `design/` and `reports/`.
pub fn run_design_stage(d: &DesignStageConfig, seed: u64, out: &mut ArtifactWriter) -> Result<ExperimentReport, PipelineError> {
    let catalog = read_catalog(&d.catalog, 2).map_err(at("design", Some(&d.catalog.display().to_string())))?;
    let problem = read_problem(&d.problem)?;
    let gcfg = Gen2dConfig {
        count: d.count,
        vf_min: d.vf_min,
        vf_max: d.vf_max,
        n: d.resolution,
        seed,
        ..Gen2dConfig::default()
    };
    let cells = gen2d_dataset(&catalog, &gcfg).map_err(at("design", None))?;
    let mut sub = ArtifactWriter::new(out.root().join("design"));
    write_planar_dataset(&cells, &mut sub)?;
    let ls = planar_shape_kernel(&cells).map_err(at("design", None))?;
    let lp = planar_property_kernel(&cells).map_err(at("design", None))?;
    sub.write_matrix("kernels/shape", &ls.kernel.matrix, KernelKind::Shape)?;
    sub.write_matrix("kernels/property", &lp.kernel.matrix, KernelKind::Property)?;
    let subsets = design_subsets(&ls.kernel, &lp.kernel, d.subset_size, d.w_sp, seed)?;
    for (s, rec) in &subsets {
        sub.write(&format!("selections/{}.json", s.name), rec.to_json().as_bytes())?;
    }
    let named: Vec<NamedSubset> = subsets.into_iter().map(|(s, _)| s).collect();
    let seeds: Vec<u64> = (0..d.runs as u64).map(|r| seed::derive(seed, "design", r)).collect();
    let report = experiment_mbb(&problem, &cells, &named, &seeds, &d.ga, false).map_err(at("design", None))?;
    out.write("reports/design.csv", report.runs_csv().as_bytes())?;
    out.write("reports/design_summary.csv", report.summary_csv().as_bytes())?;
    for a in sub.artifacts() {
        out.digests.insert(format!("design/{}", a.path), Artifact { path: format!("design/{}", a.path), ..a });
    }
    Ok(report)
}
