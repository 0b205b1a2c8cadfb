//! File formats: correspondences, sweeps, benchmark records, plot data and
//! the key=value output document.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{AnalyticConstants, Correspondence, Pose};
use crate::result::{IncidenceResult, Method};
use crate::solve::{IngestReport, Normalization};
use crate::synth::{median, BenchRecord, SceneConfig, SweepEntry};

fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[f64; N]> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::Parse { line: lineno, message: format!("expected {N} fields, found {}", parts.len()) });
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| Error::Parse { line: lineno, message: format!("not a number: '{p}'") })?;
    }
    Ok(out)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses `w1,w2,w3,xi,eta` lines; `#` starts a comment line.
pub fn parse_correspondences_str(text: &str) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        let [w1, w2, w3, xi, eta] = parse_fields::<5>(line, lineno)?;
        out.push(Correspondence::new(w1, w2, w3, xi, eta));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn parse_correspondences(path: &Path) -> Result<Vec<Correspondence>> {
    parse_correspondences_str(&fs::read_to_string(path)?)
}

/// Shortest round-trip decimal form, so parsing the output is exact.
pub fn format_correspondences(corrs: &[Correspondence]) -> String {
    let mut s = String::from("# w1,w2,w3,xi,eta\n");
    for c in corrs {
        let _ = writeln!(s, "{},{},{},{},{}", c.w1, c.w2, c.w3, c.xi, c.eta);
    }
    s
}

pub fn write_correspondences(path: &Path, corrs: &[Correspondence]) -> Result<()> {
    Ok(fs::write(path, format_correspondences(corrs))?)
}

/// Everything needed to reproduce a solve run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub epsilon: f64,
    pub consts: AnalyticConstants,
    pub top_k: usize,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub early_exit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::PrimalDual,
            epsilon: 0.03,
            consts: AnalyticConstants::default(),
            top_k: 10,
            seed: 0,
            input: None,
            output: None,
            early_exit: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidEpsilon { value: self.epsilon, range: "(0, 0.5)" });
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        self.consts.validate()
    }
}

/// Inputs of the output document besides the result itself.
#[derive(Debug, Clone)]
pub struct RunMetadata<'a> {
    pub config: &'a RunConfig,
    pub normalization: Normalization,
    pub ingest: IngestReport,
    pub wall_seconds: f64,
}

fn pose_fields(s: &mut String, prefix: &str, p: &Pose) {
    let _ = writeln!(s, "{prefix}x={}", p.x);
    let _ = writeln!(s, "{prefix}y={}", p.y);
    let _ = writeln!(s, "{prefix}z={}", p.z);
    let _ = writeln!(s, "{prefix}kappa={}", p.kappa);
}

/// Renders the result as `[section]` groups of `key=value` lines. Only the
/// `[timing]` group varies between identical runs.
pub fn render_document(result: &IncidenceResult, meta: &RunMetadata<'_>) -> String {
    let cfg = meta.config;
    let c = &cfg.consts;
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "method={}", result.method);
    let _ = writeln!(s, "epsilon={}", result.epsilon);
    let _ = writeln!(s, "effective_epsilon={}", result.effective_epsilon);
    let _ = writeln!(s, "top_k={}", cfg.top_k);
    let _ = writeln!(s, "seed={}", cfg.seed);
    let _ = writeln!(s, "early_exit={}", cfg.early_exit);
    if let Some(p) = &cfg.input {
        let _ = writeln!(s, "input={}", p.display());
    }
    let _ = writeln!(s, "\n[constants]");
    for (k, v) in [
        ("a", c.a),
        ("c1", c.c1),
        ("c2", c.c2),
        ("c_kappa", c.c_kappa),
        ("c_grid", c.c_grid),
        ("gamma", c.gamma),
        ("alpha", c.alpha),
        ("beta", c.beta),
        ("image_bound", c.image_bound),
    ] {
        let _ = writeln!(s, "{k}={v}");
    }
    let n = &meta.normalization;
    let _ = writeln!(s, "\n[normalization]");
    let _ = writeln!(s, "offset={},{},{}", n.offset[0], n.offset[1], n.offset[2]);
    let _ = writeln!(s, "scale={}", n.scale);
    let i = &meta.ingest;
    let _ = writeln!(s, "\n[ingest]");
    let _ = writeln!(s, "received={}", i.received);
    let _ = writeln!(s, "kept={}", i.kept);
    let _ = writeln!(s, "non_finite={}", i.non_finite);
    let _ = writeln!(s, "outside_image_bound={}", i.outside_image_bound);
    let _ = writeln!(s, "outside_unit_cube={}", i.outside_unit_cube);
    for (rank, cand) in result.candidates.iter().enumerate() {
        let _ = writeln!(s, "\n[pose.{}]", rank + 1);
        let _ = writeln!(s, "count={}", cand.count);
        pose_fields(&mut s, "", &cand.pose);
        if !n.is_identity() {
            let p = &cand.pose;
            let norm = Pose::new(
                (p.x - n.offset[0]) * n.scale,
                (p.y - n.offset[1]) * n.scale,
                (p.z - n.offset[2]) * n.scale,
                p.kappa,
            );
            pose_fields(&mut s, "normalized_", &norm);
        }
    }
    let _ = writeln!(s, "\n[counters]");
    for (k, v) in &result.counters {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "\n[parameters]");
    for (k, v) in &result.parameters {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "\n[timing]");
    let _ = writeln!(s, "wall_seconds={}", meta.wall_seconds);
    s
}

/// Machine-readable failure record.
pub fn render_error(err: &Error) -> String {
    let kind = match err {
        Error::DegenerateGeometry(_) => "degenerate_geometry",
        Error::InvalidEpsilon { .. } => "invalid_epsilon",
        Error::EmptyHistogram => "empty_histogram",
        Error::EmptyStructure => "empty_structure",
        Error::ParameterOutOfRange { .. } => "parameter_out_of_range",
        Error::CoefficientOutOfRange { .. } => "coefficient_out_of_range",
        Error::RejectionOverflow { .. } => "rejection_overflow",
        Error::Parse { .. } => "parse",
        Error::EmptyInput => "empty_input",
        Error::MismatchedConfigs(_) => "mismatched_configs",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Io(_) => "io",
    };
    format!("[error]\nkind={kind}\nmessage={}\n", err.to_string().replace('\n', " "))
}

/// The document without its `[timing]` group.
pub fn strip_timing(doc: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in doc.lines() {
        if line.starts_with('[') {
            skipping = line == "[timing]";
        }
        if !skipping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Parses `method,n,epsilon,inlier_ratio,noise_sigma,seed` lines.
pub fn parse_sweep_str(text: &str, true_pose: Pose) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in content_lines(text) {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::Parse { line: lineno, message: format!("expected 6 fields, found {}", parts.len()) });
        }
        let bad = |what: &str, p: &str| Error::Parse { line: lineno, message: format!("bad {what}: '{p}'") };
        let method: Method = parts[0].parse().map_err(|_| bad("method", parts[0]))?;
        let n: usize = parts[1].parse().map_err(|_| bad("n", parts[1]))?;
        let epsilon: f64 = parts[2].parse().map_err(|_| bad("epsilon", parts[2]))?;
        let inlier_ratio: f64 = parts[3].parse().map_err(|_| bad("inlier ratio", parts[3]))?;
        let noise_sigma: f64 = parts[4].parse().map_err(|_| bad("noise sigma", parts[4]))?;
        let seed: u64 = parts[5].parse().map_err(|_| bad("seed", parts[5]))?;
        let scene = SceneConfig { n, inlier_ratio, noise_sigma, true_pose, seed, ..Default::default() };
        out.push(SweepEntry { method, scene, epsilon });
    }
    Ok(out)
}

const RECORD_HEADER: [&str; 17] = [
    "method",
    "n",
    "epsilon",
    "inlier_ratio",
    "noise_sigma",
    "seed",
    "seconds",
    "best_count",
    "pose_x",
    "pose_y",
    "pose_z",
    "pose_kappa",
    "err_x",
    "err_y",
    "err_z",
    "err_kappa",
    "error",
];

fn opt4(v: Option<[f64; 4]>) -> [String; 4] {
    match v {
        Some(a) => a.map(|x| x.to_string()),
        None => Default::default(),
    }
}

pub fn write_records(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.method.to_string(),
            r.n.to_string(),
            r.epsilon.to_string(),
            r.inlier_ratio.to_string(),
            r.noise_sigma.to_string(),
            r.seed.to_string(),
            r.seconds.to_string(),
            r.best_count.to_string(),
        ];
        row.extend(opt4(r.recovered.map(|p| p.to_array())));
        row.extend(opt4(r.pose_error));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, message: format!("{other:?}") },
    }
}

pub fn read_records(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let field = |k: usize| row.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("bad {}: '{}'", RECORD_HEADER[k], field(k)) })
        };
        let quad = |k: usize| -> Result<Option<[f64; 4]>> {
            if field(k).is_empty() {
                return Ok(None);
            }
            Ok(Some([num(k)?, num(k + 1)?, num(k + 2)?, num(k + 3)?]))
        };
        let method: Method = field(0).parse().map_err(|_| Error::Parse { line, message: "bad method".into() })?;
        out.push(BenchRecord {
            method,
            n: num(1)? as usize,
            epsilon: num(2)?,
            inlier_ratio: num(3)?,
            noise_sigma: num(4)?,
            seed: field(5).parse().map_err(|_| Error::Parse { line, message: "bad seed".into() })?,
            seconds: num(6)?,
            best_count: num(7)? as u64,
            recovered: quad(8)?.map(Pose::from_array),
            pose_error: quad(12)?,
            counters: Default::default(),
            error: Some(field(16).to_string()).filter(|e| !e.is_empty()),
        });
    }
    Ok(out)
}

/// One file per method, `<method>.tsv`, with a row per `(epsilon, n)`
/// holding medians over seeds. Returns the files written.
pub fn write_plot_data(dir: &Path, records: &[BenchRecord]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut written = Vec::new();
    for m in methods {
        let mut keys: Vec<(u64, usize)> =
            records.iter().filter(|r| r.method == m && r.error.is_none()).map(|r| (r.epsilon.to_bits(), r.n)).collect();
        keys.sort_by(|a, b| f64::from_bits(a.0).total_cmp(&f64::from_bits(b.0)).then(a.1.cmp(&b.1)));
        keys.dedup();
        let mut s = String::from("#epsilon\tn\tmedian_seconds\tpose_err_x\tpose_err_y\tpose_err_z\tpose_err_kappa\n");
        for (eb, n) in keys {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == m && r.error.is_none() && r.epsilon.to_bits() == eb && r.n == n)
                .collect();
            let mut secs: Vec<f64> = group.iter().map(|r| r.seconds).collect();
            let _ = write!(s, "{}\t{}\t{}", f64::from_bits(eb), n, median(&mut secs));
            for a in 0..4 {
                let mut errs: Vec<f64> = group.iter().filter_map(|r| r.pose_error.map(|e| e[a])).collect();
                let _ = write!(s, "\t{}", median(&mut errs));
            }
            s.push('\n');
        }
        let path = dir.join(format!("{}.tsv", m.as_str()));
        fs::write(&path, s)?;
        written.push(path);
    }
    Ok(written)
}
