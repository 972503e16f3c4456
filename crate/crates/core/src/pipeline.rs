//! End-to-end analysis: ingestion, parameters, paired statistics,
//! correlations, structure search per position, consensus and mediation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{correlation_matrix, CorrelationMatrix};
use crate::consensus::{consensus, ConsensusGraph};
use crate::error::{Error, Result};
use crate::features::{extract_params, paired_compare, PairedTestResult};
use crate::graph::MixedGraph;
use crate::mediation::{mediation_fit, MediationFit};
use crate::record_io::{
    load_parameter_table, load_signal_record, write_parameter_csv, ParameterName, ParameterRow, ParameterTable,
    Position,
};
use crate::search::{bic_score, cam_learn, fges, gc_graph_data, hill_climb, tabu_search, Dataset, SearchConfig};

/// Fewest subjects per position for a cohort analysis.
pub const MIN_COHORT_SUBJECTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Signals,
    Params,
}

/// How the deterministic derived parameters (lnRMSSD, BR) enter structure
/// search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Left out of the search data, re-attached as isolated nodes.
    #[default]
    Exclude,
    /// Searched with everything else; forbidden edges dropped afterwards.
    PostHoc,
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(MaskMode::Exclude),
            "post-hoc" => Ok(MaskMode::PostHoc),
            other => Err(Error::Config(format!("unknown mask mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gc,
    Hc,
    Tabu,
    Fges,
    Cam,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gc, Method::Hc, Method::Tabu, Method::Fges, Method::Cam];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gc => "gc",
            Method::Hc => "hc",
            Method::Tabu => "tabu",
            Method::Fges => "fges",
            Method::Cam => "cam",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// A candidate path x → m → y, tested in one position or in every analyzed
/// position when `position` is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediationPath {
    pub x: ParameterName,
    pub m: ParameterName,
    pub y: ParameterName,
    pub position: Option<Position>,
}

impl FromStr for MediationPath {
    type Err = Error;

    /// `x,m,y` or `x,m,y@position`.
    fn from_str(s: &str) -> Result<Self> {
        let (vars, position) = match s.split_once('@') {
            Some((v, p)) => (v, Some(p.trim().parse::<Position>().map_err(|e| Error::Config(e.to_string()))?)),
            None => (s, None),
        };
        let names: Vec<ParameterName> = vars
            .split(',')
            .map(|v| v.trim().parse::<ParameterName>().map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<_>>()?;
        let [x, m, y] = names[..] else {
            return Err(Error::Config(format!("mediation path '{s}' needs exactly three parameters")));
        };
        if x == m || m == y || x == y {
            return Err(Error::Config(format!("mediation path '{s}' repeats a parameter")));
        }
        Ok(MediationPath { x, m, y, position })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub positions: Vec<Position>,
    pub methods: Vec<Method>,
    pub mask: MaskMode,
    pub mediation: Vec<MediationPath>,
    pub search: SearchConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Config("no positions selected".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        let dup = |v: &[String]| (1..v.len()).any(|i| v[..i].contains(&v[i]));
        if dup(&self.positions.iter().map(|p| p.to_string()).collect::<Vec<_>>()) {
            return Err(Error::Config("position listed twice".into()));
        }
        if dup(&self.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>()) {
            return Err(Error::Config("method listed twice".into()));
        }
        let s = &self.search;
        if s.max_parents == 0 || s.tabu_length == 0 || s.tabu_max_stalls == 0 {
            return Err(Error::Config("max_parents, tabu_length and tabu_max_stalls must be positive".into()));
        }
        if !(s.cam_prune_alpha > 0.0 && s.cam_prune_alpha < 1.0) {
            return Err(Error::Config("cam_prune_alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodGraph {
    pub method: Method,
    pub position: Position,
    /// Variables the method actually searched over.
    pub searched: Vec<ParameterName>,
    pub graph: MixedGraph,
    /// Gaussian BIC of the returned DAG on the searched data (HC and Tabu).
    pub bic: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MediationResult {
    pub path: MediationPath,
    pub position: Position,
    pub fit: MediationFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct CausalReport {
    pub config: RunConfig,
    pub subjects: BTreeMap<Position, usize>,
    pub paired_tests: Vec<PairedTestResult>,
    pub correlations: Vec<CorrelationMatrix>,
    pub methods: Vec<MethodGraph>,
    pub consensus: BTreeMap<Position, ConsensusGraph>,
    pub mediation: Vec<MediationResult>,
    pub warnings: Vec<String>,
}

impl CausalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: CausalReport,
    pub table: ParameterTable,
}

/// Pairs never joined by a reported structure edge: each derived
/// parameter and the inputs it is computed from.
pub fn is_masked_pair(a: ParameterName, b: ParameterName) -> bool {
    use ParameterName::*;
    let one_way = |p: ParameterName, q: ParameterName| {
        (p == Rmssd && q == LnRmssd) || (p == Br && ParameterName::BREATHING_CVS.contains(&q))
    };
    one_way(a, b) || one_way(b, a)
}

/// Parameters entering structure search under a mask mode.
pub fn structure_parameters(mask: MaskMode) -> Vec<ParameterName> {
    match mask {
        MaskMode::Exclude => ParameterName::ALL
            .into_iter()
            .filter(|p| !matches!(p, ParameterName::LnRmssd | ParameterName::Br))
            .collect(),
        MaskMode::PostHoc => ParameterName::ALL.to_vec(),
    }
}

fn all_names() -> Vec<String> {
    ParameterName::ALL.iter().map(|p| p.as_str().to_string()).collect()
}

/// Reads the configured input into a parameter table. Per-record failures
/// become warnings.
pub fn load_input(config: &RunConfig, warnings: &mut Vec<String>) -> Result<ParameterTable> {
    let path = &config.input;
    match config.input_kind {
        InputKind::Params => {
            let file = if path.is_dir() { path.join("params.csv") } else { path.clone() };
            load_parameter_table(file)
        }
        InputKind::Signals => {
            let files = if path.is_dir() {
                let mut v: Vec<PathBuf> = fs::read_dir(path)
                    .map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                    .collect();
                v.sort();
                v
            } else {
                vec![path.clone()]
            };
            let extracted: Vec<(PathBuf, Result<ParameterRow>)> = files
                .into_par_iter()
                .map(|f| {
                    let row = load_signal_record(&f).and_then(|rec| {
                        Ok(ParameterRow {
                            params: extract_params(&rec)?,
                            subject_id: rec.subject_id,
                            position: rec.position,
                        })
                    });
                    (f, row)
                })
                .collect();
            let mut table = ParameterTable::new();
            for (f, row) in extracted {
                match row.and_then(|r| table.push(r)) {
                    Ok(()) => {}
                    Err(e) => warnings.push(format!("{}: {e}", f.display())),
                }
            }
            Ok(table)
        }
    }
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let mut warnings = Vec::new();
    let table = load_input(config, &mut warnings)?;
    let report = analyze_table(&table, config, warnings)?;
    Ok(PipelineOutput { report, table })
}

fn run_method(method: Method, data: &Dataset, search: &SearchConfig) -> Result<(MixedGraph, Option<f64>)> {
    Ok(match method {
        Method::Gc => (gc_graph_data(data), None),
        Method::Hc => {
            let d = hill_climb(data, search);
            let s = bic_score(data, &d);
            ((&d).into(), Some(s))
        }
        Method::Tabu => {
            let d = tabu_search(data, search);
            let s = bic_score(data, &d);
            ((&d).into(), Some(s))
        }
        Method::Fges => ((&fges(data, search)).into(), None),
        Method::Cam => ((&cam_learn(data, search)?).into(), None),
    })
}

/// Runs every analysis stage on a parameter table.
pub fn analyze_table(table: &ParameterTable, config: &RunConfig, mut warnings: Vec<String>) -> Result<CausalReport> {
    config.validate()?;
    let mut subjects = BTreeMap::new();
    for &pos in &config.positions {
        let n = table.position_rows(pos).count();
        if n < MIN_COHORT_SUBJECTS {
            return Err(Error::TooFew {
                what: "subjects in an analyzed position",
                needed: MIN_COHORT_SUBJECTS,
                got: n,
            });
        }
        subjects.insert(pos, n);
    }

    let mut paired_tests = Vec::new();
    if Position::ALL.iter().all(|p| config.positions.contains(p)) {
        for name in ParameterName::ALL {
            let (_, sup, sta) = table.paired(name);
            match paired_compare(&sup, &sta, name) {
                Ok(r) => paired_tests.push(r),
                Err(e) => warnings.push(format!("paired test {name}: {e}")),
            }
        }
    }

    let mut correlations = Vec::new();
    for &pos in &config.positions {
        match correlation_matrix(table, pos) {
            Ok(c) => correlations.push(c),
            Err(e) => warnings.push(format!("{pos} correlations: {e}")),
        }
    }

    let searched = structure_parameters(config.mask);
    let full = all_names();
    let jobs: Vec<(Position, Method)> = config
        .positions
        .iter()
        .flat_map(|&p| config.methods.iter().map(move |&m| (p, m)))
        .collect();
    let outcomes: Vec<(Position, Method, Result<(MixedGraph, Option<f64>)>)> = jobs
        .into_par_iter()
        .map(|(pos, method)| {
            let res = Dataset::from_table(table, pos, &searched).and_then(|data| run_method(method, &data, &config.search));
            (pos, method, res)
        })
        .collect();
    let mut methods = Vec::new();
    for (position, method, res) in outcomes {
        match res.and_then(|(g, bic)| Ok((g.embed(&full)?, bic))) {
            Ok((mut graph, bic)) => {
                graph.retain_edges(|a, b| match (a.parse(), b.parse()) {
                    (Ok(a), Ok(b)) => is_masked_pair(a, b),
                    _ => false,
                });
                methods.push(MethodGraph {
                    method,
                    position,
                    searched: searched.clone(),
                    graph,
                    bic,
                });
            }
            Err(e) => warnings.push(format!("{position} {method}: {e}")),
        }
    }

    let mut consensus_graphs = BTreeMap::new();
    for &pos in &config.positions {
        let graphs: Vec<(String, MixedGraph)> = methods
            .iter()
            .filter(|m| m.position == pos)
            .map(|m| (m.method.to_string(), m.graph.clone()))
            .collect();
        if graphs.is_empty() {
            warnings.push(format!("{pos}: no structure method succeeded"));
            continue;
        }
        consensus_graphs.insert(pos, consensus(&graphs)?);
    }

    let mut mediation = Vec::new();
    for path in &config.mediation {
        let positions: Vec<Position> = match path.position {
            Some(p) => vec![p],
            None => config.positions.clone(),
        };
        for pos in positions {
            let col = |p: ParameterName| table.column(p, pos);
            match mediation_fit(&col(path.x), &col(path.m), &col(path.y)) {
                Ok(fit) => mediation.push(MediationResult {
                    path: path.clone(),
                    position: pos,
                    fit,
                }),
                Err(e) => warnings.push(format!("mediation {}→{}→{} {pos}: {e}", path.x, path.m, path.y)),
            }
        }
    }

    Ok(CausalReport {
        config: config.clone(),
        subjects,
        paired_tests,
        correlations,
        methods,
        consensus: consensus_graphs,
        mediation,
        warnings,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `report.json`, the DOT graphs, correlation CSVs and `params.csv`.
pub fn write_outputs(output: &PipelineOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let r = &output.report;
    write_file(&dir.join("report.json"), r.to_json()?.as_bytes())?;
    for (pos, c) in &r.consensus {
        write_file(&dir.join(format!("consensus_{pos}.dot")), c.to_dot(&format!("consensus_{pos}")).as_bytes())?;
    }
    for m in &r.methods {
        let name = format!("method_{}_{}", m.method, m.position);
        write_file(&dir.join(format!("{name}.dot")), m.graph.to_dot(&name).as_bytes())?;
    }
    for c in &r.correlations {
        write_file(&dir.join(format!("correlations_{}.csv", c.position)), c.to_csv().as_bytes())?;
    }
    let mut buf = Vec::new();
    write_parameter_csv(&output.table, &mut buf)?;
    write_file(&dir.join("params.csv"), &buf)
}
