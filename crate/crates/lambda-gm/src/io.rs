//! JSON input formats with named vertices, and name-aware report output.
//!
//! Vertices are named by strings in every file; formats without an explicit
//! `vertices` list use `"1"`, …, `"d"`. Reports replace vertex indices by
//! names. [`to_json_string`] prints floats with 17 significant digits.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::atomic::{AtomicMeasure, FaceBoundReport};
use crate::grid::{generic_trivariate, AxisGrid, GridMeasure};
use crate::hr::{hr_density, pareto_margin, HrEdge, HrForest};
use crate::rays::{Innovation, MaxLinearSpec, Ray, RayMeasure};
use crate::report::{CiReport, MarkovAudit, Witness};
use crate::{Dag, Error, Result, UndirectedGraph, VertexSet};

/// Vertex names in index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Names {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Names {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (k, n) in names.iter().enumerate() {
            if index.insert(n.clone(), k).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vertex name {n:?}")));
            }
        }
        Ok(Names { names, index })
    }

    /// `"1"`, …, `"d"`.
    pub fn numbered(d: usize) -> Self {
        Names::new((1..=d).map(|k| k.to_string()).collect()).expect("distinct")
    }

    fn or_numbered(names: Option<Vec<String>>, d: usize) -> Result<Self> {
        match names {
            None => Ok(Names::numbered(d)),
            Some(v) if v.len() == d => Names::new(v),
            Some(v) => Err(Error::DimensionMismatch { expected: d, found: v.len() }),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn set<S: AsRef<str>>(&self, names: &[S]) -> Result<VertexSet> {
        names.iter().map(|n| self.index(n.as_ref())).collect()
    }

    /// Comma-separated list; the empty string is the empty set.
    pub fn parse_list(&self, list: &str) -> Result<VertexSet> {
        let parts: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        self.set(&parts)
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn of_set(&self, s: VertexSet) -> Vec<String> {
        s.iter().map(|v| self.names[v].clone()).collect()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<String>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagFile {
    vertices: Vec<String>,
    #[serde(default)]
    arcs: Vec<[String; 2]>,
}

pub fn read_graph(text: &str) -> Result<(Names, UndirectedGraph)> {
    let f: GraphFile = parse(text)?;
    let names = Names::new(f.vertices)?;
    let edges = f.edges.iter().map(|[a, b]| Ok((names.index(a)?, names.index(b)?))).collect::<Result<Vec<_>>>()?;
    let g = UndirectedGraph::from_edges(names.len(), &edges)?;
    Ok((names, g))
}

fn dag_from(f: DagFile) -> Result<(Names, Dag)> {
    let names = Names::new(f.vertices)?;
    let arcs = f.arcs.iter().map(|[a, b]| Ok((names.index(a)?, names.index(b)?))).collect::<Result<Vec<_>>>()?;
    let g = Dag::from_arcs(names.len(), &arcs)?;
    Ok((names, g))
}

pub fn read_dag(text: &str) -> Result<(Names, Dag)> {
    dag_from(parse(text)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomFile {
    y: Vec<f64>,
    w: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomicFile {
    d: usize,
    #[serde(default)]
    vertices: Option<Vec<String>>,
    atoms: Vec<AtomFile>,
}

pub fn read_atomic(text: &str) -> Result<(Names, AtomicMeasure)> {
    let f: AtomicFile = parse(text)?;
    let names = Names::or_numbered(f.vertices, f.d)?;
    let m = AtomicMeasure::new(f.d, f.atoms.into_iter().map(|a| (a.y, a.w)).collect())?;
    Ok((names, m))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RayFile {
    d: usize,
    #[serde(default)]
    vertices: Option<Vec<String>>,
    alpha: f64,
    rays: Vec<Ray>,
}

pub fn read_rays(text: &str) -> Result<(Names, RayMeasure)> {
    let f: RayFile = parse(text)?;
    let names = Names::or_numbered(f.vertices, f.d)?;
    Ok((names, RayMeasure::new(f.d, f.alpha, f.rays)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaFile {
    arc: [String; 2],
    v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaxLinearFile {
    dag: DagFile,
    #[serde(default)]
    beta: Vec<BetaFile>,
    diag: BTreeMap<String, f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    innovations: Option<BTreeMap<String, Innovation>>,
}

/// Arcs without a `beta` entry are rejected; every vertex needs a `diag`.
pub fn read_maxlinear(text: &str) -> Result<(Names, MaxLinearSpec)> {
    let f: MaxLinearFile = parse(text)?;
    let (names, dag) = dag_from(f.dag)?;
    let d = names.len();
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for b in &f.beta {
        let arc = (names.index(&b.arc[0])?, names.index(&b.arc[1])?);
        if weights.insert(arc, b.v).is_some() {
            return Err(Error::InvalidInput(format!("duplicate weight for arc {} → {}", b.arc[0], b.arc[1])));
        }
    }
    let arcs = dag.arcs();
    if weights.len() != arcs.len() || arcs.iter().any(|a| !weights.contains_key(a)) {
        return Err(Error::InvalidInput("beta must list exactly the arcs of the DAG".into()));
    }
    let arcs: Vec<_> = weights.into_iter().collect();
    let mut diag = vec![f64::NAN; d];
    for (n, v) in &f.diag {
        diag[names.index(n)?] = *v;
    }
    if let Some(v) = diag.iter().position(|x| x.is_nan()) {
        return Err(Error::InvalidInput(format!("missing diag entry for vertex {}", names.name(v))));
    }
    let spec = match f.innovations {
        Some(map) => {
            let mut inns = vec![None; d];
            for (n, inn) in map {
                inns[names.index(&n)?] = Some(inn);
            }
            let default = f.alpha.map(|alpha| Innovation::Frechet { alpha, scale: 1.0 });
            let inns = inns
                .into_iter()
                .enumerate()
                .map(|(v, i)| {
                    i.or(default)
                        .ok_or_else(|| Error::InvalidInput(format!("missing innovation for vertex {}", names.name(v))))
                })
                .collect::<Result<Vec<_>>>()?;
            MaxLinearSpec::new(dag, &arcs, diag, inns)?
        }
        None => MaxLinearSpec::frechet(dag, &arcs, diag, f.alpha.unwrap_or(1.0))?,
    };
    Ok((names, spec))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestEdgeFile {
    e: [String; 2],
    gamma: f64,
    p: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestFile {
    #[serde(default)]
    vertices: Option<Vec<String>>,
    edges: Vec<ForestEdgeFile>,
}

fn forest_from(f: ForestFile) -> Result<(Names, HrForest)> {
    let names = match f.vertices {
        Some(v) => Names::new(v)?,
        None => {
            // order of first appearance
            let mut v: Vec<String> = Vec::new();
            for e in &f.edges {
                for n in &e.e {
                    if !v.contains(n) {
                        v.push(n.clone());
                    }
                }
            }
            Names::new(v)?
        }
    };
    let edges = f
        .edges
        .iter()
        .map(|e| Ok(HrEdge { i: names.index(&e.e[0])?, j: names.index(&e.e[1])?, gamma: e.gamma, p: e.p }))
        .collect::<Result<Vec<_>>>()?;
    Ok((names.clone(), HrForest::new(names.len(), edges)?))
}

pub fn read_forest(text: &str) -> Result<(Names, HrForest)> {
    forest_from(parse(text)?)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AxisFile {
    Nodes { nodes: Vec<f64> },
    Geometric { geometric: Geometric },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Geometric {
    lo: f64,
    hi: f64,
    n: usize,
}

impl AxisFile {
    fn build(&self) -> Result<AxisGrid> {
        match self {
            AxisFile::Nodes { nodes } => AxisGrid::new(nodes.clone()),
            AxisFile::Geometric { geometric: g } => AxisGrid::geometric(g.lo, g.hi, g.n),
        }
    }
}

/// One axis spec for every vertex, or a single spec shared by all.
fn build_axes(axes: &[AxisFile], d: usize) -> Result<Vec<AxisGrid>> {
    match axes.len() {
        1 => Ok(vec![axes[0].build()?; d]),
        n if n == d => axes.iter().map(AxisFile::build).collect(),
        n => Err(Error::DimensionMismatch { expected: d, found: n }),
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FaceFile {
    face: Vec<String>,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case", deny_unknown_fields)]
enum GridConstruction {
    Trivariate {
        #[serde(default)]
        vertices: Option<Vec<String>>,
        axes: Vec<AxisFile>,
        p12: f64,
        p23: f64,
        k12: String,
        k23: String,
        m: String,
        #[serde(default = "default_margin_tol")]
        margin_tol: f64,
    },
    HrForest {
        forest: ForestFile,
        axes: Vec<AxisFile>,
    },
}

fn default_margin_tol() -> f64 {
    1e-6
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default)]
    vertices: Option<Vec<String>>,
    axes: Vec<AxisFile>,
    faces: Vec<FaceFile>,
    #[serde(default)]
    d: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridFile {
    Construction(GridConstruction),
    Table(TableFile),
}

pub type Kernel = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Margin = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Bivariate densities by registry name: `hr:gamma=<Γ>`.
pub fn kernel_by_name(name: &str) -> Result<Kernel> {
    let unknown = || Error::InvalidInput(format!("unknown kernel {name:?}"));
    let gamma = name.strip_prefix("hr:gamma=").ok_or_else(unknown)?;
    let g: f64 = gamma.parse().map_err(|_| unknown())?;
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::OutOfRange(format!("Γ = {g} must be positive")));
    }
    Ok(Box::new(move |a, b| hr_density(g, a, b).unwrap_or(0.0)))
}

/// Univariate densities by registry name: `pareto_margin`.
pub fn margin_by_name(name: &str) -> Result<Margin> {
    match name {
        "pareto_margin" => Ok(Box::new(pareto_margin)),
        _ => Err(Error::InvalidInput(format!("unknown margin {name:?}"))),
    }
}

/// Grid measures from face tables or from a named construction.
pub fn read_grid(text: &str) -> Result<(Names, GridMeasure)> {
    match parse::<GridFile>(text)? {
        GridFile::Construction(GridConstruction::Trivariate { vertices, axes, p12, p23, k12, k23, m, margin_tol }) => {
            let names = Names::or_numbered(vertices, 3)?;
            let ax = build_axes(&axes, 3)?;
            let (k12, k23) = (kernel_by_name(&k12)?, kernel_by_name(&k23)?);
            let m = margin_by_name(&m)?;
            let [a, b, c]: [AxisGrid; 3] = ax.try_into().expect("three axes");
            Ok((names, generic_trivariate(p12, p23, k12, k23, m, [a, b, c], margin_tol)?))
        }
        GridFile::Construction(GridConstruction::HrForest { forest, axes }) => {
            let (names, f) = forest_from(forest)?;
            let ax = build_axes(&axes, names.len())?;
            Ok((names, f.build_grid(ax)?))
        }
        GridFile::Table(t) => {
            let d = match (&t.vertices, t.d) {
                (Some(v), _) => v.len(),
                (None, Some(d)) => d,
                (None, None) => t.axes.len(),
            };
            let names = Names::or_numbered(t.vertices, d)?;
            let ax = build_axes(&t.axes, d)?;
            let mut faces = BTreeMap::new();
            for f in t.faces {
                let s = names.set(&f.face)?;
                if faces.insert(s, f.values).is_some() {
                    return Err(Error::InvalidInput(format!("face {:?} listed twice", f.face)));
                }
            }
            Ok((names, GridMeasure::new(ax, faces)?))
        }
    }
}

/// Table form of a grid measure, readable by [`read_grid`].
pub fn grid_json(m: &GridMeasure, names: &Names) -> Value {
    let axes: Vec<Value> = m.axes().iter().map(|a| json!({ "nodes": a.nodes() })).collect();
    let faces: Vec<Value> =
        m.faces().map(|(f, t)| json!({ "face": names.of_set(f), "values": t })).collect();
    json!({ "vertices": names.as_slice(), "axes": axes, "faces": faces })
}

fn witness_json(w: &Witness, names: &Names) -> Value {
    match w {
        Witness::TestSet { axes, conditioning, defect } => {
            let mut per_axis = Map::new();
            for (v, a) in axes.iter().enumerate() {
                if let Some(vals) = a {
                    per_axis.insert(names.name(v).to_string(), json!(vals));
                }
            }
            json!({ "kind": "test_set", "axes": per_axis, "conditioning": conditioning, "defect": defect })
        }
        Witness::GridPoint { point, lhs, rhs, defect } => {
            let p: Map<String, Value> = point.iter().enumerate().map(|(v, x)| (names.name(v).to_string(), json!(x))).collect();
            json!({ "kind": "grid_point", "point": p, "lhs": lhs, "rhs": rhs, "defect": defect })
        }
        other => serde_json::to_value(other).expect("serializable"),
    }
}

pub fn ci_report_json(r: &CiReport, names: &Names) -> Value {
    json!({
        "query": {
            "a": names.of_set(r.query.a),
            "b": names.of_set(r.query.b),
            "c": names.of_set(r.query.c),
        },
        "verdict": r.verdict,
        "witness": r.witness.as_ref().map(|w| witness_json(w, names)),
    })
}

pub fn audit_json(a: &MarkovAudit, names: &Names) -> Value {
    let entries: Vec<Value> = a
        .entries
        .iter()
        .map(|e| {
            let mut o = json!({
                "property": e.property,
                "sets": e.sets.iter().map(|s| names.of_set(*s)).collect::<Vec<_>>(),
                "holds": e.holds,
            });
            if let Some(w) = &e.witness {
                o["witness"] = witness_json(w, names);
            }
            o
        })
        .collect();
    json!({ "passed": a.passed(), "checked": a.checked, "violations": a.violations().count(), "entries": entries })
}

pub fn face_bound_json(r: &FaceBoundReport, names: &Names) -> Value {
    json!({
        "holds": r.holds,
        "disconnected": r.disconnected.iter().map(|s| names.of_set(*s)).collect::<Vec<_>>(),
    })
}

/// Square matrix as `{"vertices": [...], "matrix": [[...]]}`; `None` becomes null.
pub fn matrix_json<T: Serialize>(m: &[Vec<T>], names: &Names) -> Value {
    json!({ "vertices": names.as_slice(), "matrix": m })
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (None, Some(i), _) => out.push_str(&i.to_string()),
            (None, None, Some(x)) if x.is_finite() => out.push_str(&format!("{x:.16e}")),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(a) => {
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(o) => {
            out.push('{');
            for (k, (key, x)) in o.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string"));
                out.push(':');
                write_value(x, out);
            }
            out.push('}');
        }
    }
}

/// Compact JSON with every float printed to 17 significant digits.
pub fn to_json_string(v: &Value) -> String {
    let mut s = String::new();
    write_value(v, &mut s);
    s
}
