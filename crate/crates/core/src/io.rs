//! JSON interchange format `finfield/1`.
//!
//! Every document carries `"format": "finfield/1"`, the enumeration rule and
//! a `kind` tag. Dense tables follow the canonical enumeration (last site
//! fastest); floats are written with 17 significant digits so that parsing
//! and re-serializing a document is byte-stable.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::energy::{Convention, OnePointHamiltonian, TransitionEnergyField};
use crate::error::{Error, Result};
use crate::field::RandomField;
use crate::markov::{MarkovReport, NeighborhoodSystem};
use crate::models::SampleResult;
use crate::onepoint::OnePointSystem;
use crate::potential::Potential;
use crate::reconstruct::InvarianceReport;
use crate::report::ConsistencyReport;
use crate::space::{ConfigSpace, Configuration, SiteSet};

pub const FORMAT: &str = "finfield/1";
pub const ENUMERATION: &str = "last-site-fastest";

/// One potential term: the sites of `V` and `Φ_V` over `X^V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub sites: Vec<String>,
    pub table: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionTag {
    Energy,
    LogProbability,
}

impl From<Convention> for ConventionTag {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Energy => ConventionTag::Energy,
            Convention::LogProbability => ConventionTag::LogProbability,
        }
    }
}

impl From<ConventionTag> for Convention {
    fn from(c: ConventionTag) -> Self {
        match c {
            ConventionTag::Energy => Convention::Energy,
            ConventionTag::LogProbability => Convention::LogProbability,
        }
    }
}

/// The payload of a document, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Document {
    Field {
        space: ConfigSpace,
        probs: Vec<f64>,
    },
    /// Per site, `tables[t][z][x]`.
    System {
        space: ConfigSpace,
        tables: Vec<Vec<Vec<f64>>>,
    },
    /// Per site, `deltas[t][z][x][u]`.
    Delta {
        space: ConfigSpace,
        deltas: Vec<Vec<Vec<Vec<f64>>>>,
    },
    /// Per site, `values[t][z][x]`.
    Hamiltonian {
        space: ConfigSpace,
        convention: ConventionTag,
        values: Vec<Vec<Vec<f64>>>,
    },
    Potential {
        space: ConfigSpace,
        terms: Vec<TermDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vacuum: Option<Vec<usize>>,
    },
    /// Neighbor lists by site name; omitted sites have no neighbors.
    Adjacency {
        neighbors: BTreeMap<String, Vec<String>>,
    },
    /// A configuration on the listed sites.
    Configuration {
        sites: Vec<String>,
        values: Vec<usize>,
    },
    Sample {
        space: ConfigSpace,
        #[serde(flatten)]
        result: SampleResult,
    },
    ConsistencyReport(ConsistencyReport),
    MarkovReport(MarkovReport),
    InvarianceReport(InvarianceReport),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Field { .. } => "field",
            Document::System { .. } => "system",
            Document::Delta { .. } => "delta",
            Document::Hamiltonian { .. } => "hamiltonian",
            Document::Potential { .. } => "potential",
            Document::Adjacency { .. } => "adjacency",
            Document::Configuration { .. } => "configuration",
            Document::Sample { .. } => "sample",
            Document::ConsistencyReport(_) => "consistency-report",
            Document::MarkovReport(_) => "markov-report",
            Document::InvarianceReport(_) => "invariance-report",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    enumeration: String,
    #[serde(flatten)]
    document: Document,
}

/// Pretty JSON with every float written as `{:.16e}`.
struct ExactFloats(PrettyFormatter<'static>);

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes a document with its header, newline-terminated.
pub fn write_document(document: &Document) -> String {
    let envelope = Envelope {
        format: FORMAT.to_string(),
        enumeration: ENUMERATION.to_string(),
        document: document.clone(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::new()));
    envelope.serialize(&mut ser).expect("documents serialize");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

/// Parses a document and checks its header.
pub fn read_document(text: &str) -> Result<Document> {
    let envelope: Envelope = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if envelope.format != FORMAT {
        return Err(Error::Format(format!(
            "unsupported format `{}`, expected `{FORMAT}`",
            envelope.format
        )));
    }
    if envelope.enumeration != ENUMERATION {
        return Err(Error::Format(format!(
            "unsupported enumeration `{}`, expected `{ENUMERATION}`",
            envelope.enumeration
        )));
    }
    Ok(envelope.document)
}

fn wrong_kind(expected: &str, got: &Document) -> Error {
    Error::Format(format!("expected a `{expected}` document, found `{}`", got.kind()))
}

fn chunk(flat: &[f64], size: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(size).map(<[f64]>::to_vec).collect()
}

fn check_rows<T>(space: &ConfigSpace, per_site: &[Vec<T>], what: &str) -> Result<()> {
    if per_site.len() != space.n_sites() {
        return Err(Error::Format(format!("{what}: one entry per site is required")));
    }
    for (t, rows) in per_site.iter().enumerate() {
        if rows.len() != space.boundary_count(t) {
            return Err(Error::Format(format!(
                "{what}: site `{}` has {} boundary rows, expected {}",
                space.site_name(t),
                rows.len(),
                space.boundary_count(t)
            )));
        }
    }
    Ok(())
}

fn flatten_rows(space: &ConfigSpace, rows: Vec<Vec<Vec<f64>>>, width: impl Fn(usize) -> usize, what: &str) -> Result<Vec<Vec<f64>>> {
    check_rows(space, &rows, what)?;
    rows.into_iter()
        .enumerate()
        .map(|(t, site)| {
            if site.iter().any(|r| r.len() != width(t)) {
                return Err(Error::Format(format!(
                    "{what}: rows of site `{}` must have {} entries",
                    space.site_name(t),
                    width(t)
                )));
            }
            Ok(site.into_iter().flatten().collect())
        })
        .collect()
}

/// Types with a `finfield/1` representation.
pub trait Interchange: Sized {
    fn to_document(&self) -> Document;
    fn from_document(document: Document) -> Result<Self>;

    fn to_json(&self) -> String {
        write_document(&self.to_document())
    }

    fn from_json(text: &str) -> Result<Self> {
        Self::from_document(read_document(text)?)
    }
}

impl Interchange for RandomField {
    fn to_document(&self) -> Document {
        Document::Field {
            space: self.space().clone(),
            probs: self.probs().to_vec(),
        }
    }

    fn from_document(document: Document) -> Result<Self> {
        match document {
            Document::Field { space, probs } => RandomField::new(space, probs),
            other => Err(wrong_kind("field", &other)),
        }
    }
}

impl Interchange for OnePointSystem {
    fn to_document(&self) -> Document {
        let space = self.space();
        Document::System {
            space: space.clone(),
            tables: (0..space.n_sites()).map(|t| chunk(self.table(t), space.card(t))).collect(),
        }
    }

    fn from_document(document: Document) -> Result<Self> {
        match document {
            Document::System { space, tables } => {
                let flat = flatten_rows(&space, tables, |t| space.card(t), "system")?;
                OnePointSystem::new(space, flat)
            }
            other => Err(wrong_kind("system", &other)),
        }
    }
}

impl Interchange for TransitionEnergyField {
    fn to_document(&self) -> Document {
        let space = self.space();
        let deltas = (0..space.n_sites())
            .map(|t| {
                let card = space.card(t);
                self.tables()[t]
                    .chunks_exact(card * card)
                    .map(|m| chunk(m, card))
                    .collect()
            })
            .collect();
        Document::Delta {
            space: space.clone(),
            deltas,
        }
    }

    fn from_document(document: Document) -> Result<Self> {
        match document {
            Document::Delta { space, deltas } => {
                check_rows(&space, &deltas, "delta")?;
                let mut flat = Vec::with_capacity(space.n_sites());
                for (t, site) in deltas.into_iter().enumerate() {
                    let card = space.card(t);
                    let ok = site.iter().all(|m| m.len() == card && m.iter().all(|r| r.len() == card));
                    if !ok {
                        return Err(Error::Format(format!(
                            "delta: matrices of site `{}` must be {card}×{card}",
                            space.site_name(t)
                        )));
                    }
                    flat.push(site.into_iter().flatten().flatten().collect());
                }
                TransitionEnergyField::new(space, flat)
            }
            other => Err(wrong_kind("delta", &other)),
        }
    }
}

/// A one-point Hamiltonian together with the convention it is stated in.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianDoc {
    pub hamiltonian: OnePointHamiltonian,
    pub convention: Convention,
}

impl Interchange for HamiltonianDoc {
    fn to_document(&self) -> Document {
        let space = self.hamiltonian.space();
        Document::Hamiltonian {
            space: space.clone(),
            convention: self.convention.into(),
            values: (0..space.n_sites())
                .map(|t| chunk(&self.hamiltonian.tables()[t], space.card(t)))
                .collect(),
        }
    }

    fn from_document(document: Document) -> Result<Self> {
        match document {
            Document::Hamiltonian {
                space,
                convention,
                values,
            } => {
                let flat = flatten_rows(&space, values, |t| space.card(t), "hamiltonian")?;
                Ok(HamiltonianDoc {
                    hamiltonian: OnePointHamiltonian::new(space, flat)?,
                    convention: convention.into(),
                })
            }
            other => Err(wrong_kind("hamiltonian", &other)),
        }
    }
}

impl Interchange for Potential {
    fn to_document(&self) -> Document {
        let space = self.space();
        let mut terms: Vec<(&SiteSet, &Vec<f64>)> = self.terms().iter().collect();
        terms.sort_by_key(|(s, _)| (s.len(), s.iter().collect::<Vec<_>>()));
        Document::Potential {
            space: space.clone(),
            terms: terms
                .into_iter()
                .map(|(&set, table)| TermDoc {
                    sites: space.names(set),
                    table: table.clone(),
                })
                .collect(),
            vacuum: self.vacuum().map(<[usize]>::to_vec),
        }
    }

    fn from_document(document: Document) -> Result<Self> {
        match document {
            Document::Potential { space, terms, vacuum } => {
                let mut phi = Potential::new(space.clone());
                let mut seen = Vec::new();
                for term in terms {
                    let set = space.site_set(&term.sites)?;
                    if set.len() != term.sites.len() {
                        return Err(Error::Format(format!("term {:?} repeats a site", term.sites)));
                    }
                    let canonical = space.names(set);
                    if canonical != term.sites {
                        return Err(Error::Format(format!(
                            "term sites {:?} must be listed in space order {canonical:?}",
                            term.sites
                        )));
                    }
                    if seen.contains(&set) {
                        return Err(Error::Format(format!("duplicate term on {:?}", term.sites)));
                    }
                    seen.push(set);
                    phi.add_term(set, term.table)?;
                }
                if let Some(theta) = vacuum {
                    phi.mark_vacuum(theta)?;
                }
                Ok(phi)
            }
            other => Err(wrong_kind("potential", &other)),
        }
    }
}

fn config_from_parts(sites: &[usize], values: Vec<usize>) -> Result<Configuration> {
    if sites.len() != values.len() {
        return Err(Error::Format("configuration needs one value per site".into()));
    }
    let mut pairs: Vec<(usize, usize)> = sites.iter().copied().zip(values).collect();
    pairs.sort_unstable();
    if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Format("configuration repeats a site".into()));
    }
    let domain = SiteSet::from_indices(pairs.iter().map(|p| p.0));
    Configuration::new(domain, pairs.into_iter().map(|p| p.1).collect())
}

/// Configuration document with site names from `space`.
pub fn configuration_to_json(space: &ConfigSpace, x: &Configuration) -> Result<String> {
    space.check_config(x)?;
    Ok(write_document(&Document::Configuration {
        sites: space.names(x.domain()),
        values: x.values().to_vec(),
    }))
}

/// Parses a configuration document whose sites are names of `space`.
pub fn configuration_from_json(space: &ConfigSpace, text: &str) -> Result<Configuration> {
    match read_document(text)? {
        Document::Configuration { sites, values } => {
            let idx: Vec<usize> = sites.iter().map(|s| space.site_index(s)).collect::<Result<_>>()?;
            let x = config_from_parts(&idx, values)?;
            space.check_config(&x)?;
            Ok(x)
        }
        other => Err(wrong_kind("configuration", &other)),
    }
}

/// Adjacency document with site names from `space`.
pub fn adjacency_to_json(space: &ConfigSpace, nbhd: &NeighborhoodSystem) -> String {
    let neighbors = (0..nbhd.n_sites())
        .map(|t| (space.site_name(t).to_string(), space.names(nbhd.neighbors(t))))
        .collect();
    write_document(&Document::Adjacency { neighbors })
}

/// Parses an adjacency document over the sites of `space`.
pub fn adjacency_from_json(space: &ConfigSpace, text: &str) -> Result<NeighborhoodSystem> {
    match read_document(text)? {
        Document::Adjacency { neighbors } => adjacency_from_map(space, &neighbors),
        other => Err(wrong_kind("adjacency", &other)),
    }
}

pub fn adjacency_from_map(space: &ConfigSpace, map: &BTreeMap<String, Vec<String>>) -> Result<NeighborhoodSystem> {
    let mut sets = vec![SiteSet::empty(); space.n_sites()];
    for (site, nb) in map {
        let t = space.site_index(site)?;
        sets[t] = space.site_set(nb)?;
    }
    NeighborhoodSystem::new(sets)
}

/// Sample document; the space names the sites of the joint table.
pub fn sample_to_json(space: &ConfigSpace, result: &SampleResult) -> String {
    write_document(&Document::Sample {
        space: space.clone(),
        result: result.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{delta_from_system, hamiltonian_from_field};
    use crate::models;
    use crate::potential::extract_potential_mobius;

    fn space() -> ConfigSpace {
        ConfigSpace::new(["a", "b", "c"], [2, 3, 2]).unwrap()
    }

    fn byte_stable<T: Interchange + PartialEq + std::fmt::Debug>(value: &T) {
        let text = value.to_json();
        let back = T::from_json(&text).unwrap();
        assert_eq!(&back, value);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn round_trips_are_byte_stable() {
        let p = models::random_positive_field(&space(), 1);
        byte_stable(&p);
        let q = p.one_point_system().unwrap();
        byte_stable(&q);
        byte_stable(&delta_from_system(&q).unwrap());
        byte_stable(&HamiltonianDoc {
            hamiltonian: hamiltonian_from_field(&p, &[0, 1, 0]).unwrap(),
            convention: Convention::LogProbability,
        });
        byte_stable(&extract_potential_mobius(&p, &[0, 0, 1]).unwrap());
        byte_stable(&models::random_potential(&space(), 2, 3).unwrap());
    }

    #[test]
    fn header_and_layout() {
        let p = models::product_field(
            ConfigSpace::new(["a", "b"], [2, 2]).unwrap(),
            &[vec![0.25, 0.75], vec![0.5, 0.5]],
        )
        .unwrap();
        let text = p.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["format"], "finfield/1");
        assert_eq!(value["enumeration"], "last-site-fastest");
        assert_eq!(value["kind"], "field");
        assert_eq!(value["space"]["sites"], serde_json::json!(["a", "b"]));
        assert_eq!(value["space"]["cardinalities"], serde_json::json!([2, 2]));
        assert!(text.contains("1.2500000000000000e-1"));

        let q = p.one_point_system().unwrap();
        let value: serde_json::Value = serde_json::from_str(&q.to_json()).unwrap();
        // site a: two boundary rows (b = 0, 1), each a distribution on X^a
        assert_eq!(value["tables"][0].as_array().unwrap().len(), 2);
        assert_eq!(value["tables"][0][1].as_array().unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(read_document("{"), Err(Error::Format(_))));
        let p = models::random_positive_field(&space(), 1);
        let text = p.to_json().replace("finfield/1", "finfield/0");
        assert!(matches!(RandomField::from_json(&text), Err(Error::Format(_))));
        let q = p.one_point_system().unwrap();
        assert!(matches!(RandomField::from_json(&q.to_json()), Err(Error::Format(_))));
        let text = p.to_json().replace("last-site-fastest", "first-site-fastest");
        assert!(RandomField::from_json(&text).is_err());
    }

    #[test]
    fn configurations_and_adjacency() {
        let s = space();
        let x = s.assign(&[("c", 1), ("a", 0)]).unwrap();
        let text = configuration_to_json(&s, &x).unwrap();
        assert_eq!(configuration_from_json(&s, &text).unwrap(), x);

        let (phi, ns) = models::ising_potential(2, 2, 0.5, 0.0).unwrap();
        let text = adjacency_to_json(phi.space(), &ns);
        assert_eq!(adjacency_from_json(phi.space(), &text).unwrap(), ns);
        let one_sided = r#"{"format":"finfield/1","enumeration":"last-site-fastest","kind":"adjacency","neighbors":{"r0c0":["r0c1"]}}"#;
        assert!(adjacency_from_json(phi.space(), one_sided).is_err());
    }

    #[test]
    fn potential_terms_are_validated() {
        let doc = |terms: &str| {
            format!(
                r#"{{"format":"finfield/1","enumeration":"last-site-fastest","kind":"potential","space":{{"sites":["a","b"],"cardinalities":[2,2]}},"terms":{terms}}}"#
            )
        };
        assert!(Potential::from_json(&doc(r#"[{"sites":["a"],"table":[0.0,1.0]}]"#)).is_ok());
        assert!(Potential::from_json(&doc(r#"[{"sites":["a"],"table":[0.0]}]"#)).is_err());
        assert!(Potential::from_json(&doc(r#"[{"sites":["b","a"],"table":[0,0,0,1]}]"#)).is_err());
        assert!(Potential::from_json(&doc(r#"[{"sites":["z"],"table":[0,1]}]"#)).is_err());
        assert!(Potential::from_json(&doc(
            r#"[{"sites":["a"],"table":[0,1]},{"sites":["a"],"table":[0,1]}]"#
        ))
        .is_err());
    }
}
