//! Metric tables and portfolio analytics over CSV inputs.
//!
//! Input layouts (header row required):
//!
//! * NOAEL pairs: `molecule_id,species,maternal_noael,maternal_unit,embryo_fetal_noael,embryo_fetal_unit,exposure_basis`
//! * species outcomes: `molecule_id,species,outcome`
//! * attrition: `molecule_id,category`

use std::path::Path;

use evidence_core::eval::{
    compute_metrics, rsr, species_concordance, stratify_attrition, tally, AdjudicationRecord, AttritionShare,
    BenchmarkQuery, ConfusionCounts, DoseQuantity, ExposureBasis, MetricValue, MetricsReport, NoaelPair, Outcome,
    SensitivityZone, Species, SpeciesOutcome,
};
use evidence_core::MoleculeId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub query: BenchmarkQuery,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

/// One row per benchmark query that has verdicts, in query order.
pub fn metrics_table(records: &[AdjudicationRecord]) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for query in BenchmarkQuery::ALL {
        let counts = tally(records, query)?;
        if counts.total() > 0 {
            rows.push(MetricsRow { query, counts, metrics: compute_metrics(&counts)? });
        }
    }
    Ok(rows)
}

pub fn format_metric(v: MetricValue) -> String {
    match v {
        MetricValue::Defined(x) => format!("{x:.4}"),
        MetricValue::Undefined => "undefined".into(),
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("query,tp,tn,fp,fn,accuracy,precision,recall,specificity,f1\n");
    for r in rows {
        let c = r.counts;
        let m = r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.query,
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            format_metric(m.accuracy),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.specificity),
            format_metric(m.f1)
        ));
    }
    out
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => EngineError::Io { path: path.to_path_buf(), source: io },
            other => EngineError::parse(path, 0, format!("{other:?}")),
        })?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        out.push(row.map_err(|e| EngineError::parse(path, i + 2, e))?);
    }
    Ok(out)
}

fn species(path: &Path, line: usize, s: &str) -> Result<Species> {
    Species::parse(s).ok_or_else(|| EngineError::parse(path, line, format!("unknown species {s:?}")))
}

#[derive(Deserialize)]
struct NoaelRow {
    molecule_id: MoleculeId,
    species: String,
    maternal_noael: f64,
    maternal_unit: String,
    embryo_fetal_noael: f64,
    embryo_fetal_unit: String,
    exposure_basis: ExposureBasis,
}

pub fn read_noael_pairs(path: &Path) -> Result<Vec<NoaelPair>> {
    let rows: Vec<NoaelRow> = read_csv(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(NoaelPair {
                molecule_id: r.molecule_id,
                species: species(path, i + 2, &r.species)?,
                maternal_noael: DoseQuantity { value: r.maternal_noael, unit: r.maternal_unit },
                embryo_fetal_noael: DoseQuantity { value: r.embryo_fetal_noael, unit: r.embryo_fetal_unit },
                exposure_basis: r.exposure_basis,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct OutcomeRow {
    molecule_id: MoleculeId,
    species: String,
    outcome: Outcome,
}

pub fn read_species_outcomes(path: &Path) -> Result<Vec<SpeciesOutcome>> {
    let rows: Vec<OutcomeRow> = read_csv(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(SpeciesOutcome {
                molecule_id: r.molecule_id,
                species: species(path, i + 2, &r.species)?,
                outcome: r.outcome,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct AttritionRow {
    molecule_id: MoleculeId,
    category: String,
}

pub fn read_attrition(path: &Path) -> Result<Vec<(MoleculeId, String)>> {
    let rows: Vec<AttritionRow> = read_csv(path)?;
    Ok(rows.into_iter().map(|r| (r.molecule_id, r.category)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RsrRow {
    pub molecule_id: MoleculeId,
    pub species: Species,
    pub exposure_basis: ExposureBasis,
    pub ratio: f64,
    pub zone: SensitivityZone,
}

pub fn rsr_table(pairs: &[NoaelPair]) -> Result<Vec<RsrRow>> {
    pairs
        .iter()
        .map(|p| {
            let (ratio, zone) = rsr(p)?;
            Ok(RsrRow {
                molecule_id: p.molecule_id.clone(),
                species: p.species,
                exposure_basis: p.exposure_basis,
                ratio,
                zone,
            })
        })
        .collect()
}

pub fn concordance(outcomes: &[SpeciesOutcome], a: Species, b: Species) -> Result<f64> {
    Ok(species_concordance(outcomes, a, b)?)
}

pub fn attrition(records: &[(MoleculeId, String)]) -> Result<Vec<AttritionShare>> {
    Ok(stratify_attrition(records)?)
}
