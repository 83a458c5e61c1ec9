use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::MoleculeId;

/// Ratios within this distance of 1 are classed as boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Mouse,
    Rat,
    Rabbit,
    Cynomolgus,
}

impl Species {
    pub fn parse(s: &str) -> Option<Species> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mouse" | "mice" => Some(Species::Mouse),
            "rat" => Some(Species::Rat),
            "rabbit" => Some(Species::Rabbit),
            "cynomolgus" | "cynomolgus monkey" | "monkey" => Some(Species::Cynomolgus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureBasis {
    Dose,
    Cmax,
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseQuantity {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoaelPair {
    pub molecule_id: MoleculeId,
    pub species: Species,
    pub maternal_noael: DoseQuantity,
    pub embryo_fetal_noael: DoseQuantity,
    pub exposure_basis: ExposureBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityZone {
    /// Embryo-fetal toxicity below the maternal NOAEL.
    Red,
    Boundary,
    Green,
}

/// Maternal NOAEL divided by embryo-fetal NOAEL, with its zone.
pub fn rsr(pair: &NoaelPair) -> Result<(f64, SensitivityZone), EvalError> {
    let (m, e) = (&pair.maternal_noael, &pair.embryo_fetal_noael);
    for v in [m.value, e.value] {
        if !(v.is_finite() && v > 0.0) {
            return Err(EvalError::InvalidNoael(v));
        }
    }
    if m.unit.trim() != e.unit.trim() {
        return Err(EvalError::UnitMismatch(m.unit.clone(), e.unit.clone()));
    }
    let ratio = m.value / e.value;
    let zone = if (ratio - 1.0).abs() <= BOUNDARY_TOLERANCE {
        SensitivityZone::Boundary
    } else if ratio > 1.0 {
        SensitivityZone::Red
    } else {
        SensitivityZone::Green
    };
    Ok((ratio, zone))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Positive,
    Negative,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesOutcome {
    pub molecule_id: MoleculeId,
    pub species: Species,
    pub outcome: Outcome,
}

/// Share of molecules whose outcomes agree between species `a` and `b`,
/// counting only molecules with a non-missing outcome in both.
pub fn species_concordance(outcomes: &[SpeciesOutcome], a: Species, b: Species) -> Result<f64, EvalError> {
    let mut table: BTreeMap<(&MoleculeId, Species), Outcome> = BTreeMap::new();
    for o in outcomes {
        if table.insert((&o.molecule_id, o.species), o.outcome).is_some() {
            return Err(EvalError::DuplicateRecord(format!("({}, {:?})", o.molecule_id, o.species)));
        }
    }
    let molecules: BTreeSet<&MoleculeId> = outcomes.iter().map(|o| &o.molecule_id).collect();
    let (mut both, mut agree) = (0u64, 0u64);
    for m in molecules {
        let oa = table.get(&(m, a)).copied().unwrap_or(Outcome::Missing);
        let ob = table.get(&(m, b)).copied().unwrap_or(Outcome::Missing);
        if oa == Outcome::Missing || ob == Outcome::Missing {
            continue;
        }
        both += 1;
        if oa == ob {
            agree += 1;
        }
    }
    if both == 0 {
        return Err(EvalError::NoOverlap);
    }
    Ok(agree as f64 / both as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttritionShare {
    pub category: String,
    pub count: u64,
    pub share: f64,
}

/// Portfolio share of each attrition category, largest first (ties by
/// category name).
pub fn stratify_attrition(records: &[(MoleculeId, String)]) -> Result<Vec<AttritionShare>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut seen = BTreeSet::new();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (m, cat) in records {
        if !seen.insert(m) {
            return Err(EvalError::DuplicateRecord(format!("molecule {m}")));
        }
        *counts.entry(cat.as_str()).or_default() += 1;
    }
    let total = records.len() as f64;
    let mut out: Vec<AttritionShare> = counts
        .into_iter()
        .map(|(c, n)| AttritionShare { category: c.into(), count: n, share: n as f64 / total })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.category.cmp(&b.category)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn pair(m: f64, e: f64) -> NoaelPair {
        NoaelPair {
            molecule_id: "RO_A".into(),
            species: Species::Rat,
            maternal_noael: DoseQuantity { value: m, unit: "mg/kg".into() },
            embryo_fetal_noael: DoseQuantity { value: e, unit: "mg/kg".into() },
            exposure_basis: ExposureBasis::Dose,
        }
    }

    #[test]
    fn rsr_zones() {
        assert_eq!(rsr(&pair(10.0, 5.0)).unwrap(), (2.0, SensitivityZone::Red));
        assert_eq!(rsr(&pair(7.0, 7.0)).unwrap(), (1.0, SensitivityZone::Boundary));
        assert_eq!(rsr(&pair(5.0, 10.0)).unwrap(), (0.5, SensitivityZone::Green));
    }

    #[test]
    fn rsr_errors() {
        let mut p = pair(1.0, 1.0);
        p.embryo_fetal_noael.unit = "mg/m2".into();
        assert!(matches!(rsr(&p), Err(EvalError::UnitMismatch(_, _))));
        assert_eq!(rsr(&pair(0.0, 1.0)), Err(EvalError::InvalidNoael(0.0)));
        assert!(rsr(&pair(1.0, f64::NAN)).is_err());
    }

    fn outcome(m: &str, s: Species, o: Outcome) -> SpeciesOutcome {
        SpeciesOutcome { molecule_id: m.into(), species: s, outcome: o }
    }

    #[test]
    fn concordance_hand_count() {
        use Outcome::*;
        let data = vec![
            outcome("m1", Species::Rat, Positive),
            outcome("m1", Species::Rabbit, Positive),
            outcome("m2", Species::Rat, Negative),
            outcome("m2", Species::Rabbit, Negative),
            outcome("m3", Species::Rat, Positive),
            outcome("m3", Species::Rabbit, Negative),
            outcome("m4", Species::Rat, Negative),
            outcome("m4", Species::Rabbit, Negative),
            outcome("m5", Species::Rat, Positive),
            outcome("m5", Species::Rabbit, Missing),
        ];
        assert_eq!(species_concordance(&data, Species::Rat, Species::Rabbit).unwrap(), 0.75);
        assert_eq!(species_concordance(&data, Species::Rat, Species::Rat).unwrap(), 1.0);
        assert_eq!(species_concordance(&data, Species::Rat, Species::Mouse), Err(EvalError::NoOverlap));
        let mut dup = data.clone();
        dup.push(outcome("m1", Species::Rat, Negative));
        assert!(matches!(species_concordance(&dup, Species::Rat, Species::Rabbit), Err(EvalError::DuplicateRecord(_))));
    }

    #[test]
    fn attrition_shares() {
        let recs: Vec<_> = ["strategic", "safety", "safety", "safety"]
            .iter()
            .enumerate()
            .map(|(i, c)| (MoleculeId::new(i.to_string()), c.to_string()))
            .collect();
        let out = stratify_attrition(&recs).unwrap();
        assert_eq!(out[0].category, "safety");
        assert_eq!(out[1].share, 0.25);
        let one = stratify_attrition(&recs[1..]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].share, 1.0);
        let mut dup = recs.clone();
        dup.push(recs[0].clone());
        assert!(matches!(stratify_attrition(&dup), Err(EvalError::DuplicateRecord(_))));
        assert_eq!(stratify_attrition(&[]), Err(EvalError::EmptyInput));
    }
}
