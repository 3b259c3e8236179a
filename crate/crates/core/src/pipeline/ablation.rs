use serde::{Deserialize, Serialize};

use super::evaluate::evaluate_members;
use super::{ClusterAssignment, ClusterId, Dataset, EvalConfig, PipelineError};
use crate::features::{FeatureGroup, FeatureSchema};

/// Name of the withheld-as-a-unit sequence embedding block.
pub const SEQ_EMB_UNIT: &str = "seq_emb";

/// A named set of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationUnit {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Every non-sequence column on its own plus the sequence block as one unit.
pub fn loo_units(schema: &FeatureSchema) -> Vec<AblationUnit> {
    let mut units: Vec<AblationUnit> = (0..schema.len())
        .filter(|&i| schema.group_of(i) != FeatureGroup::Sequence)
        .map(|i| AblationUnit {
            name: schema.names()[i].clone(),
            columns: vec![i],
        })
        .collect();
    let seq = schema.columns_in(FeatureGroup::Sequence);
    if !seq.is_empty() {
        units.push(AblationUnit {
            name: SEQ_EMB_UNIT.into(),
            columns: seq,
        });
    }
    units
}

/// One unit per feature family.
pub fn block_units(schema: &FeatureSchema) -> Vec<AblationUnit> {
    FeatureGroup::ALL
        .iter()
        .map(|g| AblationUnit {
            name: g.name().to_string(),
            columns: schema.columns_in(*g),
        })
        .collect()
}

/// Resolves column names, family names (`Profile`, `Activity`, `Sequence`)
/// and `seq_emb`.
pub fn resolve_units(schema: &FeatureSchema, names: &[String]) -> Result<Vec<AblationUnit>, PipelineError> {
    names
        .iter()
        .map(|n| {
            let columns = if let Some(i) = schema.index_of(n) {
                vec![i]
            } else if n == SEQ_EMB_UNIT {
                schema.columns_in(FeatureGroup::Sequence)
            } else if let Some(g) = FeatureGroup::ALL.iter().find(|g| g.name() == n) {
                schema.columns_in(*g)
            } else {
                return Err(PipelineError::UnknownFeatureName(n.clone()));
            };
            Ok(AblationUnit {
                name: n.clone(),
                columns,
            })
        })
        .collect()
}

/// The seven non-empty unions of feature families, as kept column sets.
pub fn group_combinations(schema: &FeatureSchema) -> Vec<AblationUnit> {
    let g = FeatureGroup::ALL;
    let combos: [&[FeatureGroup]; 7] = [
        &[g[0]],
        &[g[1]],
        &[g[2]],
        &[g[0], g[1]],
        &[g[0], g[2]],
        &[g[1], g[2]],
        &[g[0], g[1], g[2]],
    ];
    combos
        .iter()
        .map(|set| {
            let mut columns: Vec<usize> = set.iter().flat_map(|x| schema.columns_in(*x)).collect();
            columns.sort_unstable();
            AblationUnit {
                name: set.iter().map(|x| x.name()).collect::<Vec<_>>().join("+"),
                columns,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooCell {
    pub cluster: String,
    pub feature: String,
    pub accuracy_all: f64,
    pub accuracy_without: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub cluster: String,
    pub groups: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub loo: Vec<LooCell>,
    pub groups: Vec<GroupCell>,
}

fn accuracy(
    data: &Dataset,
    members: &[usize],
    columns: &[usize],
    cfg: &EvalConfig,
    cluster: ClusterId,
) -> Result<f64, PipelineError> {
    Ok(evaluate_members(data, members, columns, cfg, cluster.name())?.metrics.accuracy)
}

/// Refits each cluster with each unit withheld; delta = without − all.
/// Seeds and splits are shared with the all-features baseline.
pub fn ablation_leave_one_out(
    data: &Dataset,
    assignment: &ClusterAssignment,
    units: &[AblationUnit],
    cfg: &EvalConfig,
) -> Result<AblationReport, PipelineError> {
    let all: Vec<usize> = (0..data.dim()).collect();
    let present = assignment.present();
    let baselines = crate::par::try_map(&present, |c| accuracy(data, &assignment.members(*c), &all, cfg, *c))?;
    let jobs: Vec<(usize, usize)> = (0..present.len())
        .flat_map(|c| (0..units.len()).map(move |u| (c, u)))
        .collect();
    let loo = crate::par::try_map(&jobs, |&(ci, ui)| {
        let c = present[ci];
        let kept: Vec<usize> = all.iter().copied().filter(|i| !units[ui].columns.contains(i)).collect();
        let without = accuracy(data, &assignment.members(c), &kept, cfg, c)?;
        Ok::<_, PipelineError>(LooCell {
            cluster: c.name().to_string(),
            feature: units[ui].name.clone(),
            accuracy_all: baselines[ci],
            accuracy_without: without,
            delta: without - baselines[ci],
        })
    })?;
    Ok(AblationReport {
        loo,
        groups: Vec::new(),
    })
}

/// Accuracy of models trained only on each of the seven family unions.
pub fn ablation_groups(
    data: &Dataset,
    assignment: &ClusterAssignment,
    cfg: &EvalConfig,
) -> Result<AblationReport, PipelineError> {
    let combos = group_combinations(&data.schema);
    let present = assignment.present();
    let jobs: Vec<(usize, usize)> = (0..present.len())
        .flat_map(|c| (0..combos.len()).map(move |u| (c, u)))
        .collect();
    let groups = crate::par::try_map(&jobs, |&(ci, ui)| {
        let c = present[ci];
        Ok::<_, PipelineError>(GroupCell {
            cluster: c.name().to_string(),
            groups: combos[ui].name.clone(),
            accuracy: accuracy(data, &assignment.members(c), &combos[ui].columns, cfg, c)?,
        })
    })?;
    Ok(AblationReport {
        loo: Vec::new(),
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_construction() {
        let schema = FeatureSchema::new(2, 4);
        let units = loo_units(&schema);
        assert_eq!(units.len(), 7 + 2 + 13 + 1);
        assert_eq!(units.last().unwrap().columns.len(), 4);
        assert_eq!(units[7].name, "topic_1");
        let combos = group_combinations(&schema);
        assert_eq!(combos.len(), 7);
        assert_eq!(combos[6].columns, (0..schema.len()).collect::<Vec<_>>());
        assert_eq!(combos[3].name, "Profile+Activity");
        let r = resolve_units(&schema, &["fp_Fork".into(), "Activity".into(), "seq_emb".into()]).unwrap();
        assert_eq!(r[1].columns.len(), 13);
        assert!(matches!(
            resolve_units(&schema, &["nope".into()]),
            Err(PipelineError::UnknownFeatureName(_))
        ));
        assert!(loo_units(&FeatureSchema::new(2, 0)).iter().all(|u| u.name != SEQ_EMB_UNIT));
    }
}
