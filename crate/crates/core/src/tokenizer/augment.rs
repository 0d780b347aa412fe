//! Record augmentation: format conversion and random traversal of the
//! chemical inputs of a task record.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{parse_smiles, Molecule, ParseError};
use crate::selfies::{decode_selfies, encode_selfies, SelfiesError, SelfiesString};
use crate::task::{AnswerType, Entity, Format, TaskRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationPolicy {
    pub p_format_convert: f64,
    pub p_random_traversal: f64,
    pub p_input_isolation: f64,
    pub rng_seed: u64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        AugmentationPolicy {
            p_format_convert: 0.5,
            p_random_traversal: 0.5,
            p_input_isolation: 0.5,
            rng_seed: 0,
        }
    }
}

impl AugmentationPolicy {
    /// No augmentation at all.
    pub fn identity() -> Self {
        AugmentationPolicy {
            p_format_convert: 0.0,
            p_random_traversal: 0.0,
            p_input_isolation: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, p) in [
            ("p_format_convert", self.p_format_convert),
            ("p_random_traversal", self.p_random_traversal),
            ("p_input_isolation", self.p_input_isolation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::BadProbability { name, value: p });
            }
        }
        Ok(())
    }

    /// Draws whether user inputs get chemical tokenization this time.
    pub fn draw_isolation<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.gen_bool(self.p_input_isolation)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("entity {entity}: {source}")]
    Smiles { entity: String, source: ParseError },
    #[error("entity {entity}: {source}")]
    Selfies { entity: String, source: SelfiesError },
}

/// Converts between molecules and systematic names. The gym has no
/// built-in naming; callers plug one in.
pub trait NameProvider {
    fn name_for(&self, smiles: &str) -> Option<String>;
    fn smiles_for(&self, name: &str) -> Option<String>;
}

/// `augment_record_with` without a name provider.
pub fn augment_record<R: Rng + ?Sized>(
    rec: &TaskRecord,
    policy: &AugmentationPolicy,
    rng: &mut R,
) -> Result<TaskRecord, AugmentError> {
    augment_record_with(rec, policy, None, rng)
}

/// Augments every input entity independently and re-canonicalizes
/// generation targets. Entities are visited in name order, so the result
/// is a function of the record, the policy and the random stream.
pub fn augment_record_with<R: Rng + ?Sized>(
    rec: &TaskRecord,
    policy: &AugmentationPolicy,
    names: Option<&dyn NameProvider>,
    rng: &mut R,
) -> Result<TaskRecord, AugmentError> {
    policy.validate()?;
    let mut out = rec.clone();
    for (key, entity) in out.entities.iter_mut() {
        *entity = augment_entity(key, entity, policy, names, rng)?;
    }
    if let AnswerType::Generation { ground_truth } = &mut out.answer_type {
        if let Ok(m) = parse_smiles(out.answer.trim()) {
            out.answer = m.to_canonical_smiles();
        }
        for smiles in ground_truth.iter_mut().flatten() {
            if let Ok(m) = parse_smiles(smiles) {
                *smiles = m.to_canonical_smiles();
            }
        }
    }
    Ok(out)
}

fn molecule_of(key: &str, entity: &Entity) -> Result<Option<Molecule>, AugmentError> {
    match entity.format {
        Format::Smiles => parse_smiles(&entity.value).map(Some).map_err(|source| AugmentError::Smiles {
            entity: key.to_string(),
            source,
        }),
        Format::Selfies => {
            let selfies_err = |source| AugmentError::Selfies {
                entity: key.to_string(),
                source,
            };
            let s: SelfiesString = entity.value.parse().map_err(selfies_err)?;
            decode_selfies(&s).map(Some).map_err(selfies_err)
        }
        _ => Ok(None),
    }
}

/// Augments one entity. SMILES and SELFIES entities may switch notation
/// (or become a name, when a provider knows one) and may be rewritten from
/// a random traversal; names may become SMILES; sequences are unchanged.
pub fn augment_entity<R: Rng + ?Sized>(
    key: &str,
    entity: &Entity,
    policy: &AugmentationPolicy,
    names: Option<&dyn NameProvider>,
    rng: &mut R,
) -> Result<Entity, AugmentError> {
    let convert = rng.gen_bool(policy.p_format_convert);
    let traverse = rng.gen_bool(policy.p_random_traversal);

    if entity.format == Format::Iupac {
        let smiles = names.filter(|_| convert).and_then(|p| p.smiles_for(&entity.value));
        return Ok(match smiles.and_then(|s| parse_smiles(&s).ok()) {
            Some(m) if traverse => Entity::new(Format::Smiles, m.random_traversal_smiles(rng)),
            Some(m) => Entity::new(Format::Smiles, m.to_canonical_smiles()),
            None => entity.clone(),
        });
    }
    let Some(m) = molecule_of(key, entity)? else {
        return Ok(entity.clone());
    };

    let mut target = entity.format;
    if convert {
        let name = names.and_then(|p| p.name_for(&m.to_canonical_smiles()));
        match name {
            Some(name) if rng.gen_bool(0.5) => return Ok(Entity::new(Format::Iupac, name)),
            _ => {
                target = match entity.format {
                    Format::Smiles => Format::Selfies,
                    _ => Format::Smiles,
                }
            }
        }
    }

    // The written molecule decides the SELFIES symbol order.
    let (written, random) = if traverse {
        let smiles = m.random_traversal_smiles(rng);
        (parse_smiles(&smiles).expect("traversal output parses"), smiles)
    } else {
        (m, String::new())
    };
    match target {
        Format::Smiles if traverse => Ok(Entity::new(Format::Smiles, random)),
        Format::Smiles if entity.format == Format::Smiles => Ok(entity.clone()),
        Format::Smiles => Ok(Entity::new(Format::Smiles, written.to_canonical_smiles())),
        _ if !traverse && entity.format == Format::Selfies => Ok(entity.clone()),
        _ => match encode_selfies(&written) {
            Ok(s) => Ok(Entity::new(Format::Selfies, s.to_string())),
            // Molecules outside the SELFIES capacity table stay SMILES.
            Err(_) if traverse => Ok(Entity::new(Format::Smiles, random)),
            Err(_) if entity.format == Format::Smiles => Ok(entity.clone()),
            Err(_) => Ok(Entity::new(Format::Smiles, written.to_canonical_smiles())),
        },
    }
}
