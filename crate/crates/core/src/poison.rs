//! Label assignment and triplet poisoning.
//!
//! Labels are dealt at a 1:1:1 ratio (counts never differ by more than one),
//! then triples tagged `entity_error` or `predicate_error` get exactly one
//! slot replaced. Replacements are drawn from the same slot's entity pool for
//! the same predicate, and any replacement that reproduces a triple already
//! present in the store is rejected so a "poisoned" triple can never be true
//! in the graph.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{KnowledgeGraphStore, Triplet};
use crate::seeding;

/// Gold label attached to every generated prompt; the exact strings the
/// target model is asked to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    True,
    EntityError,
    PredicateError,
}

impl GoldLabel {
    /// Canonical order, used for quota assignment and "other labels" phrasing.
    pub const ALL: [GoldLabel; 3] = [
        GoldLabel::True,
        GoldLabel::EntityError,
        GoldLabel::PredicateError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GoldLabel::True => "true",
            GoldLabel::EntityError => "entity_error",
            GoldLabel::PredicateError => "predicate_error",
        }
    }

    /// The two labels other than `self`, in canonical order.
    pub fn others(self) -> [GoldLabel; 2] {
        match self {
            GoldLabel::True => [GoldLabel::EntityError, GoldLabel::PredicateError],
            GoldLabel::EntityError => [GoldLabel::True, GoldLabel::PredicateError],
            GoldLabel::PredicateError => [GoldLabel::True, GoldLabel::EntityError],
        }
    }
}

impl std::fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which slot of the original triple was replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbedSlot {
    None,
    Subject,
    Object,
    Predicate,
}

/// A triple together with its unperturbed original and gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoisonedTriplet {
    pub current: Triplet,
    pub original: Triplet,
    pub label: GoldLabel,
    pub perturbed_slot: PerturbedSlot,
}

impl PoisonedTriplet {
    /// An unmodified triple with label `true`.
    pub fn untouched(triple: Triplet) -> Self {
        Self {
            current: triple.clone(),
            original: triple,
            label: GoldLabel::True,
            perturbed_slot: PerturbedSlot::None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PoisonError {
    #[error("no valid replacement exists for this triple")]
    Exhausted,
    #[error("no valid replacement exists for batch item {index}")]
    ExhaustedAt { index: usize },
}

/// Bounded rejection-sampling attempts per slot before giving up on it.
const MAX_DRAWS_PER_SLOT: u32 = 32;

/// Deal `n` labels at a 1:1:1 ratio (remainder goes to the earlier labels in
/// canonical order) and shuffle them with the documented keyed permutation.
pub fn assign_labels(n: usize, seed: u64) -> Vec<GoldLabel> {
    let base = n / 3;
    let remainder = n % 3;
    let mut labels = Vec::with_capacity(n);
    for (i, label) in GoldLabel::ALL.into_iter().enumerate() {
        let count = base + usize::from(i < remainder);
        labels.extend(std::iter::repeat_n(label, count));
    }
    seeding::shuffled(&labels, seed)
}

fn with_slot(t: &Triplet, slot: PerturbedSlot, value: &str) -> Triplet {
    let mut out = t.clone();
    match slot {
        PerturbedSlot::Subject => out.subject = value.to_string(),
        PerturbedSlot::Object => out.object = value.to_string(),
        PerturbedSlot::Predicate => out.predicate = value.to_string(),
        PerturbedSlot::None => {}
    }
    out
}

fn original_slot_value<'a>(t: &'a Triplet, slot: PerturbedSlot) -> &'a str {
    match slot {
        PerturbedSlot::Subject => &t.subject,
        PerturbedSlot::Object => &t.object,
        _ => unreachable!("entity slots only"),
    }
}

fn try_entity_slot(
    t: &Triplet,
    store: &KnowledgeGraphStore,
    slot: PerturbedSlot,
    rng: &mut ChaCha8Rng,
) -> Option<PoisonedTriplet> {
    let pool = match slot {
        PerturbedSlot::Subject => store.subjects(&t.predicate),
        PerturbedSlot::Object => store.objects(&t.predicate),
        _ => unreachable!("entity slots only"),
    };
    if pool.is_empty() {
        return None;
    }
    for _ in 0..MAX_DRAWS_PER_SLOT {
        let candidate = &pool[rng.random_range(0..pool.len())];
        if candidate == original_slot_value(t, slot) {
            continue;
        }
        let perturbed = with_slot(t, slot, candidate);
        if store.contains(&perturbed) {
            continue;
        }
        return Some(PoisonedTriplet {
            current: perturbed,
            original: t.clone(),
            label: GoldLabel::EntityError,
            perturbed_slot: slot,
        });
    }
    None
}

/// Replace the subject or the object (seeded fair coin picks which slot to
/// try first) with a distinct entity from the same pool. Draws that collide
/// with the store are rejected; after 32 rejected draws the other slot is
/// tried.
pub fn poison_entity(
    t: &Triplet,
    store: &KnowledgeGraphStore,
    seed: u64,
) -> Result<PoisonedTriplet, PoisonError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = if rng.random_bool(0.5) {
        [PerturbedSlot::Subject, PerturbedSlot::Object]
    } else {
        [PerturbedSlot::Object, PerturbedSlot::Subject]
    };
    for slot in slots {
        if let Some(poisoned) = try_entity_slot(t, store, slot, &mut rng) {
            return Ok(poisoned);
        }
    }
    Err(PoisonError::Exhausted)
}

/// Replace the predicate with a distinct predicate from the store, with the
/// same membership-collision rejection and retry bound.
pub fn poison_predicate(
    t: &Triplet,
    store: &KnowledgeGraphStore,
    seed: u64,
) -> Result<PoisonedTriplet, PoisonError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = store.predicates();
    if pool.is_empty() {
        return Err(PoisonError::Exhausted);
    }
    for _ in 0..MAX_DRAWS_PER_SLOT {
        let candidate = &pool[rng.random_range(0..pool.len())];
        if candidate == &t.predicate {
            continue;
        }
        let perturbed = with_slot(t, PerturbedSlot::Predicate, candidate);
        if store.contains(&perturbed) {
            continue;
        }
        return Ok(PoisonedTriplet {
            current: perturbed,
            original: t.clone(),
            label: GoldLabel::PredicateError,
            perturbed_slot: PerturbedSlot::Predicate,
        });
    }
    Err(PoisonError::Exhausted)
}

/// Zip `assign_labels` over a batch. Output order matches input order, and
/// per-item seeds are derived from the batch seed so results are independent
/// of execution order.
pub fn poison_batch(
    triples: &[Triplet],
    store: &KnowledgeGraphStore,
    seed: u64,
) -> Result<Vec<PoisonedTriplet>, PoisonError> {
    let labels = assign_labels(triples.len(), seed);
    let item_stage = seeding::stage_seed(seed, "poison-item");
    let mut out = Vec::with_capacity(triples.len());
    for (index, (triple, label)) in triples.iter().zip(labels).enumerate() {
        let item_seed = seeding::item_seed(item_stage, index);
        let poisoned = match label {
            GoldLabel::True => Ok(PoisonedTriplet::untouched(triple.clone())),
            GoldLabel::EntityError => poison_entity(triple, store, item_seed),
            GoldLabel::PredicateError => poison_predicate(triple, store, item_seed),
        };
        out.push(poisoned.map_err(|_| PoisonError::ExhaustedAt { index })?);
    }
    Ok(out)
}
