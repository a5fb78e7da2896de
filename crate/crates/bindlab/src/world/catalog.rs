//! Identity–item catalog construction.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::world::vocab::{Vocab, ITEM_KINDS};

/// A cultural identity: a 1–3 token surface and a group label. Identities
/// sharing a group are never used as each other's unrelated foil.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub id: u32,
    pub surface: Vec<u32>,
    pub group: String,
}

/// An item, either linked to one identity or neutral.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CulturalItem {
    pub id: u32,
    pub surface: Vec<u32>,
    /// Associated identity id; `None` marks a neutral item.
    pub associated: Option<u32>,
}

/// The synthetic world: identities, items, and the association relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub identities: Vec<Identity>,
    pub items: Vec<CulturalItem>,
    pub seed: u64,
}

impl Catalog {
    pub fn identity(&self, id: u32) -> &Identity {
        &self.identities[id as usize]
    }

    pub fn item(&self, id: u32) -> &CulturalItem {
        &self.items[id as usize]
    }

    pub fn linked_items(&self) -> impl Iterator<Item = &CulturalItem> {
        self.items.iter().filter(|i| i.associated.is_some())
    }

    pub fn neutral_items(&self) -> impl Iterator<Item = &CulturalItem> {
        self.items.iter().filter(|i| i.associated.is_none())
    }

    pub fn n_groups(&self) -> usize {
        let mut groups: Vec<&str> = self.identities.iter().map(|i| i.group.as_str()).collect();
        groups.sort_unstable();
        groups.dedup();
        groups.len()
    }

    /// Identities outside the given group (foil candidates).
    pub fn foreign_identities<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a Identity> {
        self.identities.iter().filter(move |i| i.group != group)
    }

    /// Structural invariants: unique surfaces, valid association targets,
    /// at least two groups, and a non-empty foil pool for every linked item.
    pub fn validate(&self) -> Result<()> {
        let mut surfaces: Vec<&[u32]> = self.identities.iter().map(|i| i.surface.as_slice()).collect();
        surfaces.extend(self.items.iter().map(|i| i.surface.as_slice()));
        let mut sorted = surfaces.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != surfaces.len() {
            return Err(Error::Config("catalog surfaces are not unique".into()));
        }
        if self.identities.iter().any(|i| i.group.is_empty()) {
            return Err(Error::Config("identity with empty group label".into()));
        }
        if self.n_groups() < 2 {
            return Err(Error::Config("catalog needs at least 2 groups".into()));
        }
        for item in &self.items {
            if let Some(assoc) = item.associated {
                let ident = self
                    .identities
                    .get(assoc as usize)
                    .ok_or_else(|| Error::Config(format!("item {} links unknown identity {assoc}", item.id)))?;
                if self.foreign_identities(&ident.group).next().is_none() {
                    return Err(Error::Config(format!(
                        "item {} has no foil group outside {:?}",
                        item.id, ident.group
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Build a deterministic catalog.
///
/// Identities are assigned to `n_groups` groups round-robin and given 1–3
/// token surfaces; the surface-length cycle is shared by all groups so every
/// length class exists in several groups (keeps swap foil pools non-empty).
/// Each linked item is associated with exactly one identity; when
/// `n_linked_items == n_identities` the assignment is a bijection, which
/// balances the R role across identities.
pub fn build_catalog(
    seed: u64,
    n_identities: usize,
    n_linked_items: usize,
    n_neutral_items: usize,
    n_groups: usize,
) -> Result<Catalog> {
    let vocab = Vocab::shared();
    if n_groups < 2 {
        return Err(Error::Config(format!(
            "need at least 2 groups to sample foils, got {n_groups}"
        )));
    }
    if n_identities < 2 * n_groups {
        return Err(Error::Config(format!(
            "need at least 2 identities per group: {n_identities} identities for {n_groups} groups"
        )));
    }
    if n_identities > vocab.identity_pool().len() {
        return Err(Error::Config(format!(
            "identity pool holds {} names, asked for {n_identities}",
            vocab.identity_pool().len()
        )));
    }
    let n_items = n_linked_items + n_neutral_items;
    if n_items > vocab.item_pool().len() {
        return Err(Error::Config(format!(
            "item pool holds {} names, asked for {n_items}",
            vocab.item_pool().len()
        )));
    }
    if n_linked_items == 0 {
        return Err(Error::Config("need at least one linked item".into()));
    }

    let mut rng = rng_for(seed, "catalog");
    let the = vocab.id("the");
    let people = vocab.id("people");

    let mut identity_names: Vec<u32> = vocab.identity_pool().to_vec();
    identity_names.shuffle(&mut rng);
    let mut item_names: Vec<u32> = vocab.item_pool().to_vec();
    item_names.shuffle(&mut rng);

    // every group can host surfaces up to this length
    let min_group_size = n_identities / n_groups;
    let max_len = min_group_size.min(3).max(1);

    let mut identities = Vec::with_capacity(n_identities);
    let mut group_member_count = vec![0usize; n_groups];
    for id in 0..n_identities {
        let group_idx = id % n_groups;
        let member = group_member_count[group_idx];
        group_member_count[group_idx] += 1;
        let name = identity_names[id];
        let surface = match (member % max_len) + 1 {
            1 => vec![name],
            2 => vec![name, people],
            _ => vec![the, name, people],
        };
        identities.push(Identity {
            id: id as u32,
            surface,
            group: format!("g{group_idx}"),
        });
    }

    // bijective when counts match; cycles otherwise
    let mut owner_order: Vec<u32> = (0..n_identities as u32).collect();
    owner_order.shuffle(&mut rng);

    let mut items = Vec::with_capacity(n_items);
    for id in 0..n_items {
        let name = item_names[id];
        let surface = if id % 2 == 0 {
            vec![name]
        } else {
            vec![name, vocab.id(ITEM_KINDS[(id / 2) % ITEM_KINDS.len()])]
        };
        let associated = if id < n_linked_items {
            Some(owner_order[id % n_identities])
        } else {
            None
        };
        items.push(CulturalItem { id: id as u32, surface, associated });
    }

    let catalog = Catalog { identities, items, seed };
    catalog.validate()?;
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_catalog_shape() {
        let c = build_catalog(7, 16, 16, 8, 4).unwrap();
        assert_eq!(c.identities.len(), 16);
        assert_eq!(c.items.len(), 24);
        assert_eq!(c.linked_items().count(), 16);
        assert_eq!(c.neutral_items().count(), 8);
        for item in c.linked_items() {
            assert!(item.associated.is_some());
        }
        // bijection: every identity owns exactly one item
        let mut owners: Vec<u32> = c.linked_items().map(|i| i.associated.unwrap()).collect();
        owners.sort_unstable();
        owners.dedup();
        assert_eq!(owners.len(), 16);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = build_catalog(7, 16, 16, 8, 4).unwrap();
        let b = build_catalog(7, 16, 16, 8, 4).unwrap();
        assert_eq!(a, b);
        let c = build_catalog(8, 16, 16, 8, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_group_is_rejected() {
        assert!(matches!(
            build_catalog(7, 8, 8, 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn too_few_identities_rejected() {
        assert!(build_catalog(7, 5, 5, 0, 3).is_err());
    }

    #[test]
    fn surface_lengths_span_one_to_three() {
        let c = build_catalog(7, 16, 16, 8, 4).unwrap();
        let lens: Vec<usize> = c.identities.iter().map(|i| i.surface.len()).collect();
        assert!(lens.contains(&1) && lens.contains(&2) && lens.contains(&3));
        assert!(lens.iter().all(|&l| (1..=3).contains(&l)));
        // every group hosts every length class used
        for g in 0..4 {
            let group = format!("g{g}");
            let glens: Vec<usize> = c
                .identities
                .iter()
                .filter(|i| i.group == group)
                .map(|i| i.surface.len())
                .collect();
            for l in 1..=3 {
                assert!(glens.contains(&l), "group {group} lacks length {l}");
            }
        }
    }

    #[test]
    fn validate_catches_duplicate_surfaces() {
        let mut c = build_catalog(7, 16, 16, 8, 4).unwrap();
        c.identities[1].surface = c.identities[0].surface.clone();
        assert!(c.validate().is_err());
    }
}
