//! Build a synthetic world and its factorial benchmark, check role balance,
//! and show what the prompts actually look like.
//!
//! ```bash
//! cargo run --release --example generate_benchmark
//! ```

use bindlab::world::{
    build_catalog, check_balance, make_factorial_pairs, make_knowledge_pairs, Vocab,
};

fn main() {
    let vocab = Vocab::shared();
    let catalog = build_catalog(7, 16, 16, 8, 4).expect("catalog");
    println!(
        "catalog: {} identities in {} groups, {} linked + {} neutral items",
        catalog.identities.len(),
        catalog.n_groups(),
        catalog.linked_items().count(),
        catalog.neutral_items().count()
    );
    for ident in catalog.identities.iter().take(4) {
        println!("  identity {:>2} [{}]: {}", ident.id, ident.group, vocab.decode(&ident.surface));
    }
    for item in catalog.items.iter().take(4) {
        let owner = item
            .associated
            .map(|id| vocab.decode(&catalog.identity(id).surface))
            .unwrap_or_else(|| "(neutral)".into());
        println!("  item {:>2}: {} -> {owner}", item.id, vocab.decode(&item.surface));
    }

    let pairs = make_factorial_pairs(&catalog, 5, 7).expect("pairs");
    println!("\n{} factorial pairs; first pair:", pairs.len());
    let p = &pairs[0];
    println!("  match:    {}", vocab.decode(&p.match_prompt));
    println!("  mismatch: {}", vocab.decode(&p.mismatch_prompt));
    println!(
        "  R={} U={} swap={} (R at option {:?})",
        vocab.decode(&catalog.identity(p.r_identity).surface),
        vocab.decode(&catalog.identity(p.u_identity).surface),
        vocab.decode(&catalog.identity(p.swap_identity).surface),
        p.r_position,
    );

    let kpairs = make_knowledge_pairs(&pairs);
    println!("\nknowledge form of the same pair:");
    println!("  match:    {}", vocab.decode(&kpairs[0].match_prompt));
    println!("  mismatch: {}", vocab.decode(&kpairs[0].mismatch_prompt));

    let balance = check_balance(&pairs);
    println!("\nrole balance over {} pairs:", pairs.len());
    println!(
        "  spreads (max-min): R={} U={} swap={}",
        balance.spread_r, balance.spread_u, balance.spread_swap
    );
    println!("  P(R at option a) = {}", balance.r_position_display());
    println!("  balanced: {}", balance.is_balanced());
}
