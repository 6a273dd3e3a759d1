//! Decision procedure, certificates and explicit relational representations
//! for finite `(≤, ∘)` structures under demonic refinement and composition.

mod bits;
pub mod counterexamples;
pub mod decision;
pub mod oracle;
pub mod predicates;
pub mod relcore;
pub mod repbuilder;
pub mod structure;
