//! Ordinal-indexed diamond graphs, their isometric model inside a single
//! countable metric space, and the Banach-space embedding and extraction
//! constructions that tie them to dyadic and sprawling trees.

pub mod dyadic;
pub mod ordinal;
pub mod space;
pub mod trees;
pub mod diamond;
pub mod dinfty;
pub mod embed;
pub mod l1opt;
pub mod peel;
