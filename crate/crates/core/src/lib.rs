//! Abbreviation expansion for text entry: corpus handling, abbreviation
//! schemes, an n-gram language model, pluggable phrase predictors,
//! ideal-user keystroke simulation and training-data synthesis.

pub mod abbrev;
pub mod corpus;
pub mod expand;
pub mod lm;
pub mod simulate;
pub mod datagen;
