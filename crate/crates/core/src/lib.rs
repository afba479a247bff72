pub mod choice;
pub mod error;
pub mod lp;
pub mod polytope;
pub mod bayes;
pub mod experiment;
pub mod responders;
pub mod cli;
