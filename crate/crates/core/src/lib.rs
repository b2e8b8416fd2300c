pub mod corpus;
pub mod engine;
pub mod error;
pub mod evalkit;
pub mod lexical;
pub mod quantum;
pub mod semantic;
pub mod tokenizer;

pub use error::{Error, Result};
