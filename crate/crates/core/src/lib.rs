pub mod engine;
pub mod fixtures;
pub mod kb;
pub mod model;
pub mod nlu;
pub mod response;
mod text;
