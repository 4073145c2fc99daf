pub mod analyze;
pub mod calibrate;
pub mod corpus;
pub mod monitor;
pub mod score;
