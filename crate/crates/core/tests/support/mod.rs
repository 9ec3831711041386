#![allow(dead_code)]

pub mod data;
pub mod effects;
pub mod labels;
pub mod rank;
pub mod shapley;
