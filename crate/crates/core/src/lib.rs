pub mod lap;
pub mod matkit;
pub mod models;
pub mod perturb;
pub mod verify;
