pub mod ccmdp;
pub mod cost;
pub mod dual;
pub mod error;
pub mod lpsolve;
pub mod milp;
pub mod scenarios;
pub mod smpc;

pub use cost::*;
pub use error::{Error, Result};
