//! Independent reference oracles for the mixedctrl test suites.

pub mod dual;
pub mod lp;
pub mod mdp;
pub mod smpc;
