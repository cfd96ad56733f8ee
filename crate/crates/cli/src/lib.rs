//! Scenario runner, metrics comparison and SVG plotting for the
//! `antiwindup` command line.

pub mod compare;
pub mod plot;
pub mod run;
pub mod scenario;
