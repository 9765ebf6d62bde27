//! Flow categories of glued and matched link diagrams with their `sl_n`
//! Khovanov cohomology and second Steenrod square, classified into stable
//! wedge summands per quantum degree.

pub mod diagram;
pub mod resolution;
pub mod sockcell;
pub mod flowcat;
pub mod jones;
pub mod gf2;
pub mod homalg;
pub mod steenrod;
pub mod classify;
pub mod cli;
