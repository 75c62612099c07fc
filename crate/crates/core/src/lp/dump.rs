//! Free-form MPS-like text dump of an [`LpModel`], for debugging.
//!
//! ```text
//! NAME          <name>
//! ROWS
//!  N  OBJ
//!  G  R0
//! COLUMNS
//!     C0        OBJ       1.000000000000
//!     C0        R0        -0.500000000000
//! RHS
//!     RHS       R0        1.000000000000
//! BOUNDS
//!  FR BND       C3
//!  UP BND       C4        2.000000000000
//! ENDATA
//! ```
//!
//! Rows are named `R<i>` and columns `C<j>` (0-based). Numbers are printed
//! in fixed-point notation with 12 decimals. Columns with the default bounds
//! `[0, +inf)` get no BOUNDS line; `FR` marks free columns, `MI` a column
//! with no lower bound, `LO`/`UP` finite bounds and `FX` fixed ones.

use std::io::{self, Write};

use super::{LpModel, RowSense};

pub fn write_lp(m: &LpModel, name: &str, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "NAME          {name}")?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  OBJ")?;
    for (i, r) in m.rows().iter().enumerate() {
        let tag = match r.sense {
            RowSense::Ge => "G",
            RowSense::Le => "L",
            RowSense::Eq => "E",
        };
        writeln!(w, " {tag}  R{i}")?;
    }
    writeln!(w, "COLUMNS")?;
    for (j, c) in m.columns().iter().enumerate() {
        let col = format!("C{j}");
        if c.cost != 0.0 {
            writeln!(w, "    {col:<10}{:<10}{:.12}", "OBJ", c.cost)?;
        }
        let mut entries = c.entries.clone();
        entries.sort_by_key(|e| e.0);
        for (r, v) in entries {
            writeln!(w, "    {col:<10}{:<10}{v:.12}", format!("R{r}"))?;
        }
    }
    writeln!(w, "RHS")?;
    for (i, r) in m.rows().iter().enumerate() {
        if r.rhs != 0.0 {
            writeln!(w, "    {:<10}{:<10}{:.12}", "RHS", format!("R{i}"), r.rhs)?;
        }
    }
    writeln!(w, "BOUNDS")?;
    for (j, c) in m.columns().iter().enumerate() {
        let col = format!("C{j}");
        let (lo, hi) = (c.lower, c.upper);
        if lo == hi {
            writeln!(w, " FX BND       {col:<10}{lo:.12}")?;
            continue;
        }
        if !lo.is_finite() && !hi.is_finite() {
            writeln!(w, " FR BND       {col}")?;
            continue;
        }
        if !lo.is_finite() {
            writeln!(w, " MI BND       {col}")?;
        } else if lo != 0.0 {
            writeln!(w, " LO BND       {col:<10}{lo:.12}")?;
        }
        if hi.is_finite() {
            writeln!(w, " UP BND       {col:<10}{hi:.12}")?;
        }
    }
    writeln!(w, "ENDATA")
}
