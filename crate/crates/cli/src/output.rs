//! CSV and gnuplot emission.

use std::io::{self, Write};

use hybridkinetics_core::ensemble::EnsembleSummary;
use hybridkinetics_core::SampleTable;

/// `printf("%.9g")`: nine significant digits, trailing zeros dropped,
/// exponent form outside `[1e-5, 1e9)`.
pub fn fmt_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `t,<columns...>` then one row per grid point. `suffix` is appended to the
/// header line verbatim.
pub fn write_table<W: Write>(w: &mut W, table: &SampleTable, suffix: &str) -> io::Result<()> {
    writeln!(w, "t,{}{suffix}", table.columns.join(","))?;
    for (i, &t) in table.times.iter().enumerate() {
        write!(w, "{}", fmt_g9(t))?;
        for &v in table.row(i) {
            write!(w, ",{}", fmt_g9(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Exact jump records: `t,reaction,<columns...>` with the post-jump state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpTable {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, String, Vec<f64>)>,
}

pub fn write_jumps<W: Write>(w: &mut W, jumps: &JumpTable) -> io::Result<()> {
    writeln!(w, "t,reaction,{}", jumps.columns.join(","))?;
    for (t, reaction, state) in &jumps.rows {
        write!(w, "{},{reaction}", fmt_g9(*t))?;
        for &v in state {
            write!(w, ",{}", fmt_g9(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `t,<sp>_mean,<sp>_var,<sp>_min,<sp>_max,...`.
pub fn write_summary<W: Write>(w: &mut W, s: &EnsembleSummary) -> io::Result<()> {
    write!(w, "t")?;
    for c in &s.columns {
        write!(w, ",{c}_mean,{c}_var,{c}_min,{c}_max")?;
    }
    writeln!(w)?;
    let n = s.columns.len();
    for (i, &t) in s.times.iter().enumerate() {
        write!(w, "{}", fmt_g9(t))?;
        for j in 0..n {
            let k = i * n + j;
            write!(
                w,
                ",{},{},{},{}",
                fmt_g9(s.mean[k]),
                fmt_g9(s.variance[k]),
                fmt_g9(s.min[k]),
                fmt_g9(s.max[k])
            )?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A script that plots every column of `csv` against time.
pub fn gnuplot_script(csv: &str, columns: &[String], title: &str) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nset xlabel 't'\nplot "
    );
    let plots: Vec<String> = (0..columns.len())
        .map(|j| format!("'{csv}' using 1:{} with lines", j + 2))
        .collect();
    s.push_str(&plots.join(", \\\n     "));
    s.push_str("\npause mouse close\n");
    s
}
