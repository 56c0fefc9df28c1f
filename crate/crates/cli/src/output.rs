//! CSV and JSON writers. Floats are written with 17 significant digits so
//! every file parses back to the same bits.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use relcrawl::cycles::ScalingRow;
use serde::Serialize;

use crate::CliError;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Numeric table with a header row.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty table"))??
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<io::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Plain whitespace-separated columns for gnuplot, `#` header.
pub fn write_plot_data(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {}", header.join(" "))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: &str = "epsilon,delta_x,p,residual,max_multiplier,status";

pub fn write_sweep_csv(path: &Path, rows: &[ScalingRow]) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        // statuses are free text; keep the row shape intact
        let status = r.status.replace([',', '\n'], ";");
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt(r.epsilon),
            fmt_opt(r.delta_x),
            fmt_opt(r.p),
            fmt_opt(r.residual),
            fmt_opt(r.max_multiplier),
            status
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> io::Result<Vec<ScalingRow>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let r = BufReader::new(fs::File::open(path)?);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty sweep file".into()))??;
    if header != SWEEP_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| -> io::Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>().map(Some).map_err(|e| bad(e.to_string()))
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.splitn(6, ',').collect();
        if f.len() != 6 {
            return Err(bad(format!("malformed row {line:?}")));
        }
        rows.push(ScalingRow {
            epsilon: num(f[0])?.ok_or_else(|| bad("missing epsilon".into()))?,
            delta_x: num(f[1])?,
            p: num(f[2])?,
            residual: num(f[3])?,
            max_multiplier: num(f[4])?,
            status: f[5].to_string(),
        });
    }
    Ok(rows)
}

pub const GNUPLOT_TEMPLATE: &str = r#"# Plot template for relcrawl outputs; run `gnuplot -p plot.gp` in this directory.
set key outside
set grid

# x (solid) and z (dashed) coordinates of each mass against time
set xlabel "t"
set ylabel "position"
plot for [i=0:2] "coordinates.dat" using 1:(column(2+2*i)) with lines lw 2 title sprintf("x%d", i+1), \
     for [i=0:2] "coordinates.dat" using 1:(column(3+2*i)) with lines dt 2 title sprintf("z%d", i+1)

pause mouse close

# paths of the masses in the vertical plane
set xlabel "x"
set ylabel "z"
plot for [i=0:2] "path.dat" using (column(1+2*i)):(column(2+2*i)) with lines title sprintf("mass %d", i+1)
"#;

pub const GNUPLOT_TEMPLATE_3D: &str = r#"# Plot template for relcrawl outputs; run `gnuplot -p plot.gp` in this directory.
set key outside
set grid
set size ratio -1

# ground tracks of the four masses seen from above
set xlabel "x"
set ylabel "y"
plot for [i=0:3] "path.dat" using (column(2+2*i)):(column(3+2*i)) with lines title sprintf("mass %d", i+1)
"#;
