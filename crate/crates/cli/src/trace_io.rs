//! CSV traces.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use graphgame::sim::{TraceLog, TraceMeta, TraceRow};

/// Column names, in file order.
pub fn header(meta: &TraceMeta) -> Vec<String> {
    let n_agents = meta.n_agents;
    let mut cols = vec!["t".to_string()];
    let vector_cols = |cols: &mut Vec<String>, name: &str, dims: &dyn Fn(usize) -> usize| {
        for i in 1..=n_agents {
            let d = dims(i - 1);
            if d == 1 {
                cols.push(format!("{name}_{i}"));
            } else {
                cols.extend((1..=d).map(|c| format!("{name}_{i}_{c}")));
            }
        }
    };
    vector_cols(&mut cols, "x", &|_| meta.state_dim);
    vector_cols(&mut cols, "e", &|_| meta.state_dim);
    vector_cols(&mut cols, "u", &|i| meta.input_dims[i]);
    vector_cols(&mut cols, "mu", &|i| meta.input_dims[i]);
    for (name, lens) in [("Wc", &meta.basis_lens), ("Wa", &meta.basis_lens), ("theta", &meta.theta_lens)] {
        for (i, len) in lens.iter().enumerate() {
            cols.extend((1..=*len).map(|j| format!("{name}_{}_{j}", i + 1)));
        }
    }
    cols.extend((1..=n_agents).map(|i| format!("delta_{i}")));
    cols
}

/// Values of one row in header order.
pub fn row_values(row: &TraceRow) -> Vec<f64> {
    let mut v = vec![row.t];
    for group in [&row.x, &row.e, &row.u, &row.mu, &row.wc, &row.wa, &row.theta] {
        for block in group {
            v.extend(block.iter());
        }
    }
    v.extend(&row.delta);
    v
}

fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_trace_to<W: Write>(log: &TraceLog, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", header(&log.meta).join(","))?;
    for row in &log.rows {
        let line: Vec<String> = row_values(row).into_iter().map(format_value).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}

pub fn write_trace(log: &TraceLog, path: &Path) -> io::Result<()> {
    write_trace_to(log, BufWriter::new(File::create(path)?))
}

/// Reads a trace back as its header and numeric rows.
pub fn read_trace(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(line) => line?.split(',').map(str::to_string).collect(),
        None => return Err(io::Error::new(io::ErrorKind::InvalidData, "empty trace")),
    };
    let mut rows = Vec::new();
    for line in lines {
        let row = line?
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<io::Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}
