//! gnuplot script generation.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use graphgame::sim::TraceLog;

use crate::trace_io::header;

/// Builds a gnuplot script reading `trace_file` (relative to the script) that
/// renders states against the desired formation, errors, controls, and the
/// weight and identifier traces with dashed reference lines at the true `θ`.
pub fn plot_script(log: &TraceLog, trace_file: &str) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script; run with `gnuplot plots.gp` from this directory\n");
    s.push_str("set datafile separator ','\nset terminal pngcairo size 1000,700\nset xlabel 't (s)'\nset grid\n");
    if log.rows.is_empty() {
        return s;
    }
    let meta = &log.meta;
    let cols = header(meta);
    let named = |prefix: &str| -> Vec<(String, usize)> {
        cols.iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with(prefix) && c[prefix.len()..].chars().next().is_some_and(|ch| ch.is_ascii_digit()))
            .map(|(k, c)| (c.clone(), k + 1))
            .collect()
    };
    let plot_lines = |series: &[(String, usize)], style: &str| -> Vec<String> {
        series
            .iter()
            .map(|(name, k)| format!("'{trace_file}' using 1:{k} skip 1 with lines {style}title '{}'", name.replace('_', "\\_")))
            .collect()
    };

    // desired trajectories x_di0 + x_0(t)
    let n = meta.state_dim;
    s.push_str("$desired << EOD\n");
    for row in &log.rows {
        let _ = write!(s, "{:.8e}", row.t);
        for off in &meta.offsets {
            for c in 0..n {
                let _ = write!(s, ",{:.8e}", off[c] + row.leader[c]);
            }
        }
        s.push('\n');
    }
    s.push_str("EOD\n\n");

    s.push_str("# figure 1: states and desired formation\nset output 'states.png'\nset title 'agent states'\nset ylabel 'x'\n");
    let mut lines = plot_lines(&named("x_"), "");
    for k in 0..meta.n_agents * n {
        lines.push(format!("$desired using 1:{} with lines dt 2 lc 'gray' notitle", k + 2));
    }
    let _ = writeln!(s, "plot {}\n", lines.join(", \\\n     "));

    s.push_str("# figure 2: tracking errors\nset output 'errors.png'\nset title 'neighborhood errors'\nset ylabel 'e'\n");
    let _ = writeln!(s, "plot {}\n", plot_lines(&named("e_"), "").join(", \\\n     "));

    s.push_str("# figure 3: controls and relative control errors\nset output 'controls.png'\nset multiplot layout 2,1\n");
    let _ = writeln!(s, "set title 'u'\nplot {}", plot_lines(&named("u_"), "").join(", \\\n     "));
    let _ = writeln!(s, "set title 'mu'\nplot {}\nunset multiplot\n", plot_lines(&named("mu_"), "").join(", \\\n     "));

    s.push_str("# figure 4: critic, actor and identifier weights\nset output 'weights.png'\nset multiplot layout 3,1\nunset ylabel\n");
    let _ = writeln!(s, "set title 'critic weights'\nplot {}", plot_lines(&named("Wc_"), "").join(", \\\n     "));
    let _ = writeln!(s, "set title 'actor weights'\nplot {}", plot_lines(&named("Wa_"), "").join(", \\\n     "));
    let mut theta = plot_lines(&named("theta_"), "");
    for (i, truth) in meta.true_theta.iter().enumerate() {
        if let Some(truth) = truth {
            for (j, v) in truth.iter().enumerate() {
                theta.push(format!("{v:.8e} with lines dt 2 lc 'black' title 'theta\\_{}\\_{} true'", i + 1, j + 1));
            }
        }
    }
    let _ = writeln!(s, "set title 'identifier weights'\nplot {}\nunset multiplot", theta.join(", \\\n     "));
    s
}

pub fn emit_plot_script(log: &TraceLog, path: &Path, trace_file: &str) -> io::Result<()> {
    fs::write(path, plot_script(log, trace_file))
}
