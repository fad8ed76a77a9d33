//! Plain-text gnuplot scripts for ratio experiments. Data rides inline so a
//! script is a self-contained artifact; rerunning on the same records gives
//! a byte-identical file.

use std::path::Path;

use addcorr::correlation::CorrelationRecord;

use crate::report::{f64_cell, write_atomic};

/// Render a ratio-versus-log10(x) plot script for records sharing one
/// `(k, l, h)`, with reference lines at 1 and at the lower-bound floor
/// `1/2^{k+l-2}`.
pub fn render_plotscript(records: &[CorrelationRecord]) -> Result<String, String> {
    let first = records
        .first()
        .ok_or_else(|| "plotscript needs at least one record".to_string())?;
    let (k, l, h) = (first.k, first.l, first.h);
    if records.iter().any(|r| (r.k, r.l, r.h) != (k, l, h)) {
        return Err("plotscript records must share (k, l, h)".to_string());
    }
    let floor = 1.0 / 2f64.powi((k + l - 2) as i32);
    let mut s = String::new();
    s.push_str(&format!(
        "# correlation ratio vs log10(x) for k={k} l={l} h={h}\n\
         set xlabel 'log10 x'\n\
         set ylabel 'D / leading prediction'\n\
         set key left bottom\n\
         set grid\n"
    ));
    s.push_str(&format!(
        "plot 1.0 with lines dashtype 2 lc 'gray40' title 'conjectured limit', \\\n     \
         {} with lines dashtype 3 lc 'gray70' title 'lower-bound floor', \\\n     \
         '-' using 1:2 with linespoints pt 7 title 'k={k} l={l} h={h}'\n",
        f64_cell(floor)
    ));
    for r in records {
        let lx = (r.x as f64).log10();
        s.push_str(&format!("{} {}\n", f64_cell(lx), f64_cell(r.ratio)));
    }
    s.push_str("e\n");
    Ok(s)
}

/// Write the script to `path` atomically.
pub fn emit_plotscript(records: &[CorrelationRecord], path: &Path) -> Result<(), String> {
    let content = render_plotscript(records)?;
    write_atomic(path, &content).map_err(|e| format!("writing {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: u32, l: u32, h: u64, x: u64, ratio: f64) -> CorrelationRecord {
        CorrelationRecord {
            k,
            l,
            h,
            x,
            d_exact: 1,
            leading_prediction: 1.0,
            ratio,
            q2_prediction: None,
            elapsed: 0.5,
        }
    }

    #[test]
    fn script_structure() {
        let recs = vec![
            record(3, 3, 1, 10, 2.0),
            record(3, 3, 1, 100, 1.8),
            record(3, 3, 1, 1000, 1.6),
        ];
        let s = render_plotscript(&recs).unwrap();
        let data_lines: Vec<&str> = s
            .lines()
            .skip_while(|l| !l.starts_with("plot"))
            .skip(3) // the three continued plot lines
            .take_while(|l| *l != "e")
            .collect();
        assert_eq!(data_lines, vec!["1.0 2.0", "2.0 1.8", "3.0 1.6"]);
        assert!(s.contains("0.0625")); // 1/2^4 floor for k = l = 3
        assert!(render_plotscript(&[]).is_err());
        let mixed = vec![record(3, 3, 1, 10, 2.0), record(3, 3, 2, 100, 1.8)];
        assert!(render_plotscript(&mixed).is_err());
    }

    #[test]
    fn script_deterministic() {
        let recs = vec![record(2, 2, 1, 10, 1.3), record(2, 2, 1, 100, 1.2)];
        assert_eq!(
            render_plotscript(&recs).unwrap(),
            render_plotscript(&recs).unwrap()
        );
    }
}
