//! SVG heatmaps from evaluation CSVs.

use std::fmt::Write as _;

use super::read_csv;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    BadValue { row: usize, column: String, value: String },
    #[error("no rows to plot")]
    Empty,
    #[error("unrecognized CSV layout; expected a sweep or endurance file")]
    UnknownLayout,
}

/// A labelled grid of values in [0, `vmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// Row-major; `None` renders as an empty cell.
    pub values: Vec<Option<f64>>,
    pub vmax: f64,
}

const CELL_W: f64 = 28.0;
const CELL_H: f64 = 22.0;
const LEFT: f64 = 90.0;
const TOP: f64 = 40.0;

/// White to dark blue.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Heatmap {
    pub fn to_svg(&self) -> String {
        let nc = self.cols.len() as f64;
        let nr = self.rows.len() as f64;
        let width = LEFT + nc * CELL_W + 20.0;
        let height = TOP + nr * CELL_H + 60.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="13">{}</text>"#, escape(&self.title));
        for (i, r) in self.rows.iter().enumerate() {
            let y = TOP + i as f64 * CELL_H;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                LEFT - 4.0,
                y + CELL_H * 0.65,
                escape(r)
            );
            for j in 0..self.cols.len() {
                let x = LEFT + j as f64 * CELL_W;
                let fill = match self.values[i * self.cols.len() + j] {
                    Some(v) => color(v / self.vmax),
                    None => "none".into(),
                };
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#999" stroke-width="0.5"/>"##
                );
            }
        }
        let base = TOP + nr * CELL_H;
        for (j, c) in self.cols.iter().enumerate() {
            let x = LEFT + (j as f64 + 0.5) * CELL_W;
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" text-anchor="end" transform="rotate(-60 {x} {})">{}</text>"#,
                base + 12.0,
                base + 12.0,
                escape(c)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + nc * CELL_W / 2.0,
            height - 6.0,
            escape(&self.col_label)
        );
        let _ = writeln!(s, r#"<text x="10" y="{}">{}</text>"#, TOP - 6.0, escape(&self.row_label));
        s.push_str("</svg>\n");
        s
    }
}

fn column(header: &[String], name: &str) -> Result<usize, PlotError> {
    header.iter().position(|h| h == name).ok_or_else(|| PlotError::MissingColumn(name.into()))
}

fn number(rows: &[Vec<String>], row: usize, col: usize, name: &str) -> Result<f64, PlotError> {
    let v = rows[row].get(col).map(String::as_str).unwrap_or("");
    v.trim().parse().map_err(|_| PlotError::BadValue {
        row: row + 1,
        column: name.into(),
        value: v.into(),
    })
}

fn label(x: f64) -> String {
    format!("{}", (x * 1000.0).round() / 1000.0)
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Success rate per direction (rows) and magnitude (columns).
pub fn sweep_heatmap(csv: &str) -> Result<Heatmap, PlotError> {
    let (_, header, rows) = read_csv(csv);
    let (cd, cm, cr) = (column(&header, "direction")?, column(&header, "magnitude")?, column(&header, "success_rate")?);
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut points = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        points.push((
            number(&rows, i, cd, "direction")?,
            number(&rows, i, cm, "magnitude")?,
            number(&rows, i, cr, "success_rate")?,
        ));
    }
    let dirs = sorted_unique(points.iter().map(|p| p.0).collect());
    let mags = sorted_unique(points.iter().map(|p| p.1).collect());
    let mut values = vec![None; dirs.len() * mags.len()];
    for (d, m, r) in points {
        let i = dirs.iter().position(|x| *x == d).expect("listed");
        let j = mags.iter().position(|x| *x == m).expect("listed");
        values[i * mags.len() + j] = Some(r);
    }
    Ok(Heatmap {
        title: "Push recovery success rate".into(),
        row_label: "direction (deg)".into(),
        col_label: "force magnitude (N)".into(),
        rows: dirs.iter().map(|d| label(d.to_degrees())).collect(),
        cols: mags.iter().map(|m| label(*m)).collect(),
        values,
        vmax: 1.0,
    })
}

/// Mean endured pushes per (link, magnitude) row and duration column.
pub fn endurance_heatmap(csv: &str) -> Result<Heatmap, PlotError> {
    let (_, header, rows) = read_csv(csv);
    let (cl, cm, cd, ce) = (
        column(&header, "link")?,
        column(&header, "magnitude")?,
        column(&header, "duration")?,
        column(&header, "mean_endured")?,
    );
    if rows.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut points = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        let link = rows[i].get(cl).cloned().unwrap_or_default();
        points.push((
            link,
            number(&rows, i, cm, "magnitude")?,
            number(&rows, i, cd, "duration")?,
            number(&rows, i, ce, "mean_endured")?,
        ));
    }
    let mut row_keys: Vec<(String, f64)> = Vec::new();
    for (l, m, _, _) in &points {
        if !row_keys.iter().any(|(rl, rm)| rl == l && rm == m) {
            row_keys.push((l.clone(), *m));
        }
    }
    let durs = sorted_unique(points.iter().map(|p| p.2).collect());
    let mut values = vec![None; row_keys.len() * durs.len()];
    for (l, m, d, e) in &points {
        let i = row_keys.iter().position(|(rl, rm)| rl == l && rm == m).expect("listed");
        let j = durs.iter().position(|x| x == d).expect("listed");
        values[i * durs.len() + j] = Some(*e);
    }
    let vmax = points.iter().map(|p| p.3).fold(1.0, f64::max);
    Ok(Heatmap {
        title: "Mean consecutive pushes endured".into(),
        row_label: "link / magnitude (N)".into(),
        col_label: "push duration (s)".into(),
        rows: row_keys.iter().map(|(l, m)| format!("{l} {}", label(*m))).collect(),
        cols: durs.iter().map(|d| label(*d)).collect(),
        values,
        vmax,
    })
}

/// Picks the renderer from the CSV header.
pub fn render_csv(csv: &str) -> Result<String, PlotError> {
    let (_, header, _) = read_csv(csv);
    if header.iter().any(|h| h == "success_rate") {
        Ok(sweep_heatmap(csv)?.to_svg())
    } else if header.iter().any(|h| h == "mean_endured") {
        Ok(endurance_heatmap(csv)?.to_svg())
    } else {
        Err(PlotError::UnknownLayout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str =
        "# x = 1\ndirection,magnitude,successes,repetitions,success_rate\n0,50,5,5,1\n0,75,2,5,0.4\n3.141592653589793,50,4,5,0.8\n3.141592653589793,75,0,5,0\n";

    #[test]
    fn sweep_grid_layout() {
        let h = sweep_heatmap(SWEEP).unwrap();
        assert_eq!(h.rows, vec!["0", "180"]);
        assert_eq!(h.cols, vec!["50", "75"]);
        assert_eq!(h.values, vec![Some(1.0), Some(0.4), Some(0.8), Some(0.0)]);
        let svg = render_csv(SWEEP).unwrap();
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("#08306b"));
    }

    #[test]
    fn endurance_grid_layout() {
        let csv = "link,magnitude,duration,episodes,survived,mean_endured,median_endured,max_endured,endured_counts\n\
                   base,100,0.1,2,2,20,20,21,19;21\nbase,100,0.2,2,1,10,10,12,8;12\narm,100,0.1,2,0,4,4,5,3;5\n";
        let h = endurance_heatmap(csv).unwrap();
        assert_eq!(h.rows, vec!["base 100", "arm 100"]);
        assert_eq!(h.cols, vec!["0.1", "0.2"]);
        assert_eq!(h.values[3], None);
        assert_eq!(h.vmax, 20.0);
    }

    #[test]
    fn bad_input() {
        assert!(matches!(render_csv("a,b\n1,2\n"), Err(PlotError::UnknownLayout)));
        assert!(matches!(sweep_heatmap("direction,magnitude,success_rate\n"), Err(PlotError::Empty)));
        assert!(matches!(
            sweep_heatmap("direction,magnitude,success_rate\n0,x,1\n"),
            Err(PlotError::BadValue { row: 1, .. })
        ));
    }
}
