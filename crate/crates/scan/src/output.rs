//! CSV, JSON and SVG writers. Files are written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Format;
use crate::error::ScanError;
use crate::grid::{PlotKind, ResultGrid};

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

/// Header, then one row per grid point: axes, value, extras, error code.
pub fn to_csv(grid: &ResultGrid) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = grid.axes.iter().map(|a| a.header()).collect();
    header.push(grid.value.header());
    header.extend(grid.extras.iter().map(|c| c.header()));
    header.push("error_code".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid
            .coordinates(i)
            .into_iter()
            .map(|v| format!("{v}"))
            .collect();
        row.push(cell(grid.value.values[i]));
        row.extend(grid.extras.iter().map(|c| cell(c.values[i])));
        row.push(
            grid.errors[i]
                .map(|e| e.as_str().to_string())
                .unwrap_or_default(),
        );
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json(grid: &ResultGrid) -> String {
    let mut s = serde_json::to_string_pretty(grid).expect("grid serializes");
    s.push('\n');
    s
}

const PALETTE: [(f64, [u8; 3]); 5] = [
    (0.0, [49, 54, 149]),
    (0.25, [116, 173, 209]),
    (0.5, [247, 247, 247]),
    (0.75, [244, 109, 67]),
    (1.0, [165, 0, 38]),
];

fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let k = PALETTE
        .iter()
        .position(|p| p.0 >= t)
        .unwrap_or(PALETTE.len() - 1)
        .max(1);
    let (t0, c0) = PALETTE[k - 1];
    let (t1, c1) = PALETTE[k];
    let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(c0[0], c1[0]),
        mix(c0[1], c1[1]),
        mix(c0[2], c1[2])
    )
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn heatmap(grid: &ResultGrid) -> String {
    let n = grid.axes.len();
    let (xa, ya) = (&grid.axes[n - 2], &grid.axes[n - 1]);
    let panels = if n == 3 { grid.axes[0].values.len() } else { 1 };
    let (nx, ny) = (xa.values.len(), ya.values.len());
    let (cw, ch) = (400.0 / nx as f64, 300.0 / ny as f64);
    let lo = grid.metadata.value_min.unwrap_or(0.0);
    let hi = grid.metadata.value_max.unwrap_or(1.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let height = 60.0 + panels as f64 * 360.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="520" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="20">{} ({})</text>"#,
        grid.metadata.name,
        grid.value.header()
    );
    for p in 0..panels {
        let oy = 40.0 + p as f64 * 360.0;
        if n == 3 {
            let _ = writeln!(
                s,
                r#"<text x="60" y="{}">{} = {}</text>"#,
                oy + 12.0,
                grid.axes[0].header(),
                fmt_num(grid.axes[0].values[p])
            );
        }
        for i in 0..nx {
            for j in 0..ny {
                let flat = (p * nx + i) * ny + j;
                let fill = match grid.value.values[flat] {
                    Some(v) => colour((v - lo) / span),
                    None => "#808080".into(),
                };
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    60.0 + i as f64 * cw,
                    oy + 20.0 + (ny - 1 - j) as f64 * ch,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
        let base = oy + 335.0;
        let _ = writeln!(
            s,
            r#"<text x="60" y="{base}">{}</text>"#,
            fmt_num(xa.values[0])
        );
        let _ = writeln!(
            s,
            r#"<text x="460" y="{base}" text-anchor="end">{}</text>"#,
            fmt_num(xa.values[nx - 1])
        );
        let _ = writeln!(
            s,
            r#"<text x="260" y="{base}" text-anchor="middle">{}</text>"#,
            xa.header()
        );
        let _ = writeln!(
            s,
            r#"<text x="55" y="{}" text-anchor="end">{}</text>"#,
            oy + 320.0,
            fmt_num(ya.values[0])
        );
        let _ = writeln!(
            s,
            r#"<text x="55" y="{}" text-anchor="end">{}</text>"#,
            oy + 32.0,
            fmt_num(ya.values[ny - 1])
        );
        let _ = writeln!(
            s,
            r#"<text x="55" y="{}" text-anchor="end">{}</text>"#,
            oy + 176.0,
            ya.header()
        );
    }
    let _ = writeln!(s, r#"<text x="470" y="60">{}</text>"#, fmt_num(hi));
    let _ = writeln!(s, r#"<text x="470" y="340">{}</text>"#, fmt_num(lo));
    for k in 0..50 {
        let _ = writeln!(
            s,
            r#"<rect x="470" y="{:.1}" width="14" height="5.6" fill="{}"/>"#,
            68.0 + k as f64 * 5.2,
            colour(1.0 - k as f64 / 49.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn lines(grid: &ResultGrid) -> String {
    let (sa, xa) = (&grid.axes[0], &grid.axes[grid.axes.len() - 1]);
    let nx = xa.values.len();
    let lo = grid.metadata.value_min.unwrap_or(0.0).min(0.0);
    let hi = grid.metadata.value_max.unwrap_or(1.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (x0, x1) = (xa.values[0], xa.values[nx - 1]);
    let xspan = if x1 != x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| 60.0 + 420.0 * (x - x0) / xspan;
    let py = |y: f64| 340.0 - 300.0 * (y - lo) / span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="520" height="380" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="20">{} ({})</text>"#,
        grid.metadata.name,
        grid.value.header()
    );
    let _ = writeln!(
        s,
        r##"<rect x="60" y="40" width="420" height="300" fill="none" stroke="#000"/>"##
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="60" x2="480" y1="{0:.2}" y2="{0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            py(0.0)
        );
    }
    for k in 0..sa.values.len() {
        let mut d = String::new();
        let mut pen = false;
        for i in 0..nx {
            match grid.value.values[k * nx + i] {
                Some(v) => {
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if pen { "L" } else { "M" },
                        px(xa.values[i]),
                        py(v)
                    );
                    pen = true;
                }
                None => pen = false,
            }
        }
        let c = colour(if sa.values.len() > 1 {
            k as f64 / (sa.values.len() - 1) as f64
        } else {
            0.0
        });
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="490" y="{}" fill="{c}">{}</text>"#,
            60 + 16 * k,
            fmt_num(sa.values[k])
        );
    }
    let _ = writeln!(s, r#"<text x="60" y="358">{}</text>"#, fmt_num(x0));
    let _ = writeln!(
        s,
        r#"<text x="480" y="358" text-anchor="end">{}</text>"#,
        fmt_num(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="270" y="374" text-anchor="middle">{}</text>"#,
        xa.header()
    );
    let _ = writeln!(
        s,
        r#"<text x="55" y="44" text-anchor="end">{}</text>"#,
        fmt_num(hi)
    );
    let _ = writeln!(
        s,
        r#"<text x="55" y="340" text-anchor="end">{}</text>"#,
        fmt_num(lo)
    );
    s.push_str("</svg>\n");
    s
}

pub fn to_svg(grid: &ResultGrid) -> String {
    match grid.metadata.plot {
        PlotKind::Heatmap if grid.axes.len() >= 2 && grid.axes.len() <= 3 => heatmap(grid),
        _ => lines(grid),
    }
}

pub fn render(grid: &ResultGrid, format: Format) -> String {
    match format {
        Format::Csv => to_csv(grid),
        Format::Json => to_json(grid),
        Format::Svg => to_svg(grid),
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ScanError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let io = |e: std::io::Error| ScanError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes every requested format to `dir/stem.ext`.
pub fn emit_outputs(
    grid: &ResultGrid,
    dir: &Path,
    stem: &str,
    formats: &[Format],
) -> Result<Vec<PathBuf>, ScanError> {
    std::fs::create_dir_all(dir).map_err(|e| ScanError::Io(format!("{}: {e}", dir.display())))?;
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut written = Vec::new();
    for f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        write_atomic(&path, render(grid, f).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
