use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::TokensRecord;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const CELL: usize = 12;
const MARGIN: usize = 40;

fn color(instance: usize) -> &'static str {
    PALETTE[(instance - 1) % PALETTE.len()]
}

/// Two panels: position tokens on the quantization grid, and segment × type
/// occupancy. Both are coloured by instance.
pub fn render_tokens(t: &TokensRecord) -> String {
    let (gw, gh) = (t.grid_width, t.grid_height);
    let types = t.joints + t.object_points;
    let left_w = gw * CELL;
    let right_x = MARGIN * 2 + left_w;
    let right_w = t.frames * CELL;
    let width = right_x + right_w + MARGIN + 120;
    let height = MARGIN * 2 + (gh * CELL).max(types * CELL) + 20;
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#).unwrap();
    writeln!(w, r#"<title>{}</title>"#, escape(&t.id)).unwrap();
    writeln!(w, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();

    // position panel
    writeln!(w, r#"<text x="{MARGIN}" y="{}">position ({gw}x{gh})</text>"#, MARGIN - 8).unwrap();
    writeln!(w, r##"<g stroke="#e0e0e0" stroke-width="1">"##).unwrap();
    for c in 0..=gw {
        let x = MARGIN + c * CELL;
        writeln!(w, r#"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}"/>"#, MARGIN + gh * CELL).unwrap();
    }
    for r in 0..=gh {
        let y = MARGIN + r * CELL;
        writeln!(w, r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}"/>"#, MARGIN + left_w).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    let valid: Vec<usize> = (0..t.position.len()).filter(|&i| t.position[i] != 0).collect();
    for &i in &valid {
        let p = t.position[i] - 1;
        let (cx, cy) = (p % gw, p / gw);
        writeln!(
            w,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="0.6"/>"#,
            MARGIN + cx * CELL + CELL / 2,
            MARGIN + cy * CELL + CELL / 2,
            CELL / 3,
            color(t.instance[i])
        )
        .unwrap();
    }

    // segment × type panel
    writeln!(w, r#"<text x="{right_x}" y="{}">segment (x) by type (y)</text>"#, MARGIN - 8).unwrap();
    writeln!(
        w,
        r##"<rect x="{right_x}" y="{MARGIN}" width="{right_w}" height="{}" fill="none" stroke="#bbbbbb"/>"##,
        types * CELL
    )
    .unwrap();
    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &i in &valid {
        let e = cells.entry((t.segment[i], t.token_type[i])).or_default();
        if !e.contains(&t.instance[i]) {
            e.push(t.instance[i]);
        }
    }
    for ((seg, ty), inst) in &cells {
        let x0 = right_x + (seg - 1) * CELL;
        let y0 = MARGIN + (ty - 1) * CELL;
        let part = CELL as f64 / inst.len() as f64;
        for (k, &n) in inst.iter().enumerate() {
            writeln!(
                w,
                r#"<rect x="{:.2}" y="{y0}" width="{part:.2}" height="{CELL}" fill="{}"/>"#,
                x0 as f64 + k as f64 * part,
                color(n)
            )
            .unwrap();
        }
    }
    if t.object_points > 0 {
        let y = MARGIN + t.joints * CELL;
        writeln!(w, r##"<line x1="{right_x}" y1="{y}" x2="{}" y2="{y}" stroke="#333333" stroke-dasharray="3 2"/>"##, right_x + right_w).unwrap();
    }

    // instance legend
    let lx = right_x + right_w + 20;
    for n in 1..=t.persons + t.objects {
        let y = MARGIN + (n - 1) * 16;
        let what = if n <= t.persons { "person" } else { "object" };
        writeln!(w, r#"<rect x="{lx}" y="{y}" width="10" height="10" fill="{}"/>"#, color(n)).unwrap();
        writeln!(w, r#"<text x="{}" y="{}">{what} {n}</text>"#, lx + 14, y + 9).unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
