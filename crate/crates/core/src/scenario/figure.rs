use std::fmt::Write;

use super::record::ResultRecord;
use crate::geometry::{self, Point};

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;
const CAPTION: f64 = 36.0;

fn px(p: Point) -> (f64, f64) {
    (MARGIN + p.x * SIZE, MARGIN + (1.0 - p.y) * SIZE)
}

/// SVG drawing of a record's configuration: the unit square, equal-price
/// market cells, firms numbered by entry order, and a caption.
pub fn emit_figure(record: &ResultRecord) -> String {
    let width = SIZE + 2.0 * MARGIN;
    let height = SIZE + 2.0 * MARGIN + CAPTION;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let sites: Vec<Point> = record.equilibrium.as_ref().map(|e| e.configuration.locations.clone()).unwrap_or_default();
    if let Ok(cells) = geometry::voronoi_cells(&sites) {
        let _ = writeln!(s, r##"<g fill="none" stroke="#7a7a7a" stroke-width="1">"##);
        for cell in &cells {
            let points: Vec<String> = cell
                .vertices
                .iter()
                .map(|&v| {
                    let (x, y) = px(v);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(s, r#"<polygon points="{}"/>"#, points.join(" "));
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black" stroke-width="2"/>"##
    );
    for (i, &p) in sites.iter().enumerate() {
        let (x, y) = px(p);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="#c0392b" stroke="black" stroke-width="1"/>"##);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14">{}</text>"#,
            x + 8.0,
            y - 8.0,
            i + 1
        );
    }
    let regime = record.regime().map_or("none", |r| r.label());
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.2}" font-family="sans-serif" font-size="14">n = {}, M = {:.2}, regime: {regime}</text>"#,
        SIZE + 2.0 * MARGIN + 12.0,
        record.n,
        record.market_size
    );
    s.push_str("</svg>\n");
    s
}

/// `fig_<n>_<regime>.svg` for a record.
pub fn figure_name(record: &ResultRecord) -> String {
    let regime = record.regime().map_or(record.kind.label(), |r| r.label());
    format!("fig_{}_{regime}.svg", record.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entry::{GameDiagnostics, Regime};
    use crate::market::{Configuration, PriceVector};
    use crate::scenario::record::{CaseKind, EquilibriumFields, Status};

    fn record(pairs: &[(f64, f64)]) -> ResultRecord {
        let n = pairs.len();
        ResultRecord {
            scenario: "t".into(),
            case: 0,
            kind: CaseKind::JustEntered,
            status: Status::Ok,
            message: None,
            n,
            market_size: 432.5,
            consumer_resolution: 24,
            thresholds: None,
            social_optimum: None,
            equilibrium: (n > 0).then(|| EquilibriumFields {
                configuration: Configuration::from_pairs(pairs).unwrap(),
                prices: PriceVector(vec![1.0; n]),
                profits: vec![0.0; n],
                regime: Regime::JustEntered,
                entrant_blocked: true,
                best_entrant_profit: -1.0,
                best_entrant_location: None,
                social_cost: 1.0,
                location_resolution: 9,
                diagnostics: GameDiagnostics::default(),
            }),
        }
    }

    #[test]
    fn corners_give_four_markers_and_four_quadrants() {
        let svg = emit_figure(&record(&[(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]));
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("<polygon").count(), 4);
        assert_eq!(svg.matches("240.00,240.00").count(), 4);
        assert!(svg.contains("n = 4, M = 432.50, regime: just_entered"));
    }

    #[test]
    fn empty_configuration_draws_only_the_frame() {
        let svg = emit_figure(&record(&[]));
        assert_eq!(svg.matches("<circle").count(), 0);
        assert_eq!(svg.matches("<polygon").count(), 0);
        assert!(svg.contains(r#"width="400" height="400""#));
    }

    #[test]
    fn output_is_deterministic() {
        let r = record(&[(0.25, 0.25), (0.75, 0.75), (0.25, 0.75), (0.75, 0.25), (0.5, 0.5)]);
        assert_eq!(emit_figure(&r), emit_figure(&r.clone()));
        assert_eq!(figure_name(&r), "fig_5_just_entered.svg");
    }
}
