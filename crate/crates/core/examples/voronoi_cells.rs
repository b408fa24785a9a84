//! Market areas at equal prices for the four-corner layout and a random one.

use spatial_entry::geometry::{distance_integral, voronoi_cells, Point};

fn main() -> spatial_entry::Result<()> {
    let layouts = [
        vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)],
        vec![Point::new(0.2, 0.3), Point::new(0.7, 0.1), Point::new(0.55, 0.8)],
    ];
    for sites in &layouts {
        let cells = voronoi_cells(sites)?;
        let total: f64 = cells.iter().map(|c| c.area()).sum();
        println!("{} sites, areas sum to {total:.12}", sites.len());
        for (site, cell) in sites.iter().zip(&cells) {
            println!(
                "  ({:.2}, {:.2}): {} vertices, area {:.6}, mean distance {:.6}",
                site.x,
                site.y,
                cell.vertices.len(),
                cell.area(),
                distance_integral(cell, site) / cell.area()
            );
        }
    }
    Ok(())
}
