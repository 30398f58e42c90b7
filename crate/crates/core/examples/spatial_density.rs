//! Rasterizes the spatial density and the PDQ map of an uncertain label and
//! writes both as PGM heatmaps.

use std::fs::File;
use std::io::BufWriter;

use probbox::geometry::BoxParams;
use probbox::inference::LabelPosterior;
use probbox::spatial::{covering_grid, rasterize_pdq, rasterize_pg, RasterOptions};

fn main() -> probbox::Result<()> {
    let mean = BoxParams::bev(0.0, 0.0, 4.2, 1.8, 0.2)?;
    // Variances over [cx, cy, l, w, yaw].
    let posterior = LabelPosterior::from_variances(mean, [0.04, 0.01, 0.09, 0.02, 0.003])?;
    let spec = covering_grid(&posterior, 0.05)?;
    let opts = RasterOptions::default();

    let pg = rasterize_pg(&posterior, &spec, &opts)?;
    let pdq = rasterize_pdq(&posterior, &spec, 4096, opts.seed)?;
    println!("grid {}x{} at {} m", spec.width, spec.height, spec.resolution);
    println!("p_G   mass {:.4}, peak {:.4}, entropy {:.3}", pg.mass(), pg.peak(), pg.entropy());
    println!("P_PDQ peak {:.4} (a probability, not a density)", pdq.peak());

    let dir = std::env::temp_dir();
    for (name, grid) in [("pg", &pg), ("pdq", &pdq)] {
        let path = dir.join(format!("probbox_{name}.pgm"));
        grid.write_pgm(BufWriter::new(File::create(&path)?))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
