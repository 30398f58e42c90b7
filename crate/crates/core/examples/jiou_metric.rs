//! JIoU against an ambiguous two-mode label, and the sorted evaluation of
//! the Jaccard index against the quadratic definition.

use std::time::Instant;

use probbox::geometry::{iou_bev, BoxParams};
use probbox::jiou::{jaccard_fast, jaccard_naive, jiou_grids, DiscreteDistribution};
use probbox::spatial::{
    covering_boxes, rasterize_box_uniform, rasterize_discrete_pdq, rasterize_discrete_pg, DiscreteBoxDistribution,
};

fn main() -> probbox::Result<()> {
    let a = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.0)?;
    for scale in [1.0_f64, 2.0, 4.0] {
        let b = BoxParams::bev(0.0, 8.0, 4.0 * scale.sqrt(), 2.0 * scale.sqrt(), 0.0)?;
        let label = DiscreteBoxDistribution::new(vec![(a, 0.5), (b, 0.5)])?;
        let spec = covering_boxes([&a, &b], 0.05)?;
        let prediction = rasterize_box_uniform(&a, &spec)?;
        let pg = jiou_grids(&prediction, &rasterize_discrete_pg(&label, &spec)?)?.value;
        let pdq = jiou_grids(&prediction, &rasterize_discrete_pdq(&label, &spec)?)?.value;
        println!("mode B area x{scale}: JIoU(p_G) {pg:.3}, JIoU(P_PDQ) {pdq:.3}");
    }

    let shifted = BoxParams { c1: 1.0, ..a };
    let spec = covering_boxes([&a, &shifted], 0.05)?;
    let jiou = jiou_grids(&rasterize_box_uniform(&a, &spec)?, &rasterize_box_uniform(&shifted, &spec)?)?.value;
    println!("deterministic boxes: IoU {:.4}, JIoU {jiou:.4}", iou_bev(&a, &shifted));

    let n = 20_000;
    let p = DiscreteDistribution::new((0..n).map(|i| ((i * 37) % 101) as f64).collect())?;
    let q = DiscreteDistribution::new((0..n).map(|i| ((i * 53) % 97) as f64).collect())?;
    let t = Instant::now();
    let fast = jaccard_fast(&p, &q)?.value;
    let fast_time = t.elapsed();
    let t = Instant::now();
    let naive = jaccard_naive(&p, &q)?.value;
    println!("n = {n}: fast {fast:.12} in {fast_time:?}, naive {naive:.12} in {:?}", t.elapsed());
    Ok(())
}
