use nalgebra::DMatrix;
use nlirf::irf::{eirf, var1_irf_closed_form, ShockSpec};
use nlirf::ModelSpec;

fn main() -> nlirf::Result<()> {
    let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
    let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    let model = ModelSpec::gaussian_var1(phi.clone(), d.clone())?;

    let shock = ShockSpec::innovation(vec![1.0, 0.0], 8)?;
    let mc = eirf(&model, &[0.3, -0.7], &shock, 10_000, 1)?;
    let exact = var1_irf_closed_form(&phi, &d, &[1.0, 0.0], 8)?;

    println!("h   simulated            closed form");
    for h in 0..=8 {
        println!(
            "{h}   {:>8.5} {:>8.5}   {:>8.5} {:>8.5}",
            mc.per_horizon[(h, 0)],
            mc.per_horizon[(h, 1)],
            exact[(h, 0)],
            exact[(h, 1)]
        );
    }
    Ok(())
}
