//! Fit a per-class Gaussian mixture over validation logits and score new logits with it.

use fedlogit::aggregation::{confidence_score, fit_logit_density, GaussianMixtureDensity};
use fedlogit::nn::Matrix;

fn main() -> fedlogit::Result<()> {
    // validation logits of a client that knows classes 0 and 2 out of 3
    let logits = Matrix::from_vec(
        6,
        3,
        vec![
            4.0, 0.1, -1.0, //
            3.6, -0.2, -0.8, //
            4.3, 0.3, -1.2, //
            -1.0, 0.0, 3.9, //
            -0.7, 0.2, 4.4, //
            -1.3, -0.1, 3.7,
        ],
    )?;
    let labels = [0, 0, 0, 2, 2, 2];
    let density = fit_logit_density(&logits, &labels, &[0, 2])?;
    println!("components for classes {:?}", density.classes());
    println!("means     {:?}", density.means().as_slice());
    println!("variances {:?}", density.variances().as_slice());

    for (name, f) in [
        ("familiar class 0", [4.0, 0.0, -1.0]),
        ("familiar class 2", [-1.0, 0.0, 4.0]),
        ("unseen class 1", [-0.5, 4.0, -0.5]),
    ] {
        println!("{name:<17} log density {:>10.3}", confidence_score(&density, &f));
    }

    let json = density.to_json()?;
    let back = GaussianMixtureDensity::from_json(&json)?;
    println!("json round trip identical: {}", back == density);
    Ok(())
}
