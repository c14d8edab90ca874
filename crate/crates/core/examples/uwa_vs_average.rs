//! Two specialists disagree; confidence weighting lets each one speak for its own classes.

use std::collections::BTreeMap;

use fedlogit::aggregation::{average_logits, fit_logit_density, uwa_aggregate, LogitMatrix};
use fedlogit::nn::Matrix;

fn main() -> fedlogit::Result<()> {
    // client 0 learned classes 0 and 1, client 1 learned classes 2 and 3
    let val0 = Matrix::from_vec(4, 4, vec![
        5.0, 0.0, -2.0, -2.0, 4.6, 0.3, -2.1, -1.8, //
        0.0, 5.0, -2.0, -2.0, 0.2, 4.7, -1.9, -2.2,
    ])?;
    let val1 = Matrix::from_vec(4, 4, vec![
        -2.0, -2.0, 5.0, 0.0, -1.8, -2.1, 4.8, 0.1, //
        -2.0, -2.0, 0.0, 5.0, -2.2, -1.9, 0.3, 4.6,
    ])?;
    let densities = BTreeMap::from([
        (0, fit_logit_density(&val0, &[0, 0, 1, 1], &[0, 1])?),
        (1, fit_logit_density(&val1, &[2, 2, 3, 3], &[2, 3])?),
    ]);

    // one public sample of class 0: client 0 is sure, client 1 confidently guesses class 2
    let public = [
        LogitMatrix::new(0, Matrix::from_vec(1, 4, vec![4.8, 0.1, -2.0, -2.0])?)?,
        LogitMatrix::new(1, Matrix::from_vec(1, 4, vec![-2.0, -2.0, 5.2, 0.0])?)?,
    ];
    let avg = average_logits(&public)?;
    let uwa = uwa_aggregate(&public, &densities)?;
    let weights = uwa.weights.as_ref().expect("UWA reports weights");
    println!("client weights  {:?}", weights.row(0));
    println!("average  target {:?} -> class {}", avg.values.row(0), avg.predicted_classes()[0]);
    println!("UWA      target {:?} -> class {}", uwa.values.row(0), uwa.predicted_classes()[0]);
    Ok(())
}
