//! Train a small MLP on Gaussian blobs, evaluate it, and round-trip a checkpoint.

use fedlogit::data::{generate_synthetic, BlobSpec};
use fedlogit::nn::{train_epochs, Activation, AdamConfig, Model, OptimizerState};
use fedlogit::report::evaluate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fedlogit::Result<()> {
    let spec = BlobSpec { classes: 10, dim: 20, separation: 4.0, seed: 1 };
    let train = generate_synthetic(&spec, 200)?;
    let test = generate_synthetic(&BlobSpec { seed: 1, ..spec.clone() }, 100)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::new(&[20, 64, 64, 10], Activation::Relu, &mut rng)?;
    let mut opt = OptimizerState::new(&model, AdamConfig::default());
    println!("{} parameters, untrained accuracy {:.3}", model.parameter_count(), evaluate(&model, &test)?);

    let losses = train_epochs(&mut model, &mut opt, train.features(), &train.one_hot_targets()?, 15, 64, 0)?;
    for (epoch, loss) in losses.iter().enumerate().step_by(3) {
        println!("epoch {:>2}  loss {loss:.4}", epoch + 1);
    }
    println!("trained accuracy {:.3}", evaluate(&model, &test)?);

    let mut bytes = Vec::new();
    model.write_to(&mut bytes).expect("in-memory write");
    let restored = Model::read_from(bytes.as_slice(), "memory")?;
    println!("checkpoint: {} bytes, restored identical: {}", bytes.len(), restored == model);
    Ok(())
}
