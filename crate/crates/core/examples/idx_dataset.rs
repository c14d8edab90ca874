//! Load an MNIST-style IDX image/label pair and partition it across clients.

use fedlogit::data::idx::write_idx;
use fedlogit::data::{load_idx, partition, PartitionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fedlogit::Result<()> {
    // a small stand-in for the real files: 8x8 images whose bright row encodes the label
    let dir = std::env::temp_dir().join("fedlogit-idx-example");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    let (images, labels) = (dir.join("images-idx3-ubyte"), dir.join("labels-idx1-ubyte"));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let count = 1200;
    let ys: Vec<u8> = (0..count).map(|i| (i % 8) as u8).collect();
    let mut pixels = Vec::with_capacity(count * 64);
    for &y in &ys {
        for row in 0..8 {
            for _ in 0..8 {
                let base = if row == y as usize { 200 } else { 20 };
                pixels.push(base + rng.random_range(0..40u8));
            }
        }
    }
    write_idx(&images, &labels, &pixels, 8, 8, &ys)?;

    let ds = load_idx(&images, &labels)?;
    println!("{} images, {} features, {} classes", ds.len(), ds.dim(), ds.classes());
    let spec = PartitionSpec {
        clients: 4,
        classes_per_client: 2,
        private_size: 200,
        public_size: 200,
        meta_size: 100,
        test_size: 200,
        ..PartitionSpec::default()
    };
    let data = partition(&ds, &spec)?;
    println!("client classes {:?}", data.client_classes());
    Ok(())
}
