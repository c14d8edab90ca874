//! Write client logits in the binary dump format, read them back, and export CSV.

use fedlogit::aggregation::LogitMatrix;
use fedlogit::nn::Matrix;

fn main() -> fedlogit::Result<()> {
    let logits = LogitMatrix::new(3, Matrix::from_vec(2, 3, vec![1.5, -0.25, 0.0, 2.0, 1.0, -3.75])?)?;

    let mut bytes = Vec::new();
    logits.write_binary(&mut bytes).expect("in-memory write");
    println!("{} samples x {} classes -> {} bytes ({} payload)", logits.samples(), logits.classes(), bytes.len(), logits.payload_bytes());

    let back = LogitMatrix::read_binary(bytes.as_slice(), "memory")?;
    println!("round trip identical: {}", back == logits);

    let truncated = LogitMatrix::read_binary(&bytes[..bytes.len() - 4], "truncated");
    println!("truncated dump: {}", truncated.unwrap_err());

    let mut csv = Vec::new();
    logits.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
