//! Persist masks in both formats: the compact bit-packed binary and the
//! JSON index list, and read them back.
//!
//! Run with: cargo run --release --example mask_files

use samlab::mask::{empirical_fisher, fisher_mask, SparseMask};
use samlab::objective::Objective;
use samlab::{Dataset, MlpClassifier};

fn main() {
    let mlp = MlpClassifier::new(8, 6, 2).unwrap();
    let data = Dataset::synthetic_blobs(128, 8, 2, 2.0, 9);
    let w = mlp.init_weights(9);

    let fisher = empirical_fisher(&mlp, &w, &data.as_batch()).unwrap();
    let mask = fisher_mask(&fisher, 0.8).unwrap();
    println!(
        "fisher mask over {} parameters at sparsity {}: {} active",
        mask.dim(),
        mask.sparsity(),
        mask.active_count()
    );

    let dir = std::env::temp_dir();
    let bin_path = dir.join("samlab_mask.bin");
    let json_path = dir.join("samlab_mask.json");
    mask.write_binary(&bin_path).unwrap();
    mask.write_json(&json_path).unwrap();

    let from_bin = SparseMask::read_binary(&bin_path).unwrap();
    let from_json = SparseMask::read_json(&json_path).unwrap();
    assert_eq!(mask, from_bin);
    assert_eq!(mask, from_json);

    let bin_size = std::fs::metadata(&bin_path).unwrap().len();
    let json_size = std::fs::metadata(&json_path).unwrap().len();
    println!("binary file: {bin_size} bytes at {}", bin_path.display());
    println!("json file:   {json_size} bytes at {}", json_path.display());
    println!("active indices: {:?}", mask.active_indices());
}
