//! Shared fixtures for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use videodna_core::synth::{random_code, synth_code_shots};
use videodna_core::{Bitcode, VideoDna};

/// `n` uniformly random codes of `bits` bits.
pub fn random_codes(n: usize, bits: usize, seed: u64) -> Vec<Bitcode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_code(&mut rng, bits)).collect()
}

/// A database of `sequences` shot-structured code sequences of `length`
/// 64-bit codes each.
pub fn code_corpus(sequences: usize, length: usize, seed: u64) -> Vec<VideoDna> {
    (0..sequences)
        .map(|s| {
            let shots = synth_code_shots(length / 4 + 1, 64, 4, 15, 2, seed + s as u64).unwrap();
            let codes: Vec<Bitcode> = shots.into_iter().flatten().take(length).collect();
            VideoDna::from_codes(format!("s{s}"), codes).unwrap()
        })
        .collect()
}

/// A `len`-long excerpt of a random corpus sequence with `flips` bit flips
/// per code.
pub fn noisy_excerpt(corpus: &[VideoDna], len: usize, flips: usize, seed: u64) -> VideoDna {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = &corpus[rng.random_range(0..corpus.len())];
    let start = rng.random_range(0..=s.len() - len);
    let codes = s.bitcodes().unwrap()[start..start + len]
        .iter()
        .map(|c| {
            let mut c = c.clone();
            for _ in 0..flips {
                let i = rng.random_range(0..c.len());
                c.set(i, !c.get(i));
            }
            c
        })
        .collect();
    VideoDna::from_codes("query", codes).unwrap()
}
