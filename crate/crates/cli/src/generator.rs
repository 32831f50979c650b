//! Seeded random machines and reversible programs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use togglemem::machine::{Instruction, Machine};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A machine of `count` words with uniformly random bits.
pub fn random_machine<R: Rng>(rng: &mut R, width: usize, count: usize) -> Machine {
    let mut m = Machine::zeroed(width, count);
    for w in m.words_mut() {
        for b in 0..width {
            w.set(b, rng.gen());
        }
    }
    m
}

/// A reversible instruction: up to three tested bits and one to three
/// toggled bits, drawn without overlap.
pub fn random_reversible<R: Rng>(rng: &mut R, width: usize) -> Instruction {
    let n_toggle = rng.gen_range(1..=3.min(width));
    let n_test = rng.gen_range(0..=3.min(width - n_toggle));
    let picked = sample(rng, width, n_toggle + n_test).into_vec();
    let (toggle, test) = picked.split_at(n_toggle);
    Instruction::new(test.iter().copied(), toggle.iter().copied()).expect("toggle set is non-empty")
}

pub fn random_reversible_program<R: Rng>(rng: &mut R, width: usize, length: usize) -> Vec<Instruction> {
    (0..length).map(|_| random_reversible(rng, width)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use togglemem::machine::Reversibility;

    #[test]
    fn same_seed_same_program() {
        let a = random_reversible_program(&mut rng(9), 32, 50);
        let b = random_reversible_program(&mut rng(9), 32, 50);
        assert_eq!(a, b);
        assert_ne!(a, random_reversible_program(&mut rng(10), 32, 50));
    }

    proptest! {
        #[test]
        fn always_reversible_and_in_range(seed in any::<u64>(), width in 1usize..70) {
            let mut r = rng(seed);
            for i in random_reversible_program(&mut r, width, 20) {
                prop_assert_eq!(i.reversibility(), Reversibility::Reversible);
                prop_assert!(i.validate(width).is_ok());
            }
        }
    }
}
