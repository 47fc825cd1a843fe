mod common;

use std::panic::catch_unwind;

use proptest::prelude::*;
use rand::Rng;

use stratos::dsl;
use stratos::runner::{run, RunOptions};

/// Parse arbitrary bytes; every rejection must carry at least one diagnostic.
fn parse_survives(bytes: &[u8]) -> bool {
    catch_unwind(|| match dsl::parse_bytes(bytes) {
        Ok(scenario) => {
            run(&scenario, RunOptions { keep_going: true });
            true
        }
        Err(d) => !d.is_empty(),
    })
    .unwrap_or(false)
}

const ALPHABET: &[u8] = b"unitsourcethemeapplyassert UVST{}[]()=:,;#\"\\\n\r\t0123456789_'@./-+<>!";

fn random_bytes(rng: &mut impl Rng) -> Vec<u8> {
    let len = rng.gen_range(0..200);
    if rng.gen_bool(0.5) {
        (0..len).map(|_| rng.gen()).collect()
    } else {
        (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
    }
}

#[test]
fn ten_thousand_random_inputs_never_crash() {
    let mut rng = common::rng(0xf022);
    let mut crashes = 0;
    for _ in 0..10_000 {
        if !parse_survives(&random_bytes(&mut rng)) {
            crashes += 1;
        }
    }
    assert_eq!(crashes, 0);
}

#[test]
fn mutated_corpus_files_never_crash() {
    let mut rng = common::rng(0xc0de);
    let files: Vec<Vec<u8>> = common::corpus_files("").iter().map(|p| std::fs::read(p).unwrap()).collect();
    for _ in 0..2_000 {
        let mut bytes = files[rng.gen_range(0..files.len())].clone();
        for _ in 0..rng.gen_range(1..6) {
            let at = rng.gen_range(0..=bytes.len());
            match rng.gen_range(0..3) {
                0 if at < bytes.len() => {
                    bytes.remove(at);
                }
                1 => bytes.insert(at, ALPHABET[rng.gen_range(0..ALPHABET.len())]),
                _ => bytes.truncate(at),
            }
        }
        assert!(parse_survives(&bytes), "{}", String::from_utf8_lossy(&bytes));
    }
}

proptest! {
    #[test]
    fn arbitrary_text_never_crashes(text in "\\PC{0,120}") {
        prop_assert!(parse_survives(text.as_bytes()));
    }
}
