//! Property tests over the decoder, loader, prompt builder, and rating
//! parser.

mod common;

use proptest::prelude::*;

use tadascan::disasm::{decode_one, BlockId};
use tadascan::features::{Feature, FeatureKind};
use tadascan::loader::load_fixture;
use tadascan::rating::{build_prompt, parse_rating};

fn block() -> BlockId {
    BlockId {
        function_entry: 0x401000,
        start: 0x401000,
    }
}

proptest! {
    // Decoder robustness: arbitrary bytes either decode to a bounded-length
    // instruction or return an error; never panic, never claim more bytes
    // than exist.
    #[test]
    fn decoder_is_total_and_bounded(bytes in proptest::collection::vec(any::<u8>(), 1..32)) {
        if let Ok(ins) = decode_one(&bytes, 0x401000) {
            prop_assert!(ins.length >= 1);
            prop_assert!(ins.length as usize <= bytes.len());
            prop_assert!(ins.length <= 15);
            prop_assert_eq!(ins.raw_bytes.len(), ins.length as usize);
            prop_assert!(!ins.mnemonic.is_empty());
        }
    }

    // Byte-accessor round trip: every virtual address inside the fixture's
    // section returns exactly the code byte that was loaded there.
    #[test]
    fn fixture_byte_accessor_round_trips(code in proptest::collection::vec(any::<u8>(), 1..512)) {
        let hex: String = code.iter().map(|b| format!("{b:02X}")).collect();
        let image = load_fixture(&format!("base = 0x401000\ncode_hex = {hex}\n")).unwrap();
        for (i, &b) in code.iter().enumerate() {
            prop_assert_eq!(image.read_byte(0x401000 + i as u32), Some(b));
        }
        prop_assert_eq!(image.read_byte(0x401000 + code.len() as u32), None);
        prop_assert_eq!(image.read_byte(0x400FFF), None);
    }

    // Prompt rendering embeds every feature line exactly once as a bullet,
    // so distinct feature lists render distinctly.
    #[test]
    fn prompt_bullets_mirror_features(texts in proptest::collection::vec("[a-zA-Z0-9 :().\"-]{1,40}", 0..8)) {
        let features: Vec<Feature> = texts
            .iter()
            .map(|t| Feature::new(FeatureKind::StringRef, t.clone(), block(), 0x401000))
            .collect();
        let prompt = build_prompt(block(), &features);
        let bullets: Vec<&str> = prompt
            .rendered
            .lines()
            .filter_map(|l| l.strip_prefix("- "))
            .collect();
        prop_assert_eq!(bullets.len(), texts.len());
        for (bullet, text) in bullets.iter().zip(&texts) {
            prop_assert_eq!(*bullet, text.as_str());
        }
    }

    // parse_rating never returns a value outside 0..=10.
    #[test]
    fn parsed_ratings_stay_in_range(text in ".{0,60}") {
        if let Some(v) = parse_rating(&text) {
            prop_assert!(v <= 10);
        }
    }

    // Rating text containing a lone in-range integer always parses to it.
    #[test]
    fn lone_integer_always_parses(v in 0u8..=10) {
        prop_assert_eq!(parse_rating(&format!(" {v} ")), Some(v));
        prop_assert_eq!(parse_rating(&format!("{v}\n")), Some(v));
    }
}
