//! Synthetic speech corpus: words spelled over a small alphabet, one phone
//! per letter, each phone rendered as a pair of tones.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::acoustic::wav::write_wav;
use crate::acoustic::{extract_features, train_am, AcousticError, FeatureConfig, TrainConfig};
use crate::g2p::G2pConfig;
use crate::lexicon::{derive_inventory, merge_lexicons, parse_lexicon, Lexicon, SpecialWords, SIL_PHONE, SPN_PHONE};

pub const SAMPLE_RATE: u32 = 16_000;
const SAMPLES_PER_FRAME: usize = 160;

/// Letter to phone; pronunciations are letter-by-letter.
pub const ALPHABET: [(char, &str); 11] = [
    ('A', "AA"),
    ('B', "B"),
    ('D', "D"),
    ('E', "EH"),
    ('I', "IY"),
    ('K', "K"),
    ('M', "M"),
    ('N', "N"),
    ('S', "S"),
    ('T', "T"),
    ('U', "UW"),
];

pub const PRIMARY_WORDS: [&str; 12] = [
    "BAD", "BED", "BID", "BUD", "DAM", "DEN", "DIM", "KIT", "MAT", "MEN", "NET", "SAD",
];

pub const SECONDARY_WORDS: [&str; 12] = [
    "SET", "SIT", "SUN", "TAN", "TEN", "TIN", "MUD", "KID", "DUSK", "MIST", "BAND", "SEND",
];

/// Spelled over the same alphabet but absent from both lexicons.
pub const OOV_WORDS: [&str; 3] = ["DUNK", "MASK", "SKIM"];

pub fn pronounce(word: &str) -> Vec<String> {
    word.chars()
        .filter_map(|c| ALPHABET.iter().find(|(l, _)| *l == c).map(|(_, p)| p.to_string()))
        .collect()
}

fn lexicon_of(words: &[&str], specials: Option<&SpecialWords>) -> Lexicon {
    let mut text: String = words
        .iter()
        .map(|w| format!("{w} {}\n", pronounce(w).join(" ")))
        .collect();
    for (w, p) in specials.iter().flat_map(|s| s.entries()) {
        text.push_str(&format!("{w} {p}\n"));
    }
    parse_lexicon(&text).expect("generated lexicon parses")
}

/// Primary lexicon (with the special words) and secondary lookup lexicon.
pub fn lexicons(specials: &SpecialWords) -> (Lexicon, Lexicon) {
    (
        lexicon_of(&PRIMARY_WORDS, Some(specials)),
        lexicon_of(&SECONDARY_WORDS, None),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub words: Vec<String>,
    /// Phone per segment including silences and noise.
    pub phones: Vec<String>,
    pub samples: Vec<f64>,
}

fn tones(phone: &str) -> Option<(f64, f64)> {
    let i = ALPHABET.iter().position(|(_, p)| *p == phone)? as f64;
    Some((300.0 + 150.0 * i, 1200.0 + 230.0 * i))
}

fn render(rng: &mut ChaCha8Rng, phone: &str, frames: std::ops::RangeInclusive<usize>, out: &mut Vec<f64>) {
    let n = rng.gen_range(frames) * SAMPLES_PER_FRAME;
    let sr = f64::from(SAMPLE_RATE);
    let (noise, pair) = match phone {
        SIL_PHONE => (30.0, None),
        SPN_PHONE => (2000.0, None),
        p => (100.0, tones(p)),
    };
    let noise = Normal::new(0.0, noise).expect("positive deviation");
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    for i in 0..n {
        let t = i as f64 / sr;
        let tone = pair.map_or(0.0, |(f1, f2)| {
            3000.0 * (2.0 * PI * f1 * t + phase).sin() + 2000.0 * (2.0 * PI * f2 * t).sin()
        });
        out.push(tone + noise.sample(rng));
    }
}

/// Renders `words` with leading and trailing silence and an optional pause
/// between words. The noise word renders as `SPN`.
pub fn utterance(rng: &mut ChaCha8Rng, id: &str, words: &[String], specials: &SpecialWords) -> Utterance {
    let mut phones = vec![SIL_PHONE.to_string()];
    let mut samples = Vec::new();
    render(rng, SIL_PHONE, 10..=20, &mut samples);
    for (i, w) in words.iter().enumerate() {
        let word_phones = if *w == specials.noise {
            vec![SPN_PHONE.to_string()]
        } else {
            pronounce(w)
        };
        for p in word_phones {
            render(rng, &p, 6..=12, &mut samples);
            phones.push(p);
        }
        if i + 1 < words.len() && rng.gen_bool(0.3) {
            render(rng, SIL_PHONE, 5..=10, &mut samples);
            phones.push(SIL_PHONE.to_string());
        }
    }
    render(rng, SIL_PHONE, 10..=20, &mut samples);
    phones.push(SIL_PHONE.to_string());
    Utterance {
        id: id.to_string(),
        words: words.to_vec(),
        phones,
        samples,
    }
}

/// Acoustic-model training utterances over the known words; about one in
/// four carries a noise word.
pub fn training_set(seed: u64, count: usize, specials: &SpecialWords) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known: Vec<&str> = PRIMARY_WORDS.iter().chain(&SECONDARY_WORDS).copied().collect();
    (0..count)
        .map(|i| {
            let n = rng.gen_range(2..=4);
            let mut words: Vec<String> = (0..n).map(|_| known.choose(&mut rng).unwrap().to_string()).collect();
            if rng.gen_bool(0.25) {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, specials.noise.clone());
            }
            utterance(&mut rng, &format!("train{i:03}"), &words, specials)
        })
        .collect()
}

/// `count` utterances of known words with the words of `plant[i]` inserted
/// into utterance `i`.
pub fn evaluation_set(
    seed: u64,
    prefix: &str,
    count: usize,
    plant: &[(usize, &str)],
    specials: &SpecialWords,
) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known: Vec<&str> = PRIMARY_WORDS.iter().chain(&SECONDARY_WORDS).copied().collect();
    (0..count)
        .map(|i| {
            let n = rng.gen_range(2..=3);
            let mut words: Vec<String> = (0..n).map(|_| known.choose(&mut rng).unwrap().to_string()).collect();
            for (_, w) in plant.iter().filter(|(u, _)| *u == i) {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, w.to_string());
            }
            utterance(&mut rng, &format!("{prefix}{i:02}"), &words, specials)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pronunciations_follow_spelling() {
        assert_eq!(pronounce("MASK"), vec!["M", "AA", "S", "K"]);
        let (primary, secondary) = lexicons(&SpecialWords::default());
        assert_eq!(primary.len(), PRIMARY_WORDS.len() + 3);
        assert_eq!(secondary.len(), SECONDARY_WORDS.len());
        for w in OOV_WORDS {
            assert!(!primary.contains_word(w) && !secondary.contains_word(w));
        }
    }

    #[test]
    fn utterances_are_deterministic() {
        let s = SpecialWords::default();
        let a = evaluation_set(5, "e", 3, &[(1, "DUNK")], &s);
        let b = evaluation_set(5, "e", 3, &[(1, "DUNK")], &s);
        assert_eq!(a, b);
        assert!(a[1].words.contains(&"DUNK".to_string()));
        let frames = a[0].samples.len() / SAMPLES_PER_FRAME;
        assert!(frames >= 20 + a[0].phones.len());
    }
}

/// Files of a ready-to-run synthetic workspace.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub lexicons: Vec<PathBuf>,
    pub acoustic_model: PathBuf,
    pub g2p_model: PathBuf,
    /// Ten utterances with three planted OOV words.
    pub manifest: PathBuf,
    /// Six utterances, one OOV word in four of them.
    pub repeat_manifest: PathBuf,
    pub config: PathBuf,
}

/// Planted OOVs of the main manifest: `(utterance, word)`.
pub const PLANTED: [(usize, &str); 4] = [(1, "DUNK"), (4, "MASK"), (7, "SKIM"), (8, "DUNK")];
/// The repeat manifest's OOV word and the utterances holding it.
pub const REPEATED: (&str, [usize; 4]) = ("DUNK", [0, 2, 3, 5]);

fn write_utterances(root: &Path, name: &str, utts: &[Utterance]) -> Result<PathBuf, AcousticError> {
    let mut manifest = String::new();
    for u in utts {
        let rel = format!("wav/{}.wav", u.id);
        write_wav(&root.join(&rel), &u.samples, SAMPLE_RATE)?;
        manifest.push_str(&format!("{}\t{rel}\t{}\n", u.id, u.words.join(" ")));
    }
    let path = root.join(name);
    std::fs::write(&path, manifest)?;
    Ok(path)
}

/// Generates audio, lexicons and manifests under `root`, trains the
/// acoustic and G2P models on them and writes a Hybrid pipeline config
/// whose output goes to `root/out`.
pub fn prepare_workspace(root: &Path, seed: u64) -> Result<Workspace, String> {
    let specials = SpecialWords::default();
    let err = |e: &dyn std::fmt::Display| e.to_string();
    std::fs::create_dir_all(root.join("wav")).map_err(|e| err(&e))?;
    let (primary, secondary) = lexicons(&specials);
    let lexicon_paths = vec![root.join("primary.lex"), root.join("secondary.lex")];
    std::fs::write(&lexicon_paths[0], primary.serialize()).map_err(|e| err(&e))?;
    std::fs::write(&lexicon_paths[1], secondary.serialize()).map_err(|e| err(&e))?;
    let l0 = merge_lexicons(&primary, &secondary).map_err(|e| err(&e))?;
    let inventory = derive_inventory(&l0, &specials);

    let train = training_set(seed, 60, &specials);
    let fcfg = FeatureConfig {
        seed,
        ..Default::default()
    };
    let features = train
        .iter()
        .map(|u| extract_features(&u.samples, SAMPLE_RATE, &fcfg))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| err(&e))?;
    let phones: Vec<Vec<String>> = train.iter().map(|u| u.phones.clone()).collect();
    let (am, _) = train_am(&features, &phones, &inventory.phones(), &TrainConfig::default()).map_err(|e| err(&e))?;
    let acoustic_model = root.join("am.txt");
    std::fs::write(&acoustic_model, am.serialize()).map_err(|e| err(&e))?;

    // the synthetic alphabet maps one letter to one phone
    let g2p_cfg = G2pConfig {
        max_letters: 1,
        max_phones: 1,
        ..Default::default()
    };
    let (g2p, _) = crate::g2p::train(&l0, &specials, &g2p_cfg).map_err(|e| err(&e))?;
    let g2p_model = root.join("g2p.txt");
    std::fs::write(&g2p_model, g2p.serialize()).map_err(|e| err(&e))?;

    let eval = evaluation_set(seed + 1, "utt", 10, &PLANTED, &specials);
    let manifest = write_utterances(root, "manifest.tsv", &eval).map_err(|e| err(&e))?;
    let plant: Vec<(usize, &str)> = REPEATED.1.iter().map(|&i| (i, REPEATED.0)).collect();
    let repeat = evaluation_set(seed + 2, "rep", 6, &plant, &specials);
    let repeat_manifest = write_utterances(root, "repeat.tsv", &repeat).map_err(|e| err(&e))?;

    let config = root.join("pipeline.cfg");
    std::fs::write(
        &config,
        format!("mode = hybrid\nlexicon = primary.lex\nlexicon = secondary.lex\nacoustic_model = am.txt\ng2p_model = g2p.txt\noutput_dir = out\nseed = {seed}\n"),
    )
    .map_err(|e| err(&e))?;
    Ok(Workspace {
        root: root.to_path_buf(),
        lexicons: lexicon_paths,
        acoustic_model,
        g2p_model,
        manifest,
        repeat_manifest,
        config,
    })
}
