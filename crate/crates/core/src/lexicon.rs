//! Pronunciation lexicons, vocabularies and phone inventories.
//!
//! A lexicon is kept sorted by `(word, pronunciation)` with exact duplicates
//! collapsed. Words are uppercased at parse time. The three special entries
//! map silence to `SIL` and both spoken noise and the unknown word to `SPN`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub const SIL_PHONE: &str = "SIL";
pub const SPN_PHONE: &str = "SPN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: malformed entry {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: word {word:?} has an empty pronunciation")]
    EmptyPronunciation { line: usize, word: String },
    #[error("word {word:?} uses phone {phone:?} which is not in the inventory")]
    UnknownPhone { word: String, phone: String },
    #[error("lexicons were validated against different phone inventories")]
    PhoneInventoryMismatch,
    #[error("lexicon is missing the special entry {word} -> {phone}")]
    MissingSpecial { word: String, phone: String },
}

/// Spellings of the three special words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialWords {
    pub silence: String,
    pub noise: String,
    pub unknown: String,
}

impl Default for SpecialWords {
    fn default() -> Self {
        Self {
            silence: "<SIL>".to_string(),
            noise: "<SPOKEN_NOISE>".to_string(),
            unknown: "<UNK>".to_string(),
        }
    }
}

impl SpecialWords {
    pub fn contains(&self, word: &str) -> bool {
        word == self.silence || word == self.noise || word == self.unknown
    }

    /// The special entries as `(word, phone)` pairs.
    pub fn entries(&self) -> [(&str, &str); 3] {
        [
            (self.silence.as_str(), SIL_PHONE),
            (self.noise.as_str(), SPN_PHONE),
            (self.unknown.as_str(), SPN_PHONE),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Base,
    G2p,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub word: String,
    pub pron: Vec<String>,
    pub source: Source,
}

impl Entry {
    pub fn new(word: impl Into<String>, pron: &[&str]) -> Self {
        Self {
            word: normalize_word(&word.into()),
            pron: pron.iter().map(|p| p.to_string()).collect(),
            source: Source::Base,
        }
    }

    fn key(&self) -> (&str, &[String]) {
        (&self.word, &self.pron)
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.word, self.pron.join(" "))
    }
}

pub fn normalize_word(word: &str) -> String {
    word.to_uppercase()
}

/// Phone sets split into silence and non-silence phones.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhoneInventory {
    pub silence: BTreeSet<String>,
    pub nonsilence: BTreeSet<String>,
}

impl PhoneInventory {
    pub fn new<I, J, S, T>(silence: I, nonsilence: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut silence: BTreeSet<String> = silence.into_iter().map(Into::into).collect();
        silence.insert(SIL_PHONE.to_string());
        silence.insert(SPN_PHONE.to_string());
        let nonsilence = nonsilence
            .into_iter()
            .map(Into::into)
            .filter(|p: &String| !silence.contains(p))
            .collect();
        Self { silence, nonsilence }
    }

    pub fn contains(&self, phone: &str) -> bool {
        self.silence.contains(phone) || self.nonsilence.contains(phone)
    }

    pub fn is_silence(&self, phone: &str) -> bool {
        self.silence.contains(phone)
    }

    /// All phones, silence first, each group sorted.
    pub fn phones(&self) -> Vec<String> {
        self.silence.iter().chain(self.nonsilence.iter()).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.silence.len() + self.nonsilence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Word-position-dependent variants (`_B`, `_I`, `_E`, `_S`) of every
    /// non-silence phone.
    pub fn position_dependent(&self) -> Vec<String> {
        self.nonsilence
            .iter()
            .flat_map(|p| ["_B", "_I", "_E", "_S"].map(|s| format!("{p}{s}")))
            .collect()
    }

    pub fn silence_text(&self) -> String {
        self.silence.iter().map(|p| format!("{p}\n")).collect()
    }

    pub fn nonsilence_text(&self) -> String {
        self.nonsilence.iter().map(|p| format!("{p}\n")).collect()
    }

    pub fn parse(silence_text: &str, nonsilence_text: &str) -> Self {
        let words = |t: &str| t.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        Self::new(words(silence_text), words(nonsilence_text))
    }
}

/// Sorted, deduplicated word → pronunciation mapping.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<Entry>,
    inventory: Option<PhoneInventory>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Lexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = Entry>) -> Self {
        let mut entries: Vec<Entry> = entries.into_iter().collect();
        sort_dedup(&mut entries);
        Self {
            entries,
            inventory: None,
        }
    }

    /// A lexicon holding only the three special entries.
    pub fn specials(specials: &SpecialWords) -> Self {
        Self::from_entries(specials.entries().iter().map(|(w, p)| Entry::new(*w, &[p])))
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn inventory(&self) -> Option<&PhoneInventory> {
        self.inventory.as_ref()
    }

    pub fn contains_word(&self, word: &str) -> bool {
        let idx = self.entries.partition_point(|e| e.word.as_str() < word);
        self.entries.get(idx).is_some_and(|e| e.word == word)
    }

    /// All pronunciations of `word`, in sorted order.
    pub fn prons<'a>(&'a self, word: &'a str) -> impl Iterator<Item = &'a [String]> + 'a {
        let start = self.entries.partition_point(|e| e.word.as_str() < word);
        self.entries[start..]
            .iter()
            .take_while(move |e| e.word == word)
            .map(|e| e.pron.as_slice())
    }

    pub fn words(&self) -> Vocabulary {
        Vocabulary {
            words: self.entries.iter().map(|e| e.word.clone()).collect(),
        }
    }

    /// Phones used by any entry.
    pub fn phones(&self) -> BTreeSet<String> {
        self.entries.iter().flat_map(|e| e.pron.iter().cloned()).collect()
    }

    pub fn validate(&self, inventory: &PhoneInventory) -> Result<(), LexiconError> {
        for e in &self.entries {
            if let Some(p) = e.pron.iter().find(|p| !inventory.contains(p)) {
                return Err(LexiconError::UnknownPhone {
                    word: e.word.clone(),
                    phone: p.clone(),
                });
            }
        }
        Ok(())
    }

    /// Validates against `inventory` and records it for later merges.
    pub fn validated(mut self, inventory: &PhoneInventory) -> Result<Self, LexiconError> {
        self.validate(inventory)?;
        self.inventory = Some(inventory.clone());
        Ok(self)
    }

    /// Checks that the three special entries are present.
    pub fn check_specials(&self, specials: &SpecialWords) -> Result<(), LexiconError> {
        for (w, p) in specials.entries() {
            let found = self.prons(w).any(|pr| pr.len() == 1 && pr[0] == p);
            if !found {
                return Err(LexiconError::MissingSpecial {
                    word: w.to_string(),
                    phone: p.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Every entry retagged with `source`.
    pub fn with_source(mut self, source: Source) -> Self {
        for e in &mut self.entries {
            e.source = source;
        }
        self
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// Lexicon restricted to `words`.
    pub fn restrict<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Lexicon {
        let keep: BTreeSet<&str> = words.into_iter().collect();
        Lexicon {
            entries: self
                .entries
                .iter()
                .filter(|e| keep.contains(e.word.as_str()))
                .cloned()
                .collect(),
            inventory: self.inventory.clone(),
        }
    }
}

fn sort_dedup(entries: &mut Vec<Entry>) {
    entries.sort_by(|a, b| a.key().cmp(&b.key()).then(a.source.cmp(&b.source)));
    // the Base-tagged copy sorts first and survives
    entries.dedup_by(|b, a| a.key() == b.key());
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().ok_or_else(|| LexiconError::MalformedLine {
            line: line_no,
            text: line.to_string(),
        })?;
        if line.starts_with(char::is_whitespace) {
            return Err(LexiconError::MalformedLine {
                line: line_no,
                text: line.to_string(),
            });
        }
        let pron: Vec<String> = fields.map(str::to_string).collect();
        if pron.is_empty() {
            return Err(LexiconError::EmptyPronunciation {
                line: line_no,
                word: word.to_string(),
            });
        }
        entries.push(Entry {
            word: normalize_word(word),
            pron,
            source: Source::Base,
        });
    }
    Ok(Lexicon::from_entries(entries))
}

pub fn parse_lexicon_with_inventory(text: &str, inventory: &PhoneInventory) -> Result<Lexicon, LexiconError> {
    parse_lexicon(text)?.validated(inventory)
}

/// Sorted set of unique, nonempty, uppercased words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| normalize_word(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// One word per line; blank lines are skipped.
    pub fn parse(text: &str) -> Self {
        Self::from_words(text.lines().map(str::trim))
    }

    pub fn serialize(&self) -> String {
        self.words.iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }
}

/// Splits a transcript on whitespace and uppercases each token.
pub fn tokenize(transcript: &str) -> Vec<String> {
    transcript.split_whitespace().map(normalize_word).collect()
}

/// Words of `transcript` that are absent from every lexicon in `lexicons`.
pub fn find_oov(transcript: &[String], lexicons: &[&Lexicon]) -> Vocabulary {
    Vocabulary::from_words(
        transcript
            .iter()
            .filter(|w| !lexicons.iter().any(|l| l.contains_word(&normalize_word(w)))),
    )
}

pub fn merge_lexicons(base: &Lexicon, addition: &Lexicon) -> Result<Lexicon, LexiconError> {
    let inventory = match (&base.inventory, &addition.inventory) {
        (Some(a), Some(b)) if a != b => return Err(LexiconError::PhoneInventoryMismatch),
        (a, b) => a.clone().or_else(|| b.clone()),
    };
    let mut merged = Lexicon::from_entries(base.entries.iter().chain(addition.entries.iter()).cloned());
    merged.inventory = inventory;
    Ok(merged)
}

/// Silence phones are those reachable only from special entries (plus `SIL`
/// and `SPN` unless a regular word uses them); everything else is
/// non-silence.
pub fn derive_inventory(lexicon: &Lexicon, specials: &SpecialWords) -> PhoneInventory {
    let mut special_phones = BTreeSet::from([SIL_PHONE.to_string(), SPN_PHONE.to_string()]);
    let mut normal_phones = BTreeSet::new();
    for e in lexicon.entries() {
        let target = if specials.contains(&e.word) {
            &mut special_phones
        } else {
            &mut normal_phones
        };
        target.extend(e.pron.iter().cloned());
    }
    let silence = special_phones.difference(&normal_phones).cloned().collect();
    PhoneInventory {
        silence,
        nonsilence: normal_phones,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECIALS: &str = "<SIL> SIL\n<SPOKEN_NOISE> SPN\n<UNK> SPN";

    #[test]
    fn parses_special_entries() {
        let lex = parse_lexicon(SPECIALS).unwrap();
        assert_eq!(lex.len(), 3);
        lex.check_specials(&SpecialWords::default()).unwrap();
    }

    #[test]
    fn empty_text_is_empty_lexicon_without_specials() {
        let lex = parse_lexicon("").unwrap();
        assert!(lex.is_empty());
        assert!(matches!(
            lex.check_specials(&SpecialWords::default()),
            Err(LexiconError::MissingSpecial { .. })
        ));
    }

    #[test]
    fn duplicates_collapse() {
        let lex = parse_lexicon("CAT K AE T\nCAT K AE T").unwrap();
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn tabs_runs_of_spaces_and_case() {
        let lex = parse_lexicon("cat\tK  AE\t T\nRead R EH D\nREAD R IY D\n").unwrap();
        assert_eq!(lex.serialize(), "CAT K AE T\nREAD R EH D\nREAD R IY D\n");
        assert_eq!(lex.prons("READ").count(), 2);
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            parse_lexicon("A AH\nB\n").unwrap_err(),
            LexiconError::EmptyPronunciation {
                line: 2,
                word: "B".into()
            }
        );
        assert!(matches!(
            parse_lexicon("A AH\n  B B\n"),
            Err(LexiconError::MalformedLine { line: 2, .. })
        ));
        let inv = PhoneInventory::new(["SIL"], ["AH"]);
        assert!(matches!(
            parse_lexicon_with_inventory("A AH\nB B\n", &inv),
            Err(LexiconError::UnknownPhone { .. })
        ));
    }

    #[test]
    fn oov_examples() {
        let lex = parse_lexicon("HIS HH IH Z\nGOSPEL G AA S P AH L").unwrap();
        assert!(find_oov(&tokenize("HIS GOSPEL"), &[&lex]).is_empty());
        let his = parse_lexicon("HIS HH IH Z").unwrap();
        assert_eq!(
            find_oov(&tokenize("ZXQW HIS"), &[&his]),
            Vocabulary::from_words(["ZXQW"])
        );
        assert_eq!(find_oov(&tokenize("A A A"), &[&his]), Vocabulary::from_words(["A"]));
    }

    #[test]
    fn oov_consults_every_lexicon() {
        let a = parse_lexicon("HIS HH IH Z").unwrap();
        let b = parse_lexicon("GOSPEL G AA S P AH L").unwrap();
        assert!(find_oov(&tokenize("his gospel"), &[&a, &b]).is_empty());
    }

    #[test]
    fn merge_identity_idempotence_and_disjoint() {
        let base = parse_lexicon(SPECIALS).unwrap();
        assert_eq!(merge_lexicons(&base, &Lexicon::default()).unwrap(), base);
        assert_eq!(merge_lexicons(&base, &base).unwrap(), base);

        let a = "ZOO Z UW\nAPE EY P\n";
        let b = "CAT K AE T\nDOG D AO G\nBEE B IY\n";
        let merged = merge_lexicons(&parse_lexicon(a).unwrap(), &parse_lexicon(b).unwrap()).unwrap();
        // oracle: sort -u over the concatenated lines
        let mut lines: Vec<&str> = a.lines().chain(b.lines()).collect();
        lines.sort();
        lines.dedup();
        let expected: String = lines.iter().map(|l| format!("{l}\n")).collect();
        assert_eq!(merged.len(), 5);
        assert_eq!(merged.serialize(), expected);
    }

    #[test]
    fn merge_keeps_source_tags_and_checks_inventory() {
        let inv = PhoneInventory::new(["SIL"], ["K", "AE", "T"]);
        let base = parse_lexicon("CAT K AE T").unwrap().validated(&inv).unwrap();
        let gen = parse_lexicon("TACK T AE K")
            .unwrap()
            .with_source(Source::G2p)
            .validated(&inv)
            .unwrap();
        let merged = merge_lexicons(&base, &gen).unwrap();
        let tack = merged.entries().iter().find(|e| e.word == "TACK").unwrap();
        assert_eq!(tack.source, Source::G2p);

        let other = PhoneInventory::new(["SIL"], ["K"]);
        let k = parse_lexicon("KK K").unwrap().validated(&other).unwrap();
        assert_eq!(
            merge_lexicons(&base, &k).unwrap_err(),
            LexiconError::PhoneInventoryMismatch
        );
    }

    #[test]
    fn inventory_examples() {
        let sw = SpecialWords::default();
        let inv = derive_inventory(&parse_lexicon(SPECIALS).unwrap(), &sw);
        assert_eq!(inv.silence, BTreeSet::from(["SIL".into(), "SPN".into()]));
        assert!(inv.nonsilence.is_empty());

        let lex = parse_lexicon(&format!("{SPECIALS}\nCAT K AE T")).unwrap();
        let inv = derive_inventory(&lex, &sw);
        assert_eq!(inv.nonsilence, BTreeSet::from(["K".into(), "AE".into(), "T".into()]));

        // NSN appears under a special word and a regular word: non-silence.
        let lex = parse_lexicon("<SIL> SIL\n<SPOKEN_NOISE> NSN\n<UNK> SPN\nHMM NSN M").unwrap();
        let inv = derive_inventory(&lex, &sw);
        assert_eq!(inv.silence, BTreeSet::from(["SIL".into(), "SPN".into()]));
        assert_eq!(inv.nonsilence, BTreeSet::from(["M".into(), "NSN".into()]));
    }

    #[test]
    fn vocabulary_roundtrip() {
        let v = Vocabulary::from_words(["b", "a", "B"]);
        assert_eq!(v.serialize(), "A\nB\n");
        assert_eq!(Vocabulary::parse(&v.serialize()), v);
    }

    #[test]
    fn position_variants() {
        let inv = PhoneInventory::new(["SIL"], ["K"]);
        assert_eq!(inv.position_dependent(), vec!["K_B", "K_I", "K_E", "K_S"]);
    }
}
