use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Offline,
    Online,
    Hybrid,
}

impl FromStr for Mode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            "hybrid" => Ok(Mode::Hybrid),
            _ => Err(PipelineError::Config(format!("unknown mode {s:?}"))),
        }
    }
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Offline => "offline",
            Mode::Online => "online",
            Mode::Hybrid => "hybrid",
        }
    }
}

/// How Online mode extends the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// Append generated entries to the lexicon.
    Lexicon,
    /// Rebuild the vocabulary and look every word up again.
    Vocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// Lookup lexicons, primary first.
    pub lexicons: Vec<PathBuf>,
    pub g2p_model: Option<PathBuf>,
    pub acoustic_model: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub beam: usize,
    pub g2p_beam: usize,
    pub strict: bool,
    /// `false` maps OOV words to the unknown word instead of resolving them.
    pub resolve_oov: bool,
    pub expansion: Expansion,
    /// Lexicon size limit as a multiple of the starting size.
    pub max_lexicon_factor: usize,
    pub seed: u64,
    pub jobs: usize,
}

impl PipelineConfig {
    pub fn new(mode: Mode, lexicons: Vec<PathBuf>, acoustic_model: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            mode,
            lexicons,
            g2p_model: None,
            acoustic_model,
            cache_dir: None,
            output_dir,
            beam: crate::align::DEFAULT_BEAM,
            g2p_beam: 64,
            strict: false,
            resolve_oov: true,
            expansion: Expansion::Lexicon,
            max_lexicon_factor: 10,
            seed: 0,
            jobs: 1,
        }
    }

    /// `key = value` lines; `#` starts a comment; `lexicon` may repeat.
    /// Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut mode = None;
        let mut lexicons = Vec::new();
        let mut am = None;
        let mut out = None;
        let mut rest: Vec<(usize, String, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "mode" => mode = Some(v.parse()?),
                "lexicon" => lexicons.push(base_dir.join(v)),
                "acoustic_model" => am = Some(base_dir.join(v)),
                "output_dir" => out = Some(base_dir.join(v)),
                _ => rest.push((i + 1, k.to_string(), v.to_string())),
            }
        }
        let missing = |k: &str| PipelineError::Config(format!("missing {k}"));
        if lexicons.is_empty() {
            return Err(missing("lexicon"));
        }
        let mut cfg = Self::new(
            mode.ok_or_else(|| missing("mode"))?,
            lexicons,
            am.ok_or_else(|| missing("acoustic_model"))?,
            out.ok_or_else(|| missing("output_dir"))?,
        );
        for (line, k, v) in rest {
            let bad = || PipelineError::Config(format!("line {line}: bad value {v:?} for {k}"));
            let flag = |v: &str| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad()),
            };
            match k.as_str() {
                "g2p_model" => cfg.g2p_model = Some(base_dir.join(&v)),
                "cache_dir" => cfg.cache_dir = Some(base_dir.join(&v)),
                "beam" => cfg.beam = v.parse().map_err(|_| bad())?,
                "g2p_beam" => cfg.g2p_beam = v.parse().map_err(|_| bad())?,
                "strict" => cfg.strict = flag(&v)?,
                "resolve_oov" => cfg.resolve_oov = flag(&v)?,
                "expansion" => {
                    cfg.expansion = match v.as_str() {
                        "lexicon" => Expansion::Lexicon,
                        "vocabulary" => Expansion::Vocabulary,
                        _ => return Err(bad()),
                    }
                }
                "max_lexicon_factor" => cfg.max_lexicon_factor = v.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad())?,
                "jobs" => cfg.jobs = v.parse().map_err(|_| bad())?,
                _ => return Err(PipelineError::Config(format!("line {line}: unknown key {k}"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Absolute or as-given paths; parses back with any `base_dir` when
    /// the paths are absolute.
    pub fn serialize(&self) -> String {
        let mut s = format!("mode = {}\n", self.mode.as_str());
        for l in &self.lexicons {
            let _ = writeln!(s, "lexicon = {}", l.display());
        }
        let _ = writeln!(s, "acoustic_model = {}", self.acoustic_model.display());
        if let Some(g) = &self.g2p_model {
            let _ = writeln!(s, "g2p_model = {}", g.display());
        }
        if let Some(c) = &self.cache_dir {
            let _ = writeln!(s, "cache_dir = {}", c.display());
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let expansion = match self.expansion {
            Expansion::Lexicon => "lexicon",
            Expansion::Vocabulary => "vocabulary",
        };
        let _ = write!(
            s,
            "beam = {}\ng2p_beam = {}\nstrict = {}\nresolve_oov = {}\nexpansion = {expansion}\nmax_lexicon_factor = {}\nseed = {}\njobs = {}\n",
            self.beam, self.g2p_beam, self.strict, self.resolve_oov, self.max_lexicon_factor, self.seed, self.jobs
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_resolves_paths_and_defaults() {
        let text = "# run\nmode = Hybrid\nlexicon = a.txt\nlexicon = b.txt\nacoustic_model = am.txt\noutput_dir = out\nstrict = true # stop early\n";
        let cfg = PipelineConfig::parse(text, Path::new("/w")).unwrap();
        assert_eq!(cfg.mode, Mode::Hybrid);
        assert_eq!(cfg.lexicons, vec![PathBuf::from("/w/a.txt"), PathBuf::from("/w/b.txt")]);
        assert!(cfg.strict && cfg.resolve_oov);
        assert_eq!(cfg.beam, crate::align::DEFAULT_BEAM);
        assert_eq!(
            PipelineConfig::parse(&cfg.serialize(), Path::new("/elsewhere")).unwrap(),
            cfg
        );
    }

    #[test]
    fn parse_errors() {
        let base = "mode = online\nlexicon = a\nacoustic_model = m\noutput_dir = o\n";
        assert!(PipelineConfig::parse(base, Path::new(".")).is_ok());
        for bad in ["colour = red\n", "strict = maybe\n", "mode = sideways\n", "nonsense\n"] {
            assert!(
                PipelineConfig::parse(&format!("{base}{bad}"), Path::new(".")).is_err(),
                "{bad}"
            );
        }
        assert!(PipelineConfig::parse("mode = online\n", Path::new(".")).is_err());
    }
}
