//! Snowball stemmers behind the core [`Stemmer`] trait.

use domcf_core::{Error, IdentityStemmer, Result, Stemmer};
use rust_stemmers::Algorithm;

pub struct SnowballStemmer {
    inner: rust_stemmers::Stemmer,
}

impl SnowballStemmer {
    pub fn english() -> Self {
        Self::new(Algorithm::English)
    }

    pub fn new(algorithm: Algorithm) -> Self {
        SnowballStemmer {
            inner: rust_stemmers::Stemmer::create(algorithm),
        }
    }
}

impl Stemmer for SnowballStemmer {
    fn stem(&self, word: &str) -> String {
        self.inner.stem(word).into_owned()
    }
}

/// Resolve a stemmer identifier such as `snowball-english` or `none`.
pub fn stemmer_for(id: &str) -> Result<Box<dyn Stemmer>> {
    let id = id.to_ascii_lowercase();
    if id == "none" || id == "identity" {
        return Ok(Box::new(IdentityStemmer));
    }
    let lang = id.strip_prefix("snowball-").unwrap_or(&id);
    let algorithm = match lang {
        "arabic" => Algorithm::Arabic,
        "danish" => Algorithm::Danish,
        "dutch" => Algorithm::Dutch,
        "english" => Algorithm::English,
        "finnish" => Algorithm::Finnish,
        "french" => Algorithm::French,
        "german" => Algorithm::German,
        "greek" => Algorithm::Greek,
        "hungarian" => Algorithm::Hungarian,
        "italian" => Algorithm::Italian,
        "norwegian" => Algorithm::Norwegian,
        "portuguese" => Algorithm::Portuguese,
        "romanian" => Algorithm::Romanian,
        "russian" => Algorithm::Russian,
        "spanish" => Algorithm::Spanish,
        "swedish" => Algorithm::Swedish,
        "tamil" => Algorithm::Tamil,
        "turkish" => Algorithm::Turkish,
        _ => return Err(Error::Config(format!("unknown stemmer {id:?}"))),
    };
    Ok(Box::new(SnowballStemmer::new(algorithm)))
}
