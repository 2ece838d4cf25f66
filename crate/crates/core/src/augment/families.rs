//! Language-family presets used as constrained code-switching pools.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LanguageFamily {
    /// Lookup key, e.g. `indo-aryan`.
    pub name: &'static str,
    pub display_name: &'static str,
    /// `(code, language name)` in registry order.
    pub members: &'static [(&'static str, &'static str)],
}

impl LanguageFamily {
    pub fn codes(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.members.iter().map(|(code, _)| *code)
    }
}

pub static FAMILIES: [LanguageFamily; 6] = [
    LanguageFamily {
        name: "afro-asiatic",
        display_name: "Afro-Asiatic",
        members: &[("ar", "Arabic"), ("am", "Amharic"), ("he", "Hebrew"), ("so", "Somali")],
    },
    LanguageFamily {
        name: "germanic",
        display_name: "Germanic",
        members: &[
            ("de", "German"),
            ("nl", "Dutch"),
            ("da", "Danish"),
            ("sv", "Swedish"),
            ("no", "Norwegian"),
        ],
    },
    LanguageFamily {
        name: "indo-aryan",
        display_name: "Indo-Aryan",
        members: &[
            ("hi", "Hindi"),
            ("bn", "Bengali"),
            ("mr", "Marathi"),
            ("ne", "Nepali"),
            ("gu", "Gujarati"),
            ("pa", "Punjabi"),
        ],
    },
    LanguageFamily {
        name: "romance",
        display_name: "Romance",
        members: &[
            ("es", "Spanish"),
            ("pt", "Portuguese"),
            ("fr", "French"),
            ("it", "Italian"),
            ("ro", "Romanian"),
        ],
    },
    LanguageFamily {
        name: "sino-tibetan-japonic",
        display_name: "Sino-Tibetan & Japonic",
        members: &[("zh-cn", "Chinese"), ("ja", "Japanese"), ("ko", "Korean")],
    },
    LanguageFamily {
        name: "turkic",
        display_name: "Turkic",
        members: &[
            ("tr", "Turkish"),
            ("az", "Azerbaijani"),
            ("ug", "Uyghur"),
            ("kk", "Kazakh"),
        ],
    },
];

/// Languages written without spaces between words.
const SCRIPTIO_CONTINUA: &[&str] = &["zh-cn", "ja"];

pub fn find_family(name: &str) -> Result<&'static LanguageFamily> {
    let key = name.trim().to_ascii_lowercase();
    FAMILIES
        .iter()
        .find(|f| f.name == key)
        .ok_or_else(|| Error::UnknownFamily(name.to_string()))
}

pub fn family_members(name: &str) -> Result<BTreeSet<String>> {
    Ok(find_family(name)?.codes().map(str::to_string).collect())
}

pub fn is_scriptio_continua(code: &str) -> bool {
    SCRIPTIO_CONTINUA.contains(&code)
}
