//! French cardinal numbers in words.
//!
//! Conventional orthography (hyphenated tens-units, "et un", plural "vingts" /
//! "cents" only when final) except for 80-99, which follow the curated
//! corpus style: "quatre vingt" is written without a hyphen and joined to the
//! remainder by a space ("quatre vingt dix-sept", "quatre vingt un").

pub const MAX_SPELLED: u32 = 999_999;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0} is out of range for spelling (0..=999999)")]
pub struct OutOfRange(pub u64);

const UNITS: [&str; 20] = [
    "zéro", "un", "deux", "trois", "quatre", "cinq", "six", "sept", "huit", "neuf", "dix", "onze", "douze", "treize",
    "quatorze", "quinze", "seize", "dix-sept", "dix-huit", "dix-neuf",
];

const TENS: [&str; 7] = ["", "", "vingt", "trente", "quarante", "cinquante", "soixante"];

/// `plural` is false when the number multiplies "mille" ("quatre vingt mille").
fn below_100(n: u32, plural: bool) -> String {
    debug_assert!(n < 100);
    match n {
        0..=19 => UNITS[n as usize].to_string(),
        20..=69 => {
            let (t, u) = ((n / 10) as usize, n % 10);
            match u {
                0 => TENS[t].to_string(),
                1 => format!("{} et un", TENS[t]),
                _ => format!("{}-{}", TENS[t], UNITS[u as usize]),
            }
        }
        70 => "soixante-dix".to_string(),
        71 => "soixante et onze".to_string(),
        72..=79 => format!("soixante-{}", UNITS[(n - 60) as usize]),
        80 if plural => "quatre vingts".to_string(),
        80 => "quatre vingt".to_string(),
        _ => format!("quatre vingt {}", UNITS[(n - 80) as usize]),
    }
}

fn below_1000(n: u32, plural: bool) -> String {
    debug_assert!(n < 1000);
    let (h, rest) = (n / 100, n % 100);
    let head = match h {
        0 => return below_100(rest, plural),
        1 => "cent".to_string(),
        _ if rest == 0 && plural => format!("{} cents", UNITS[h as usize]),
        _ => format!("{} cent", UNITS[h as usize]),
    };
    if rest == 0 {
        head
    } else {
        format!("{head} {}", below_100(rest, plural))
    }
}

/// Spells `n` in French words. Accepts `0..=999_999`.
pub fn spell_number_fr(n: u64) -> Result<String, OutOfRange> {
    if n > MAX_SPELLED as u64 {
        return Err(OutOfRange(n));
    }
    let n = n as u32;
    let (thousands, rest) = (n / 1000, n % 1000);
    let words = match thousands {
        0 => below_1000(rest, true),
        _ => {
            let head = if thousands == 1 {
                "mille".to_string()
            } else {
                format!("{} mille", below_1000(thousands, false))
            };
            if rest == 0 {
                head
            } else {
                format!("{head} {}", below_1000(rest, true))
            }
        }
    };
    Ok(words)
}
