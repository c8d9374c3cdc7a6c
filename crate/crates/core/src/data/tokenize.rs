const ZWJ: char = '\u{200D}';
const VARIATION_SELECTOR_16: char = '\u{FE0F}';

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF     // mahjong .. symbols & pictographs ext-A
        | 0x2600..=0x27BF     // misc symbols, dingbats
        | 0x2300..=0x23FF     // misc technical (watch, hourglass, ...)
        | 0x2B00..=0x2BFF     // arrows, stars
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0x00A9 | 0x00AE | 0x203C | 0x2049 | 0x2122 | 0x2139
    )
}

fn is_emoji_modifier(c: char) -> bool {
    c == VARIATION_SELECTOR_16 || (0x1F3FB..=0x1F3FF).contains(&(c as u32))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Lowercases and splits `text` into word runs, single punctuation
/// characters, and emoji. An emoji together with its modifiers and any
/// zero-width-joiner continuation forms one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_emoji(c) && !is_word_char(c) {
            let start = i;
            i += 1;
            loop {
                while i < chars.len() && is_emoji_modifier(chars[i]) {
                    i += 1;
                }
                if i + 1 < chars.len() && chars[i] == ZWJ && is_emoji(chars[i + 1]) {
                    i += 2;
                } else {
                    break;
                }
            }
            tokens.push(chars[start..i].iter().collect());
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
    tokens
}
