//! The original Porter (1980) suffix-stripping algorithm.
//!
//! Operates on lowercase ASCII words; anything else is returned unchanged.

/// Porter-stems a single lowercase token.
pub fn stem(word: &str) -> String {
    if word.is_empty() || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_owned();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    String::from_utf8(w).expect("ascii")
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of VC sequences in `w`, i.e. m in [C](VC)^m[V].
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let c = is_consonant(w, i);
        if c && prev_vowel {
            m += 1;
        }
        prev_vowel = !c;
    }
    m
}

fn contains_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// *o: stem ends consonant-vowel-consonant, last consonant not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn stem_of<'a>(w: &'a [u8], suffix: &str) -> Option<&'a [u8]> {
    w.strip_suffix(suffix.as_bytes())
}

fn replace(w: &mut Vec<u8>, suffix_len: usize, with: &str) {
    w.truncate(w.len() - suffix_len);
    w.extend_from_slice(with.as_bytes());
}

/// Applies the first rule whose suffix matches, if its condition holds on the
/// stem. Rule lists are ordered so that longer suffixes come first.
fn apply_rules(w: &mut Vec<u8>, rules: &[(&str, &str)], cond: impl Fn(&[u8], &str) -> bool) -> bool {
    for &(suffix, with) in rules {
        if let Some(stem) = stem_of(w, suffix) {
            if cond(stem, suffix) {
                replace(w, suffix.len(), with);
                return true;
            }
            return false;
        }
    }
    false
}

fn step1a(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")],
        |_, _| true,
    );
}

fn step1b(w: &mut Vec<u8>) {
    if let Some(stem) = stem_of(w, "eed") {
        if measure(stem) > 0 {
            w.pop();
        }
        return;
    }
    let mut stripped = false;
    for suffix in ["ed", "ing"] {
        if let Some(stem) = stem_of(w, suffix) {
            if contains_vowel(stem) {
                w.truncate(stem.len());
                stripped = true;
            }
            break;
        }
    }
    if !stripped {
        return;
    }
    if w.ends_with(b"at") || w.ends_with(b"bl") || w.ends_with(b"iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) && !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
        w.pop();
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step1c(w: &mut Vec<u8>) {
    if let Some(stem) = stem_of(w, "y") {
        if contains_vowel(stem) {
            let n = w.len();
            w[n - 1] = b'i';
        }
    }
}

const STEP2: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
];

const STEP3: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

const STEP4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou",
    "ism", "ate", "iti", "ous", "ive", "ize",
];

fn longest_first(rules: &[(&'static str, &'static str)]) -> Vec<(&'static str, &'static str)> {
    let mut sorted = rules.to_vec();
    sorted.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
    sorted
}

fn step2(w: &mut Vec<u8>) {
    apply_rules(w, &longest_first(STEP2), |stem, _| measure(stem) > 0);
}

fn step3(w: &mut Vec<u8>) {
    apply_rules(w, &longest_first(STEP3), |stem, _| measure(stem) > 0);
}

fn step4(w: &mut Vec<u8>) {
    let rules: Vec<(&str, &str)> = STEP4.iter().map(|s| (*s, "")).collect();
    apply_rules(w, &longest_first(&rules), |stem, suffix| {
        if measure(stem) <= 1 {
            return false;
        }
        suffix != "ion" || matches!(stem.last(), Some(b's' | b't'))
    });
}

fn step5a(w: &mut Vec<u8>) {
    if let Some(stem) = stem_of(w, "e") {
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.pop();
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if measure(w) > 1 && ends_double_consonant(w) && w.ends_with(b"l") {
        w.pop();
    }
}
