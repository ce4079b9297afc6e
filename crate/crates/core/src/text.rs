//! Tokenization and lexical-unit extraction shared by the baseline providers
//! and the novelty metrics.

use std::collections::BTreeSet;

use unicode_segmentation::UnicodeSegmentation;

const STOPWORDS: &[&str] = &[
    // English
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "don", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "let", "ll", "me", "might", "more", "most", "must", "my", "myself", "no",
    "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "re", "s", "same", "shall", "she", "should", "so", "some",
    "such", "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "us", "ve",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "would", "yes", "you", "your", "yours", "yourself", "yourselves",
    // Chinese function characters
    "的", "了", "是", "在", "和", "也", "就", "都", "而", "及", "与", "着", "或", "我", "你", "他",
    "她", "它", "们", "这", "那", "吗", "呢", "吧", "啊", "把", "被", "给", "对", "很", "还", "有",
    "个", "一", "不", "没",
];

/// Unicode word tokens, case-folded.
pub fn tokens(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Suffix-stripping lemmatizer for ASCII Latin tokens; identity elsewhere.
pub fn lemmatize(token: &str) -> String {
    if !token.chars().all(|c| c.is_ascii_alphabetic()) {
        return token.to_owned();
    }
    let n = token.len();
    if n >= 5 && token.ends_with("ies") {
        return format!("{}y", &token[..n - 3]);
    }
    if token.ends_with("sses") {
        return token[..n - 2].to_owned();
    }
    if n >= 6 && token.ends_with("ing") {
        return token[..n - 3].to_owned();
    }
    if n >= 5 && token.ends_with("ed") {
        return token[..n - 2].to_owned();
    }
    if n >= 4
        && token.ends_with('s')
        && !token.ends_with("ss")
        && !token.ends_with("us")
        && !token.ends_with("is")
    {
        return token[..n - 1].to_owned();
    }
    token.to_owned()
}

/// Lemmas of the non-stopword tokens, in order, with repeats.
pub fn content_lemmas(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .map(|t| lemmatize(&t))
        .collect()
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Content lemmas, bigrams of adjacent content words (`a_b`) and named
/// entities approximated by runs of two or more capitalized content words.
pub fn lexical_units(text: &str) -> BTreeSet<String> {
    let words: Vec<&str> = text.unicode_words().collect();
    let mut units = BTreeSet::new();
    let mut prev: Option<String> = None;
    let mut run: Vec<String> = Vec::new();

    let flush = |run: &mut Vec<String>, units: &mut BTreeSet<String>| {
        if run.len() >= 2 {
            units.insert(run.join(" "));
        }
        run.clear();
    };

    for w in words {
        let folded = w.to_lowercase();
        if is_stopword(&folded) {
            prev = None;
            flush(&mut run, &mut units);
            continue;
        }
        let lemma = lemmatize(&folded);
        if let Some(p) = &prev {
            units.insert(format!("{p}_{lemma}"));
        }
        if is_capitalized(w) {
            run.push(folded);
        } else {
            flush(&mut run, &mut units);
        }
        units.insert(lemma.clone());
        prev = Some(lemma);
    }
    flush(&mut run, &mut units);
    units
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cache_hit_rate_units() {
        assert_eq!(
            lexical_units("The cache hit rate"),
            set(&["cache", "hit", "rate", "cache_hit", "hit_rate"])
        );
    }

    #[test]
    fn stopwords_only_is_empty() {
        assert!(lexical_units("and the of it is").is_empty());
    }

    #[test]
    fn repeated_word_counted_once() {
        assert_eq!(lexical_units("cache, cache"), set(&["cache", "cache_cache"]));
        assert_eq!(lexical_units("cache. The cache"), set(&["cache"]));
    }

    #[test]
    fn named_entity_runs() {
        let u = lexical_units("we met Grace Hopper today");
        assert!(u.contains("grace hopper"));
        assert!(u.contains("grace_hopper"));
        assert!(u.contains("met"));
    }

    #[test]
    fn lemmatizer_rules() {
        assert_eq!(lemmatize("queries"), "query");
        assert_eq!(lemmatize("classes"), "class");
        assert_eq!(lemmatize("caches"), "cache");
        assert_eq!(lemmatize("status"), "status");
        assert_eq!(lemmatize("analysis"), "analysis");
        assert_eq!(lemmatize("running"), "runn");
        assert_eq!(lemmatize("sing"), "sing");
        assert_eq!(lemmatize("tested"), "test");
        assert_eq!(lemmatize("red"), "red");
        assert_eq!(lemmatize("数据"), "数据");
    }

    #[test]
    fn case_folding_and_cjk() {
        assert_eq!(tokens("Hello WORLD"), vec!["hello", "world"]);
        let t = tokens("我们讨论数据");
        assert!(!t.is_empty());
        assert!(content_lemmas("我们讨论数据").iter().all(|t| t != "我" && t != "们"));
    }
}
