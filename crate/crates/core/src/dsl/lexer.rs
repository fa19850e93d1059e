//! Line tokenizer. Total: every input yields a (possibly empty) line list.

/// A whitespace-delimited word with its 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub col: usize,
}

impl Token {
    /// Column one past the last character.
    pub fn end_col(&self) -> usize {
        self.col + self.text.chars().count()
    }
}

/// A non-blank, non-comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// 1-based line number in the original text.
    pub line: usize,
    pub raw: String,
    pub tokens: Vec<Token>,
}

pub fn tokenize(text: &str) -> Vec<SourceLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let code = raw.split('#').next().unwrap_or("");
            let mut tokens = Vec::new();
            let mut current: Option<Token> = None;
            for (col, ch) in code.chars().enumerate() {
                if ch.is_whitespace() {
                    tokens.extend(current.take());
                } else {
                    current
                        .get_or_insert_with(|| Token {
                            text: String::new(),
                            col: col + 1,
                        })
                        .text
                        .push(ch);
                }
            }
            tokens.extend(current);
            (!tokens.is_empty()).then(|| SourceLine {
                line: i + 1,
                raw: raw.to_string(),
                tokens,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(l: &SourceLine) -> Vec<&str> {
        l.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn drops_comments_and_blanks() {
        let lines = tokenize("\n# header\npair a a' b b'  # source\n   \nbs 1 4 1' 4'\n");
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].line, 3);
        assert_eq!(words(&lines[0]), ["pair", "a", "a'", "b", "b'"]);
        assert_eq!(lines[1].line, 5);
        assert_eq!(lines[1].tokens.len(), 5);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn columns_are_one_based_characters() {
        let l = &tokenize("  pbs\tα 1")[0];
        assert_eq!(l.tokens[0].col, 3);
        assert_eq!(l.tokens[1].col, 7);
        assert_eq!(l.tokens[1].end_col(), 8);
        assert_eq!(l.tokens[2].col, 9);
    }
}
