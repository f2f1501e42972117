//! Just enough SQL lexing to split scripts into statements and to see which
//! column a table clause (such as `TTL`) is applied to. Not a parser.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub text: String,
    /// 1-based line where the statement starts.
    pub line: usize,
}

impl Statement {
    /// First word, uppercased.
    pub fn keyword(&self) -> String {
        self.text
            .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
            .find(|w| !w.is_empty())
            .unwrap_or("")
            .to_ascii_uppercase()
    }
}

/// Splits on `;` outside quotes, dropping `--` and `/* */` comments.
pub fn split_statements(sql: &str) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start_line = None;
    let mut line = 1;
    let mut chars = sql.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        if c == '\n' {
            line += 1;
        }
        if let Some(q) = quote {
            cur.push(c);
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '-' if chars.peek() == Some(&'-') => {
                for n in chars.by_ref() {
                    if n == '\n' {
                        line += 1;
                        cur.push('\n');
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = ' ';
                for n in chars.by_ref() {
                    if n == '\n' {
                        line += 1;
                    }
                    if prev == '*' && n == '/' {
                        break;
                    }
                    prev = n;
                }
                cur.push(' ');
            }
            ';' => {
                push_stmt(&mut out, &mut cur, start_line.take());
            }
            _ => {
                if c == '\'' || c == '"' || c == '`' {
                    quote = Some(c);
                }
                if start_line.is_none() && !c.is_whitespace() {
                    start_line = Some(line);
                }
                cur.push(c);
            }
        }
    }
    push_stmt(&mut out, &mut cur, start_line);
    out
}

fn push_stmt(out: &mut Vec<Statement>, cur: &mut String, line: Option<usize>) {
    let text = cur.trim().to_string();
    cur.clear();
    if !text.is_empty() {
        out.push(Statement {
            text,
            line: line.unwrap_or(1),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    /// Full type text, e.g. `DateTime64(3)`.
    pub column_type: String,
}

impl Column {
    /// Type name without parameters: `DateTime64(3)` -> `DateTime64`.
    pub fn base_type(&self) -> &str {
        base_type(&self.column_type)
    }
}

pub fn base_type(t: &str) -> &str {
    t.split('(').next().unwrap_or(t).trim()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseUse {
    pub table: String,
    pub clause: String,
    pub column: Column,
    /// The clause expression starts with the bare column rather than a
    /// function applied to it.
    pub direct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateTable {
    pub name: String,
    pub columns: Vec<Column>,
    /// Everything after the column list.
    pub tail: String,
    /// Per-column trailing text after the type (defaults, codecs, TTL).
    column_tails: Vec<String>,
}

pub fn create_tables(sql: &str) -> Vec<CreateTable> {
    split_statements(sql)
        .iter()
        .filter_map(|s| parse_create_table(&s.text))
        .collect()
}

fn parse_create_table(stmt: &str) -> Option<CreateTable> {
    let words: Vec<&str> = stmt.split_whitespace().take(2).collect();
    if words.len() < 2
        || !words[0].eq_ignore_ascii_case("CREATE")
        || !words[1].eq_ignore_ascii_case("TABLE")
    {
        return None;
    }
    let open = stmt.find('(')?;
    let head = &stmt[..open];
    let name = head
        .split_whitespace()
        .filter(|w| {
            !["CREATE", "TABLE", "IF", "NOT", "EXISTS"]
                .iter()
                .any(|k| w.eq_ignore_ascii_case(k))
        })
        .last()?
        .trim_matches('`')
        .to_string();
    let close = matching_paren(stmt, open)?;
    let mut columns = Vec::new();
    let mut column_tails = Vec::new();
    for def in split_top_level(&stmt[open + 1..close], ',') {
        let def = def.trim();
        let first = def.split_whitespace().next().unwrap_or("");
        if first.is_empty()
            || ["INDEX", "PRIMARY", "CONSTRAINT", "PROJECTION", "UNIQUE", "FOREIGN"]
                .iter()
                .any(|k| first.eq_ignore_ascii_case(k))
        {
            continue;
        }
        let rest = def[first.len()..].trim_start();
        let type_len = type_extent(rest);
        columns.push(Column {
            name: first.trim_matches('`').trim_matches('"').to_string(),
            column_type: rest[..type_len].trim().to_string(),
        });
        column_tails.push(rest[type_len..].to_string());
    }
    Some(CreateTable {
        name,
        columns,
        tail: stmt[close + 1..].to_string(),
        column_tails,
    })
}

/// Length of the leading type expression: an identifier plus an optional
/// balanced parameter list.
fn type_extent(s: &str) -> usize {
    let ident = s
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(s.len());
    if s[ident..].starts_with('(') {
        matching_paren(s, ident).map(|c| c + 1).unwrap_or(s.len())
    } else {
        ident
    }
}

fn matching_paren(s: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote = None;
    for (i, c) in s.char_indices().skip_while(|(i, _)| *i < open) {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"' | '`') => quote = Some(c),
            (None, '(') => depth += 1,
            (None, ')') => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '\'' | '"' | '`') => quote = Some(c),
            (None, '(') => depth += 1,
            (None, ')') => depth -= 1,
            (None, c) if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Every place `clause` (e.g. `TTL`) is applied in a CREATE TABLE of `sql`,
/// both table-level and column-level, with the column it refers to.
pub fn clause_uses(sql: &str, clause: &str) -> Vec<ClauseUse> {
    let mut out = Vec::new();
    for t in create_tables(sql) {
        let mut exprs: Vec<&str> = find_clause_exprs(&t.tail, clause);
        for (col, tail) in t.columns.iter().zip(&t.column_tails) {
            for e in find_clause_exprs(tail, clause) {
                // Column-level clauses may also name the column implicitly.
                if leading_ident(e).is_none() {
                    out.push(ClauseUse {
                        table: t.name.clone(),
                        clause: clause.to_string(),
                        column: col.clone(),
                        direct: true,
                    });
                }
                exprs.push(e);
            }
        }
        for e in exprs {
            let Some((ident, after)) = leading_ident(e) else {
                continue;
            };
            let direct = !after.trim_start().starts_with('(');
            let referenced = if direct {
                Some(ident)
            } else {
                // Look through the wrapper for the first column mentioned.
                e.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                    .find(|w| t.columns.iter().any(|c| c.name == *w))
            };
            if let Some(col) = referenced.and_then(|r| t.columns.iter().find(|c| c.name == r)) {
                out.push(ClauseUse {
                    table: t.name.clone(),
                    clause: clause.to_string(),
                    column: col.clone(),
                    direct,
                });
            }
        }
    }
    out
}

fn leading_ident(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    let end = s
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(s.len());
    if end == 0 || s.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    Some((&s[..end], &s[end..]))
}

/// Expression texts following each whole-word occurrence of `clause`,
/// running to the next top-level clause keyword or the end.
fn find_clause_exprs<'a>(text: &'a str, clause: &str) -> Vec<&'a str> {
    const STOPS: [&str; 8] = [
        "ENGINE", "ORDER", "PARTITION", "PRIMARY", "SAMPLE", "SETTINGS", "TTL", "COMMENT",
    ];
    let upper = text.to_ascii_uppercase();
    let clause = clause.to_ascii_uppercase();
    let is_word = |i: usize, len: usize| {
        let before = i == 0 || !is_ident_byte(upper.as_bytes()[i - 1]);
        let after = i + len >= upper.len() || !is_ident_byte(upper.as_bytes()[i + len]);
        before && after
    };
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(off) = upper[from..].find(&clause) {
        let i = from + off;
        from = i + clause.len();
        if !is_word(i, clause.len()) {
            continue;
        }
        let start = i + clause.len();
        let end = STOPS
            .iter()
            .filter_map(|k| {
                let mut j = start;
                while let Some(o) = upper[j..].find(k) {
                    let at = j + o;
                    if is_word(at, k.len()) {
                        return Some(at);
                    }
                    j = at + k.len();
                }
                None
            })
            .min()
            .unwrap_or(text.len());
        out.push(text[start..end].trim());
    }
    out
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}
