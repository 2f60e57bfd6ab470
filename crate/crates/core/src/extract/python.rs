//! Bundled Python front end: a tokenizer that follows the language's lexical
//! rules (indentation, implicit line joining, string literals) and a block
//! parser that recovers functions, classes, docstrings and imports.
//!
//! It does not build a full expression grammar; the analyses it serves only
//! need statement structure plus the token stream.

use super::{CallSite, NodeKind, Outline, OutlineNode, ParseError, SourceParser};

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "@=",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokKind {
    Name,
    Number,
    Str,
    Op,
    Newline,
    Indent,
    Dedent,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub end_line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    fn is(&self, src: &str, kind: TokKind, text: &str) -> bool {
        self.kind == kind && self.text(src) == text
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    indents: Vec<usize>,
    brackets: Vec<(char, usize)>,
    at_line_start: bool,
    line_has_tokens: bool,
    tokens: Vec<Token>,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer {
        src,
        pos: 0,
        line: 1,
        indents: vec![0],
        brackets: Vec::new(),
        at_line_start: true,
        line_has_tokens: false,
        tokens: Vec::new(),
    };
    lexer.run()?;
    Ok(lexer.tokens)
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            message: message.into(),
        }
    }

    fn push(&mut self, kind: TokKind, start: usize, line: usize) {
        self.tokens.push(Token {
            kind,
            start,
            end: self.pos,
            line,
            end_line: self.line,
        });
        if !matches!(kind, TokKind::Newline | TokKind::Indent | TokKind::Dedent) {
            self.line_has_tokens = true;
        }
    }

    fn run(&mut self) -> Result<(), ParseError> {
        loop {
            if self.at_line_start && self.brackets.is_empty() {
                if !self.handle_indentation()? {
                    break;
                }
                continue;
            }
            let Some(c) = self.peek() else { break };
            match c {
                ' ' | '\t' | '\x0c' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\n' => {
                    let line = self.line;
                    let start = self.pos;
                    if self.brackets.is_empty() {
                        if self.line_has_tokens {
                            self.bump();
                            self.tokens.push(Token {
                                kind: TokKind::Newline,
                                start,
                                end: start,
                                line,
                                end_line: line,
                            });
                            self.line_has_tokens = false;
                        } else {
                            self.bump();
                        }
                        self.at_line_start = true;
                    } else {
                        self.bump();
                    }
                }
                '\\' => {
                    self.bump();
                    if self.peek() == Some('\r') {
                        self.bump();
                    }
                    if self.peek() != Some('\n') {
                        return Err(self.err("unexpected character after line continuation"));
                    }
                    self.bump();
                }
                '"' | '\'' => self.string(self.pos, self.line)?,
                c if c.is_alphabetic() || c == '_' => self.name()?,
                c if c.is_ascii_digit() => self.number(),
                '.' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number(),
                _ => self.op()?,
            }
        }
        if let Some((open, line)) = self.brackets.last() {
            return Err(ParseError {
                line: *line,
                message: format!("unclosed '{open}'"),
            });
        }
        if self.line_has_tokens {
            let (start, line) = (self.pos, self.line);
            self.tokens.push(Token {
                kind: TokKind::Newline,
                start,
                end: start,
                line,
                end_line: line,
            });
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            let (start, line) = (self.pos, self.line);
            self.tokens.push(Token {
                kind: TokKind::Dedent,
                start,
                end: start,
                line,
                end_line: line,
            });
        }
        Ok(())
    }

    /// Returns false at end of input.
    fn handle_indentation(&mut self) -> Result<bool, ParseError> {
        let line_start = self.pos;
        let mut col = 0usize;
        while let Some(c) = self.peek() {
            match c {
                ' ' => col += 1,
                '\t' => col = (col / 8 + 1) * 8,
                '\x0c' => col = 0,
                _ => break,
            }
            self.bump();
        }
        match self.peek() {
            None => return Ok(false),
            Some('\n') | Some('#') | Some('\r') => {
                // Blank and comment-only lines carry no indentation.
                while let Some(c) = self.peek() {
                    self.bump();
                    if c == '\n' {
                        break;
                    }
                }
                return Ok(self.pos < self.src.len());
            }
            _ => {}
        }
        let current = *self.indents.last().unwrap_or(&0);
        if col > current {
            self.indents.push(col);
            self.tokens.push(Token {
                kind: TokKind::Indent,
                start: line_start,
                end: self.pos,
                line: self.line,
                end_line: self.line,
            });
        } else if col < current {
            while *self.indents.last().unwrap_or(&0) > col {
                self.indents.pop();
                self.tokens.push(Token {
                    kind: TokKind::Dedent,
                    start: self.pos,
                    end: self.pos,
                    line: self.line,
                    end_line: self.line,
                });
            }
            if *self.indents.last().unwrap_or(&0) != col {
                return Err(self.err("unindent does not match any outer indentation level"));
            }
        }
        self.at_line_start = false;
        Ok(true)
    }

    fn name(&mut self) -> Result<(), ParseError> {
        let (start, line) = (self.pos, self.line);
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        let word = &self.src[start..self.pos];
        let is_prefix = word.len() <= 2
            && word.chars().all(|c| "rRbBuUfF".contains(c))
            && matches!(self.peek(), Some('"') | Some('\''));
        if is_prefix {
            return self.string(start, line);
        }
        self.push(TokKind::Name, start, line);
        Ok(())
    }

    fn number(&mut self) {
        let (start, line) = (self.pos, self.line);
        let mut prev = ' ';
        while let Some(c) = self.peek() {
            let exponent_sign = (c == '+' || c == '-')
                && (prev == 'e' || prev == 'E')
                && !self.src[start..self.pos].starts_with("0x")
                && !self.src[start..self.pos].starts_with("0X");
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || exponent_sign {
                prev = c;
                self.bump();
            } else {
                break;
            }
        }
        self.push(TokKind::Number, start, line);
    }

    fn string(&mut self, start: usize, line: usize) -> Result<(), ParseError> {
        let quote = self.bump().ok_or_else(|| self.err("expected quote"))?;
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        loop {
            let Some(c) = self.bump() else {
                return Err(ParseError {
                    line,
                    message: "unterminated string literal".into(),
                });
            };
            match c {
                '\\' => {
                    self.bump();
                }
                '\n' if !triple => {
                    return Err(ParseError {
                        line,
                        message: "unterminated string literal".into(),
                    });
                }
                c if c == quote => {
                    if !triple {
                        break;
                    }
                    if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                        self.bump();
                        self.bump();
                        break;
                    }
                }
                _ => {}
            }
        }
        self.push(TokKind::Str, start, line);
        Ok(())
    }

    fn op(&mut self) -> Result<(), ParseError> {
        let (start, line) = (self.pos, self.line);
        let rest = &self.src[self.pos..];
        if let Some(op) = OPS3.iter().chain(OPS2).find(|op| rest.starts_with(**op)) {
            self.pos += op.len();
            self.push(TokKind::Op, start, line);
            return Ok(());
        }
        let c = self.bump().unwrap_or(' ');
        match c {
            '(' | '[' | '{' => self.brackets.push((c, line)),
            ')' | ']' | '}' => {
                let expected = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match self.brackets.pop() {
                    Some((open, _)) if open == expected => {}
                    _ => return Err(self.err(format!("unmatched '{c}'"))),
                }
            }
            '+' | '-' | '*' | '/' | '%' | '@' | '&' | '|' | '^' | '~' | '<' | '>' | '=' | '.'
            | ',' | ':' | ';' | '!' => {}
            other => return Err(self.err(format!("invalid character {other:?}"))),
        }
        self.push(TokKind::Op, start, line);
        Ok(())
    }
}

/// One logical statement and, for compound statements, its indented body.
#[derive(Debug)]
struct Stmt {
    first: usize,
    /// Index one past the last token of the logical line (excluding NEWLINE).
    last: usize,
    children: Vec<Stmt>,
}

struct BlockParser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> BlockParser<'t> {
    fn block(&mut self) -> Vec<Stmt> {
        let mut stmts = Vec::new();
        while let Some(tok) = self.tokens.get(self.pos) {
            match tok.kind {
                TokKind::Dedent => {
                    self.pos += 1;
                    return stmts;
                }
                TokKind::Indent => {
                    // Stray indentation (e.g. an indented snippet); flatten it.
                    self.pos += 1;
                    let nested = self.block();
                    stmts.extend(nested);
                }
                TokKind::Newline => self.pos += 1,
                _ => stmts.push(self.statement()),
            }
        }
        stmts
    }

    fn statement(&mut self) -> Stmt {
        let first = self.pos;
        while let Some(tok) = self.tokens.get(self.pos) {
            if tok.kind == TokKind::Newline {
                break;
            }
            self.pos += 1;
        }
        let last = self.pos;
        if self.pos < self.tokens.len() {
            self.pos += 1; // NEWLINE
        }
        let mut children = Vec::new();
        if self.tokens.get(self.pos).map(|t| t.kind) == Some(TokKind::Indent) {
            self.pos += 1;
            children = self.block();
        }
        Stmt {
            first,
            last,
            children,
        }
    }
}

fn stmt_end_line(tokens: &[Token], stmt: &Stmt) -> usize {
    let own = tokens[stmt.first..stmt.last]
        .iter()
        .map(|t| t.end_line)
        .max()
        .unwrap_or(tokens[stmt.first].line);
    stmt.children
        .iter()
        .map(|c| stmt_end_line(tokens, c))
        .max()
        .map_or(own, |c| c.max(own))
}

/// Index of the `:` that closes a `def`/`class` header.
fn header_colon(src: &str, tokens: &[Token], stmt: &Stmt) -> Option<usize> {
    let mut depth = 0i32;
    for (i, tok) in tokens.iter().enumerate().take(stmt.last).skip(stmt.first) {
        if tok.kind != TokKind::Op {
            continue;
        }
        match tok.text(src) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":" if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

fn normalize_ws(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.replace("( ", "(").replace(" )", ")").replace("[ ", "[").replace(" ]", "]")
}

fn docstring(src: &str, tokens: &[Token], body: &[Stmt]) -> Option<String> {
    let first = body.first()?;
    let toks = &tokens[first.first..first.last];
    if !toks.is_empty() && toks.iter().all(|t| t.kind == TokKind::Str) {
        Some(src[toks[0].start..toks[toks.len() - 1].end].to_string())
    } else {
        None
    }
}

fn collect_nodes(
    src: &str,
    tokens: &[Token],
    stmts: &[Stmt],
    lines: &[&str],
    out: &mut Vec<OutlineNode>,
) {
    let mut decorator_start: Option<usize> = None;
    for stmt in stmts {
        let toks = &tokens[stmt.first..stmt.last];
        let Some(head) = toks.first() else { continue };
        if head.is(src, TokKind::Op, "@") {
            decorator_start.get_or_insert(head.line);
            continue;
        }
        let (kind, name_idx) = if head.is(src, TokKind::Name, "def") {
            (Some(NodeKind::Function), 1)
        } else if head.is(src, TokKind::Name, "async")
            && toks.get(1).is_some_and(|t| t.is(src, TokKind::Name, "def"))
        {
            (Some(NodeKind::Function), 2)
        } else if head.is(src, TokKind::Name, "class") {
            (Some(NodeKind::Class), 1)
        } else {
            (None, 0)
        };
        let start_line = decorator_start.take().unwrap_or(head.line);
        match (kind, toks.get(name_idx)) {
            (Some(kind), Some(name_tok)) if name_tok.kind == TokKind::Name => {
                let colon = header_colon(src, tokens, stmt).unwrap_or(stmt.last);
                let colon_start = tokens.get(colon).map_or(src.len(), |t| t.start);
                let signature = normalize_ws(&src[name_tok.start..colon_start]);
                let header = normalize_ws(&src[head.start..colon_start]);
                let mut node = OutlineNode {
                    kind,
                    name: name_tok.text(src).to_string(),
                    signature,
                    header,
                    start_line,
                    header_line: head.line,
                    end_line: stmt_end_line(tokens, stmt),
                    indent: leading_ws(lines.get(head.line - 1).copied().unwrap_or("")),
                    docstring: docstring(src, tokens, &stmt.children),
                    children: Vec::new(),
                };
                collect_nodes(src, tokens, &stmt.children, lines, &mut node.children);
                out.push(node);
            }
            _ => {
                // Compound statements such as `if`/`try` may still contain
                // definitions; attach those to the current parent.
                collect_nodes(src, tokens, &stmt.children, lines, out);
            }
        }
    }
}

fn leading_ws(line: &str) -> String {
    line.chars().take_while(|c| *c == ' ' || *c == '\t').collect()
}

fn imports(src: &str, tokens: &[Token], stmts: &[Stmt]) -> Vec<String> {
    stmts
        .iter()
        .filter_map(|stmt| {
            let toks = &tokens[stmt.first..stmt.last];
            let head = toks.first()?;
            if head.kind == TokKind::Name && matches!(head.text(src), "import" | "from") {
                Some(src[head.start..toks[toks.len() - 1].end].to_string())
            } else {
                None
            }
        })
        .collect()
}

/// Remove the common leading indentation of all non-blank lines.
pub(crate) fn dedent(code: &str) -> String {
    let indent = code
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(leading_ws)
        .min_by_key(|s| s.len())
        .unwrap_or_default();
    code.split_inclusive('\n')
        .map(|l| l.strip_prefix(indent.as_str()).unwrap_or(l.trim_start_matches([' ', '\t'])))
        .collect()
}

/// Tokens of the function body: everything after the header colon.
fn body_tokens<'t>(src: &str, tokens: &'t [Token]) -> &'t [Token] {
    let mut depth = 0i32;
    let mut seen_def = false;
    for (i, tok) in tokens.iter().enumerate() {
        if tok.is(src, TokKind::Name, "def") {
            seen_def = true;
        }
        if !seen_def || tok.kind != TokKind::Op {
            continue;
        }
        match tok.text(src) {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":" if depth == 0 => return &tokens[i + 1..],
            _ => {}
        }
    }
    tokens
}

/// Python grammar-backed implementation of [`SourceParser`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PythonParser;

impl SourceParser for PythonParser {
    fn language(&self) -> &'static str {
        "python"
    }

    fn outline(&self, source: &str) -> Result<Outline, ParseError> {
        let tokens = tokenize(source)?;
        let stmts = BlockParser {
            tokens: &tokens,
            pos: 0,
        }
        .block();
        let lines: Vec<&str> = source.lines().collect();
        let mut nodes = Vec::new();
        collect_nodes(source, &tokens, &stmts, &lines, &mut nodes);
        Ok(Outline {
            nodes,
            imports: imports(source, &tokens, &stmts),
            line_count: lines.len(),
        })
    }

    fn decision_points(&self, function_code: &str) -> Result<usize, ParseError> {
        let code = dedent(function_code);
        let tokens = tokenize(&code)?;
        let mut count = 0;
        let mut line_start = true;
        for (i, tok) in tokens.iter().enumerate() {
            match tok.kind {
                TokKind::Newline | TokKind::Indent | TokKind::Dedent => {
                    line_start = true;
                    continue;
                }
                TokKind::Name => {
                    let text = tok.text(&code);
                    let statement_head = line_start
                        || (i > 0 && tokens[i - 1].is(&code, TokKind::Name, "async") && {
                            // `async for` at the start of a statement
                            i < 2 || matches!(tokens[i - 2].kind, TokKind::Newline | TokKind::Indent | TokKind::Dedent)
                        });
                    match text {
                        "if" | "elif" | "while" | "and" | "or" | "except" => count += 1,
                        "for" if statement_head => count += 1,
                        _ => {}
                    }
                }
                _ => {}
            }
            line_start = false;
        }
        Ok(count)
    }

    fn call_sites(&self, function_code: &str) -> Result<Vec<CallSite>, ParseError> {
        let code = dedent(function_code);
        let tokens = tokenize(&code)?;
        let body = body_tokens(&code, &tokens);
        let mut sites: Vec<CallSite> = Vec::new();
        for i in 0..body.len() {
            let tok = body[i];
            if tok.kind != TokKind::Name {
                continue;
            }
            let next_is_call = body.get(i + 1).is_some_and(|t| t.is(&code, TokKind::Op, "("));
            if !next_is_call {
                continue;
            }
            let name = tok.text(&code);
            if KEYWORDS.contains(&name) {
                continue;
            }
            let prev = i.checked_sub(1).map(|j| body[j]);
            let site = match prev {
                Some(p) if p.is(&code, TokKind::Op, ".") => {
                    let receiver = i.checked_sub(2).map(|j| body[j]);
                    let chained = i.checked_sub(3).is_some_and(|j| body[j].is(&code, TokKind::Op, "."));
                    match receiver {
                        Some(r) if r.kind == TokKind::Name && !chained && matches!(r.text(&code), "self" | "cls") => {
                            CallSite {
                                receiver: Some(r.text(&code).to_string()),
                                name: name.to_string(),
                            }
                        }
                        _ => continue,
                    }
                }
                Some(p) if p.is(&code, TokKind::Name, "def") || p.is(&code, TokKind::Name, "class") => continue,
                _ => CallSite {
                    receiver: None,
                    name: name.to_string(),
                },
            };
            if !sites.contains(&site) {
                sites.push(site);
            }
        }
        Ok(sites)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokKind> {
        tokenize(src).unwrap().iter().map(|t| t.kind).collect()
    }

    #[test]
    fn indentation_tokens() {
        use TokKind::*;
        let src = "def f(x):\n    if x:\n        return 1\n    return 2\n";
        assert_eq!(
            kinds(src),
            vec![
                Name, Name, Op, Name, Op, Op, Newline, Indent, Name, Name, Op, Newline, Indent, Name,
                Number, Newline, Dedent, Name, Number, Newline, Dedent
            ]
        );
    }

    #[test]
    fn implicit_joining_and_comments() {
        let src = "x = (1,\n   # comment\n     2)\n# trailing\ny = 'a#b'\n";
        let toks = tokenize(src).unwrap();
        let newlines = toks.iter().filter(|t| t.kind == TokKind::Newline).count();
        assert_eq!(newlines, 2);
        assert!(toks.iter().any(|t| t.text(src) == "'a#b'"));
    }

    #[test]
    fn triple_quoted_strings_span_lines() {
        let src = "s = \"\"\"one\nif two\"\"\"\nt = rb'x'\n";
        let toks = tokenize(src).unwrap();
        let s = toks.iter().find(|t| t.kind == TokKind::Str).unwrap();
        assert_eq!((s.line, s.end_line), (1, 2));
        assert!(toks.iter().any(|t| t.kind == TokKind::Str && t.text(src) == "rb'x'"));
    }

    #[test]
    fn lexical_errors() {
        assert_eq!(tokenize("x = 'abc\n").unwrap_err().line, 1);
        assert_eq!(tokenize("x = (1,\n2\n").unwrap_err().message, "unclosed '('");
        assert!(tokenize("x = 1)\n").is_err());
        assert!(tokenize("if x:\n        a\n    b\n").is_err());
        assert!(tokenize("s = '''abc\n").is_err());
    }

    #[test]
    fn outline_finds_methods_and_decorators() {
        let src = "import os\nfrom a import (b,\n  c)\n\nclass A(Base):\n    \"\"\"Doc.\"\"\"\n\n    @property\n    def x(self):\n        return 1\n\n    async def y(self, a,\n                b=2) -> int:\n        pass\n\ndef top():\n    pass\n";
        let outline = PythonParser.outline(src).unwrap();
        assert_eq!(outline.imports, vec!["import os".to_string(), "from a import (b,\n  c)".to_string()]);
        assert_eq!(outline.nodes.len(), 2);
        let class = &outline.nodes[0];
        assert_eq!(class.kind, NodeKind::Class);
        assert_eq!(class.header, "class A(Base)");
        assert_eq!(class.docstring.as_deref(), Some("\"\"\"Doc.\"\"\""));
        assert_eq!(class.children.len(), 2);
        let x = &class.children[0];
        assert_eq!((x.start_line, x.header_line, x.end_line), (8, 9, 10));
        assert_eq!(x.indent, "    ");
        let y = &class.children[1];
        assert_eq!(y.signature, "y(self, a, b=2) -> int");
        assert_eq!((y.start_line, y.end_line), (12, 14));
        assert_eq!(outline.nodes[1].name, "top");
    }

    #[test]
    fn call_sites_split_self_and_bare() {
        let code = "    def m(self, x):\n        y = self.a(x) + helper(x)\n        obj.other(1)\n        self.b().c()\n        if (x):\n            return len(y)\n";
        let sites = PythonParser.call_sites(code).unwrap();
        let names: Vec<_> = sites.iter().map(|s| (s.receiver.as_deref(), s.name.as_str())).collect();
        assert_eq!(names, vec![(Some("self"), "a"), (None, "helper"), (Some("self"), "b"), (None, "len")]);
    }

    #[test]
    fn dedent_keeps_relative_indentation() {
        assert_eq!(dedent("    def f():\n\n        return 1\n"), "def f():\n\n    return 1\n");
    }
}
