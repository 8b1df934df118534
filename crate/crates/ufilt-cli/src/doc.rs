//! The input-document grammar: a header (`field`, `uprec`) followed by
//! `matrix` / `complex` / `system` / `map` blocks. Parsing is line-oriented;
//! every diagnostic carries the 1-based line (and column where it helps).
//! Unknown directives are errors.

use ufilt::coeff::{FieldConfig, FieldKind};
use ufilt::error::{Error, Result};
use ufilt::homology::{EqChainComplex, FGModuleShape, GradedBasis};
use ufilt::limits::DirectedSystem;
use ufilt::parse::{parse_name, parse_rat, parse_series};
use ufilt::smith::DVRMatrix;
use ufilt::useries::{SeriesKind, USeries};

pub struct InputDocument {
    pub config: FieldConfig,
    pub matrices: Vec<DVRMatrix>,
    pub complexes: Vec<(String, EqChainComplex)>,
    pub systems: Vec<DirectedSystem>,
    pub maps: Vec<MapBlock>,
}

/// A map `c : V -> W` given by its matrix over the generators of `W` in
/// shape order (torsion rows first, then the free rows).
pub struct MapBlock {
    pub source: Vec<(String, i64)>,
    pub matrix: DVRMatrix,
    pub codomain: FGModuleShape,
}

fn at_line(ln: usize, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("line {}: {}", ln, m)),
        Error::Precision(m) => Error::Precision(format!("line {}: {}", ln, m)),
        Error::Internal(m) => Error::Internal(format!("line {}: {}", ln, m)),
    }
}

fn input_at(ln: usize, msg: impl Into<String>) -> Error {
    Error::input(format!("line {}: {}", ln, msg.into()))
}

struct Lines<'a> {
    // (1-based line number, content with comments stripped)
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let body = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let body = body.trim();
            if !body.is_empty() {
                items.push((i + 1, body));
            }
        }
        Lines { items, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let it = self.peek();
        if it.is_some() {
            self.pos += 1;
        }
        it
    }
}

fn first_token(line: &str) -> &str {
    line.split_whitespace().next().unwrap_or("")
}

fn parse_i64(ln: usize, s: &str, what: &str) -> Result<i64> {
    s.parse::<i64>().map_err(|_| input_at(ln, format!("{}: bad integer {:?}", what, s)))
}

fn parse_usize(ln: usize, s: &str, what: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| input_at(ln, format!("{}: bad count {:?}", what, s)))
}

/// `field rational` or `field novikov grading=<0|2> tprec=<rational>`.
fn parse_field_line(ln: usize, rest: &[&str]) -> Result<FieldConfig> {
    match rest.first().copied() {
        Some("rational") => {
            if rest.len() > 1 {
                return Err(input_at(ln, "field rational takes no options"));
            }
            Ok(FieldConfig::rational())
        }
        Some("novikov") => {
            let mut grading: Option<i64> = None;
            let mut tprec: Option<i64> = None;
            for opt in &rest[1..] {
                let (k, v) = opt
                    .split_once('=')
                    .ok_or_else(|| input_at(ln, format!("expected key=value, got {:?}", opt)))?;
                match k {
                    "grading" => {
                        let g = parse_i64(ln, v, "grading")?;
                        if g != 0 && g != 2 {
                            return Err(input_at(ln, "grading must be 0 or 2"));
                        }
                        if grading.replace(g).is_some() {
                            return Err(input_at(ln, "duplicate grading option"));
                        }
                    }
                    "tprec" => {
                        let r = parse_rat(v).map_err(|e| at_line(ln, e))?;
                        if !r.is_integer() {
                            return Err(input_at(
                                ln,
                                "tprec: only integer truncation orders are supported",
                            ));
                        }
                        let p = i64::try_from(&r.to_integer())
                            .map_err(|_| input_at(ln, "tprec out of range"))?;
                        if p < 1 {
                            return Err(input_at(ln, "tprec must be >= 1"));
                        }
                        if tprec.replace(p).is_some() {
                            return Err(input_at(ln, "duplicate tprec option"));
                        }
                    }
                    _ => return Err(input_at(ln, format!("unknown field option {:?}", k))),
                }
            }
            let g = grading.ok_or_else(|| input_at(ln, "field novikov needs grading=<0|2>"))?;
            let p = tprec.ok_or_else(|| input_at(ln, "field novikov needs tprec=<rational>"))?;
            Ok(FieldConfig::novikov(g).with_t_prec(p))
        }
        _ => Err(input_at(ln, "field must be 'rational' or 'novikov'")),
    }
}

/// A matrix block: `matrix R C` followed by `r c = <series>` entry lines.
/// Unlisted entries are zero; listing an entry twice is an error.
fn parse_matrix_block(lines: &mut Lines<'_>, cfg: &FieldConfig) -> Result<DVRMatrix> {
    let (hln, header) = lines.next().expect("caller checked");
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "matrix" {
        return Err(input_at(hln, "expected 'matrix <rows> <cols>'"));
    }
    let rows = parse_usize(hln, toks[1], "matrix rows")?;
    let cols = parse_usize(hln, toks[2], "matrix cols")?;
    let mut m = DVRMatrix::zero(rows, cols, *cfg);
    let mut seen = vec![false; rows * cols];
    while let Some((ln, line)) = lines.peek() {
        if !line.starts_with(|c: char| c.is_ascii_digit()) {
            break;
        }
        lines.next();
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| input_at(ln, "matrix entry needs '<row> <col> = <series>'"))?;
        let idx: Vec<&str> = lhs.split_whitespace().collect();
        if idx.len() != 2 {
            return Err(input_at(ln, "matrix entry needs two indices before '='"));
        }
        let r = parse_usize(ln, idx[0], "row index")?;
        let c = parse_usize(ln, idx[1], "column index")?;
        if r >= rows || c >= cols {
            return Err(input_at(
                ln,
                format!("entry ({}, {}) outside the {}x{} matrix", r, c, rows, cols),
            ));
        }
        if seen[r * cols + c] {
            return Err(input_at(ln, format!("entry ({}, {}) given twice", r, c)));
        }
        seen[r * cols + c] = true;
        let col0 = line.len() - rhs.len() + 1;
        let s = parse_series(rhs.trim(), SeriesKind::Power, cfg)
            .map_err(|e| at_line(ln, prefix_col(col0, e)))?;
        m.set(r, c, s).map_err(|e| at_line(ln, e))?;
    }
    Ok(m)
}

fn prefix_col(col: usize, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("col {}: {}", col, m)),
        other => other,
    }
}

/// Strip one outer pair of parentheses if it encloses the whole string.
fn strip_outer_parens(s: &str) -> &str {
    let t = s.trim();
    if !(t.starts_with('(') && t.ends_with(')')) {
        return t;
    }
    let mut depth = 0i32;
    for (i, c) in t.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 && i + 1 != t.len() {
                    return t; // the first '(' closes early
                }
            }
            _ => {}
        }
    }
    if depth == 0 {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

/// Split a differential expression into signed terms at top-level `+`/`-`
/// (a sign directly after `^` belongs to an exponent, not a term boundary).
fn split_terms(s: &str) -> Vec<(bool, String)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut neg = false;
    let mut prev_sig: Option<char> = None;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' | '-' if depth == 0 && prev_sig != Some('^') => {
                if cur.trim().is_empty() {
                    // sign at the start of the (first) term
                    neg = c == '-';
                    prev_sig = Some(c);
                    continue;
                }
                out.push((neg, cur.trim().to_string()));
                cur = String::new();
                neg = c == '-';
                prev_sig = Some(c);
                continue;
            }
            _ => {}
        }
        cur.push(c);
        if !c.is_whitespace() {
            prev_sig = Some(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push((neg, cur.trim().to_string()));
    }
    out
}

/// Split a term at top-level `*`.
fn split_factors(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur = String::new();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    out
}

/// `u`, `u^3`, `u^(-3)` -> Some(exponent); anything else -> None.
fn as_upow(s: &str) -> Option<i64> {
    if s == "u" {
        return Some(1);
    }
    let rest = s.strip_prefix("u^")?;
    let rest = strip_outer_parens(rest);
    rest.parse::<i64>().ok()
}

struct DiffTerm {
    coeff: ufilt::coeff::FieldElem,
    upow: i64,
    target: String,
}

fn parse_diff_terms(ln: usize, expr: &str, cfg: &FieldConfig) -> Result<Vec<DiffTerm>> {
    let trimmed = expr.trim();
    if trimmed == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (neg, term) in split_terms(trimmed) {
        let factors = split_factors(&term);
        let (last, rest) = factors.split_last().expect("split_factors is nonempty");
        let target = parse_name(last).map_err(|_| {
            input_at(ln, format!("differential term must end in a generator, got {:?}", last))
        })?;
        let mut coeff = ufilt::coeff::FieldElem::one(cfg.kind);
        let mut upow: Option<i64> = None;
        for f in rest {
            if let Some(k) = as_upow(f) {
                if upow.replace(k).is_some() {
                    return Err(input_at(ln, "two u-powers in one differential term"));
                }
                continue;
            }
            let c = ufilt::parse::parse_coeff(strip_outer_parens(f), cfg)
                .map_err(|e| at_line(ln, e))?;
            coeff = coeff.mul(&c);
        }
        if neg {
            coeff = coeff.neg();
        }
        out.push(DiffTerm { coeff, upow: upow.unwrap_or(0), target });
    }
    Ok(out)
}

/// `complex <name>` followed by `gen <id> deg <int>` and
/// `diff <id> = <terms>` lines. Every degree constraint is checked per term
/// so violations name the offending generator pair.
fn parse_complex_block(lines: &mut Lines<'_>, cfg: &FieldConfig) -> Result<(String, EqChainComplex)> {
    let (hln, header) = lines.next().expect("caller checked");
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 2 || toks[0] != "complex" {
        return Err(input_at(hln, "expected 'complex <name>'"));
    }
    let name = parse_name(toks[1]).map_err(|e| at_line(hln, e))?;

    let mut gens: Vec<(String, i64)> = Vec::new();
    let mut diffs: Vec<(usize, String, String)> = Vec::new(); // (line, gen, expr)
    while let Some((ln, line)) = lines.peek() {
        match first_token(line) {
            "gen" => {
                lines.next();
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 4 || t[2] != "deg" {
                    return Err(input_at(ln, "expected 'gen <id> deg <int>'"));
                }
                let id = parse_name(t[1]).map_err(|e| at_line(ln, e))?;
                if gens.iter().any(|(g, _)| *g == id) {
                    return Err(input_at(ln, format!("duplicate generator name '{}'", id)));
                }
                let deg = parse_i64(ln, t[3], "degree")?;
                gens.push((id, deg));
            }
            "diff" => {
                lines.next();
                let rest = line.strip_prefix("diff").unwrap().trim();
                let (id, expr) = rest
                    .split_once('=')
                    .ok_or_else(|| input_at(ln, "expected 'diff <id> = <terms>'"))?;
                let id = parse_name(id).map_err(|e| at_line(ln, e))?;
                if diffs.iter().any(|(_, g, _)| *g == id) {
                    return Err(input_at(ln, format!("duplicate diff line for '{}'", id)));
                }
                diffs.push((ln, id, expr.trim().to_string()));
            }
            _ => break,
        }
    }

    let basis = GradedBasis::new(gens.clone()).map_err(|e| at_line(hln, e))?;
    let n = basis.len();
    let mut d = DVRMatrix::zero(n, n, *cfg);
    let tg = cfg.t_grading();
    for (ln, src, expr) in &diffs {
        let j = basis
            .index_of(src)
            .ok_or_else(|| input_at(*ln, format!("diff for unknown generator '{}'", src)))?;
        for term in parse_diff_terms(*ln, expr, cfg)? {
            let i = basis.index_of(&term.target).ok_or_else(|| {
                input_at(*ln, format!("differential term references unknown generator '{}'", term.target))
            })?;
            if term.upow < 0 {
                return Err(input_at(*ln, "differential terms cannot carry negative u-powers"));
            }
            let cdeg = term.coeff.degree(tg).map_err(|e| at_line(*ln, e))?;
            if let Some(cd) = cdeg {
                let want = basis.degree(j) + 1 - 2 * term.upow - cd;
                if basis.degree(i) != want {
                    return Err(input_at(
                        *ln,
                        format!(
                            "degree constraint violated between '{}' and '{}': \
                             the term forces deg {} = {}, but it is {}",
                            src,
                            term.target,
                            term.target,
                            want,
                            basis.degree(i)
                        ),
                    ));
                }
            }
            let m = USeries::monomial(SeriesKind::Power, *cfg, term.coeff, term.upow)
                .map_err(|e| at_line(*ln, e))?;
            let cur = d.at(i, j).add(&m).map_err(|e| at_line(*ln, e))?;
            d.set(i, j, cur).map_err(|e| at_line(*ln, e))?;
        }
    }
    let complex = EqChainComplex::new(basis, d).map_err(|e| at_line(hln, e))?;
    Ok((name, complex))
}

/// `system rank <r>` followed by `step <k>` + matrix block, `k = 0, 1, …`.
fn parse_system_block(lines: &mut Lines<'_>, cfg: &FieldConfig) -> Result<DirectedSystem> {
    let (hln, header) = lines.next().expect("caller checked");
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "system" || toks[1] != "rank" {
        return Err(input_at(hln, "expected 'system rank <r>'"));
    }
    let rank = parse_usize(hln, toks[2], "system rank")?;
    let mut steps = Vec::new();
    while let Some((ln, line)) = lines.peek() {
        if first_token(line) != "step" {
            break;
        }
        lines.next();
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 2 {
            return Err(input_at(ln, "expected 'step <k>'"));
        }
        let k = parse_usize(ln, t[1], "step index")?;
        if k != steps.len() {
            return Err(input_at(ln, format!("expected step {}, got step {}", steps.len(), k)));
        }
        match lines.peek() {
            Some((_, l)) if first_token(l) == "matrix" => {}
            _ => return Err(input_at(ln, "each step needs a matrix block")),
        }
        let mln = lines.peek().map(|(l, _)| l).unwrap_or(ln);
        let m = parse_matrix_block(lines, cfg)?;
        if m.rows != rank || m.cols != rank {
            return Err(input_at(
                mln,
                format!("step {} matrix is {}x{}, the system has rank {}", k, m.rows, m.cols, rank),
            ));
        }
        steps.push(m);
    }
    DirectedSystem::new(rank, steps, *cfg).map_err(|e| at_line(hln, e))
}

fn parse_int_list(ln: usize, s: &str, what: &str) -> Result<Vec<i64>> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|x| parse_i64(ln, x.trim(), what))
        .collect()
}

fn parse_pair_list(ln: usize, s: &str) -> Result<Vec<(i64, i64)>> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = t;
    loop {
        let rest2 = rest.trim_start();
        let inner = rest2
            .strip_prefix('(')
            .ok_or_else(|| input_at(ln, "torsion entries look like (k,d)"))?;
        let close = inner
            .find(')')
            .ok_or_else(|| input_at(ln, "unclosed torsion pair"))?;
        let body = &inner[..close];
        let (k, d) = body
            .split_once(',')
            .ok_or_else(|| input_at(ln, "torsion entries look like (k,d)"))?;
        out.push((parse_i64(ln, k.trim(), "torsion order")?, parse_i64(ln, d.trim(), "torsion degree")?));
        let after = inner[close + 1..].trim_start();
        if after.is_empty() {
            return Ok(out);
        }
        rest = after
            .strip_prefix(',')
            .ok_or_else(|| input_at(ln, "torsion pairs are comma-separated"))?;
    }
}

/// `shape free:[d,…] laurent:[d,…] tails:[d,…] torsion:[(k,d),…]`.
fn parse_shape_line(ln: usize, rest: &str) -> Result<FGModuleShape> {
    let mut free: Option<Vec<i64>> = None;
    let mut laurent: Option<Vec<i64>> = None;
    let mut tails: Option<Vec<i64>> = None;
    let mut torsion: Option<Vec<(i64, i64)>> = None;
    let mut cur = rest.trim();
    while !cur.is_empty() {
        let colon = cur
            .find(':')
            .ok_or_else(|| input_at(ln, "shape fields look like key:[…]"))?;
        let key = cur[..colon].trim();
        let after = cur[colon + 1..].trim_start();
        let inner = after
            .strip_prefix('[')
            .ok_or_else(|| input_at(ln, format!("shape field '{}' needs a […] list", key)))?;
        let close = inner
            .find(']')
            .ok_or_else(|| input_at(ln, format!("unclosed list for shape field '{}'", key)))?;
        let body = &inner[..close];
        match key {
            "free" => {
                if free.replace(parse_int_list(ln, body, "free degree")?).is_some() {
                    return Err(input_at(ln, "duplicate shape field 'free'"));
                }
            }
            "laurent" => {
                if laurent.replace(parse_int_list(ln, body, "laurent degree")?).is_some() {
                    return Err(input_at(ln, "duplicate shape field 'laurent'"));
                }
            }
            "tails" => {
                if tails.replace(parse_int_list(ln, body, "tail degree")?).is_some() {
                    return Err(input_at(ln, "duplicate shape field 'tails'"));
                }
            }
            "torsion" => {
                if torsion.replace(parse_pair_list(ln, body)?).is_some() {
                    return Err(input_at(ln, "duplicate shape field 'torsion'"));
                }
            }
            _ => return Err(input_at(ln, format!("unknown shape field '{}'", key))),
        }
        cur = inner[close + 1..].trim_start();
    }
    Ok(FGModuleShape {
        free_power: free.ok_or_else(|| input_at(ln, "shape needs free:[…]"))?,
        free_laurent: laurent.ok_or_else(|| input_at(ln, "shape needs laurent:[…]"))?,
        tails: tails.ok_or_else(|| input_at(ln, "shape needs tails:[…]"))?,
        torsion: torsion.ok_or_else(|| input_at(ln, "shape needs torsion:[…]"))?,
    })
}

/// `map` + domain `gen` lines + matrix block + `codomain` + `shape …` line.
fn parse_map_block(lines: &mut Lines<'_>, cfg: &FieldConfig) -> Result<MapBlock> {
    let (hln, header) = lines.next().expect("caller checked");
    if header != "map" {
        return Err(input_at(hln, "expected 'map' on its own line"));
    }
    let mut source: Vec<(String, i64)> = Vec::new();
    while let Some((ln, line)) = lines.peek() {
        if first_token(line) != "gen" {
            break;
        }
        lines.next();
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 || t[2] != "deg" {
            return Err(input_at(ln, "expected 'gen <id> deg <int>'"));
        }
        let id = parse_name(t[1]).map_err(|e| at_line(ln, e))?;
        if source.iter().any(|(g, _)| *g == id) {
            return Err(input_at(ln, format!("duplicate generator name '{}'", id)));
        }
        source.push((id, parse_i64(ln, t[3], "degree")?));
    }
    let (mln, matrix) = match lines.peek() {
        Some((ln, l)) if first_token(l) == "matrix" => (ln, parse_matrix_block(lines, cfg)?),
        _ => return Err(input_at(hln, "map block needs a matrix block after the gen lines")),
    };
    if matrix.cols != source.len() {
        return Err(input_at(
            mln,
            format!("map matrix has {} columns but {} domain generators", matrix.cols, source.len()),
        ));
    }
    match lines.next() {
        Some((_, "codomain")) => {}
        Some((ln, l)) => return Err(input_at(ln, format!("expected 'codomain', got {:?}", first_token(l)))),
        None => return Err(input_at(hln, "map block needs a codomain shape")),
    }
    let (sln, sline) = lines
        .next()
        .ok_or_else(|| input_at(hln, "codomain needs a 'shape …' line"))?;
    let rest = sline
        .strip_prefix("shape")
        .ok_or_else(|| input_at(sln, "expected 'shape free:[…] laurent:[…] tails:[…] torsion:[…]'"))?;
    let codomain = parse_shape_line(sln, rest)?;
    let wanted = codomain.torsion.len() + codomain.free_power.len();
    if matrix.rows != wanted {
        return Err(input_at(
            mln,
            format!(
                "map matrix has {} rows but the codomain shape lists {} generators \
                 (torsion first, then free)",
                matrix.rows, wanted
            ),
        ));
    }
    Ok(MapBlock { source, matrix, codomain })
}

pub fn parse_document(text: &str) -> Result<InputDocument> {
    let mut lines = Lines::new(text);
    let mut config: Option<FieldConfig> = None;
    let mut uprec: Option<i64> = None;
    let mut doc = InputDocument {
        config: FieldConfig::rational(),
        matrices: Vec::new(),
        complexes: Vec::new(),
        systems: Vec::new(),
        maps: Vec::new(),
    };
    let mut in_header = true;
    while let Some((ln, line)) = lines.peek() {
        let tok = first_token(line);
        match tok {
            "field" | "uprec" if !in_header => {
                return Err(input_at(ln, format!("'{}' must precede all blocks", tok)));
            }
            "field" => {
                lines.next();
                let rest: Vec<&str> = line.split_whitespace().skip(1).collect();
                if config.replace(parse_field_line(ln, &rest)?).is_some() {
                    return Err(input_at(ln, "duplicate field directive"));
                }
            }
            "uprec" => {
                lines.next();
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 2 {
                    return Err(input_at(ln, "expected 'uprec <int>'"));
                }
                let p = parse_i64(ln, t[1], "uprec")?;
                if p < 1 {
                    return Err(input_at(ln, "uprec must be >= 1"));
                }
                if uprec.replace(p).is_some() {
                    return Err(input_at(ln, "duplicate uprec directive"));
                }
            }
            "matrix" | "complex" | "system" | "map" => {
                if in_header {
                    let mut cfg = config.take().unwrap_or_else(FieldConfig::rational);
                    if let Some(p) = uprec {
                        cfg = cfg.with_u_prec(p);
                    }
                    doc.config = cfg;
                    in_header = false;
                }
                let cfg = doc.config;
                match tok {
                    "matrix" => doc.matrices.push(parse_matrix_block(&mut lines, &cfg)?),
                    "complex" => doc.complexes.push(parse_complex_block(&mut lines, &cfg)?),
                    "system" => doc.systems.push(parse_system_block(&mut lines, &cfg)?),
                    "map" => doc.maps.push(parse_map_block(&mut lines, &cfg)?),
                    _ => unreachable!(),
                }
            }
            _ => return Err(input_at(ln, format!("unknown directive '{}'", tok))),
        }
    }
    if in_header {
        // header-only (or empty) document: still record the field config
        let mut cfg = config.take().unwrap_or_else(FieldConfig::rational);
        if let Some(p) = uprec {
            cfg = cfg.with_u_prec(p);
        }
        doc.config = cfg;
    }
    Ok(doc)
}

// ---------------------------------------------------------------------------
// Block renderers (the round-trip direction)
// ---------------------------------------------------------------------------

pub fn render_header(cfg: &FieldConfig) -> String {
    let field = match cfg.kind {
        FieldKind::Rational => "field rational".to_string(),
        FieldKind::Novikov { t_grading } => {
            format!("field novikov grading={} tprec={}", t_grading, cfg.t_default_prec)
        }
    };
    format!("{}\nuprec {}\n", field, cfg.u_default_prec)
}

/// Nonzero (or precision-carrying) entries in row-major order.
pub fn render_matrix_block(m: &DVRMatrix) -> String {
    let mut out = format!("matrix {} {}\n", m.rows, m.cols);
    for i in 0..m.rows {
        for j in 0..m.cols {
            let e = m.at(i, j);
            if e.is_exact_zero() && e.u_precision.is_none() {
                continue;
            }
            out.push_str(&format!("{} {} = {}\n", i, j, e.literal()));
        }
    }
    out
}

fn coeff_term(c: &ufilt::coeff::FieldElem) -> (bool, String) {
    let lit = c.literal();
    if lit.contains(" + ") || lit.contains(" - ") || lit.contains("O(") {
        (false, format!("({})", lit))
    } else if let Some(rest) = lit.strip_prefix('-') {
        (true, rest.to_string())
    } else {
        (false, lit)
    }
}

/// Diff lines carry only exact terms; a complex with precision-marked
/// entries cannot be expressed in the block grammar.
pub fn render_complex_block(name: &str, c: &EqChainComplex) -> Result<String> {
    let n = c.rank();
    let mut out = format!("complex {}\n", name);
    for i in 0..n {
        out.push_str(&format!("gen {} deg {}\n", c.basis.name(i), c.basis.degree(i)));
    }
    for j in 0..n {
        let mut terms: Vec<(bool, String)> = Vec::new();
        for i in 0..n {
            let e = c.d.at(i, j);
            if e.u_precision.is_some() {
                return Err(Error::input(
                    "complex blocks cannot express precision-marked differentials",
                ));
            }
            for (k, coeff) in &e.coeffs {
                let (neg, cs) = coeff_term(coeff);
                let mut parts: Vec<String> = Vec::new();
                if cs != "1" {
                    parts.push(cs);
                }
                if *k == 1 {
                    parts.push("u".to_string());
                } else if *k != 0 {
                    parts.push(format!("u^{}", k));
                }
                parts.push(c.basis.name(i).to_string());
                terms.push((neg, parts.join("*")));
            }
        }
        if terms.is_empty() {
            continue;
        }
        let mut expr = String::new();
        for (t, (neg, body)) in terms.iter().enumerate() {
            if t == 0 {
                if *neg {
                    expr.push('-');
                }
            } else {
                expr.push_str(if *neg { " - " } else { " + " });
            }
            expr.push_str(body);
        }
        out.push_str(&format!("diff {} = {}\n", c.basis.name(j), expr));
    }
    Ok(out)
}

pub fn render_system_block(s: &DirectedSystem) -> String {
    let mut out = format!("system rank {}\n", s.rank);
    for (k, q) in s.steps.iter().enumerate() {
        out.push_str(&format!("step {}\n", k));
        out.push_str(&render_matrix_block(q));
    }
    out
}

fn int_list(v: &[i64]) -> String {
    v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

pub fn render_shape_line(s: &FGModuleShape) -> String {
    let torsion = s
        .torsion
        .iter()
        .map(|(k, d)| format!("({},{})", k, d))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "shape free:[{}] laurent:[{}] tails:[{}] torsion:[{}]",
        int_list(&s.free_power),
        int_list(&s.free_laurent),
        int_list(&s.tails),
        torsion
    )
}

pub fn render_map_block(m: &MapBlock) -> String {
    let mut out = String::from("map\n");
    for (g, d) in &m.source {
        out.push_str(&format!("gen {} deg {}\n", g, d));
    }
    out.push_str(&render_matrix_block(&m.matrix));
    out.push_str("codomain\n");
    out.push_str(&render_shape_line(&m.codomain));
    out.push('\n');
    out
}
