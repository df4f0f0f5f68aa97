//! Line-oriented model files.
//!
//! ```text
//! MODEL cook
//! DESCRIPTION Gene switching between G and G*, protein P
//! SPECIES G G* P
//! PARAMS k1=20 km1=10 k2=4000 k3=1
//! PARTITION CONTINUOUS P DISCRETE G G* SCALE 1
//! INIT G=1 G*=0 P=0
//! RXN switch: G <-> G* @ k1, km1
//! RXN production: G* -> G* + P @ k2
//! RXN degradation: P -> @ k3
//! ```
//!
//! `#` starts a comment. A reaction line may omit the `RXN name:` prefix, in
//! which case it is named `R<k>` after its position. Rates are a parameter
//! name, a nonnegative literal, or a state table such as
//! `@ table(G*) 0:20 1:10`. Product multipliers may name a parameter
//! (`D1 -> D1 + n_burst C`). Reversible reactions expand to `<name>_fwd` and
//! `<name>_rev`.

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;

use crate::network::{
    Coefficient, NetworkBuilder, RateConstant, RateLaw, ReactionNetwork, ReactionSpec, RateSpec,
    SystemState,
};
use crate::partition::{classify_reactions, Partition, ReactionClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based source line.
    pub line: usize,
    pub message: String,
}

impl Diagnostic {
    fn error(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            line,
            message: message.into(),
        }
    }

    fn warning(line: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "line {}: {}: {}", self.line, kind, self.message)
    }
}

/// Where each construct came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub model: usize,
    pub species: Vec<usize>,
    pub reactions: Vec<usize>,
    pub partition: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub name: String,
    pub description: Option<String>,
    pub network: ReactionNetwork,
    pub initial: SystemState,
    pub partition: Option<Partition>,
    pub source: SourceMap,
}

impl ModelDocument {
    pub fn species_name(&self, i: usize) -> &str {
        &self.network.species()[i].name
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '*' | '\''))
}

fn parse_float(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

#[derive(Debug)]
struct RawReaction {
    line: usize,
    name: String,
    reactants: Vec<(String, u32)>,
    products: Vec<(String, Coefficient)>,
    rate: RateSpec,
}

#[derive(Debug, Default)]
struct Raw {
    model: Option<(usize, String)>,
    description: Option<String>,
    species: Option<(usize, Vec<String>)>,
    params: Vec<(usize, String, f64)>,
    partition: Option<(usize, Vec<String>, Vec<String>, f64)>,
    init: Vec<(usize, String, i64)>,
    reactions: Vec<RawReaction>,
    errors: Vec<Diagnostic>,
}

fn parse_side(
    side: &str,
    products: bool,
    line: usize,
    errors: &mut Vec<Diagnostic>,
) -> Option<Vec<(String, Coefficient)>> {
    let side = side.trim();
    if side.is_empty() || side == "∅" {
        return Some(Vec::new());
    }
    let mut terms = Vec::new();
    let mut ok = true;
    for term in side.split('+') {
        let tokens: Vec<&str> = term.split_whitespace().collect();
        let (coef, name) = match tokens.as_slice() {
            [name] => (Coefficient::Literal(1), *name),
            [m, name] => {
                let coef = if let Ok(v) = m.parse::<i64>() {
                    if v < 1 {
                        errors.push(Diagnostic::error(
                            line,
                            format!("stoichiometric coefficient < 1 ({v} {name})"),
                        ));
                        ok = false;
                        continue;
                    }
                    match u32::try_from(v) {
                        Ok(v) => Coefficient::Literal(v),
                        Err(_) => {
                            errors.push(Diagnostic::error(
                                line,
                                format!("stoichiometric coefficient {v} is too large"),
                            ));
                            ok = false;
                            continue;
                        }
                    }
                } else if products && is_identifier(m) {
                    Coefficient::Param(m.to_string())
                } else {
                    errors.push(Diagnostic::error(
                        line,
                        format!("bad stoichiometric coefficient `{m}`"),
                    ));
                    ok = false;
                    continue;
                };
                (coef, *name)
            }
            [] => {
                errors.push(Diagnostic::error(line, "empty term in reaction"));
                ok = false;
                continue;
            }
            _ => {
                errors.push(Diagnostic::error(
                    line,
                    format!("cannot read reaction term `{}`", term.trim()),
                ));
                ok = false;
                continue;
            }
        };
        if !is_identifier(name) {
            errors.push(Diagnostic::error(line, format!("bad species name `{name}`")));
            ok = false;
            continue;
        }
        terms.push((name.to_string(), coef));
    }
    ok.then_some(terms)
}

fn parse_constant(s: &str, line: usize, errors: &mut Vec<Diagnostic>) -> Option<RateConstant> {
    let s = s.trim();
    if let Some(v) = parse_float(s) {
        if v < 0.0 {
            errors.push(Diagnostic::error(line, format!("negative rate constant {v}")));
            return None;
        }
        return Some(RateConstant::Value(v));
    }
    if is_identifier(s) {
        return Some(RateConstant::Param(s.to_string()));
    }
    errors.push(Diagnostic::error(line, format!("bad rate constant `{s}`")));
    None
}

fn parse_table(s: &str, line: usize, errors: &mut Vec<Diagnostic>) -> Option<RateSpec> {
    let Some((head, body)) = s.split_once(')') else {
        errors.push(Diagnostic::error(line, "unclosed `table(`"));
        return None;
    };
    let species: Vec<String> = head.split(',').map(|x| x.trim().to_string()).collect();
    if species.iter().any(|x| !is_identifier(x)) {
        errors.push(Diagnostic::error(line, "bad species list in rate table"));
        return None;
    }
    let mut entries = Vec::new();
    for entry in body.split_whitespace() {
        let parsed = entry.split_once(':').and_then(|(key, rate)| {
            let key = key
                .split(',')
                .map(|k| k.parse::<i64>().ok())
                .collect::<Option<Vec<_>>>()?;
            Some((key, parse_float(rate)?))
        });
        match parsed {
            Some((key, _)) if key.len() != species.len() => {
                errors.push(Diagnostic::error(
                    line,
                    format!("rate table entry `{entry}` needs {} values", species.len()),
                ));
                return None;
            }
            Some((_, rate)) if rate < 0.0 => {
                errors.push(Diagnostic::error(line, format!("negative rate constant {rate}")));
                return None;
            }
            Some(e) => entries.push(e),
            None => {
                errors.push(Diagnostic::error(line, format!("bad rate table entry `{entry}`")));
                return None;
            }
        }
    }
    Some(RateSpec::StateTable { species, entries })
}

fn parse_reaction(text: &str, line: usize, auto_index: usize, raw: &mut Raw) {
    let errors = &mut raw.errors;
    let (name, body) = match text.split_once(':') {
        Some((name, body)) if !name.contains("->") => {
            let name = name.trim();
            if !is_identifier(name) {
                errors.push(Diagnostic::error(line, format!("bad reaction name `{name}`")));
                return;
            }
            (name.to_string(), body)
        }
        _ => (format!("R{auto_index}"), text),
    };
    let Some((equation, rate)) = body.split_once('@') else {
        errors.push(Diagnostic::error(line, "reaction needs a rate after `@`"));
        return;
    };
    let (lhs, rhs, reversible) = if let Some((l, r)) = equation.split_once("<->") {
        (l, r, true)
    } else if let Some((l, r)) = equation.split_once("->") {
        (l, r, false)
    } else {
        errors.push(Diagnostic::error(line, "reaction needs `->` or `<->`"));
        return;
    };
    if rhs.contains("->") {
        errors.push(Diagnostic::error(line, "reaction has more than one arrow"));
        return;
    }
    let lhs_terms = parse_side(lhs, reversible, line, errors);
    let rhs_terms = parse_side(rhs, true, line, errors);
    let (Some(lhs_terms), Some(rhs_terms)) = (lhs_terms, rhs_terms) else {
        return;
    };
    let as_reactants = |terms: &[(String, Coefficient)]| -> Option<Vec<(String, u32)>> {
        terms
            .iter()
            .map(|(s, c)| match c {
                Coefficient::Literal(m) => Some((s.clone(), *m)),
                Coefficient::Param(_) => None,
            })
            .collect()
    };
    let rate = rate.trim();
    if let Some(table) = rate.strip_prefix("table(") {
        if reversible {
            errors.push(Diagnostic::error(line, "rate tables need an irreversible reaction"));
            return;
        }
        let Some(spec) = parse_table(table, line, errors) else {
            return;
        };
        let reactants = as_reactants(&lhs_terms).unwrap_or_default();
        raw.reactions.push(RawReaction {
            line,
            name,
            reactants,
            products: rhs_terms,
            rate: spec,
        });
        return;
    }
    let constants: Vec<&str> = rate.split(',').collect();
    match (reversible, constants.as_slice()) {
        (false, [k]) => {
            let Some(k) = parse_constant(k, line, errors) else {
                return;
            };
            raw.reactions.push(RawReaction {
                line,
                name,
                reactants: as_reactants(&lhs_terms).unwrap_or_default(),
                products: rhs_terms,
                rate: RateSpec::MassAction(k),
            });
        }
        (true, [kf, kr]) => {
            let kf = parse_constant(kf, line, errors);
            let kr = parse_constant(kr, line, errors);
            let (Some(kf), Some(kr)) = (kf, kr) else {
                return;
            };
            let (Some(left), Some(right)) = (as_reactants(&lhs_terms), as_reactants(&rhs_terms))
            else {
                errors.push(Diagnostic::error(
                    line,
                    "reversible reactions need literal multiplicities",
                ));
                return;
            };
            let products = |side: &[(String, u32)]| {
                side.iter()
                    .map(|(s, m)| (s.clone(), Coefficient::Literal(*m)))
                    .collect()
            };
            raw.reactions.push(RawReaction {
                line,
                name: format!("{name}_fwd"),
                reactants: left.clone(),
                products: products(&right),
                rate: RateSpec::MassAction(kf),
            });
            raw.reactions.push(RawReaction {
                line,
                name: format!("{name}_rev"),
                reactants: right,
                products: products(&left),
                rate: RateSpec::MassAction(kr),
            });
        }
        (false, _) => errors.push(Diagnostic::error(
            line,
            "irreversible reaction takes one rate constant",
        )),
        (true, _) => errors.push(Diagnostic::error(
            line,
            "reversible reaction takes two rate constants `kf, kr`",
        )),
    }
}

fn parse_assignments<T>(
    rest: &str,
    line: usize,
    what: &str,
    errors: &mut Vec<Diagnostic>,
    value: impl Fn(&str) -> Option<T>,
) -> Vec<(String, T)> {
    let mut out = Vec::new();
    for item in rest.split_whitespace() {
        match item.split_once('=') {
            Some((name, v)) if is_identifier(name) => match value(v) {
                Some(v) => out.push((name.to_string(), v)),
                None => errors.push(Diagnostic::error(
                    line,
                    format!("bad {what} value `{v}` for `{name}`"),
                )),
            },
            _ => errors.push(Diagnostic::error(line, format!("expected name=value, got `{item}`"))),
        }
    }
    out
}

fn parse_partition(rest: &str, line: usize, raw: &mut Raw) {
    let (mut continuous, mut discrete) = (Vec::new(), Vec::new());
    let mut scale = 1.0;
    enum Section {
        None,
        C,
        D,
        Scale,
    }
    let mut section = Section::None;
    for token in rest.split_whitespace() {
        match token {
            "CONTINUOUS" => section = Section::C,
            "DISCRETE" => section = Section::D,
            "SCALE" => section = Section::Scale,
            _ => match section {
                Section::C => continuous.push(token.to_string()),
                Section::D => discrete.push(token.to_string()),
                Section::Scale => match parse_float(token) {
                    Some(v) if v >= 1.0 => {
                        scale = v;
                        section = Section::None;
                    }
                    _ => {
                        raw.errors
                            .push(Diagnostic::error(line, format!("SCALE must be a number >= 1, got `{token}`")));
                        return;
                    }
                },
                Section::None => {
                    raw.errors.push(Diagnostic::error(
                        line,
                        format!("unexpected `{token}` in PARTITION"),
                    ));
                    return;
                }
            },
        }
    }
    if matches!(section, Section::Scale) {
        raw.errors.push(Diagnostic::error(line, "SCALE needs a value"));
        return;
    }
    raw.partition = Some((line, continuous, discrete, scale));
}

fn scan(text: &str) -> Raw {
    let mut raw = Raw::default();
    for (i, full) in text.lines().enumerate() {
        let line = i + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .map_or((content, ""), |(k, r)| (k, r.trim()));
        match keyword {
            "MODEL" => {
                if raw.model.is_some() {
                    raw.errors.push(Diagnostic::error(line, "duplicate MODEL line"));
                } else if rest.is_empty() {
                    raw.errors.push(Diagnostic::error(line, "MODEL needs a name"));
                } else {
                    raw.model = Some((line, rest.to_string()));
                }
            }
            "DESCRIPTION" => raw.description = Some(rest.to_string()),
            "SPECIES" => {
                let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                for n in names.iter().filter(|n| !is_identifier(n)) {
                    raw.errors.push(Diagnostic::error(line, format!("bad species name `{n}`")));
                }
                match raw.species.as_mut() {
                    Some((_, list)) => list.extend(names),
                    None => raw.species = Some((line, names)),
                }
            }
            "PARAMS" => {
                let items = parse_assignments(rest, line, "parameter", &mut raw.errors, parse_float);
                raw.params
                    .extend(items.into_iter().map(|(n, v)| (line, n, v)));
            }
            "PARTITION" => {
                if raw.partition.is_some() {
                    raw.errors.push(Diagnostic::error(line, "duplicate PARTITION line"));
                } else {
                    parse_partition(rest, line, &mut raw);
                }
            }
            "INIT" => {
                let items = parse_assignments(rest, line, "initial count", &mut raw.errors, |v| {
                    v.parse::<i64>().ok().filter(|&n| n >= 0)
                });
                raw.init.extend(items.into_iter().map(|(n, v)| (line, n, v)));
            }
            "RXN" => {
                let index = raw.reactions.len() + 1;
                parse_reaction(rest, line, index, &mut raw);
            }
            _ if content.contains("->") => {
                let index = raw.reactions.len() + 1;
                parse_reaction(content, line, index, &mut raw);
            }
            _ => raw
                .errors
                .push(Diagnostic::error(line, format!("unknown directive `{keyword}`"))),
        }
    }
    raw
}

/// Parses a model file. Errors are collected, not reported one at a time.
pub fn parse_model(text: &str) -> Result<ModelDocument, Vec<Diagnostic>> {
    let Raw {
        model,
        description,
        species,
        params,
        partition,
        init,
        reactions,
        mut errors,
    } = scan(text);

    let model_line = model.as_ref().map_or(1, |m| m.0);
    if model.is_none() {
        errors.push(Diagnostic::error(1, "no MODEL block"));
    }

    let mut builder = NetworkBuilder::new();
    let mut species_lines = Vec::new();
    let declared = species.is_some();
    if let Some((line, names)) = &species {
        for name in names.iter().filter(|n| is_identifier(n)) {
            if builder.species(name).is_err() {
                errors.push(Diagnostic::error(*line, format!("duplicate species `{name}`")));
            } else {
                species_lines.push(*line);
            }
        }
    }

    let mut values: IndexMap<String, f64> = IndexMap::new();
    for (line, name, value) in &params {
        if values.insert(name.clone(), *value).is_some() {
            errors.push(Diagnostic::error(*line, format!("duplicate parameter `{name}`")));
        } else {
            // Cannot fail: duplicates and non-finite values are filtered above.
            let _ = builder.param(name, *value);
        }
    }

    let mut reaction_lines = Vec::new();
    let mut names_seen = HashSet::new();
    for rx in reactions {
        let line = rx.line;
        let before = errors.len();
        if !names_seen.insert(rx.name.clone()) {
            errors.push(Diagnostic::error(line, format!("duplicate reaction `{}`", rx.name)));
        }
        let mut mentioned: Vec<&str> = rx
            .reactants
            .iter()
            .map(|(s, _)| s.as_str())
            .chain(rx.products.iter().map(|(s, _)| s.as_str()))
            .collect();
        if let RateSpec::StateTable { species, .. } = &rx.rate {
            mentioned.extend(species.iter().map(String::as_str));
        }
        for s in mentioned {
            if !builder.has_species(s) {
                if declared {
                    errors.push(Diagnostic::error(line, format!("unknown species `{s}`")));
                } else {
                    // Cannot fail: checked just above.
                    let _ = builder.species(s);
                    species_lines.push(line);
                }
            }
        }
        let mut jump: IndexMap<&str, f64> = IndexMap::new();
        for (s, m) in &rx.reactants {
            *jump.entry(s.as_str()).or_default() -= f64::from(*m);
        }
        for (s, c) in &rx.products {
            let m = match c {
                Coefficient::Literal(m) => f64::from(*m),
                Coefficient::Param(p) => match values.get(p) {
                    Some(&v) if v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) => v,
                    Some(&v) => {
                        errors.push(Diagnostic::error(
                            line,
                            format!("stoichiometric coefficient < 1 or fractional: `{p}` = {v}"),
                        ));
                        continue;
                    }
                    None => {
                        errors.push(Diagnostic::error(line, format!("undefined parameter `{p}`")));
                        continue;
                    }
                },
            };
            *jump.entry(s.as_str()).or_default() += m;
        }
        if errors.len() == before && jump.values().all(|&d| d == 0.0) {
            errors.push(Diagnostic::error(
                line,
                format!("reaction `{}` changes no species", rx.name),
            ));
        }
        if let RateSpec::MassAction(RateConstant::Param(p)) = &rx.rate {
            match values.get(p) {
                None => errors.push(Diagnostic::error(line, format!("undefined parameter `{p}`"))),
                Some(&v) if v < 0.0 => errors.push(Diagnostic::error(
                    line,
                    format!("negative rate constant `{p}` = {v}"),
                )),
                _ => {}
            }
        }
        if errors.len() == before {
            // Cannot fail: the checks above mirror the builder's.
            let _ = builder.reaction(ReactionSpec {
                name: rx.name,
                reactants: rx.reactants,
                products: rx.products,
                rate: rx.rate,
            });
            reaction_lines.push(line);
        }
    }

    let mut counts: Vec<i64> = vec![0; species_lines.len()];
    let index_of = |b: &NetworkBuilder, name: &str| b.species_index(name);
    for (line, name, count) in &init {
        match index_of(&builder, name) {
            Some(i) => counts[i] = *count,
            None => errors.push(Diagnostic::error(*line, format!("INIT names unknown species `{name}`"))),
        }
    }

    let mut part = None;
    let partition_line = partition.as_ref().map(|p| p.0);
    if let Some((line, c, d, scale)) = &partition {
        let lookup = |names: &[String], errors: &mut Vec<Diagnostic>| -> Vec<usize> {
            names
                .iter()
                .filter_map(|n| {
                    let i = index_of(&builder, n);
                    if i.is_none() {
                        errors.push(Diagnostic::error(
                            *line,
                            format!("PARTITION names unknown species `{n}`"),
                        ));
                    }
                    i
                })
                .collect()
        };
        let ci = lookup(c, &mut errors);
        let di = lookup(d, &mut errors);
        if ci.len() == c.len() && di.len() == d.len() {
            match Partition::new(species_lines.len(), ci, di, *scale) {
                Ok(p) => part = Some(p),
                Err(e) => errors.push(Diagnostic::error(*line, e.to_string())),
            }
        }
    }

    if !errors.is_empty() {
        errors.sort_by_key(|d| d.line);
        return Err(errors);
    }
    let network = builder
        .build()
        .map_err(|e| vec![Diagnostic::error(model_line, e.to_string())])?;
    let initial = SystemState::new(counts)
        .map_err(|e| vec![Diagnostic::error(model_line, e.to_string())])?;
    Ok(ModelDocument {
        name: model.map(|m| m.1).unwrap_or_default(),
        description,
        network,
        initial,
        partition: part,
        source: SourceMap {
            model: model_line,
            species: species_lines,
            reactions: reaction_lines,
            partition: partition_line,
        },
    })
}

/// Byte-level entry point; invalid UTF-8 becomes a diagnostic.
pub fn parse_model_bytes(bytes: &[u8]) -> Result<ModelDocument, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_model(text),
        Err(e) => {
            let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
            Err(vec![Diagnostic::error(line, "input is not valid UTF-8")])
        }
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_constant(k: &RateConstant) -> String {
    match k {
        RateConstant::Param(p) => p.clone(),
        RateConstant::Value(v) => fmt_float(*v),
    }
}

/// Canonical text: reversible pairs stay expanded, every species gets an
/// INIT entry, and an empty PARAMS line is omitted.
pub fn serialize_model(doc: &ModelDocument) -> String {
    use std::fmt::Write;
    let net = &doc.network;
    let name = |i: usize| net.species()[i].name.as_str();
    let mut out = String::new();
    let _ = writeln!(out, "MODEL {}", doc.name);
    if let Some(d) = &doc.description {
        let _ = writeln!(out, "DESCRIPTION {d}");
    }
    let _ = writeln!(out, "SPECIES {}", net.species_names().join(" "));
    if !net.parameters().is_empty() {
        let params: Vec<String> = net
            .parameters()
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_float(*v)))
            .collect();
        let _ = writeln!(out, "PARAMS {}", params.join(" "));
    }
    if let Some(p) = &doc.partition {
        let c: Vec<&str> = p.continuous().iter().map(|&i| name(i)).collect();
        let d: Vec<&str> = p.discrete().iter().map(|&i| name(i)).collect();
        let _ = write!(out, "PARTITION CONTINUOUS");
        for s in &c {
            let _ = write!(out, " {s}");
        }
        let _ = write!(out, " DISCRETE");
        for s in &d {
            let _ = write!(out, " {s}");
        }
        let _ = writeln!(out, " SCALE {}", fmt_float(p.scale()));
    }
    let init: Vec<String> = doc
        .initial
        .counts()
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}={c}", name(i)))
        .collect();
    if !init.is_empty() {
        let _ = writeln!(out, "INIT {}", init.join(" "));
    }
    for r in net.reactions() {
        let term = |m: String, s: usize| {
            if m == "1" {
                name(s).to_string()
            } else {
                format!("{m} {}", name(s))
            }
        };
        let lhs: Vec<String> = r
            .reactants
            .iter()
            .map(|&(s, m)| term(m.to_string(), s))
            .collect();
        let rhs: Vec<String> = r
            .products
            .iter()
            .map(|p| {
                let m = match &p.coefficient {
                    Coefficient::Literal(m) => m.to_string(),
                    Coefficient::Param(q) => q.clone(),
                };
                term(m, p.species)
            })
            .collect();
        let rate = match &r.rate {
            RateLaw::MassAction(k) => fmt_constant(k),
            RateLaw::StateTable { species, entries } => {
                let names: Vec<&str> = species.iter().map(|&s| name(s)).collect();
                let mut s = format!("table({})", names.join(","));
                for (key, v) in entries {
                    let key: Vec<String> = key.iter().map(i64::to_string).collect();
                    s.push_str(&format!(" {}:{}", key.join(","), fmt_float(*v)));
                }
                s
            }
        };
        let arrow_lhs = if lhs.is_empty() {
            String::new()
        } else {
            format!("{} ", lhs.join(" + "))
        };
        let arrow_rhs = if rhs.is_empty() {
            String::new()
        } else {
            format!(" {}", rhs.join(" + "))
        };
        let _ = writeln!(out, "RXN {}: {arrow_lhs}->{arrow_rhs} @ {rate}", r.name);
    }
    out
}

/// Non-fatal checks. `hybrid_requested` flags a PDMP run without partition.
pub fn validate_model(doc: &ModelDocument, hybrid_requested: bool) -> Vec<Diagnostic> {
    let net = &doc.network;
    let mut out = Vec::new();
    let species_line = |i: usize| doc.source.species.get(i).copied().unwrap_or(doc.source.model);
    let reaction_line = |r: usize| doc.source.reactions.get(r).copied().unwrap_or(doc.source.model);
    for s in net.species() {
        if net.reactions().iter().all(|r| r.jump()[s.index] == 0) {
            out.push(Diagnostic::warning(
                species_line(s.index),
                format!("species `{}` is never produced or consumed", s.name),
            ));
        }
    }
    match &doc.partition {
        None if hybrid_requested => out.push(Diagnostic::warning(
            doc.source.model,
            "partition required for pdmp",
        )),
        None => {}
        Some(p) => {
            for (r, class) in classify_reactions(net, p).into_iter().enumerate() {
                let rx = &net.reactions()[r];
                let order: u32 = rx.reactants.iter().map(|&(_, m)| m).sum();
                if class == ReactionClass::Rc
                    && order >= 3
                    && matches!(rx.rate, RateLaw::MassAction(_))
                {
                    out.push(Diagnostic::warning(
                        reaction_line(r),
                        format!(
                            "continuous reaction `{}` has order {order}; its scaled rate drops falling-factorial corrections",
                            rx.name
                        ),
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const COOK: &str = "\
MODEL cook
SPECIES G G* P
PARAMS k1=20 km1=10 k2=4000 k3=1
PARTITION CONTINUOUS P DISCRETE G G* SCALE 1
INIT G=1
RXN switch: G <-> G* @ k1, km1
RXN production: G* -> G* + P @ k2
RXN degradation: P -> @ k3
";

    fn errors_of(text: &str) -> Vec<Diagnostic> {
        parse_model(text).expect_err("should fail")
    }

    #[test]
    fn dimerization_line() {
        let doc = parse_model("MODEL m\n2 C -> C2 @ k1\nPARAMS k1=0.1\n").unwrap();
        let r = &doc.network.reactions()[0];
        assert_eq!(r.name, "R1");
        assert_eq!(r.jump(), &[-2, 1]);
        assert_eq!(r.order(), 2);
    }

    #[test]
    fn catalyst_stays_reactant() {
        let doc = parse_model(COOK).unwrap();
        let prod = &doc.network.reactions()[2];
        assert_eq!(prod.name, "production");
        assert_eq!(prod.jump(), &[0, 0, 1]);
        assert_eq!(prod.reactants, vec![(1, 1)]);
        assert_eq!(doc.network.reactions()[0].name, "switch_fwd");
        assert_eq!(doc.network.reactions()[1].name, "switch_rev");
        assert_eq!(doc.initial.counts(), &[1, 0, 0]);
        assert!(validate_model(&doc, true).is_empty());
    }

    #[test]
    fn negative_literal_rate() {
        let errs = errors_of("MODEL m\nSPECIES C\n\nC -> @ -0.1\n");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 4);
        assert!(errs[0].message.contains("negative rate constant"));
    }

    #[test]
    fn negative_parameter_rate_reported_at_reaction() {
        let errs = errors_of("MODEL m\nPARAMS k=-1\nC -> @ k\n");
        assert_eq!(errs[0].line, 3);
        assert!(errs[0].message.contains("negative rate constant"));
    }

    #[test]
    fn collected_errors() {
        let text = "MODEL m\nSPECIES A A\nA -> B @ k\n0 A -> @ 1\nINIT Z=1\nPARTITION CONTINUOUS Q\n";
        let errs = errors_of(text);
        let lines: Vec<usize> = errs.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 3, 3, 4, 5, 6]);
    }

    #[test]
    fn missing_model_block() {
        let errs = errors_of("");
        assert_eq!(errs[0].message, "no MODEL block");
        assert_eq!(errs[0].line, 1);
    }

    #[test]
    fn partition_must_cover() {
        let errs = errors_of("MODEL m\nA -> B @ 1\nPARTITION CONTINUOUS A\n");
        assert_eq!(errs[0].line, 3);
    }

    #[test]
    fn burst_parameter_and_table() {
        let text = "MODEL b\nPARAMS n=3 k=0.5\nD1 -> D1 + n C @ k\nRXN flip: D1 -> D2 @ table(D1) 1:2.5 2:4\n";
        let doc = parse_model(text).unwrap();
        assert_eq!(doc.network.reactions()[0].jump(), &[0, 3, 0]);
        let again = parse_model(&serialize_model(&doc)).unwrap();
        assert_eq!(again.network, doc.network);
    }

    #[test]
    fn round_trip_and_empty_params() {
        let doc = parse_model(COOK).unwrap();
        let text = serialize_model(&doc);
        let again = parse_model(&text).unwrap();
        assert_eq!(serialize_model(&again), text);
        assert_eq!(again.network, doc.network);
        assert_eq!(again.partition, doc.partition);

        let bare = parse_model("MODEL z\nA -> B @ 0.5\n").unwrap();
        assert!(!serialize_model(&bare).contains("PARAMS"));
    }

    #[test]
    fn warnings() {
        let doc = parse_model("MODEL w\nSPECIES A B Z\nA -> B @ 1\n").unwrap();
        let w = validate_model(&doc, true);
        assert!(w.iter().any(|d| d.message.contains("`Z`") && d.line == 2));
        assert!(w.iter().any(|d| d.message == "partition required for pdmp" && d.line == 1));

        let doc = parse_model(
            "MODEL t\n3 A -> B @ 1\nPARTITION CONTINUOUS A B SCALE 100\n",
        )
        .unwrap();
        let w = validate_model(&doc, false);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].line, 2);
    }

    #[test]
    fn invalid_utf8() {
        let errs = parse_model_bytes(b"MODEL a\n\xff\xfe").unwrap_err();
        assert_eq!(errs[0].line, 2);
    }
}
