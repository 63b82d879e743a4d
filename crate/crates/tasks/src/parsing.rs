//! Executable-query semantic parsing over a small restaurant database.
//!
//! Parses are pre-order token sequences of
//!
//! ```text
//! query := lookup ATTR ENTITY | lookup ATTR set | set
//! set   := filter ATTR VALUE | and set set
//! ```
//!
//! `lookup` returns attribute values, sets return entity names. Anything that
//! does not parse, or leaves tokens over, executes to the empty answer.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rampkit_core::metrics::Answer;
use rampkit_core::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{self, tokens, ParsingInstance, Tokens};
use crate::error::{DataError, Result};
use crate::manifest::{length_ratio, Manifest};

pub const LOOKUP: &str = "lookup";
pub const FILTER: &str = "filter";
pub const AND: &str = "and";

/// Set of `(entity, attribute, value)` triples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ToyDatabase {
    triples: BTreeSet<(String, String, String)>,
    attributes: BTreeSet<String>,
    entities: BTreeSet<String>,
}

impl ToyDatabase {
    pub fn new<I, S>(triples: I) -> Self
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut db = Self::default();
        for (e, a, v) in triples {
            let (e, a) = (e.into(), a.into());
            db.entities.insert(e.clone());
            db.attributes.insert(a.clone());
            db.triples.insert((e, a, v.into()));
        }
        db
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.triples
            .iter()
            .map(|(e, a, v)| (e.as_str(), a.as_str(), v.as_str()))
    }

    pub fn is_attribute(&self, a: &str) -> bool {
        self.attributes.contains(a)
    }

    pub fn is_entity(&self, e: &str) -> bool {
        self.entities.contains(e)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    /// Values of `attr` for `entity`.
    pub fn values<'a>(
        &'a self,
        entity: &'a str,
        attr: &'a str,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.triples
            .iter()
            .filter(move |(e, a, _)| e == entity && a == attr)
            .map(|(_, _, v)| v.as_str())
    }

    /// Entities with `attr = value`.
    pub fn select(&self, attr: &str, value: &str) -> BTreeSet<&str> {
        self.triples
            .iter()
            .filter(|(_, a, v)| a == attr && v == value)
            .map(|(e, _, _)| e.as_str())
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.triples()
            .map(|(e, a, v)| format!("{e}\t{a}\t{v}\n"))
            .collect()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 || f.iter().any(|s| s.is_empty() || s.contains(' ')) {
                return Err(DataError::line(
                    origin,
                    i + 1,
                    "expected `entity<TAB>attribute<TAB>value`",
                ));
            }
            rows.push((f[0], f[1], f[2]));
        }
        Ok(Self::new(rows))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

struct Exec<'a, S> {
    db: &'a ToyDatabase,
    toks: &'a [S],
    pos: usize,
}

impl<'a, S: AsRef<str>> Exec<'a, S> {
    fn next(&mut self) -> Option<&'a str> {
        let t = self.toks.get(self.pos)?.as_ref();
        self.pos += 1;
        Some(t)
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(AsRef::as_ref)
    }

    fn attribute(&mut self) -> Option<&'a str> {
        self.next().filter(|a| self.db.is_attribute(a))
    }

    fn set(&mut self) -> Option<BTreeSet<&'a str>> {
        match self.next()? {
            FILTER => {
                let a = self.attribute()?;
                let v = self.next()?;
                Some(self.db.select(a, v))
            }
            AND => {
                let l = self.set()?;
                let r = self.set()?;
                Some(l.intersection(&r).copied().collect())
            }
            _ => None,
        }
    }

    fn query(&mut self) -> Option<BTreeSet<&'a str>> {
        if self.peek()? != LOOKUP {
            return self.set();
        }
        self.pos += 1;
        let a = self.attribute()?;
        let ents = match self.peek()? {
            FILTER | AND => self.set()?,
            e if self.db.is_entity(e) => {
                self.pos += 1;
                BTreeSet::from([e])
            }
            _ => return None,
        };
        Some(
            ents.into_iter()
                .flat_map(|e| self.db.values(e, a))
                .collect(),
        )
    }
}

/// Executes a pre-order parse. Malformed parses give the empty answer.
pub fn execute<S: AsRef<str>>(parse: &[S], db: &ToyDatabase) -> Answer {
    let mut ex = Exec {
        db,
        toks: parse,
        pos: 0,
    };
    match ex.query() {
        Some(out) if ex.pos == parse.len() => out.into_iter().collect(),
        _ => Answer::empty(),
    }
}

const ENTITIES: [&str; 24] = [
    "rosso", "bamboo", "olive", "lotus", "saffron", "basil", "ginger", "mango", "tulip", "amber",
    "coral", "ember", "fennel", "harbor", "ivy", "jasmine", "kiwi", "lemon", "nutmeg", "orchid",
    "pepper", "quince", "sage", "thyme",
];
const STREETS: [&str; 24] = [
    "elm", "oak", "birch", "cedar", "maple", "pine", "ash", "willow", "hazel", "rowan", "alder",
    "beech", "larch", "poplar", "spruce", "yew", "holly", "laurel", "juniper", "linden", "cypress",
    "fir", "aspen", "chestnut",
];
const OWNERS: [&str; 24] = [
    "anna", "boris", "chen", "dara", "emil", "fatima", "goran", "hana", "ivan", "jana", "kofi",
    "lena", "marco", "nina", "omar", "petra", "quinn", "rosa", "sven", "tara", "ugo", "vera",
    "wim", "yara",
];

/// Attributes with one distinct value per entity, and their question words.
const UNIQUE: [(&str, [&str; 3]); 2] = [
    ("street", ["street", "address", "road"]),
    ("owner", ["owner", "proprietor", "boss"]),
];

/// Shared-value attributes in canonical conjunction order.
const CATEGORICAL: [(&str, &[&str]); 3] = [
    ("cuisine", &["italian", "thai", "greek", "french", "indian"]),
    ("city", &["paris", "rome", "oslo", "lima"]),
    ("price", &["cheap", "moderate", "expensive"]),
];

fn price_words(v: &str) -> &'static [&'static str] {
    match v {
        "cheap" => &["cheap", "inexpensive", "budget"],
        "moderate" => &["moderate", "midrange", "average"],
        _ => &["expensive", "pricey", "upscale"],
    }
}

const PREFIXES: [&str; 5] = ["", "please", "hey", "i want to know", "quick question"];
const SUFFIXES: [&str; 2] = ["?", ""];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cond {
    attr: usize,
    value: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Form {
    Lookup { u: usize, entity: String },
    Filter(Cond),
    And(Cond, Cond),
    LookupSet { u: usize, cond: Cond },
}

impl Form {
    fn parse(&self) -> Tokens {
        let cond = |c: &Cond| {
            vec![
                FILTER.to_string(),
                CATEGORICAL[c.attr].0.to_string(),
                c.value.to_string(),
            ]
        };
        let mut p: Tokens = Vec::new();
        match self {
            Form::Lookup { u, entity } => {
                p.extend([LOOKUP.to_string(), UNIQUE[*u].0.to_string(), entity.clone()]);
            }
            Form::Filter(c) => p = cond(c),
            Form::And(a, b) => {
                p.push(AND.to_string());
                p.extend(cond(a));
                p.extend(cond(b));
            }
            Form::LookupSet { u, cond: c } => {
                p.extend([LOOKUP.to_string(), UNIQUE[*u].0.to_string()]);
                p.extend(cond(c));
            }
        }
        p
    }

    fn question<R: Rng>(&self, rng: &mut R) -> String {
        let body = match self {
            Form::Lookup { u, entity } => {
                let w = UNIQUE[*u].1.choose(rng).unwrap();
                let t = [
                    "what is the {U} of {E}",
                    "{E} {U}",
                    "which {U} does {E} have",
                    "give me the {U} of {E}",
                    "the {U} of {E}",
                ];
                t.choose(rng)
                    .unwrap()
                    .replace("{U}", w)
                    .replace("{E}", entity)
            }
            Form::Filter(c) => {
                let mut t: Vec<String> = [
                    "list {NP}",
                    "which are the {NP}",
                    "show {NP}",
                    "{NP}",
                    "find {NP}",
                ]
                .iter()
                .map(|s| s.replace("{NP}", &noun_phrase(&[*c], rng)))
                .collect();
                let w = word(c, rng);
                match CATEGORICAL[c.attr].0 {
                    "cuisine" => t.extend([
                        format!("which places serve {w} food"),
                        format!("where can i eat {w} food"),
                    ]),
                    "city" => t.push(format!("which places are in {w}")),
                    _ => t.push(format!("which places are {w}")),
                }
                t.choose(rng).unwrap().clone()
            }
            Form::And(a, b) => {
                let np = noun_phrase(&[*a, *b], rng);
                let t = [
                    "list {NP}",
                    "which are the {NP}",
                    "show {NP}",
                    "{NP}",
                    "find {NP}",
                ];
                t.choose(rng).unwrap().replace("{NP}", &np)
            }
            Form::LookupSet { u, cond } => {
                let w = UNIQUE[*u].1.choose(rng).unwrap();
                let t = [
                    "what are the {U} of {NP}",
                    "{U} of {NP}",
                    "list the {U} of {NP}",
                    "give me the {U} of {NP}",
                ];
                t.choose(rng)
                    .unwrap()
                    .replace("{U}", w)
                    .replace("{NP}", &noun_phrase(&[*cond], rng))
            }
        };
        let pre = PREFIXES.choose(rng).unwrap();
        let suf = SUFFIXES.choose(rng).unwrap();
        format!("{pre} {body} {suf}")
    }
}

fn word<R: Rng>(c: &Cond, rng: &mut R) -> &'static str {
    if CATEGORICAL[c.attr].0 == "price" {
        price_words(c.value).choose(rng).unwrap()
    } else {
        c.value
    }
}

/// Noun phrase for one or two conditions, in canonical attribute order.
fn noun_phrase<R: Rng>(conds: &[Cond], rng: &mut R) -> String {
    let head = ["places", "restaurants"].choose(rng).unwrap();
    let (mut pre, mut post) = (Vec::new(), Vec::new());
    for c in conds {
        let w = word(c, rng);
        match CATEGORICAL[c.attr].0 {
            "city" => post.push(format!("in {w}")),
            "price" => pre.insert(0, w.to_string()),
            _ => pre.push(w.to_string()),
        }
    }
    let mut s = pre;
    s.push(head.to_string());
    s.extend(post);
    s.join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParsingSizes {
    pub supervised: usize,
    pub weak: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for ParsingSizes {
    fn default() -> Self {
        Self {
            supervised: 200,
            weak: 2000,
            dev: 300,
            test: 300,
        }
    }
}

impl ParsingSizes {
    pub fn validate(&self) -> Result<()> {
        if [self.supervised, self.weak, self.dev, self.test].contains(&0) {
            return Err(DataError::Sizes(format!(
                "all split sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsingTask {
    pub seed: u64,
    pub db: ToyDatabase,
    pub supervised: Vec<ParsingInstance>,
    pub weak: Vec<ParsingInstance>,
    pub dev: Vec<ParsingInstance>,
    pub test: Vec<ParsingInstance>,
}

const N_ENTITIES: usize = 20;

fn generate_db(seed: u64) -> ToyDatabase {
    for attempt in 0.. {
        let rng = &mut substream(seed, "parsing/db", attempt);
        let mut names = ENTITIES.to_vec();
        names.shuffle(rng);
        names.truncate(N_ENTITIES);
        let mut streets = STREETS.to_vec();
        streets.shuffle(rng);
        let mut owners = OWNERS.to_vec();
        owners.shuffle(rng);
        let mut rows = Vec::new();
        for (i, &e) in names.iter().enumerate() {
            rows.push((e, "street", streets[i]));
            rows.push((e, "owner", owners[i]));
            for (a, vals) in CATEGORICAL {
                rows.push((e, a, vals.choose(rng).unwrap()));
            }
        }
        let db = ToyDatabase::new(rows);
        // every filter non-empty and distinct from every other filter
        let mut sets = HashSet::new();
        let ok = CATEGORICAL
            .iter()
            .flat_map(|(a, vals)| vals.iter().map(move |v| (*a, *v)))
            .all(|(a, v)| {
                let s = db.select(a, v);
                !s.is_empty() && sets.insert(s)
            });
        if ok {
            return db;
        }
    }
    unreachable!()
}

/// Every query form over `db` whose answer is non-empty and not produced by
/// an earlier form, so gold parses and gold answers are in bijection.
fn inventory(db: &ToyDatabase) -> Vec<Form> {
    let conds: Vec<Cond> = CATEGORICAL
        .iter()
        .enumerate()
        .flat_map(|(attr, (_, vals))| vals.iter().map(move |&value| Cond { attr, value }))
        .collect();
    let mut forms = Vec::new();
    for u in 0..UNIQUE.len() {
        for e in db.entities() {
            forms.push(Form::Lookup {
                u,
                entity: e.to_string(),
            });
        }
    }
    forms.extend(conds.iter().map(|&c| Form::Filter(c)));
    for (i, a) in conds.iter().enumerate() {
        for b in &conds[i + 1..] {
            if a.attr < b.attr {
                forms.push(Form::And(*a, *b));
            }
        }
    }
    for u in 0..UNIQUE.len() {
        forms.extend(conds.iter().map(|&cond| Form::LookupSet { u, cond }));
    }
    let mut seen = HashSet::new();
    forms
        .into_iter()
        .filter(|f| {
            let a = execute(&f.parse(), db);
            !a.is_empty() && seen.insert(a)
        })
        .collect()
}

/// Generates the database and the four splits. Question strings are unique
/// across all splits; weak instances keep only the answer.
pub fn generate_parsing_task(seed: u64, sizes: ParsingSizes) -> Result<ParsingTask> {
    sizes.validate()?;
    let db = generate_db(seed);
    let forms = inventory(&db);
    let mut used = HashSet::new();
    let mut split = |name: &str, n: usize, keep_parse: bool| -> Result<Vec<ParsingInstance>> {
        let rng = &mut substream(seed, name, 0);
        let mut out = Vec::with_capacity(n);
        let mut tries = 0usize;
        while out.len() < n {
            tries += 1;
            if tries > 100 * n + 10_000 {
                return Err(DataError::Sizes(format!(
                    "cannot draw {n} distinct questions for {name}"
                )));
            }
            let f = forms.choose(rng).unwrap();
            let q = tokens(&f.question(rng));
            if !used.insert(q.join(" ")) {
                continue;
            }
            let parse = f.parse();
            let answer = execute(&parse, &db);
            out.push(ParsingInstance {
                question: q,
                parse: keep_parse.then_some(parse),
                answer,
            });
        }
        Ok(out)
    };
    let test = split("parsing/test", sizes.test, true)?;
    let dev = split("parsing/dev", sizes.dev, true)?;
    let supervised = split("parsing/supervised", sizes.supervised, true)?;
    let weak = split("parsing/weak", sizes.weak, false)?;
    Ok(ParsingTask {
        seed,
        db,
        supervised,
        weak,
        dev,
        test,
    })
}

/// Checks that distinct gold parses in `instances` have distinct answers.
pub fn check_unambiguous(instances: &[ParsingInstance]) -> Result<()> {
    let mut by_answer: std::collections::HashMap<&Answer, &Tokens> =
        std::collections::HashMap::new();
    for x in instances {
        if let Some(p) = &x.parse {
            if let Some(q) = by_answer.insert(&x.answer, p) {
                if q != p {
                    return Err(DataError::Invalid(format!(
                        "parses `{}` and `{}` share answer {}",
                        q.join(" "),
                        p.join(" "),
                        x.answer.to_field()
                    )));
                }
            }
        }
    }
    Ok(())
}

pub const SPLITS: [&str; 4] = ["supervised", "weak", "dev", "test"];

impl ParsingTask {
    pub fn split(&self, name: &str) -> Option<&[ParsingInstance]> {
        match name {
            "supervised" => Some(&self.supervised),
            "weak" => Some(&self.weak),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn manifest(&self) -> Manifest {
        let pairs = self.supervised.iter().filter_map(|x| {
            x.parse
                .as_ref()
                .map(|p| (x.question.as_slice(), p.as_slice()))
        });
        Manifest {
            task: "parsing".into(),
            seed: self.seed,
            sizes: SPLITS
                .iter()
                .map(|s| (s.to_string(), self.split(s).unwrap().len()))
                .collect(),
            length_ratio: length_ratio(pairs),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.db.save(dir.join("db.tsv"))?;
        for s in SPLITS {
            corpus::save(dir.join(format!("{s}.tsv")), self.split(s).unwrap())?;
        }
        self.manifest().save(dir.join("manifest.txt"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let m = Manifest::load(dir.join("manifest.txt"))?;
        if m.task != "parsing" {
            return Err(DataError::Invalid(format!(
                "{} holds a {} task",
                dir.display(),
                m.task
            )));
        }
        let load = |s: &str| corpus::load::<ParsingInstance>(dir.join(format!("{s}.tsv")));
        Ok(Self {
            seed: m.seed,
            db: ToyDatabase::load(dir.join("db.tsv"))?,
            supervised: load("supervised")?,
            weak: load("weak")?,
            dev: load("dev")?,
            test: load("test")?,
        })
    }
}
