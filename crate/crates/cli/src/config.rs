//! Run configuration in a flat `key = value` format with `[section]`
//! headers. `[weight]` and `[domain]` may repeat; every other section
//! appears at most once. Comments start with `#` or `;`.
//!
//! ```text
//! command = verify
//!
//! [space]
//! curvature = euclidean
//! n = 2
//!
//! [weight]
//! kind = linear
//! a = 0.5
//!
//! [domain]
//! kind = ellipse
//! a = 1.2
//! b = 0.8
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use steklov_core::axisym3d::MeridianKind;
use steklov_core::{Curvature, Domain2D, RadialWeight, SpaceForm, TestDomain, VerifyConfig, WeightTable};
use steklov_core::mesh2d::DomainKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based line of the offending entry; 0 for whole-file problems.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ball,
    Spectrum,
    Verify,
    Sweep,
    Converge,
    Chain,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ball => "ball",
            Command::Spectrum => "spectrum",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Converge => "converge",
            Command::Chain => "chain",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ball" => Command::Ball,
            "spectrum" => Command::Spectrum,
            "verify" => Command::Verify,
            "sweep" => Command::Sweep,
            "converge" => Command::Converge,
            "chain" => Command::Chain,
            _ => return Err(format!("unknown command `{s}` (expected ball, spectrum, verify, sweep, converge or chain)")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            _ => Err(format!("unknown format `{s}` (expected csv, json or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
    /// Nonzero eigenvalues reported by `spectrum`.
    pub eigenvalues: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Both,
            eigenvalues: 6,
        }
    }
}

/// Fully resolved configuration, defaults included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub space: SpaceForm,
    pub weights: Vec<RadialWeight>,
    pub domains: Vec<TestDomain>,
    /// Ball radii for `ball`.
    pub radii: Vec<f64>,
    /// Mesh, tolerance and integrator settings.
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Space,
    Weight,
    Domain,
    Mesh,
    Radial,
    Tolerances,
    Output,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "space" => Section::Space,
            "weight" => Section::Weight,
            "domain" => Section::Domain,
            "mesh" => Section::Mesh,
            "radial" => Section::Radial,
            "tolerances" => Section::Tolerances,
            "output" => Section::Output,
            _ => return None,
        })
    }

    fn repeatable(self) -> bool {
        matches!(self, Section::Weight | Section::Domain)
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Section::Top => "top level",
            Section::Space => "[space]",
            Section::Weight => "[weight]",
            Section::Domain => "[domain]",
            Section::Mesh => "[mesh]",
            Section::Radial => "[radial]",
            Section::Tolerances => "[tolerances]",
            Section::Output => "[output]",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Key-value block of one section occurrence.
#[derive(Debug, Clone)]
struct Block {
    section: Section,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Block {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .or_else(|m| err(e.line, format!("{} `{key}`: cannot parse `{}`: {m}", self.section, e.value))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let line = self.line;
        let section = self.section;
        self.get(key)?
            .map_or_else(|| err(line, format!("{section} is missing required key `{key}`")), Ok)
    }

    fn list(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>, ConfigError> {
        let Some(e) = self.take(key) else { return Ok(None) };
        let vals = parse_list(&e.value).or_else(|m| err(e.line, format!("{} `{key}`: {m}", self.section)))?;
        Ok(Some((e.line, vals)))
    }

    /// Every key must have been consumed.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some((k, e)) => err(e.line, format!("unknown key `{k}` in {}", self.section)),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

fn parse_bool(line: usize, key: &str, s: &str) -> Result<bool, ConfigError> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => err(line, format!("`{key}` expects true or false, got `{s}`")),
    }
}

fn split_blocks(text: &str) -> Result<Vec<Block>, ConfigError> {
    let mut blocks = vec![Block {
        section: Section::Top,
        line: 1,
        entries: BTreeMap::new(),
    }];
    let mut seen = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(line, format!("malformed section header `{s}`"));
            };
            let name = name.trim();
            let Some(section) = Section::parse(name) else {
                return err(line, format!("unknown section `[{name}]`"));
            };
            if !section.repeatable() {
                if seen.contains(&section) {
                    return err(line, format!("section {section} appears twice"));
                }
                seen.push(section);
            }
            blocks.push(Block {
                section,
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return err(line, format!("expected `key = value`, got `{s}`"));
        };
        let key = k.trim().to_string();
        let value = strip_comment(v).trim().to_string();
        if key.is_empty() {
            return err(line, "empty key");
        }
        let block = blocks.last_mut().expect("top block");
        if block.entries.contains_key(&key) {
            return err(line, format!("duplicate key `{key}` in {}", block.section));
        }
        block.entries.insert(key, Entry { line, value });
    }
    Ok(blocks)
}

/// Inline comments need whitespace before the marker so paths keep `#`.
fn strip_comment(v: &str) -> &str {
    [" #", " ;", "\t#", "\t;"]
        .iter()
        .filter_map(|m| v.find(m))
        .min()
        .map_or(v, |i| &v[..i])
}

/// Parses and validates a configuration. Relative table paths resolve
/// against `base`.
pub fn parse_config_at(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let blocks = split_blocks(text)?;
    let mut command = None;
    let mut seed = 0u64;
    let mut space = SpaceForm::euclidean(2);
    let mut weights = Vec::new();
    let mut domain_blocks = Vec::new();
    let mut radii = Vec::new();
    let mut verify = VerifyConfig::default();
    let mut output = OutputConfig::default();

    for mut b in blocks {
        match b.section {
            Section::Top => {
                command = b.get::<Command>("command")?;
                seed = b.get("seed")?.unwrap_or(0);
            }
            Section::Space => {
                let line = b.line;
                let curvature = match b.get::<String>("curvature")?.as_deref() {
                    None | Some("euclidean") => Curvature::Euclidean,
                    Some("hyperbolic") => Curvature::Hyperbolic,
                    Some("spherical") => Curvature::Spherical,
                    Some(other) => return err(line, format!("unknown curvature `{other}`")),
                };
                let n = b.get::<usize>("n")?.unwrap_or(2);
                space = SpaceForm::new(curvature, n).or_else(|e| err(line, e.to_string()))?;
            }
            Section::Weight => {
                weights.push(parse_weight(&mut b, base)?);
            }
            // Domains are interpreted once the dimension is known.
            Section::Domain => {
                domain_blocks.push(b);
                continue;
            }
            Section::Mesh => {
                let d = &mut verify;
                d.rings = b.get("rings")?.unwrap_or(d.rings);
                d.sectors = b.get("sectors")?.unwrap_or(d.sectors);
                d.half_rings = b.get("half_rings")?.unwrap_or(d.half_rings);
                d.half_sectors = b.get("half_sectors")?.unwrap_or(d.half_sectors);
                d.levels = b.get("levels")?.unwrap_or(d.levels);
                if let Some((line, m)) = b.list("modes")? {
                    d.modes = m
                        .iter()
                        .map(|&x| if x >= 0.0 && x.fract() == 0.0 { Ok(x as usize) } else { err(line, format!("mode `{x}` is not a nonnegative integer")) })
                        .collect::<Result<_, _>>()?;
                }
            }
            Section::Radial => {
                if let Some((line, r)) = b.list("radii")? {
                    if r.is_empty() || r.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                        return err(line, "radii must be a nonempty list of positive numbers");
                    }
                    radii = r;
                }
                let rc = &mut verify.radial;
                rc.rtol = b.get("rtol")?.unwrap_or(rc.rtol);
                rc.start_fraction = b.get("start_fraction")?.unwrap_or(rc.start_fraction);
                rc.grid_points = b.get("grid_points")?.unwrap_or(rc.grid_points);
                rc.max_steps = b.get("max_steps")?.unwrap_or(rc.max_steps);
                if let Some(tol) = b.get::<f64>("property_tol")? {
                    rc.property_tol = Some(tol);
                }
                if let Some(e) = b.take("waive_admissibility") {
                    rc.waive_admissibility = parse_bool(e.line, "waive_admissibility", &e.value)?;
                }
            }
            Section::Tolerances => {
                let d = &mut verify;
                d.slack_floor = b.get("slack_floor")?.unwrap_or(d.slack_floor);
                d.slack_factor = b.get("slack_factor")?.unwrap_or(d.slack_factor);
                d.equality_floor = b.get("equality_floor")?.unwrap_or(d.equality_floor);
                d.radius_rtol = b.get("radius_rtol")?.unwrap_or(d.radius_rtol);
                d.r_max = b.get("r_max")?.unwrap_or(d.r_max);
            }
            Section::Output => {
                if let Some(dir) = b.get::<String>("dir")? {
                    output.dir = base.join(dir);
                }
                output.format = b.get("format")?.unwrap_or(output.format);
                output.eigenvalues = b.get("eigenvalues")?.unwrap_or(output.eigenvalues);
            }
        }
        b.finish()?;
    }

    let Some(command) = command else {
        return err(0, "missing top-level `command`");
    };
    let domains = domain_blocks
        .into_iter()
        .map(|mut b| {
            let d = parse_domain(&mut b, &space)?;
            b.finish()?;
            Ok(d)
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    if weights.is_empty() {
        weights.push(RadialWeight::zero());
    }
    verify.validate().or_else(|e| err(0, e.to_string()))?;
    if output.eigenvalues == 0 {
        return err(0, "[output] eigenvalues must be at least 1");
    }

    match command {
        Command::Ball => {
            if radii.is_empty() {
                return err(0, "command `ball` needs `radii` in [radial]");
            }
        }
        Command::Spectrum | Command::Verify | Command::Converge | Command::Chain if domains.len() != 1 || weights.len() != 1 => {
            return err(0, format!("command `{}` takes exactly one [domain] and at most one [weight]", command.name()));
        }
        Command::Sweep if domains.is_empty() => return err(0, "command `sweep` needs at least one [domain]"),
        _ => {}
    }
    if command == Command::Chain && (space.dim != 2 || !matches!(domains[0], TestDomain::Planar(_))) {
        return err(0, "command `chain` supports planar domains only");
    }

    Ok(RunConfig {
        command,
        seed,
        space,
        weights,
        domains,
        radii,
        verify,
        output,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_at(text, Path::new("."))
}

fn parse_weight(b: &mut Block, base: &Path) -> Result<RadialWeight, ConfigError> {
    let line = b.line;
    let kind: String = b.require("kind")?;
    let w = match kind.as_str() {
        "constant" => RadialWeight::Constant { c: b.get("c")?.unwrap_or(0.0) },
        "linear" => RadialWeight::Linear { a: b.require("a")? },
        "quadratic" => RadialWeight::Quadratic {
            a: b.require("a")?,
            b: b.require("b")?,
        },
        "tabulated" => {
            let file = b.take("file");
            let t = b.list("t")?;
            let phi = b.list("phi")?;
            let table = match (file, t, phi) {
                (Some(f), None, None) => {
                    let path = base.join(&f.value);
                    let text = std::fs::read_to_string(&path).or_else(|e| err(f.line, format!("cannot read weight table {}: {e}", path.display())))?;
                    WeightTable::from_csv(&text).or_else(|e| err(f.line, format!("weight table {}: {e}", path.display())))?
                }
                (None, Some((l, t)), Some((_, phi))) => WeightTable::new(t, phi).or_else(|e| err(l, e.to_string()))?,
                _ => return err(line, "tabulated weight needs either `file` or both `t` and `phi`"),
            };
            RadialWeight::Tabulated(table)
        }
        other => return err(line, format!("unknown weight kind `{other}` (expected constant, linear, quadratic or tabulated)")),
    };
    if let RadialWeight::Linear { a } | RadialWeight::Quadratic { a, .. } = w {
        if !a.is_finite() {
            return err(line, "weight coefficients must be finite");
        }
    }
    Ok(w)
}

fn parse_offset(b: &mut Block) -> Result<[f64; 2], ConfigError> {
    match b.list("offset")? {
        None => Ok([0.0, 0.0]),
        Some((_, v)) if v.len() == 2 => Ok([v[0], v[1]]),
        Some((line, v)) => err(line, format!("offset needs 2 components, got {}", v.len())),
    }
}

fn parse_eps(b: &mut Block) -> Result<f64, ConfigError> {
    let line = b.line;
    match (b.get::<f64>("eps")?, b.get::<f64>("epsilon")?) {
        (Some(e), None) | (None, Some(e)) => Ok(e),
        (Some(_), Some(_)) => err(line, "give only one of `eps` and `epsilon`"),
        (None, None) => err(line, "[domain] is missing required key `eps`"),
    }
}

fn parse_vertices(b: &mut Block) -> Result<Vec<[f64; 2]>, ConfigError> {
    let line = b.line;
    let Some(e) = b.take("vertices") else {
        return err(line, "polygon needs `vertices = x y; x y; ...`");
    };
    e.value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let xs: Vec<f64> = pair
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()
                .or_else(|er| err(e.line, format!("vertex `{pair}`: {er}")))?;
            match xs[..] {
                [x, y] => Ok([x, y]),
                _ => err(e.line, format!("vertex `{pair}` needs two coordinates")),
            }
        })
        .collect()
}

fn parse_domain(b: &mut Block, space: &SpaceForm) -> Result<TestDomain, ConfigError> {
    let line = b.line;
    let kind: String = b.require("kind")?;
    let dom = match (space.dim, kind.as_str()) {
        (2, "disk") => DomainKind::Disk { r: b.require("r")? },
        (2, "ellipse") => DomainKind::Ellipse {
            a: b.require("a")?,
            b: b.require("b")?,
        },
        (2, "perturbed_disk" | "perturbed") => DomainKind::PerturbedDisk {
            r: b.get("r")?.unwrap_or(1.0),
            eps: parse_eps(b)?,
            k: b.require("k")?,
        },
        (2, "polygon") => DomainKind::Polygon { vertices: parse_vertices(b)? },
        (3, "ball") => return checked_meridian(line, MeridianKind::Ball { r: b.require("r")? }, space),
        (3, "spheroid") => {
            return checked_meridian(
                line,
                MeridianKind::Spheroid {
                    a: b.require("a")?,
                    c: b.require("c")?,
                },
                space,
            )
        }
        (3, "perturbed_ball") => {
            let k = MeridianKind::PerturbedBall {
                r: b.get("r")?.unwrap_or(1.0),
                eps: parse_eps(b)?,
                k: b.require("k")?,
            };
            return checked_meridian(line, k, space);
        }
        (n, other) => {
            return err(
                line,
                format!("domain kind `{other}` is not available for n = {n} (n = 2: disk, ellipse, perturbed_disk, polygon; n = 3: ball, spheroid, perturbed_ball)"),
            )
        }
    };
    let offset = parse_offset(b)?;
    let d = Domain2D::new(dom, offset).or_else(|e| err(line, e.to_string()))?;
    let t = TestDomain::Planar(d);
    t.check_form(space).or_else(|e| err(line, e.to_string()))?;
    Ok(t)
}

fn checked_meridian(line: usize, k: MeridianKind, space: &SpaceForm) -> Result<TestDomain, ConfigError> {
    k.validate().or_else(|e| err(line, e.to_string()))?;
    let t = TestDomain::Axisym(k);
    t.check_form(space).or_else(|e| err(line, e.to_string()))?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ball_config_fills_defaults() {
        let cfg = parse_config("command = ball\n[space]\nn = 2\n[weight]\nkind = constant\n[radial]\nradii = 0.5, 1, 2\n").unwrap();
        assert_eq!(cfg.command, Command::Ball);
        assert_eq!(cfg.radii, vec![0.5, 1.0, 2.0]);
        assert_eq!(cfg.weights, vec![RadialWeight::Constant { c: 0.0 }]);
        assert_eq!(cfg.verify, VerifyConfig::default());
        assert_eq!(cfg.output, OutputConfig::default());
        assert_eq!(cfg.space, SpaceForm::euclidean(2));
    }

    #[test]
    fn star_shapedness_violation_is_rejected() {
        let e = parse_config("command = verify\n[domain]\nkind = perturbed_disk\nepsilon = 0.5\nk = 3\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("command = verify\n[domain]\nkind = disk\nr = 1\nradius = 2\n").unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.message.contains("radius"));
    }

    #[test]
    fn inline_table_must_increase() {
        let text = "command = ball\n[weight]\nkind = tabulated\nt = 0, 2, 1\nphi = 0, 0, 0\n[radial]\nradii = 1\n";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("strictly increasing"));
    }

    #[test]
    fn repeated_blocks_and_comments() {
        let text = "command = sweep ; all of them\n[domain]\nkind = disk\nr = 1\n[domain]\nkind = ellipse\na = 1.2 # wide\nb = 0.8\n[weight]\nkind = linear\na = 0.5\n[weight]\nkind = quadratic\na = 1\nb = 0.25\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.domains.len(), 2);
        assert_eq!(cfg.weights.len(), 2);
    }

    #[test]
    fn dimension_selects_domain_family() {
        assert!(parse_config("command = verify\n[space]\nn = 3\n[domain]\nkind = disk\nr = 1\n").is_err());
        let cfg = parse_config("command = verify\n[space]\nn = 3\n[domain]\nkind = spheroid\na = 1.1\nc = 0.9\n").unwrap();
        assert_eq!(cfg.domains[0].dim(), 3);
    }

    #[test]
    fn hyperbolic_domain_must_fit_the_disk() {
        let e = parse_config("command = verify\n[space]\ncurvature = hyperbolic\n[domain]\nkind = disk\nr = 0.9\noffset = 0.2, 0\n").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn structural_errors() {
        assert!(parse_config("[space]\nn = 2\n").is_err());
        assert!(parse_config("command = fly\n").is_err());
        assert!(parse_config("command = ball\n[mesh]\n[mesh]\n").is_err());
        assert!(parse_config("command = ball\n[bogus]\n").is_err());
        assert!(parse_config("command = ball\nnonsense\n").is_err());
        assert!(parse_config("command = verify\n[domain]\nkind = disk\nr = 1\n[tolerances]\nslack_floor = -1\n").is_err());
        assert!(parse_config("command = verify\n[domain]\nkind = disk\nr = 1\n[mesh]\nlevels = 0\n").is_err());
    }

    #[test]
    fn polygon_vertices() {
        let cfg = parse_config("command = spectrum\n[domain]\nkind = polygon\nvertices = -1 -1; 1 -1; 1 1; -1 1\n").unwrap();
        let TestDomain::Planar(d) = &cfg.domains[0] else { panic!() };
        assert_eq!(d.kind, DomainKind::Polygon { vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]] });
    }
}
