use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use trihelix::decomp::{decompose, panel_series, DecompositionOptions, GroupingSpec};
use trihelix::infomeasure::{InfoReport, MaxEntropyMode, MeasureOptions, SubsetMask, UnitScale, DEFAULT_EPSILON};
use trihelix::ingest::{read_records, write_records, IngestConfig, IngestStats};
use trihelix::synth::{generate, GeneratorKind, GeneratorSpec, SamplingMode};
use trihelix::tableau::{build_table, DimensionSchema, Record};
use trihelix::Error;

use crate::args::{ComputeArgs, DataArgs, DecomposeArgs, Format, Kind, PanelArgs, SynthArgs};
use crate::manifest::RunManifest;
use crate::render;
use crate::CliError;

const WEIGHT_COLUMN: &str = "weight";
const PERIOD_COLUMN: &str = "period";

/// Everything a data command needs after ingestion.
struct Loaded {
    config: IngestConfig,
    schema: DimensionSchema,
    records: Vec<Record>,
    stats: IngestStats,
    input_bytes: Vec<u8>,
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    command: &'a str,
    ingest: &'a IngestConfig,
    dims: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<&'a str>,
    unit: UnitScale,
    max_mode: MaxEntropyMode,
    epsilon: f64,
}

struct Effective {
    dims: SubsetMask,
    unit: UnitScale,
    max_mode: MaxEntropyMode,
    epsilon: f64,
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| Error::io(path, e).into())
}

/// Header of a delimited file, with surrounding quotes stripped.
fn header_columns(bytes: &[u8], delimiter: char) -> Vec<String> {
    let text = String::from_utf8_lossy(bytes);
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    first
        .split(delimiter)
        .map(|c| c.trim().trim_matches('"').to_string())
        .collect()
}

fn load(data: &DataArgs) -> Result<Loaded, CliError> {
    let (config, input_bytes) = match (&data.config, &data.input) {
        (Some(path), _) => {
            let config = IngestConfig::from_path(path)?;
            let bytes = read_file(&config.input)?;
            (config, bytes)
        }
        (None, Some(input)) => {
            let bytes = read_file(input)?;
            if bytes.iter().all(u8::is_ascii_whitespace) {
                return Err(Error::Degenerate(format!("{} is empty", input.display())).into());
            }
            let columns = header_columns(&bytes, ',');
            let mut dims: Vec<String> = columns
                .iter()
                .filter(|c| c.as_str() != WEIGHT_COLUMN && c.as_str() != PERIOD_COLUMN)
                .cloned()
                .collect();
            if let Some(wanted) = &data.dims {
                dims.retain(|d| wanted.contains(d));
                for w in wanted {
                    if !columns.contains(w) {
                        return Err(Error::UnknownDimension(w.clone()).into());
                    }
                }
            }
            let schema = DimensionSchema::from_names(&dims)?;
            let mut config = IngestConfig::identity(input.clone(), &schema);
            let has = |name: &str| columns.iter().any(|c| c == name);
            config.weight_column = has(WEIGHT_COLUMN).then(|| WEIGHT_COLUMN.to_string());
            config.period_column = has(PERIOD_COLUMN).then(|| PERIOD_COLUMN.to_string());
            (config, bytes)
        }
        (None, None) => return Err(CliError::Usage("either --config or --input is required".into())),
    };
    if input_bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::Degenerate(format!("{} is empty", config.input.display())).into());
    }
    let schema = config.schema()?;
    let (records, stats) = read_records(input_bytes.as_slice(), &config, &schema)?;
    if let Some(path) = &data.stats {
        let text = serde_json::to_string_pretty(&stats).map_err(Error::from)?;
        write_output(Some(path), &text)?;
    }
    if records.is_empty() {
        return Err(Error::Degenerate(format!(
            "no usable records in {} ({} rows read)",
            config.input.display(),
            stats.rows_read
        ))
        .into());
    }
    Ok(Loaded {
        config,
        schema,
        records,
        stats,
        input_bytes,
    })
}

fn effective(data: &DataArgs, loaded: &Loaded, default_mode: MaxEntropyMode) -> Result<Effective, CliError> {
    let dims = match &data.dims {
        Some(names) => SubsetMask::new(&loaded.schema, names)?,
        None => SubsetMask::all(&loaded.schema),
    };
    let epsilon = data.epsilon.or(loaded.config.epsilon).unwrap_or(DEFAULT_EPSILON);
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CliError::Usage(format!("epsilon must be finite and non-negative, got {epsilon}")));
    }
    Ok(Effective {
        dims,
        unit: data.unit.map(Into::into).unwrap_or(loaded.config.unit),
        max_mode: data.max_mode.map(Into::into).or(loaded.config.max_mode).unwrap_or(default_mode),
        epsilon,
    })
}

fn manifest(command: &str, loaded: &Loaded, eff: &Effective, group: Option<&str>) -> Result<RunManifest, CliError> {
    let dims = eff.dims.names().to_vec();
    let config = EffectiveConfig {
        command,
        ingest: &loaded.config,
        dims: &dims,
        group,
        unit: eff.unit,
        max_mode: eff.max_mode,
        epsilon: eff.epsilon,
    };
    let bytes = serde_json::to_vec(&config).map_err(Error::from)?;
    Ok(RunManifest::new(&bytes, &loaded.input_bytes))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e).into()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e).into())
        }
    }
}

/// Report fields at top level, followed by ingest statistics and the manifest.
fn with_provenance(mut body: Value, stats: &IngestStats, manifest: &RunManifest) -> Result<String, CliError> {
    if let Value::Object(map) = &mut body {
        map.insert("ingest".into(), serde_json::to_value(stats).map_err(Error::from)?);
        map.insert("manifest".into(), serde_json::to_value(manifest).map_err(Error::from)?);
    }
    let mut text = serde_json::to_string_pretty(&body).map_err(Error::from)?;
    text.push('\n');
    Ok(text)
}

fn unsupported(command: &str, format: Format) -> CliError {
    CliError::Usage(format!("{command} does not support --format {format:?}").to_lowercase())
}

pub fn compute(args: &ComputeArgs) -> Result<(), CliError> {
    if args.format == Format::Svg {
        return Err(unsupported("compute", args.format));
    }
    let loaded = load(&args.data)?;
    let eff = effective(&args.data, &loaded, MaxEntropyMode::Observed)?;
    let table = build_table(&loaded.records, &loaded.schema)?;
    let options = MeasureOptions {
        max_mode: eff.max_mode,
        epsilon: eff.epsilon,
        unit: eff.unit,
        smoothing: loaded.config.smoothing,
    };
    let report = InfoReport::compute(&table, &eff.dims, &options)?;
    let text = match args.format {
        Format::Json => {
            let manifest = manifest("compute", &loaded, &eff, None)?;
            let body = serde_json::to_value(&report).map_err(Error::from)?;
            with_provenance(body, &loaded.stats, &manifest)?
        }
        Format::Text => render::report_text(&report),
        Format::Csv => render::report_csv(&report),
        Format::Svg => unreachable!(),
    };
    write_output(args.data.out.as_ref(), &text)
}

pub fn decompose_cmd(args: &DecomposeArgs) -> Result<(), CliError> {
    if args.format == Format::Svg {
        return Err(unsupported("decompose", args.format));
    }
    let loaded = load(&args.data)?;
    let eff = effective(&args.data, &loaded, MaxEntropyMode::Observed)?;
    let spec = match &args.data.dims {
        Some(_) => GroupingSpec::new(&loaded.schema, &args.group, eff.dims.clone())?,
        None => GroupingSpec::over_rest(&loaded.schema, &args.group)?,
    };
    let mut options = DecompositionOptions {
        epsilon: eff.epsilon,
        unit: eff.unit,
        ..DecompositionOptions::default()
    };
    if let Some(m) = loaded.config.min_group_mass {
        options.min_group_mass = m;
    }
    let result = decompose(&loaded.records, &loaded.schema, &spec, &options)?;
    let csv = render::decomposition_csv(&result);
    if let Some(path) = &args.groups_csv {
        write_output(Some(path), &csv)?;
    }
    let text = match args.format {
        Format::Json => {
            let eff = Effective {
                dims: spec.measure_dims.clone(),
                ..eff
            };
            let manifest = manifest("decompose", &loaded, &eff, Some(&args.group))?;
            with_provenance(render::decomposition_json(&result), &loaded.stats, &manifest)?
        }
        Format::Csv => csv,
        Format::Text => render::decomposition_text(&result),
        Format::Svg => unreachable!(),
    };
    write_output(args.data.out.as_ref(), &text)
}

pub fn panel(args: &PanelArgs) -> Result<(), CliError> {
    let loaded = load(&args.data)?;
    if loaded.config.period_column.is_none() {
        return Err(CliError::Usage("panel needs a period column".into()));
    }
    let eff = effective(&args.data, &loaded, MaxEntropyMode::Cumulative)?;
    let points = panel_series(&loaded.records, &loaded.schema, &eff.dims, eff.max_mode)?;
    if let Some(path) = &args.svg {
        write_output(Some(path), &render::panel_svg(&points))?;
    }
    let text = match args.format {
        Format::Csv => render::panel_csv(&points, eff.unit),
        Format::Text => render::panel_text(&points, eff.unit),
        Format::Svg => render::panel_svg(&points),
        Format::Json => {
            let manifest = manifest("panel", &loaded, &eff, None)?;
            let body = json!({
                "unit": eff.unit,
                "dims": eff.dims.names(),
                "max_mode": eff.max_mode,
                "points": render::panel_json(&points, eff.unit),
            });
            with_provenance(body, &loaded.stats, &manifest)?
        }
    };
    write_output(args.data.out.as_ref(), &text)
}

fn spec_from_flags(args: &SynthArgs) -> Result<GeneratorSpec, CliError> {
    let kind = args
        .kind
        .ok_or_else(|| CliError::Usage("--kind or --spec is required".into()))?;
    let cardinalities = || {
        args.cardinalities
            .clone()
            .ok_or_else(|| CliError::Usage("--cardinalities is required for this kind".into()))
    };
    let kind = match kind {
        Kind::Independent => GeneratorKind::Independent {
            cardinalities: cardinalities()?,
        },
        Kind::Copy => GeneratorKind::Copy { n_dims: args.n_dims },
        Kind::Parity => GeneratorKind::Parity,
        Kind::Coupled => GeneratorKind::Coupled {
            lambda: args
                .lambda
                .ok_or_else(|| CliError::Usage("--lambda is required for coupled".into()))?,
        },
        Kind::RandomJoint => GeneratorKind::RandomJoint {
            cardinalities: cardinalities()?,
            concentration: args.concentration.unwrap_or(1.0),
            pmf_seed: args.pmf_seed.unwrap_or(0),
        },
    };
    let mode = if args.balanced {
        SamplingMode::BalancedExact
    } else {
        SamplingMode::Sampled {
            seed: args.seed.unwrap_or(0),
        }
    };
    Ok(GeneratorSpec::new(kind, args.n, mode).with_periods(args.periods))
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => {
            let bytes = read_file(path)?;
            serde_json::from_slice::<GeneratorSpec>(&bytes).map_err(Error::from)?
        }
        None => spec_from_flags(args)?,
    };
    spec.validate()?;
    let schema = spec.schema()?;
    let records = generate(&spec)?;
    let mut buf = Vec::new();
    write_records(&mut buf, &schema, &records)?;
    let text = String::from_utf8(buf).map_err(|e| CliError::Usage(e.to_string()))?;
    write_output(args.out.as_ref(), &text)
}
