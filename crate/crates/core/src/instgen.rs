//! Seeded benchmark instance generation and the JSON instance/solution files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, InstanceMeta, Level, ModelError, Solution, SupplyNetwork};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    Balanced,
    Unbalanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageSite {
    Warehouses,
    Retailers,
    None,
}

/// Parameters of one generated instance. `None` factors mean unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub num_retailers: usize,
    pub num_warehouses: usize,
    pub horizon: usize,
    pub balance: Balance,
    pub plant_capacity_factor: Option<f64>,
    pub storage_capacity_factor: Option<f64>,
    pub storage_capacity_site: StorageSite,
    pub seed: u64,
}

impl GenSpec {
    /// Uncapacitated balanced spec; adjust fields as needed.
    pub fn new(num_retailers: usize, num_warehouses: usize, horizon: usize, seed: u64) -> Self {
        GenSpec {
            num_retailers,
            num_warehouses,
            horizon,
            balance: Balance::Balanced,
            plant_capacity_factor: None,
            storage_capacity_factor: None,
            storage_capacity_site: StorageSite::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_warehouses == 0 || self.num_retailers < self.num_warehouses {
            return Err(GenError::Spec(format!(
                "need 1 ≤ warehouses ≤ retailers, got {} warehouses and {} retailers",
                self.num_warehouses, self.num_retailers
            )));
        }
        if self.horizon == 0 {
            return Err(GenError::Spec("horizon must be at least 1".into()));
        }
        match (self.storage_capacity_factor, self.storage_capacity_site) {
            (Some(_), StorageSite::None) => {
                return Err(GenError::Spec("storage capacity factor given without a site".into()))
            }
            (None, StorageSite::Warehouses | StorageSite::Retailers) => {
                return Err(GenError::Spec("storage capacity site given without a factor".into()))
            }
            _ => {}
        }
        for factor in [self.plant_capacity_factor, self.storage_capacity_factor]
            .into_iter()
            .flatten()
        {
            if !(factor.is_finite() && factor > 0.0) {
                return Err(GenError::Spec(format!("capacity factor {factor} must be positive")));
            }
        }
        Ok(())
    }

    /// Stable identifier encoding every field.
    pub fn id(&self) -> String {
        let factor = |f: Option<f64>| f.map_or("inf".to_string(), |v| format!("{v:.2}"));
        let site = match self.storage_capacity_site {
            StorageSite::Warehouses => "w",
            StorageSite::Retailers => "r",
            StorageSite::None => "n",
        };
        let balance = match self.balance {
            Balance::Balanced => "b",
            Balance::Unbalanced => "u",
        };
        format!(
            "R{}-W{}-T{}-{}-C{}-S{}{}-s{}",
            self.num_retailers,
            self.num_warehouses,
            self.horizon,
            balance,
            factor(self.plant_capacity_factor),
            site,
            factor(self.storage_capacity_factor),
            self.seed
        )
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("inconsistent generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format_version {found:?} (expected {FORMAT_VERSION:?})")]
    Version { found: String },
    #[error("invalid field {field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Independent random stream per field group, so adding draws to one group
/// never shifts another.
fn stream(seed: u64, group: u64) -> SplitMix64 {
    let mut mixer = SplitMix64::seed_from_u64(seed ^ group.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    SplitMix64::seed_from_u64(mixer.next_u64())
}

const DEMANDS: u64 = 1;
const SETUP_COSTS: u64 = 2;
const HOLDING_COSTS: u64 = 3;

fn uniform_int(rng: &mut SplitMix64, lo: u64, hi: u64) -> u64 {
    lo + rng.next_u64() % (hi - lo + 1)
}

/// Uniform on [lo, hi], rounded to cents.
fn uniform_real(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    ((lo + (hi - lo) * unit) * 100.0).round() / 100.0
}

/// Retailer → warehouse assignment.
///
/// Balanced: retailer r goes to warehouse r mod |W|. Unbalanced: warehouse j
/// takes a contiguous block of ⌊|R|/2^{j+1}⌋ retailers (at least one, and
/// leaving one for each later warehouse); the last warehouse takes the rest.
pub fn assign_retailers(spec: &GenSpec) -> Result<SupplyNetwork, GenError> {
    spec.validate()?;
    let (r, w) = (spec.num_retailers, spec.num_warehouses);
    let assignment = match spec.balance {
        Balance::Balanced => (0..r).map(|k| k % w).collect(),
        Balance::Unbalanced => {
            let mut assignment = Vec::with_capacity(r);
            for j in 0..w {
                let left = r - assignment.len();
                let share = if j + 1 == w {
                    left
                } else {
                    (r >> (j + 1)).max(1).min(left - (w - j - 1))
                };
                assignment.extend(std::iter::repeat_n(j, share));
            }
            assignment
        }
    };
    Ok(SupplyNetwork::new(w, assignment)?)
}

/// Time-invariant storage capacities Ĉ^i = (C_s/|T|)·Σ_t d^i_t on one site;
/// the other site stays unbounded.
pub fn derive_storage_caps(
    instance: &Instance,
    factor: Option<f64>,
    site: StorageSite,
) -> Result<Instance, ModelError> {
    let Some(factor) = factor else {
        return Ok(instance.clone());
    };
    let wanted = match site {
        StorageSite::Warehouses => Level::Warehouse,
        StorageSite::Retailers => Level::Retailer,
        StorageSite::None => return Ok(instance.clone()),
    };
    let horizon = instance.horizon();
    let network = instance.network();
    let caps = (0..instance.num_facilities())
        .map(|i| {
            if network.level(i) == wanted {
                let total: f64 = instance.aggregate_demands()[i].iter().sum();
                vec![Some(factor / horizon as f64 * total); horizon]
            } else {
                vec![None; horizon]
            }
        })
        .collect();
    instance.with_storage_capacity(caps)
}

/// Generates an instance; a pure function of the spec.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    let network = assign_retailers(spec)?;
    let horizon = spec.horizon;

    let mut rng = stream(spec.seed, DEMANDS);
    let demand: Vec<Vec<u64>> = (0..spec.num_retailers)
        .map(|_| (0..horizon).map(|_| uniform_int(&mut rng, 5, 100)).collect())
        .collect();

    let mut rng = stream(spec.seed, SETUP_COSTS);
    let setup_cost: Vec<Vec<f64>> = (0..network.num_facilities())
        .map(|i| {
            let value = match network.level(i) {
                Level::Plant => uniform_real(&mut rng, 30000.0, 45000.0),
                Level::Warehouse => uniform_real(&mut rng, 1500.0, 4500.0),
                Level::Retailer => uniform_real(&mut rng, 5.0, 100.0),
            };
            vec![value; horizon]
        })
        .collect();

    let mut rng = stream(spec.seed, HOLDING_COSTS);
    let holding_cost: Vec<Vec<f64>> = (0..network.num_facilities())
        .map(|i| {
            let value = match network.level(i) {
                Level::Plant => 0.25,
                Level::Warehouse => 0.5,
                Level::Retailer => uniform_real(&mut rng, 0.5, 1.0),
            };
            vec![value; horizon]
        })
        .collect();

    let total: u64 = demand.iter().flatten().sum();
    let plant_capacity = vec![
        spec.plant_capacity_factor
            .map(|c| c / horizon as f64 * total as f64);
        horizon
    ];
    let meta = InstanceMeta {
        id: spec.id(),
        seed: Some(spec.seed),
        balance: Some(
            match spec.balance {
                Balance::Balanced => "balanced",
                Balance::Unbalanced => "unbalanced-halving",
            }
            .to_string(),
        ),
        generator: Some(serde_json::to_value(spec).expect("spec serializes")),
    };
    let num_facilities = network.num_facilities();
    let base = Instance::new(
        network,
        demand,
        setup_cost,
        holding_cost,
        plant_capacity,
        vec![vec![None; horizon]; num_facilities],
        meta,
    )?;
    Ok(derive_storage_caps(
        &base,
        spec.storage_capacity_factor,
        spec.storage_capacity_site,
    )?)
}

/// A scalar for time-invariant data, an array otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Series {
    Scalar(f64),
    PerPeriod(Vec<f64>),
}

impl Series {
    fn compress(values: &[f64]) -> Self {
        match values.first() {
            Some(&v) if values.iter().all(|&u| u.to_bits() == v.to_bits()) => Series::Scalar(v),
            _ => Series::PerPeriod(values.to_vec()),
        }
    }

    fn expand(&self, horizon: usize, field: &str) -> Result<Vec<f64>, FileError> {
        match self {
            Series::Scalar(v) => Ok(vec![*v; horizon]),
            Series::PerPeriod(vs) if vs.len() == horizon => Ok(vs.clone()),
            Series::PerPeriod(vs) => Err(FileError::Field {
                field: field.to_string(),
                message: format!("expected {horizon} values, found {}", vs.len()),
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WarehouseEntry {
    id: String,
    retailers: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: String,
    #[serde(default)]
    meta: InstanceMeta,
    horizon: usize,
    warehouses: Vec<WarehouseEntry>,
    demands: BTreeMap<String, Vec<u64>>,
    setup_cost: BTreeMap<String, Series>,
    holding_cost: BTreeMap<String, Series>,
    plant_capacity: Option<Series>,
    #[serde(default)]
    storage_capacity: BTreeMap<String, Series>,
}

fn facility_name(network: &SupplyNetwork, facility: usize) -> String {
    match network.level(facility) {
        Level::Plant => "p".to_string(),
        Level::Warehouse => format!("w{}", facility - 1),
        Level::Retailer => format!("r{}", facility - 1 - network.num_warehouses()),
    }
}

fn parse_index(name: &str, prefix: char, count: usize, field: &str) -> Result<usize, FileError> {
    name.strip_prefix(prefix)
        .and_then(|rest| rest.parse::<usize>().ok())
        .filter(|&k| k < count)
        .ok_or_else(|| FileError::Field {
            field: field.to_string(),
            message: format!("unknown facility id {name:?}"),
        })
}

fn facility_index(network: &SupplyNetwork, name: &str, field: &str) -> Result<usize, FileError> {
    match name.chars().next() {
        Some('p') if name == "p" => Ok(0),
        Some('w') => Ok(1 + parse_index(name, 'w', network.num_warehouses(), field)?),
        Some('r') => Ok(network.retailer_facility(parse_index(
            name,
            'r',
            network.num_retailers(),
            field,
        )?)),
        _ => Err(FileError::Field {
            field: field.to_string(),
            message: format!("unknown facility id {name:?}"),
        }),
    }
}

/// Serializes an instance to the JSON document format.
pub fn instance_to_json(instance: &Instance) -> String {
    let network = instance.network();
    let warehouses = (0..network.num_warehouses())
        .map(|w| WarehouseEntry {
            id: format!("w{w}"),
            retailers: network.retailers_of(w).map(|r| format!("r{r}")).collect(),
        })
        .collect();
    let demands = instance
        .demand()
        .iter()
        .enumerate()
        .map(|(r, row)| (format!("r{r}"), row.clone()))
        .collect();
    let per_facility = |m: &[Vec<f64>]| {
        m.iter()
            .enumerate()
            .map(|(i, row)| (facility_name(network, i), Series::compress(row)))
            .collect::<BTreeMap<_, _>>()
    };
    let plant_capacity = if instance.plant_capacities().iter().all(Option::is_none) {
        None
    } else {
        let values: Vec<f64> = instance
            .plant_capacities()
            .iter()
            .map(|c| c.unwrap_or(f64::INFINITY))
            .collect();
        Some(Series::compress(&values))
    };
    let storage_capacity = instance
        .storage_capacities()
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(Option::is_some))
        .map(|(i, row)| {
            let values: Vec<f64> = row.iter().map(|c| c.unwrap_or(f64::INFINITY)).collect();
            (facility_name(network, i), Series::compress(&values))
        })
        .collect();
    let file = InstanceFile {
        format_version: FORMAT_VERSION.to_string(),
        meta: instance.meta.clone(),
        horizon: instance.horizon(),
        warehouses,
        demands,
        setup_cost: per_facility(instance.setup_costs()),
        holding_cost: per_facility(instance.holding_costs()),
        plant_capacity,
        storage_capacity,
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Parses and validates an instance document.
pub fn instance_from_json(text: &str) -> Result<Instance, FileError> {
    let version: serde_json::Value = serde_json::from_str(text)?;
    match version.get("format_version").and_then(|v| v.as_str()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => {
            return Err(FileError::Version {
                found: other.to_string(),
            })
        }
        None => {
            return Err(FileError::Field {
                field: "format_version".into(),
                message: "missing".into(),
            })
        }
    }
    let file: InstanceFile = serde_json::from_str(text)?;
    let horizon = file.horizon;
    let num_warehouses = file.warehouses.len();
    let num_retailers = file.demands.len();

    let mut assignment: Vec<Option<usize>> = vec![None; num_retailers];
    for (w, entry) in file.warehouses.iter().enumerate() {
        if entry.id != format!("w{w}") {
            return Err(FileError::Field {
                field: "warehouses".into(),
                message: format!("warehouse #{w} has id {:?}, expected \"w{w}\"", entry.id),
            });
        }
        for name in &entry.retailers {
            let r = parse_index(name, 'r', num_retailers, "warehouses")?;
            if assignment[r].replace(w).is_some() {
                return Err(FileError::Field {
                    field: "warehouses".into(),
                    message: format!("retailer {name} assigned to more than one warehouse"),
                });
            }
        }
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(r, w)| {
            w.ok_or_else(|| FileError::Field {
                field: "warehouses".into(),
                message: format!("retailer r{r} is not assigned to any existing warehouse"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let network = SupplyNetwork::new(num_warehouses, assignment)?;

    let mut demand = vec![Vec::new(); num_retailers];
    for (name, row) in file.demands {
        let r = parse_index(&name, 'r', num_retailers, "demands")?;
        if row.len() != horizon {
            return Err(FileError::Field {
                field: format!("demands.{name}"),
                message: format!("expected {horizon} values, found {}", row.len()),
            });
        }
        demand[r] = row;
    }

    let n = network.num_facilities();
    let read_matrix = |map: &BTreeMap<String, Series>, field: &str| -> Result<Vec<Vec<f64>>, FileError> {
        let mut m: Vec<Option<Vec<f64>>> = vec![None; n];
        for (name, series) in map {
            let i = facility_index(&network, name, field)?;
            m[i] = Some(series.expand(horizon, &format!("{field}.{name}"))?);
        }
        m.into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.ok_or_else(|| FileError::Field {
                    field: field.to_string(),
                    message: format!("missing facility {}", facility_name(&network, i)),
                })
            })
            .collect()
    };
    let setup_cost = read_matrix(&file.setup_cost, "setup_cost")?;
    let holding_cost = read_matrix(&file.holding_cost, "holding_cost")?;
    let plant_capacity = match &file.plant_capacity {
        None => vec![None; horizon],
        Some(series) => series
            .expand(horizon, "plant_capacity")?
            .into_iter()
            .map(finite_or_none)
            .collect(),
    };
    let mut storage_capacity = vec![vec![None; horizon]; n];
    for (name, series) in &file.storage_capacity {
        let i = facility_index(&network, name, "storage_capacity")?;
        storage_capacity[i] = series
            .expand(horizon, &format!("storage_capacity.{name}"))?
            .into_iter()
            .map(finite_or_none)
            .collect();
    }
    Ok(Instance::new(
        network,
        demand,
        setup_cost,
        holding_cost,
        plant_capacity,
        storage_capacity,
        file.meta,
    )?)
}

pub fn write_instance(instance: &Instance, path: &Path) -> Result<(), FileError> {
    fs::write(path, instance_to_json(instance)).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_instance(path: &Path) -> Result<Instance, FileError> {
    let text = fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    instance_from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    objective: f64,
    y: BTreeMap<String, Vec<f64>>,
    x: BTreeMap<String, Vec<f64>>,
    s: BTreeMap<String, Vec<f64>>,
}

pub fn solution_to_json(instance: &Instance, solution: &Solution) -> String {
    let network = instance.network();
    let named = |m: &[Vec<f64>]| {
        m.iter()
            .enumerate()
            .map(|(i, row)| (facility_name(network, i), row.clone()))
            .collect()
    };
    let file = SolutionFile {
        objective: solution.objective,
        y: named(&solution.y),
        x: named(&solution.x),
        s: named(&solution.s),
    };
    serde_json::to_string_pretty(&file).expect("solution serializes")
}

/// Parses a solution document; the objective is re-evaluated on the instance.
pub fn solution_from_json(instance: &Instance, text: &str) -> Result<Solution, FileError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    let network = instance.network();
    let n = instance.num_facilities();
    let unpack = |map: BTreeMap<String, Vec<f64>>, field: &str| -> Result<Vec<Vec<f64>>, FileError> {
        let mut m = vec![vec![0.0; instance.horizon()]; n];
        for (name, row) in map {
            let i = facility_index(network, &name, field)?;
            if row.len() != instance.horizon() {
                return Err(FileError::Field {
                    field: format!("{field}.{name}"),
                    message: format!("expected {} values", instance.horizon()),
                });
            }
            m[i] = row;
        }
        Ok(m)
    };
    let y = unpack(file.y, "y")?;
    let x = unpack(file.x, "x")?;
    let s = unpack(file.s, "s")?;
    Ok(Solution::new(instance, y, x, s)?)
}
