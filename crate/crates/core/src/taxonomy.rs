//! The four-level label space: city, state/province, country, continent.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIERARCHY_NAMES: [&str; 4] = ["city", "state", "country", "continent"];

/// One of the four nesting levels, finest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hierarchy {
    City = 0,
    State = 1,
    Country = 2,
    Continent = 3,
}

impl Hierarchy {
    pub const ALL: [Hierarchy; 4] = [
        Hierarchy::City,
        Hierarchy::State,
        Hierarchy::Country,
        Hierarchy::Continent,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        HIERARCHY_NAMES[self.index()]
    }
}

impl fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A taxonomy-consistent (city, state, country, continent) id tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelPath {
    pub city: usize,
    pub state: usize,
    pub country: usize,
    pub continent: usize,
}

impl LabelPath {
    pub fn get(&self, h: Hierarchy) -> usize {
        match h {
            Hierarchy::City => self.city,
            Hierarchy::State => self.state,
            Hierarchy::Country => self.country,
            Hierarchy::Continent => self.continent,
        }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.city, self.state, self.country, self.continent]
    }
}

/// Class name lists per hierarchy plus parent maps. Ids are dense,
/// assigned in first-appearance order; every class has exactly one
/// parent in the next-coarser hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub cities: Vec<String>,
    pub states: Vec<String>,
    pub countries: Vec<String>,
    pub continents: Vec<String>,
    pub city_to_state: Vec<usize>,
    pub state_to_country: Vec<usize>,
    pub country_to_continent: Vec<usize>,
}

/// One (city, state, country, continent) name tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRecord {
    pub city: String,
    pub state: String,
    pub country: String,
    pub continent: String,
}

/// Build the label space from name tuples.
///
/// Ids are assigned in first-appearance order; a class naming two
/// different parents is an inconsistency.
pub fn build_taxonomy(records: &[ClassRecord]) -> Result<Taxonomy> {
    if records.is_empty() {
        return Err(Error::EmptyInput("taxonomy class definitions"));
    }
    let mut cities: Vec<String> = Vec::new();
    let mut states: Vec<String> = Vec::new();
    let mut countries: Vec<String> = Vec::new();
    let mut continents: Vec<String> = Vec::new();
    let mut city_ids: HashMap<String, usize> = HashMap::new();
    let mut state_ids: HashMap<String, usize> = HashMap::new();
    let mut country_ids: HashMap<String, usize> = HashMap::new();
    let mut continent_ids: HashMap<String, usize> = HashMap::new();
    let mut city_to_state: Vec<usize> = Vec::new();
    let mut state_to_country: Vec<usize> = Vec::new();
    let mut country_to_continent: Vec<usize> = Vec::new();

    let intern = |names: &mut Vec<String>, ids: &mut HashMap<String, usize>, name: &str| {
        if let Some(&id) = ids.get(name) {
            (id, false)
        } else {
            let id = names.len();
            names.push(name.to_string());
            ids.insert(name.to_string(), id);
            (id, true)
        }
    };

    for r in records {
        for (field, value) in [
            ("city", &r.city),
            ("state", &r.state),
            ("country", &r.country),
            ("continent", &r.continent),
        ] {
            if value.is_empty() {
                return Err(Error::Inconsistency(format!("empty {field} name")));
            }
        }
        let (continent_id, _) = intern(&mut continents, &mut continent_ids, &r.continent);
        let (country_id, new_country) = intern(&mut countries, &mut country_ids, &r.country);
        if new_country {
            country_to_continent.push(continent_id);
        } else if country_to_continent[country_id] != continent_id {
            return Err(Error::Inconsistency(format!(
                "country '{}' appears under continents '{}' and '{}'",
                r.country, continents[country_to_continent[country_id]], r.continent
            )));
        }
        let (state_id, new_state) = intern(&mut states, &mut state_ids, &r.state);
        if new_state {
            state_to_country.push(country_id);
        } else if state_to_country[state_id] != country_id {
            return Err(Error::Inconsistency(format!(
                "state '{}' appears under countries '{}' and '{}'",
                r.state, countries[state_to_country[state_id]], r.country
            )));
        }
        let (city_id, new_city) = intern(&mut cities, &mut city_ids, &r.city);
        if new_city {
            city_to_state.push(state_id);
        } else if city_to_state[city_id] != state_id {
            return Err(Error::Inconsistency(format!(
                "city '{}' appears under states '{}' and '{}'",
                r.city, states[city_to_state[city_id]], r.state
            )));
        }
    }

    Ok(Taxonomy {
        cities,
        states,
        countries,
        continents,
        city_to_state,
        state_to_country,
        country_to_continent,
    })
}

impl Taxonomy {
    /// Class counts (d1, d2, d3, d4), finest first.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.cities.len(),
            self.states.len(),
            self.countries.len(),
            self.continents.len(),
        ]
    }

    pub fn dim(&self, h: Hierarchy) -> usize {
        self.dims()[h.index()]
    }

    /// Total logit width d = d1 + d2 + d3 + d4.
    pub fn total_dim(&self) -> usize {
        self.dims().iter().sum()
    }

    /// The unique ancestor chain of a city.
    pub fn ancestors_of(&self, city_id: usize) -> Result<LabelPath> {
        if city_id >= self.cities.len() {
            return Err(Error::Index {
                what: "city",
                index: city_id,
                size: self.cities.len(),
            });
        }
        let state = self.city_to_state[city_id];
        let country = self.state_to_country[state];
        let continent = self.country_to_continent[country];
        Ok(LabelPath {
            city: city_id,
            state,
            country,
            continent,
        })
    }

    /// Check that the four ids form a valid ancestor chain.
    pub fn is_valid_path(&self, path: &LabelPath) -> bool {
        path.city < self.cities.len()
            && self.city_to_state[path.city] == path.state
            && self.state_to_country[path.state] == path.country
            && self.country_to_continent[path.country] == path.continent
    }

    pub fn path_for_names(
        &self,
        city: &str,
        state: &str,
        country: &str,
        continent: &str,
    ) -> Result<LabelPath> {
        let find = |names: &[String], name: &str, what: &'static str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Inconsistency(format!("unknown {what} '{name}'")))
        };
        let path = LabelPath {
            city: find(&self.cities, city, "city")?,
            state: find(&self.states, state, "state")?,
            country: find(&self.countries, country, "country")?,
            continent: find(&self.continents, continent, "continent")?,
        };
        if !self.is_valid_path(&path) {
            return Err(Error::Inconsistency(format!(
                "labels ({city}, {state}, {country}, {continent}) do not form an ancestor chain"
            )));
        }
        Ok(path)
    }

    pub fn class_names(&self, h: Hierarchy) -> &[String] {
        match h {
            Hierarchy::City => &self.cities,
            Hierarchy::State => &self.states,
            Hierarchy::Country => &self.countries,
            Hierarchy::Continent => &self.continents,
        }
    }

    /// Validate parent-map totality and the absence of orphan coarse
    /// classes (every coarse class must be some child's ancestor).
    pub fn validate(&self) -> Result<()> {
        let check_map = |map: &[usize], n_children: usize, n_parents: usize, what: &str| -> Result<()> {
            if map.len() != n_children {
                return Err(Error::Inconsistency(format!(
                    "{what} map covers {} of {} classes",
                    map.len(),
                    n_children
                )));
            }
            if let Some(&bad) = map.iter().find(|&&p| p >= n_parents) {
                return Err(Error::Inconsistency(format!(
                    "{what} map points at missing parent {bad}"
                )));
            }
            for parent in 0..n_parents {
                if !map.contains(&parent) {
                    return Err(Error::Inconsistency(format!(
                        "{what}: parent {parent} has no children"
                    )));
                }
            }
            Ok(())
        };
        check_map(&self.city_to_state, self.cities.len(), self.states.len(), "city->state")?;
        check_map(
            &self.state_to_country,
            self.states.len(),
            self.countries.len(),
            "state->country",
        )?;
        check_map(
            &self.country_to_continent,
            self.countries.len(),
            self.continents.len(),
            "country->continent",
        )?;
        Ok(())
    }
}

/// Parse the class-definition format: one record per line, four
/// tab-separated fields city→state→country→continent, '#' comments.
pub fn parse_class_definitions(text: &str) -> Result<Vec<ClassRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Inconsistency(format!(
                "line {}: expected 4 tab-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        records.push(ClassRecord {
            city: fields[0].trim().to_string(),
            state: fields[1].trim().to_string(),
            country: fields[2].trim().to_string(),
            continent: fields[3].trim().to_string(),
        });
    }
    Ok(records)
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    let text = std::fs::read_to_string(path)?;
    let records = parse_class_definitions(&text)?;
    let taxonomy = build_taxonomy(&records)?;
    taxonomy.validate()?;
    Ok(taxonomy)
}
